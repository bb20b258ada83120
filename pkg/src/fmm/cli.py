"""Command-line interface.

Subcommands: generate, fit, peaks, plot.

Exit codes: 0 success, 2 configuration / usage error, 3 data or format
error, 4 fit failure. Diagnostics go to stderr as a single line.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import TWO_PI, peak_report
from .errors import ConfigError, FitFailedError, FMMError, FormatError
from .fit import STOP_RULE, FitConfig, fit_fmm
from .io import fmt, read_csv, read_result, write_result, write_series_csv
from .simulate import GenSpec, generate

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_FIT = 0, 2, 3, 4

EPILOG = "exit codes: 0 ok, 2 configuration error, 3 data/format error, 4 fit failure"


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _labels(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _stop(text: str) -> float | None:
    if text == "maxiter":
        return None
    if text.startswith("r2:"):
        try:
            value = float(text[3:])
        except ValueError:
            value = -1.0
        if value > 0:
            return value
    raise argparse.ArgumentTypeError(f"--stop must be 'maxiter' or 'r2:<difMax>', got {text!r}")


def _emit(data: bytes | str, out: str | None):
    if isinstance(data, str):
        data = data.encode("utf-8")
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)


def _add_series_options(p: argparse.ArgumentParser):
    p.add_argument("--n-periods", type=int, default=1,
                   help="number of periods in the input; values are averaged per time point")
    p.add_argument("--time-column", action=argparse.BooleanOptionalAction, default=None,
                   help="whether the CSV has a 'time' column (default: detect from header)")
    p.add_argument("--period", type=float, default=None, dest="period_T",
                   help="period length T of the time column, rescaled to radians")
    p.add_argument("--t0", type=float, default=0.0, help="time origin for --period")


def _read_series(args):
    return read_csv(args.input, has_time_column=args.time_column, n_periods=args.n_periods,
                    period_T=args.period_T, t0=args.t0)


# ---------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    explicit_grid = any(v is not None for v in (args.from_, args.to, args.length_out))
    if args.time_points is not None and explicit_grid:
        raise ConfigError("--time-points cannot be combined with --from/--to/--length-out")
    spec = GenSpec(
        M=args.m, A=args.a, alpha=args.alpha, beta=args.beta, omega=args.omega,
        from_=0.0 if args.from_ is None else args.from_,
        to=TWO_PI if args.to is None else args.to,
        length_out=100 if args.length_out is None else args.length_out,
        time_points=args.time_points, sigma_noise=args.sigma_noise, seed=args.seed)
    sim = generate(spec)
    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(sim.t, sim.y, "o", ms=3, color="0.3")
        ax.set_xlabel("time (radians)")
        ax.set_title("Simulated FMM data")
        fig.tight_layout()
        fig.savefig(args.plot)
        plt.close(fig)
    if args.outvalues:
        _emit(write_series_csv(sim.t, sim.y), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- fit

def _summary(res) -> str:
    lines = [f"FMM model with {res.model.m} components", f"M (Intercept): {res.model.M:.4f}",
             f"{'':12}{'A':>9}{'alpha':>9}{'beta':>9}{'omega':>9}"]
    for j, w in enumerate(res.model.waves, 1):
        lines.append(f"FMM wave {j}:{w.A:9.4f}{w.alpha:9.4f}{w.beta:9.4f}{w.omega:9.4f}")
    lines.append("R-squared: " + " ".join(f"{r:.4f}" for r in res.r2_per_wave)
                 + f"  Total {res.r2_total:.4f}")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    series = _read_series(args)
    cfg = FitConfig(
        nback=args.nback,
        length_alpha_grid=args.alpha_grid,
        length_omega_grid=args.omega_grid,
        num_reps=args.num_reps,
        maxiter=args.maxiter,
        dif_max=args.stop,
        beta_blocks=args.beta_restrictions,
        omega_blocks=args.omega_restrictions,
        parallelize=args.parallel,
    )
    started = time.perf_counter()
    res = fit_fmm(series, cfg)
    elapsed = time.perf_counter() - started
    if not args.quiet:
        if cfg.nback > 1:
            if res.stop_reason == STOP_RULE:
                msg = f"Stopped by the stopFunction ( {res.n_iter} iterations )"
            else:
                msg = f"Stopped by reaching maximum iterations ( {res.n_iter} iterations )"
            print(msg, file=sys.stderr)
        print(_summary(res), file=sys.stderr)
    if args.show_time:
        print(f"Time elapsed: {elapsed:.3f} seconds", file=sys.stderr)
    _emit(write_result(res, "json"), args.out)
    if args.export_fitted:
        Path(args.export_fitted).write_bytes(write_result(res, "csv-fitted"))
    if args.export_components:
        Path(args.export_components).write_bytes(write_result(res, "csv-components"))
    if args.figure:
        from .plotting import save_figure

        save_figure(res, args.figure)
    return EXIT_OK


# ---------------------------------------------------------------- peaks

def cmd_peaks(args) -> int:
    res = read_result(args.input)
    report = peak_report(res.model, wrap_to_2pi=args.wrap_2pi)
    lines = ["wave,tU,ZU,tL,ZL"]
    for j, row in enumerate(report.rows(), 1):
        lines.append(f"FMM wave {j}," + ",".join(fmt(v) for v in row))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- plot

def cmd_plot(args) -> int:
    from .plotting import along_periods, render_svg, save_figure

    res = read_result(args.fit)
    t = y = None
    n_periods = 1
    if args.input is not None:
        series = _read_series(args)
        if len(series) != res.time_points.size:
            raise FormatError(f"{args.input}: {len(series)} time points but the fit has "
                              f"{res.time_points.size}")
        t, y = series.time_points, series.values
        if args.along_periods and series.raw_values is not None:
            t, y = along_periods(res, series.raw_values)
            n_periods = series.n_periods
    out = args.out
    if out is None or out == "-" or out.lower().endswith(".svg"):
        svg = render_svg(res, t, y, components=args.components, title=args.title,
                         n_periods=n_periods)
        _emit(svg, out)
    else:
        save_figure(res, out, t, y, components=args.components, title=args.title,
                    n_periods=n_periods)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmm", description="Fit and simulate FMM models.",
                                     epilog=EPILOG)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate data from an FMM model", epilog=EPILOG)
    g.add_argument("--m", type=float, required=True, help="intercept M")
    g.add_argument("--a", type=_floats, required=True, help="amplitudes, comma separated")
    g.add_argument("--alpha", type=_floats, required=True)
    g.add_argument("--beta", type=_floats, required=True)
    g.add_argument("--omega", type=_floats, required=True)
    g.add_argument("--from", type=float, default=None, dest="from_",
                   help="first time point (default 0)")
    g.add_argument("--to", type=float, default=None, help="last time point (default 2*pi)")
    g.add_argument("--length-out", type=int, default=None,
                   help="number of time points (default 100)")
    g.add_argument("--time-points", type=_floats, default=None,
                   help="explicit comma-separated time points")
    g.add_argument("--sigma-noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--plot", default=None, metavar="PATH",
                   help="also write a scatter plot of the simulated data")
    g.add_argument("--outvalues", action=argparse.BooleanOptionalAction, default=True,
                   help="emit the simulated CSV (default on)")
    g.add_argument("--out", default=None, help="output CSV (default stdout)")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit an FMM model to a CSV series", epilog=EPILOG)
    f.add_argument("--input", required=True, help="CSV with a 'value' column (and optional 'time')")
    _add_series_options(f)
    f.add_argument("--nback", type=int, default=1, help="number of waves")
    f.add_argument("--beta-restrictions", type=_labels, default=None,
                   help="comma-separated beta block labels (default 1..nback)")
    f.add_argument("--omega-restrictions", type=_labels, default=None,
                   help="comma-separated omega block labels (default 1..nback)")
    f.add_argument("--maxiter", type=int, default=None,
                   help="maximum backfitting passes (default nback)")
    f.add_argument("--stop", type=_stop, default=None, metavar="{maxiter,r2:DIFMAX}",
                   help="stop rule (default maxiter)")
    f.add_argument("--alpha-grid", type=int, default=48)
    f.add_argument("--omega-grid", type=int, default=24)
    f.add_argument("--num-reps", type=int, default=3)
    f.add_argument("--parallel", action="store_true")
    f.add_argument("--show-time", action="store_true", help="report elapsed fitting time")
    f.add_argument("--out", default=None, help="JSON result path (default stdout)")
    f.add_argument("--export-fitted", default=None, metavar="CSV")
    f.add_argument("--export-components", default=None, metavar="CSV")
    f.add_argument("--figure", default=None, metavar="PATH",
                   help="write fit and component panels with matplotlib")
    f.add_argument("--quiet", action="store_true", help="suppress console progress lines")
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("peaks", help="peak and trough table of a fit", epilog=EPILOG)
    p.add_argument("--in", dest="input", required=True, help="fit JSON")
    p.add_argument("--wrap-2pi", action=argparse.BooleanOptionalAction, default=True,
                   help="wrap times into [0, 2*pi) (default on)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_peaks)

    pl = sub.add_parser("plot", help="draw a fit (SVG, or PNG/PDF via matplotlib)",
                        epilog=EPILOG)
    pl.add_argument("--fit", required=True, help="fit JSON")
    pl.add_argument("--input", default=None, help="original CSV series")
    _add_series_options(pl)
    pl.add_argument("--components", action="store_true", help="plot centered waves")
    pl.add_argument("--along-periods", action="store_true",
                    help="show every observed period (ignored with --components)")
    pl.add_argument("--title", default="")
    pl.add_argument("--out", default=None, help="output path (default SVG on stdout)")
    pl.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fmm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print(f"fmm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitFailedError as exc:
        print(f"fmm: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except FMMError as exc:
        print(f"fmm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fmm: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
