"""Command-line front end: run experiments, classify spectra, verify, re-fit.

Exit codes: 0 ok, 1 run failure, 2 config error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass

from . import ensemble, stats, verify
from .config import build_experiment, merge_config, parse_config_file, preamble_for
from .ensemble import ExperimentConfig
from .errors import (
    ConfigError,
    FixedPointDiverged,
    InsufficientPoints,
    NonPositiveMoment,
    SignalTooWeak,
    StepFailure,
    TracerflowError,
)
from .presets import PRESETS, get_preset
from .spectrum import Diffusion, classify_diffusion, spec_from_tag, theoretical_exponent

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_VERIFY_FAILURE = 3


@dataclass
class RunManifest:
    config: ExperimentConfig
    output_path: str
    preset_name: str | None
    started: float
    finished: float
    digest: str


def _fmt(x):
    return f"{x:.17g}"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracerflow",
        description="Monte Carlo passive-tracer transport in random flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write a dispersion CSV")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--preset", help="named preset (see --list-presets)")
    run.add_argument("--list-presets", action="store_true",
                     help="list known presets and exit")
    run.add_argument("--scheme", choices=["sp", "em"])
    run.add_argument("--spectrum", help="spectrum tag e1..e7, powerlaw2d, powerlaw3d, none")
    run.add_argument("--alpha", type=float, help="power-law exponent in (0,1)")
    run.add_argument("--k0", type=float, help="reference wavenumber (default 1)")
    run.add_argument("--cutoff-l", type=float, help="power-law upper cutoff (default 1)")
    run.add_argument("--theta0", type=float, help="temporal decorrelation strength")
    run.add_argument("--d0", type=float, help="molecular diffusivity D0 = sigma^2/2")
    run.add_argument("--dt", type=float, help="time step")
    run.add_argument("--tmax", type=float, help="final time (multiple of dt)")
    run.add_argument("--particles", type=int, help="number of Monte Carlo particles")
    run.add_argument("--modes", type=int, help="number of Fourier modes (0 = pure Brownian)")
    run.add_argument("--seed", type=int, help="master seed (64-bit)")
    run.add_argument("--field-mode", choices=["per-particle", "shared"])
    run.add_argument("--track-stream", action="store_const", const=True, default=None,
                     help="record the mean stream function along trajectories (2D)")
    run.add_argument("--fp-tol", type=float, help="implicit solver residual tolerance")
    run.add_argument("--fp-max-iters", type=int, help="implicit solver iteration cap")
    run.add_argument("--dim", type=int, choices=[2, 3],
                     help="dimension for spectrum-free (modes=0) runs")
    run.add_argument("--out", help="output CSV path (multi-run presets use it as a stem)")
    run.add_argument("--workers", type=int, help="numba thread count")

    cls = sub.add_parser("classify", help="classify a spectrum as diffusive/anomalous")
    cls.add_argument("spectrum", help="spectrum tag e1..e7, powerlaw2d, powerlaw3d")
    cls.add_argument("--alpha", type=float)
    cls.add_argument("--k0", type=float, default=1.0)
    cls.add_argument("--cutoff-l", type=float)

    ver = sub.add_parser("verify", help="run the structure/fidelity verification suites")
    ver.add_argument("--dt", type=float, help="override advection step size (fault injection)")
    ver.add_argument("--fp-tol", type=float, default=1e-12)
    ver.add_argument("--fp-max-iters", type=int, default=100)
    ver.add_argument("--seed", type=int, default=1234)

    fit = sub.add_parser("fit", help="re-fit an existing dispersion CSV")
    fit.add_argument("csv", help="dispersion CSV written by `run`")
    fit.add_argument("--window-lo", type=float, help="fit window start (default t_max/10)")
    fit.add_argument("--window-hi", type=float, help="fit window end (default t_max)")
    return parser


def _flag_values(args) -> dict:
    mapping = {
        "scheme": args.scheme, "spectrum": args.spectrum, "alpha": args.alpha,
        "k0": args.k0, "cutoff-l": args.cutoff_l, "theta0": args.theta0,
        "d0": args.d0, "dt": args.dt, "tmax": args.tmax,
        "particles": args.particles, "modes": args.modes, "seed": args.seed,
        "field-mode": args.field_mode, "track-stream": args.track_stream,
        "fp-tol": args.fp_tol, "fp-max-iters": args.fp_max_iters,
        "dim": args.dim, "out": args.out,
    }
    return {k: v for k, v in mapping.items() if v is not None}


def print_fit_summary(series, window=None, label=""):
    """Human-readable fit block plus one machine-readable CSV record line."""
    prefix = f"[{label}] " if label else ""
    t, d, se = ensemble.effective_diffusivity(series, 0, 0)
    print(f"{prefix}D11({_fmt(t[-1])}) = {_fmt(d[-1])}"
          + (f" +/- {_fmt(se[-1])}" if se is not None else ""))
    dlim = stats.diffusivity_limit(series)
    if dlim.converged:
        print(f"{prefix}diffusivity limit: converged, D11 = {_fmt(dlim.value)}"
              f" +/- {_fmt(dlim.stderr)} (tail drift {dlim.rel_drift:.2%})")
    else:
        print(f"{prefix}diffusivity limit: not converged "
              f"(tail drift {dlim.rel_drift:.2%}, t-stat {dlim.t_stat:.2f})")
    fit_fields = ["", "", "", "", ""]
    try:
        pl = stats.power_law_fit(series, window)
        print(f"{prefix}dispersion power law: mu = {_fmt(pl.mu)} +/- {_fmt(pl.stderr_mu)}"
              f" over t in [{pl.window[0]:g}, {pl.window[1]:g}], r^2 = {pl.r_squared:.6f}")
        fit_fields = [_fmt(pl.mu), _fmt(pl.stderr_mu), _fmt(pl.r_squared),
                      _fmt(pl.window[0]), _fmt(pl.window[1])]
    except (InsufficientPoints, NonPositiveMoment) as exc:
        print(f"{prefix}dispersion power law: unavailable ({exc})")
    psi_fields = ["", ""]
    if series.mean_stream is not None:
        try:
            pd = stats.psi_decay_fit(series)
            print(f"{prefix}stream decay: rate = {_fmt(pd.rate)} over "
                  f"[{pd.window[0]:g}, {pd.window[1]:g}], r^2 = {pd.r_squared:.6f}")
            psi_fields = [_fmt(pd.rate), _fmt(pd.r_squared)]
        except (SignalTooWeak, ConfigError) as exc:
            print(f"{prefix}stream decay: unavailable ({exc})")
    record = ["FITCSV", fit_fields[0], fit_fields[1], fit_fields[2],
              fit_fields[3], fit_fields[4],
              "converged" if dlim.converged else "not-converged",
              _fmt(dlim.value) if dlim.converged else "",
              _fmt(dlim.stderr) if dlim.converged and dlim.stderr is not None else "",
              psi_fields[0], psi_fields[1]]
    print(",".join(record))


def cmd_run(args) -> int:
    if args.list_presets:
        for name in sorted(PRESETS):
            print(f"{name}: {PRESETS[name].description}")
        return EXIT_OK
    flag_values = _flag_values(args)
    file_values = parse_config_file(args.config) if args.config else {}
    runs = []
    if args.preset:
        preset = get_preset(args.preset)
        for label, values in preset.runs:
            runs.append((label, merge_config(values, file_values, flag_values)))
    else:
        runs.append(("", merge_config(file_values, flag_values)))

    for label, values in runs:
        out_path = values.pop("out", None)
        if out_path is None:
            stem = args.preset if args.preset else "tracerflow-run"
            out_path = f"{stem}.csv"
        if label:
            root, dot, ext = out_path.rpartition(".")
            out_path = f"{root}-{label}.{ext}" if dot else f"{out_path}-{label}"
        cfg = build_experiment(values)
        started = time.time()
        series = ensemble.run(cfg, workers=args.workers)
        finished = time.time()
        preamble = preamble_for(cfg, preset=args.preset)
        if series.stream_initial is not None:
            preamble["psi0"] = _fmt(series.stream_initial)
            preamble["psi0_se"] = _fmt(series.stream_initial_stderr)
        ensemble.write_csv(series, out_path, preamble)
        manifest = RunManifest(config=cfg, output_path=out_path,
                               preset_name=args.preset, started=started,
                               finished=finished, digest=series.config_digest)
        name = f"{args.preset or 'run'}{('/' + label) if label else ''}"
        print(f"{name}: wrote {manifest.output_path} "
              f"({len(series.times)} record times, digest {manifest.digest}, "
              f"{finished - started:.1f} s)")
        print_fit_summary(series, label=label)
    return EXIT_OK


def cmd_classify(args) -> int:
    spec = spec_from_tag(args.spectrum, k0=args.k0, alpha=args.alpha,
                         cutoff_L=args.cutoff_l)
    verdict = classify_diffusion(spec)
    line = f"{spec.tag}: {verdict.value}"
    if spec.is_powerlaw:
        line += f", theoretical dispersion exponent mu = {_fmt(theoretical_exponent(spec))}"
    print(line)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        results = verify.run_all(seed=args.seed, dt=args.dt,
                                 fp_tol=args.fp_tol, fp_max_iters=args.fp_max_iters)
    except FixedPointDiverged as exc:
        print(f"SOLVER-RANGE FAILURE: {exc}")
        print("the implicit advection solve diverged; dt is too large for "
              "the field's Lipschitz constant")
        return EXIT_RUN_FAILURE
    failed = 0
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        print(f"{tag} {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    if failed:
        print(f"{failed} verification check(s) failed")
        return EXIT_VERIFY_FAILURE
    print(f"all {len(results)} verification checks passed")
    return EXIT_OK


def cmd_fit(args) -> int:
    series, _ = ensemble.read_csv(args.csv)
    window = None
    if args.window_lo is not None or args.window_hi is not None:
        lo = args.window_lo if args.window_lo is not None else series.times[-1] / 10.0
        hi = args.window_hi if args.window_hi is not None else series.times[-1]
        window = (lo, hi)
    print_fit_summary(series, window=window)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {"run": cmd_run, "classify": cmd_classify,
               "verify": cmd_verify, "fit": cmd_fit}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (StepFailure, FixedPointDiverged) as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except TracerflowError as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
