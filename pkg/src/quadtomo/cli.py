"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical or
consistency failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import analysis, channels, detector, tomography
from .config import ExperimentConfig, load_config, snr_db_list_to_linear
from .errors import DataError, QuadtomoError
from .states import GaussianState, GridSpec, WignerGrid, gaussian_wigner, wigner_eval

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

EQUIVALENCE_RTOL = 1e-9
DEFAULT_BIN_WIDTH = 0.2


class ConfigError(Exception):
    pass


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _float(x) -> float:
    return float(x)


def _db(s: float) -> float:
    return channels.linear_to_db(s) if math.isfinite(s) else math.inf


def _config(args, overrides: dict) -> ExperimentConfig:
    try:
        return load_config(getattr(args, "config", None), overrides)
    except (ValidationError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc


def _write_outputs(out_dir: Path, outputs: dict) -> None:
    """Write ``{relative name: str | object with save()}`` once everything is computed."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, payload in outputs.items():
        path = out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(payload, str):
            with open(path, "w", newline="\n") as fh:
                fh.write(payload)
        else:
            payload.save(path)


def _detector_dict(d: channels.DetectorModel) -> dict:
    return json.loads(d.to_json())


def cmd_simulate(args) -> int:
    cfg = _config(
        args,
        {"seed": args.seed, "n_samples": args.n_samples, "output_dir": args.out},
    )
    d = cfg.detector.build()
    n, seed = cfg.n_samples, cfg.seed
    traces = {
        "electronic_noise.csv": detector.acquire_trace(
            d, None, "electronic_noise", 0.0, n, seed, workers=args.workers
        ),
        "shot_noise.csv": detector.acquire_trace(
            d, None, "shot_noise", 0.0, n, seed, workers=args.workers
        ),
        "signal.csv": detector.acquire_trace(
            d, cfg.source_state(), "signal", cfg.phase_spec(), n, seed, workers=args.workers
        ),
    }
    s = d.snr
    manifest = {
        "config": cfg.manifest(),
        "seed": seed,
        "detector": _detector_dict(d),
        "alpha_prime": d.alpha_prime,
        "eta_eq": channels.equivalent_efficiency_from_gain(d),
        "snr": s,
        "snr_db": _db(s),
        "files": {name: t.kind.value for name, t in traces.items()},
    }
    _write_outputs(Path(cfg.output_dir), {**traces, "manifest.json": _dump_json(manifest)})
    print(f"wrote {len(traces)} traces and manifest.json to {cfg.output_dir}")
    return EXIT_OK


def _load_trace(path) -> detector.QuadratureTrace:
    try:
        return detector.QuadratureTrace.load(path)
    except OSError as exc:
        raise DataError(str(exc)) from exc


def cmd_calibrate(args) -> int:
    trace = _load_trace(args.trace)
    if trace.kind is not detector.TraceKind.SHOT_NOISE:
        print(f"warning: calibrating on a {trace.kind.value} trace", file=sys.stderr)
    if np.all(trace.samples == trace.samples[0]):
        raise DataError(f"{args.trace}: trace has zero variance")
    report = {
        "trace": Path(args.trace).name,
        "kind": trace.kind.value,
        "seed": trace.seed,
        "n": len(trace),
        "detector": _detector_dict(trace.detector),
        "alpha_prime": channels.calibration_factor(trace.samples),
        "alpha_prime_stderr": channels.calibration_factor_stderr(trace.samples),
        "alpha_prime_model": trace.detector.alpha_prime,
    }
    text = _dump_json(report)
    if args.out:
        _write_outputs(Path(args.out).parent, {Path(args.out).name: text})
    print(text, end="")
    return EXIT_OK


def _histogram_range(x: np.ndarray, bin_width: float) -> tuple[float, int]:
    half = max(6.0, math.ceil(float(np.abs(x).max())))
    n_bins = int(round(2 * half / bin_width))
    return half, n_bins


def cmd_reconstruct(args) -> int:
    traces = [_load_trace(p) for p in args.traces]
    alpha_prime_stderr = 0.0
    if args.alpha_prime is not None:
        alpha_prime = args.alpha_prime
    elif args.shot is not None:
        shot = _load_trace(args.shot).samples
        alpha_prime = channels.calibration_factor(shot)
        alpha_prime_stderr = channels.calibration_factor_stderr(shot)
    else:
        raise ConfigError("give --shot or --alpha-prime to calibrate the traces")
    x = np.concatenate([detector.rescale_trace(t, alpha_prime) for t in traces])
    th = np.concatenate([t.sample_phases for t in traces])
    half, n_bins = _histogram_range(x, args.bin_width)
    phases = np.unique(th)
    hists = [
        tomography.histogram(x[th == phase], phase, n_bins, (-half, half)) for phase in phases
    ]
    spec = GridSpec.square(args.half_width or half, args.n_grid)
    fit = tomography.fit_gaussian_state(hists)
    if args.method == "fbp":
        grid = tomography.inverse_radon(hists, spec, workers=args.workers)
        mean, cov = grid.moments()
    else:
        mean, cov = fit.mean, fit.cov
        X, P = np.meshgrid(spec.x, spec.p, indexing="ij")
        grid = WignerGrid.from_spec(spec, gaussian_wigner(mean, cov, X, P))
    report = {
        "method": args.method,
        "traces": [Path(p).name for p in args.traces],
        "seeds": [t.seed for t in traces],
        "alpha_prime": alpha_prime,
        "alpha_prime_stderr": alpha_prime_stderr,
        "bin_width": args.bin_width,
        "histogram_half_width": half,
        "grid": {"half_width": spec.x_max, "n": spec.nx},
        "mean": [_float(v) for v in mean],
        "cov": [[_float(v) for v in row] for row in cov],
        "gaussfit": {
            "mean": fit.mean.tolist(),
            "cov": fit.cov.tolist(),
            "cov_sigma": fit.cov_sigma.tolist(),
            "physical": fit.physical,
        },
        "marginals": [
            {"theta": h.theta, "mean": m, "variance": v, "total": h.total, "overflow": h.overflow}
            for h, (m, v) in ((h, h.moments()) for h in hists)
        ],
    }
    outputs = {"wigner.csv": grid, "moments.json": _dump_json(report)}
    for k, h in enumerate(hists):
        outputs[f"histograms/hist_{k:03d}.csv"] = h
    _write_outputs(Path(args.out), outputs)
    print(_dump_json({k: report[k] for k in ("method", "mean", "cov")}), end="")
    return EXIT_OK


def _sweep_csv(rows) -> str:
    lines = ["snr_db,eta_inferred,eta_sigma,eta_predicted"]
    for r in rows:
        lines.append(
            ",".join(repr(float(r[k])) for k in ("snr_db", "eta_inferred", "eta_sigma", "eta_predicted"))
        )
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    overrides = {"seed": args.seed, "n_samples": args.n_samples, "output_dir": args.out}
    if args.snr_db:
        overrides["sweep.snr_db"] = args.snr_db
    cfg = _config(args, overrides)
    if cfg.state.kind != "squeezed":
        raise ConfigError("the sweep needs a squeezed source state")
    sweep_cfg = analysis.SweepConfig(
        r=cfg.state.r,
        eta_optical=cfg.optical_eta,
        snr=snr_db_list_to_linear(cfg.sweep.snr_db),
        n=cfg.n_samples,
        seed=cfg.seed,
        alpha=cfg.detector.alpha,
        n_phases=cfg.sweep.n_phases,
        phi=cfg.state.phi,
    )
    rows = analysis.snr_sweep_experiment(sweep_cfg, workers=args.workers)
    for row, db in zip(rows, cfg.sweep.snr_db):
        row["snr_db"] = float(db)  # as configured, not round-tripped through linear
    finite = [v for v in cfg.sweep.snr_db if math.isfinite(v)] or [0.0]
    dense = np.linspace(min(0.1, min(finite)), max(finite) + 3.0, 200)
    curve = analysis.theory_curve(cfg.optical_eta, dense)
    theory = "snr_db,eta_predicted\n" + "".join(
        f"{float(a)!r},{float(b)!r}\n" for a, b in zip(dense, curve)
    )
    summary = analysis.sweep_summary(sweep_cfg, rows)
    summary["experiment_config"] = cfg.manifest()
    _write_outputs(
        Path(cfg.output_dir),
        {"sweep.csv": _sweep_csv(rows), "sweep.json": _dump_json(summary), "theory.csv": theory},
    )
    print(f"{'snr_db':>8} {'eta':>8} {'sigma':>8} {'theory':>8}")
    for r in rows:
        print(
            f"{r['snr_db']:8.2f} {r['eta_inferred']:8.4f} {r['eta_sigma']:8.4f} {r['eta_predicted']:8.4f}"
        )
    return EXIT_OK


def equivalence_check(
    state: GaussianState, d: channels.DetectorModel, spec: GridSpec, on_narrow="interpolate"
) -> dict:
    """Compare the electronic-noise and equivalent-loss Wigner functions on a grid."""
    grid = wigner_eval(state, spec)
    eta_eq = channels.equivalent_efficiency_from_gain(d)
    en = channels.apply_en_wigner(grid, d, on_narrow)
    ol = channels.apply_loss_wigner(grid, eta_eq, on_narrow)
    err = float(np.abs(en.values - ol.values).max() / np.abs(ol.values).max())
    s = d.snr
    return {
        "eta_eq": eta_eq,
        "snr": s,
        "snr_db": _db(s),
        "max_rel_diff": err,
        "tolerance": EQUIVALENCE_RTOL,
        "passed": err < EQUIVALENCE_RTOL,
    }


def cmd_equivalence_check(args) -> int:
    overrides = {
        "state.kind": args.kind,
        "state.r": args.r,
        "state.phi": args.phi,
        "detector.alpha": args.alpha,
        "detector.t_noise": args.t_noise,
        "detector.snr_db": args.snr_db,
        "optical_eta": args.optical_eta,
        "grid.half_width": args.half_width,
        "grid.n": args.n_grid,
    }
    cfg = _config(args, overrides)
    state = cfg.source_state()
    d = cfg.detector.build()
    on_narrow = "raise" if args.strict_resolution else "interpolate"
    result = equivalence_check(state, d, cfg.grid.build(state), on_narrow)
    result["config"] = cfg.manifest()
    result["detector"] = _detector_dict(d)
    print(f"eta_eq = {result['eta_eq']:.4f}")
    print(f"S = {result['snr']:.6g} ({result['snr_db']:.2f} dB)")
    print(f"max |W_EN - W_OL| / peak = {result['max_rel_diff']:.3e}")
    print("PASS" if result["passed"] else "FAIL")
    if args.out:
        _write_outputs(Path(args.out), {"equivalence.json": _dump_json(result)})
    return EXIT_OK if result["passed"] else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadtomo", description="Homodyne tomography with optical loss and electronic noise"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--workers", type=int, default=1, help="threads (output is unaffected)")

    p = sub.add_parser("simulate", help="acquire electronic-noise, shot-noise and signal traces")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="calibration factor from a shot-noise trace")
    common(p, config=False)
    p.add_argument("trace", type=Path)
    p.add_argument("--out", help="write the report to this JSON file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("reconstruct", help="Wigner function from signal traces")
    common(p, config=False)
    p.add_argument("traces", type=Path, nargs="+")
    p.add_argument("--shot", type=Path, help="shot-noise trace used for calibration")
    p.add_argument("--alpha-prime", type=float)
    p.add_argument("--method", choices=["fbp", "gaussfit"], default="gaussfit")
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.add_argument("--half-width", type=float, help="output grid half width")
    p.add_argument("--n-grid", type=int, default=128)
    p.add_argument("--out", default="reconstruction")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="inferred efficiency versus detector SNR")
    common(p)
    p.add_argument("--snr-db", type=float, nargs="+")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("equivalence-check", help="electronic noise versus equivalent loss")
    common(p)
    p.add_argument("--kind", choices=["vacuum", "squeezed"])
    p.add_argument("--r", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--optical-eta", type=float)
    p.add_argument("--alpha", type=float)
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--t-noise", type=float)
    noise.add_argument("--snr-db", type=float)
    p.add_argument("--half-width", type=float)
    p.add_argument("--n-grid", type=int)
    p.add_argument("--strict-resolution", action="store_true",
                   help="fail instead of refining when the noise kernel is under two cells")
    p.add_argument("--out", help="write equivalence.json into this directory")
    p.set_defaults(func=cmd_equivalence_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QuadtomoError, ArithmeticError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
