"""Command-line front end: validated JSON/flag configs in, CSV/JSON out.

Subcommands
    fusion      exact fusion-gate statistics (outcomes.csv, patterns.csv)
    sweep       phase fringe or overlap sweeps (sweep.csv)
    percolate   connectivity curves and threshold (curves.csv, spanning.csv,
                threshold.json)
    ppnrd       multiplexed-detector click statistics (ppnrd.json)
    rate        n-fold coincidence rate (rate.json)

Every run writes run_config.json with the fully resolved parameters; rerun
with the same seed (any --threads) and the outputs are byte-identical.
Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import detection, experiment, percolation
from .experiment import BellLabel, ExperimentConfig

CSV_SCHEMA_PREFIX = "# fusionsim"


class ConfigError(ValueError):
    """Invalid or out-of-range run configuration."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _outcome_name(outcome: Optional[BellLabel]) -> str:
    return outcome.value if outcome is not None else "fail"


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _merge_config(cls, file_values: dict, flag_values: dict):
    """File values first, flags override; unknown keys are rejected."""
    known = {f.name for f in fields(cls)}
    unknown = set(file_values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse_grid(text: str) -> list[float]:
    """Grid syntax: 'start:stop:count' (inclusive) or comma-separated values."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad grid {text!r}; want start:stop:count")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}: {exc}") from exc
        if count < 1:
            raise ConfigError("grid count must be at least 1")
        return [float(x) for x in np.linspace(start, stop, count)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def _write_table(
    out_dir: Path, stem: str, schema: str, header: Sequence[str], rows, fmt: str
) -> Path:
    """One tabular artifact, as versioned CSV or an equivalent JSON object."""
    rows = [tuple(row) for row in rows]
    if fmt == "json":
        path = out_dir / f"{stem}.json"
        _write_json(
            path,
            {"schema": schema, "columns": list(header), "rows": [list(r) for r in rows]},
        )
        return path
    path = out_dir / f"{stem}.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{CSV_SCHEMA_PREFIX} {schema}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return path


def _emit_run_config(out_dir: Path, subcommand: str, payload: dict) -> None:
    _write_json(out_dir / "run_config.json", {"subcommand": subcommand, **payload})


# --------------------------------------------------------------------------
# fusion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FusionRunConfig:
    visibility: float = 1.0
    ancilla: bool = True
    phase: float = 0.0
    seed: int = 0
    ppnrd_fanout: int = 4
    ppnrd_efficiency: float = 1.0

    def __post_init__(self):
        # Build the physics configs eagerly so range errors surface as
        # configuration failures (exit code 2) before any work starts.
        self.experiment()
        detection.PPNRDConfig(self.ppnrd_fanout, self.ppnrd_efficiency)

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(
            overlap=self.visibility,
            ancilla_enabled=self.ancilla,
            phase=self.phase,
            seed=self.seed,
        )


def cmd_fusion(args) -> int:
    flag_values = {
        "visibility": args.visibility,
        "ancilla": False if args.no_ancilla else None,
        "phase": args.phase,
        "seed": args.seed,
    }
    cfg = _merge_config(FusionRunConfig, _load_config_file(args.config), flag_values)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    ppnrd = detection.PPNRDConfig(cfg.ppnrd_fanout, cfg.ppnrd_efficiency)
    stats = detection.success_probability(cfg.experiment(), ppnrd)

    rows = []
    for label in BellLabel:
        rows.append((label.value, float(stats.outcome_probs[label]), 0.0))
    rows.append(("fail", float(stats.outcome_probs[None]), 0.0))
    rows.append(("total_success", float(stats.total_success), 0.0))
    _write_table(
        out_dir,
        "outcomes",
        "outcomes v1",
        ("outcome", "probability", "stderr"),
        rows,
        args.format,
    )

    pattern_rows = []
    for label in BellLabel:
        result = experiment.run_fusion(label, cfg.experiment())
        for pattern, prob in sorted(result.pattern_probs.items()):
            pattern_rows.append(
                (label.value, "|" + "".join(str(n) for n in pattern) + "|", float(prob))
            )
    _write_table(
        out_dir,
        "patterns",
        "patterns v1",
        ("input", "pattern", "probability"),
        pattern_rows,
        args.format,
    )

    factor_rows = [
        ("|" + "".join(str(n) for n in pattern) + "|", float(factor))
        for pattern, factor in sorted(stats.factors.items())
    ]
    _write_table(
        out_dir,
        "factors",
        "normalization-factors v1",
        ("pattern", "factor"),
        factor_rows,
        args.format,
    )

    _emit_run_config(out_dir, "fusion", asdict(cfg))
    print(f"fusion: total success {stats.total_success:.6f} -> {out_dir}")
    return 0


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRunConfig:
    kind: str = "phase"
    grid: tuple[float, ...] = ()
    visibility: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("phase", "visibility"):
            raise ValueError("sweep kind must be 'phase' or 'visibility'")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")
        if self.kind == "visibility" and any(
            not 0.0 <= v <= 1.0 for v in self.grid
        ):
            raise ValueError("visibility grid values must lie in [0, 1]")


def cmd_sweep(args) -> int:
    file_values = _load_config_file(args.config)
    if "grid" in file_values:
        file_values["grid"] = tuple(float(x) for x in file_values["grid"])
    flag_values = {
        "kind": args.kind,
        "grid": tuple(_parse_grid(args.grid)) if args.grid else None,
        "visibility": args.visibility,
        "seed": args.seed,
    }
    cfg = _merge_config(SweepRunConfig, file_values, flag_values)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if cfg.kind == "phase":
        grid = cfg.grid or tuple(float(x) for x in np.linspace(0.0, 2.2 * math.pi, 23))
        points = experiment.phase_sweep(
            grid, ExperimentConfig(overlap=cfg.visibility, ancilla_enabled=False)
        )
        rows = [
            (
                float(pt.phase),
                float(pt.coincidences["++"]),
                float(pt.coincidences["+-"]),
                float(pt.coincidences["-+"]),
                float(pt.coincidences["--"]),
            )
            for pt in points
        ]
        _write_table(
            out_dir,
            "sweep",
            "phase-sweep v1",
            ("phase", "pp", "pm", "mp", "mm"),
            rows,
            args.format,
        )
    else:
        grid = cfg.grid or (1.0, 0.98, 0.96, 0.94, 0.92, 0.90)
        rows = []
        for overlap in grid:
            stats = detection.success_probability(ExperimentConfig(overlap=overlap))
            rows.append(
                (
                    float(overlap),
                    float(experiment.hom_visibility(overlap)),
                    float(stats.total_success),
                )
            )
        _write_table(
            out_dir,
            "sweep",
            "visibility-sweep v1",
            ("overlap", "hom_visibility", "total_success"),
            rows,
            args.format,
        )

    _emit_run_config(out_dir, "sweep", {**asdict(cfg), "grid": list(grid)})
    print(f"sweep ({cfg.kind}): {len(grid)} points -> {out_dir}")
    return 0


# --------------------------------------------------------------------------
# percolate
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PercolateRunConfig:
    sizes: tuple[int, ...] = (10, 100)
    mode: str = "site-bond"
    boundary: str = "open"
    trials: int = 200
    p_start: float = 0.0
    p_stop: float = 1.0
    p_step: float = 0.01
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if len(self.sizes) < 1 or any(s < 2 for s in self.sizes):
            raise ValueError("sizes must all be at least 2")
        if self.mode not in percolation.MODES:
            raise ValueError(f"mode must be one of {percolation.MODES}")
        if self.boundary not in percolation.BOUNDARIES:
            raise ValueError(f"boundary must be one of {percolation.BOUNDARIES}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0.0 <= self.p_start < self.p_stop <= 1.0:
            raise ValueError("need 0 <= p_start < p_stop <= 1")
        if not 0.0 < self.p_step <= 1.0:
            raise ValueError("p_step must lie in (0, 1]")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    def grid(self) -> np.ndarray:
        count = int(round((self.p_stop - self.p_start) / self.p_step)) + 1
        return np.round(np.linspace(self.p_start, self.p_stop, count), 12)


def _curve_rows(curves: dict[int, percolation.SweepCurve]):
    for length in sorted(curves):
        curve = curves[length]
        for p, mean, err in zip(curve.p_grid, curve.mean, curve.stderr):
            yield (
                curve.length,
                curve.boundary,
                curve.mode,
                float(p),
                float(mean),
                float(err),
                curve.trials,
                curve.seed,
            )


def cmd_percolate(args) -> int:
    file_values = _load_config_file(args.config)
    if "sizes" in file_values:
        file_values["sizes"] = tuple(int(x) for x in file_values["sizes"])
    flag_values = {
        "sizes": tuple(int(x) for x in args.sizes.split(",")) if args.sizes else None,
        "mode": args.mode,
        "boundary": args.boundary,
        "trials": args.trials,
        "seed": args.seed,
        "threads": args.threads,
    }
    if args.grid:
        parts = args.grid.split(":")
        if len(parts) != 3:
            raise ConfigError("percolate --grid wants start:stop:step")
        flag_values.update(
            p_start=float(parts[0]), p_stop=float(parts[1]), p_step=float(parts[2])
        )
    cfg = _merge_config(PercolateRunConfig, file_values, flag_values)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()

    fraction_curves = percolation.largest_cluster_curves(
        cfg.sizes,
        cfg.trials,
        grid,
        cfg.seed,
        mode=cfg.mode,
        boundary=cfg.boundary,
        observable="fraction",
        workers=cfg.threads,
    )
    _write_table(
        out_dir,
        "curves",
        "largest-cluster v1",
        ("L", "boundary", "mode", "p", "mean_fraction", "stderr", "trials", "seed"),
        _curve_rows(fraction_curves),
        args.format,
    )

    spanning_curves = percolation.largest_cluster_curves(
        cfg.sizes,
        cfg.trials,
        grid,
        cfg.seed,
        mode=cfg.mode,
        boundary=cfg.boundary,
        observable="spanning",
        workers=cfg.threads,
    )
    _write_table(
        out_dir,
        "spanning",
        "spanning-probability v1",
        ("L", "boundary", "mode", "p", "mean_fraction", "stderr", "trials", "seed"),
        _curve_rows(spanning_curves),
        args.format,
    )

    threshold_payload: dict
    if len(cfg.sizes) >= 2:
        estimate = percolation.estimate_threshold(list(spanning_curves.values()))
        threshold_payload = {
            "estimate": estimate.estimate,
            "method": estimate.method,
            "observable": "spanning",
            "slope_peak": estimate.slope_peak,
            "grid_step": estimate.grid_step,
            "sizes": list(estimate.sizes),
            "crossings": {str(k): v for k, v in estimate.crossings.items()},
        }
    else:
        threshold_payload = {
            "estimate": None,
            "method": "unavailable (need at least two sizes)",
            "sizes": list(cfg.sizes),
        }
    _write_json(out_dir / "threshold.json", threshold_payload)
    _emit_run_config(out_dir, "percolate", asdict(cfg))
    print(
        f"percolate: sizes {list(cfg.sizes)} mode {cfg.mode} "
        f"threshold {threshold_payload.get('estimate')} -> {out_dir}"
    )
    return 0


# --------------------------------------------------------------------------
# ppnrd / rate
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PPNRDRunConfig:
    photons: int = 4
    fanout: int = 4
    eta_det: float = 1.0

    def __post_init__(self):
        if self.photons < 0:
            raise ValueError("photon number must be non-negative")
        if not 0.0 <= self.eta_det <= 1.0:
            raise ValueError("eta_det must lie in [0, 1]")


def cmd_ppnrd(args) -> int:
    flag_values = {"photons": args.photons, "fanout": args.fanout, "eta_det": args.eta_det}
    cfg = _merge_config(PPNRDRunConfig, _load_config_file(args.config), flag_values)
    ppnrd = detection.PPNRDConfig(cfg.fanout, cfg.eta_det)
    clicks = detection.ppnrd_response(cfg.photons, ppnrd)
    payload = {
        "photons": cfg.photons,
        "fanout": cfg.fanout,
        "eta_det": cfg.eta_det,
        "click_distribution": clicks,
        "resolve_probability": detection.resolve_probability(cfg.photons, ppnrd),
    }
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "ppnrd.json", payload)
    _emit_run_config(out_dir, "ppnrd", asdict(cfg))
    print(f"ppnrd: resolve probability {payload['resolve_probability']} -> {out_dir}")
    return 0


@dataclass(frozen=True)
class RateRunConfig:
    attempts: float = 7.1e6
    eta: float = 0.16
    fold: int = 8

    def __post_init__(self):
        if self.attempts < 0:
            raise ValueError("attempt rate must be non-negative")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.fold < 1:
            raise ValueError("fold must be at least 1")


def cmd_rate(args) -> int:
    flag_values = {"attempts": args.attempts, "eta": args.eta, "fold": args.fold}
    cfg = _merge_config(RateRunConfig, _load_config_file(args.config), flag_values)
    rate = detection.nfold_rate(cfg.attempts, cfg.eta, cfg.fold)
    payload = {
        "attempts_per_second": cfg.attempts,
        "eta": cfg.eta,
        "fold": cfg.fold,
        "rate_hz": rate,
    }
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "rate.json", payload)
    _emit_run_config(out_dir, "rate", asdict(cfg))
    print(f"rate: {rate} Hz -> {out_dir}")
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusionsim",
        description="Fusion-gate simulation and cluster-state percolation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="tabular output format (csv output is canonical)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes for Monte Carlo trials; exact "
                            "computations ignore it and every value yields "
                            "identical output")

    p = sub.add_parser("fusion", help="exact fusion-gate statistics")
    common(p)
    p.add_argument("--visibility", type=float, help="pairwise photon overlap")
    p.add_argument("--no-ancilla", action="store_true", help="conventional gate only")
    p.add_argument("--phase", type=float, help="H/V phase on the port-2 arm")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_fusion)

    p = sub.add_parser("sweep", help="phase fringe or overlap sweep")
    common(p)
    p.add_argument("--kind", choices=("phase", "visibility"))
    p.add_argument("--grid", help="start:stop:count or comma list")
    p.add_argument("--visibility", type=float, help="overlap for phase sweeps")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("percolate", help="connectivity curves and threshold")
    common(p)
    p.add_argument("--sizes", help="comma-separated lattice sides")
    p.add_argument("--mode", choices=percolation.MODES)
    p.add_argument("--boundary", choices=percolation.BOUNDARIES)
    p.add_argument("--trials", type=int)
    p.add_argument("--grid", help="start:stop:step occupation grid")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_percolate)

    p = sub.add_parser("ppnrd", help="multiplexed detector click statistics")
    common(p)
    p.add_argument("--n", dest="photons", type=int, help="photons on the group")
    p.add_argument("--k", dest="fanout", type=int, help="sub-detectors per group")
    p.add_argument("--eta-det", dest="eta_det", type=float, help="sub-detector efficiency")
    p.set_defaults(func=cmd_ppnrd)

    p = sub.add_parser("rate", help="n-fold coincidence rate")
    common(p)
    p.add_argument("--attempts", type=float, help="attempts per second")
    p.add_argument("--eta", type=float, help="per-photon efficiency")
    p.add_argument("--fold", type=int, help="coincidence order")
    p.set_defaults(func=cmd_rate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
