"""Command-line front end.

Subcommands: simulate, analytic, spectral, compare, preset, sweep, check.
Exit codes: 0 success, 1 failed convergence check, 2 configuration error,
3 truncation overflow after the retry cap, 4 norm drift or non-finite
amplitudes.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import analytic, report, spectral
from .config import DEFAULT_K_REPORT, OUTPUT_DIR_ENV, PRESETS, RunConfig, build_config, load_config_file
from .dynamics import coupling_profile, simulate
from .errors import ConfigError, DCEError, NonFiniteAmplitude, NormDriftExceeded, TruncationOverflow
from .statespace import observe

log = logging.getLogger("dcecavity")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_TRUNCATION = 3
EXIT_NORM = 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, TruncationOverflow):
        return EXIT_TRUNCATION
    if isinstance(exc, (NormDriftExceeded, NonFiniteAmplitude)):
        return EXIT_NORM
    return EXIT_CHECK_FAILED


def time_grid(config: RunConfig) -> np.ndarray:
    t_final = config.resolved_t_final()
    if t_final <= 0 or config.samples == 1:
        return np.array([0.0])
    return np.linspace(0.0, t_final, config.samples)


def run_simulation(config: RunConfig):
    """Integrate the configured system; returns ``(spec, trajectory, records)``."""
    spec = config.to_spec()
    traj = simulate(
        spec,
        times=time_grid(config),
        auto=config.auto_cutoff,
        max_doublings=config.max_doublings,
        method=config.method,
    )
    records = [observe(s) for s in traj.samples]
    return spec, traj, records


def _k_report(config: RunConfig, cutoff: int) -> int:
    if config.full_distribution:
        return cutoff
    return min(cutoff, DEFAULT_K_REPORT if config.k_report is None else config.k_report)


def _write(path: Path, writer, *args, **kwargs):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        return writer(fh, *args, **kwargs)


def _numeric_columns(records) -> dict:
    return {
        "n_mean": np.array([r.n_mean for r in records]),
        "n_detector": np.array([r.n_detector for r in records]),
        "mandel_q": np.array([np.nan if r.mandel_q is None else r.mandel_q for r in records]),
        "x_var": np.array([r.x_var for r in records]),
        "p_var": np.array([r.p_var for r in records]),
        "purity": np.array([r.purity for r in records]),
    }


def reference_columns(config: RunConfig, times) -> tuple:
    """Closed-form columns: empty cavity when ``g = 0``, oscillator detector otherwise."""
    times = np.asarray(times, dtype=float)
    if config.g == 0 or config.mode == "empty-cavity":
        ec = analytic.empty_cavity(times, config.epsilon)
        cols = {
            "n_mean": ec.n_mean,
            "n_detector": np.zeros_like(times),
            "mandel_q": np.where(ec.n_mean < 1e-12, np.nan, ec.mandel_q),
            "x_var": ec.x_var,
            "p_var": ec.p_var,
            "purity": np.ones_like(times),
        }
        return "empty-cavity", cols
    ho = analytic.ho_observables(analytic.HOParams.from_epsilon(config.epsilon, config.g), times)
    cols = {
        "n_mean": ho.n_field,
        "n_detector": ho.n_detector,
        "mandel_q": ho.mandel_q,
        "x_var": ho.x_var,
        "p_var": ho.p_var,
        "purity": ho.purity,
    }
    return "harmonic-oscillator", cols


def run(config: RunConfig) -> list:
    """Execute one configuration and write its output file; returns written paths.

    Raises the simulator's exceptions; ``main`` maps them to exit codes.
    """
    config = config.apply_preset()
    mode = config.mode
    if mode in ("simulate", "preset"):
        spec, traj, records = run_simulation(config)
        cutoff = traj.final.fock_cutoff
        name = f"{config.preset or 'simulate'}_{config.kind}_N{config.levels}.csv"
        path = config.output_path(name)
        _write(path, report.write_simulation_csv, records, spec.epsilon, spec.levels, _k_report(config, cutoff))
        log.info("wrote %s (K_max=%d, %d steps)", path, cutoff, traj.stats.accepted)
        return [path]
    if mode in ("empty-cavity", "analytic-ho"):
        times = time_grid(config)
        _, cols = reference_columns(config, times)
        path = config.output_path(f"{mode}.csv")
        _write(path, report.write_analytic_csv, times, config.epsilon, cols)
        return [path]
    if mode == "spectral":
        if config.g <= 0:
            raise ConfigError("spectral analysis needs g > 0")
        profile = coupling_profile(config.kind, config.levels, config.g)
        rows = spectral.block_report(profile, config.levels, config.max_excitation)
        prediction = spectral.predict_max_photons(config.levels, profile)
        path = config.output_path(f"spectral_{config.kind}_N{config.levels}.csv")
        _write(path, report.write_block_report, rows, prediction, config.levels)
        return [path]
    if mode == "compare":
        spec, traj, records = run_simulation(config)
        times = traj.times
        ref_name, ref = reference_columns(config, times)
        path = config.output_path(f"compare_{config.kind}_N{config.levels}.csv")
        deviations = _write(path, report.write_compare_csv, times, spec.epsilon, _numeric_columns(records), ref, ref_name)
        print(" ".join(f"{k}={report.fmt(v)}" for k, v in deviations.items()))
        return [path]
    raise ConfigError(f"unhandled mode {mode!r}")


@dataclass(frozen=True)
class ConvergenceReport:
    deviation: float
    base_cutoff: int
    refined_cutoff: int
    passed: bool
    threshold: float = 1e-6

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} max_rel_dev_n_mean={report.fmt(self.deviation)} "
            f"K_max={self.base_cutoff}->{self.refined_cutoff} threshold={self.threshold:g}"
        )


def convergence_check(config: RunConfig, threshold: float = 1e-6) -> ConvergenceReport:
    """Rerun with the Fock cutoff doubled and ``rel_tol / 10``; compare ``<n(t)>``.

    The deviation is ``max_t |n_1 - n_2| / max_t n_2`` (relative to the scale of
    the photon-number curve).
    """
    config = config.apply_preset()
    _, base, base_records = run_simulation(config)
    base_cutoff = base.final.fock_cutoff
    refined_config = dataclasses.replace(config, fock_cutoff=2 * base_cutoff, rel_tol=config.rel_tol / 10)
    _, refined, refined_records = run_simulation(refined_config)
    n1 = np.array([r.n_mean for r in base_records])
    n2 = np.array([r.n_mean for r in refined_records])
    scale = max(float(np.max(np.abs(n2))), 1e-300)
    deviation = float(np.max(np.abs(n1 - n2))) / scale
    return ConvergenceReport(deviation, base_cutoff, refined.final.fock_cutoff, deviation < threshold, threshold)


def _sweep_worker(config: RunConfig) -> tuple:
    try:
        paths = run(config)
        return EXIT_OK, [str(p) for p in paths], ""
    except DCEError as exc:
        return exit_code_for(exc), [], str(exc)


def run_sweep(base: RunConfig, grid: dict, output_dir: Path, workers: int = 1) -> int:
    """Run the cartesian product of ``grid`` values, one output file per run."""
    keys = sorted(grid)
    configs = []
    for values in itertools.product(*(grid[k] for k in keys)):
        label = "_".join(f"{k}={v}" for k, v in zip(keys, values))
        overrides = dict(zip(keys, values))
        cfg = build_config(dataclasses.asdict(base), **overrides)
        configs.append(dataclasses.replace(cfg, output=str(output_dir / f"{base.mode}_{label}.csv")))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, configs))
    else:
        results = [_sweep_worker(c) for c in configs]
    worst = EXIT_OK
    for cfg, (code, paths, message) in zip(configs, results):
        status = "ok" if code == EXIT_OK else f"exit {code}: {message}"
        print(f"{cfg.output}: {status}")
        worst = max(worst, code)
    return worst


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value configuration file; flags override it")
    p.add_argument("--kind", help="ladder | two-level-ensemble | harmonic-oscillator")
    p.add_argument("--levels", "-N", type=int, help="detector levels N (atoms + 1 for an ensemble)")
    p.add_argument("--g", type=float, help="base coupling g")
    p.add_argument("--epsilon", type=float, help="modulation depth epsilon")
    p.add_argument("--fock-cutoff", help="K_max, or 'auto'")
    p.add_argument("--t-final", type=float, help="final time in units of 1/omega_0")
    p.add_argument("--eps-t", type=float, help="final time given as epsilon * t")
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--tail-threshold", type=float)
    p.add_argument("--samples", type=int, help="number of output times (default 600)")
    p.add_argument("--k-report", type=int, help="highest photon number written (default min(K_max, 30))")
    p.add_argument("--full-distribution", action="store_true", default=None, help="write every P_photon column")
    p.add_argument("--method", choices=("dop853", "dopri5"))
    p.add_argument("--max-doublings", type=int)
    p.add_argument("--max-excitation", type=int, help="highest excitation block in a spectral report (default 20)")
    p.add_argument("--output", "-o", help="output file (default: $DCE_OUTPUT_DIR/<name>.csv)")
    p.add_argument("--dump-config", help="also write the effective configuration to this file")


_COMMON_KEYS = (
    "kind", "levels", "g", "epsilon", "fock_cutoff", "t_final", "eps_t", "rel_tol", "abs_tol",
    "tail_threshold", "samples", "k_report", "full_distribution", "method", "max_doublings", "max_excitation",
    "output",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcecavity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate the amplitude equations and write a CSV series")
    _add_common(p)

    p = sub.add_parser("analytic", help="closed-form empty-cavity or oscillator-detector series")
    _add_common(p)
    p.add_argument("--model", choices=("empty-cavity", "ho"), default="ho")

    p = sub.add_parser("spectral", help="excitation-block spectra and the photon-cap prediction")
    _add_common(p)

    p = sub.add_parser("compare", help="simulation side by side with the closed-form reference")
    _add_common(p)

    p = sub.add_parser("preset", help="reproduce a figure configuration")
    _add_common(p)
    p.add_argument("preset", choices=sorted(PRESETS))

    p = sub.add_parser("sweep", help="run a parameter grid in parallel, one file per run")
    _add_common(p)
    p.add_argument("--mode", default="simulate", choices=("simulate", "compare", "spectral", "analytic-ho", "empty-cavity"))
    p.add_argument("--vary", action="append", required=True, metavar="KEY=V1,V2,...")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("check", help="convergence self-test: doubled cutoff and tighter tolerance")
    _add_common(p)
    p.add_argument("--preset", dest="preset_id", choices=sorted(PRESETS))
    return parser


def config_from_args(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k, None) for k in _COMMON_KEYS}
    command = args.command
    if command == "analytic":
        overrides["mode"] = "empty-cavity" if args.model == "empty-cavity" else "analytic-ho"
    elif command == "preset":
        overrides["mode"] = "preset"
        overrides["preset"] = args.preset
    elif command == "sweep":
        overrides["mode"] = args.mode
    elif command == "check":
        overrides["mode"] = "simulate"
        overrides["preset"] = args.preset_id
    else:
        overrides["mode"] = command
    return build_config(file_values, **overrides)


def _parse_vary(items) -> dict:
    grid = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--vary expects KEY=V1,V2,..., got {item!r}")
        key, values = item.split("=", 1)
        grid[key.strip().replace("-", "_")] = [v.strip() for v in values.split(",") if v.strip()]
    return grid


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = config_from_args(args)
        if args.dump_config:
            Path(args.dump_config).write_text(config.to_text(), encoding="utf-8")
        if args.command == "sweep":
            out_dir = Path(args.output_dir or os.environ.get(OUTPUT_DIR_ENV, "."))
            return run_sweep(config, _parse_vary(args.vary), out_dir, args.workers)
        if args.command == "check":
            result = convergence_check(config)
            print(result.line())
            return EXIT_OK if result.passed else EXIT_CHECK_FAILED
        for path in run(config):
            print(path)
        return EXIT_OK
    except DCEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
