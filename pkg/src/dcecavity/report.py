"""CSV and text emitters for simulation, analytic and spectral results."""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Optional, Sequence

import numpy as np

SIM_COLUMNS = ("t", "eps_t", "n_mean", "mandel_q", "x_var", "p_var", "purity", "norm_error")
ANALYTIC_COLUMNS = ("t", "eps_t", "n_mean", "n_detector", "mandel_q", "x_var", "p_var", "purity")
COMPARE_QUANTITIES = ("n_mean", "n_detector", "mandel_q", "x_var", "p_var", "purity")


def fmt(value) -> str:
    """17 significant digits; undefined values (None, NaN) become an empty field."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return format(value, ".17g")


def _writer(stream):
    return csv.writer(stream, lineterminator="\n")


def simulation_header(levels: int, k_report: int) -> list:
    return (
        list(SIM_COLUMNS)
        + [f"P_level_{j}" for j in range(1, levels + 1)]
        + [f"P_photon_{k}" for k in range(k_report + 1)]
    )


def write_simulation_csv(stream, records: Sequence, epsilon: float, levels: int, k_report: int):
    w = _writer(stream)
    w.writerow(simulation_header(levels, k_report))
    for r in records:
        row = [r.time, epsilon * r.time, r.n_mean, r.mandel_q, r.x_var, r.p_var, r.purity, r.norm_error]
        row += list(r.level_probs)
        row += list(r.photon_probs[: k_report + 1])
        w.writerow([fmt(v) for v in row])


def write_analytic_csv(stream, times, epsilon: float, columns: dict):
    """``columns`` maps names in ANALYTIC_COLUMNS (minus t, eps_t) to arrays."""
    w = _writer(stream)
    w.writerow(ANALYTIC_COLUMNS)
    times = np.asarray(times, dtype=float)
    for i, t in enumerate(times):
        row = [t, epsilon * t]
        for name in ANALYTIC_COLUMNS[2:]:
            values = columns.get(name)
            row.append(None if values is None else np.asarray(values)[i])
        w.writerow([fmt(v) for v in row])


def relative_deviation(numeric, reference, floor: float = 1e-12) -> float:
    """Largest pointwise ``|numeric - reference| / |reference|`` over defined points."""
    a = np.asarray(numeric, dtype=float)
    b = np.asarray(reference, dtype=float)
    ok = np.isfinite(a) & np.isfinite(b) & (np.abs(b) > floor)
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(a[ok] - b[ok]) / np.abs(b[ok])))


def write_compare_csv(stream, times, epsilon: float, numeric: dict, reference: dict, reference_name: str) -> dict:
    header = ["t", "eps_t"]
    for q in COMPARE_QUANTITIES:
        header += [q, f"{q}_ref"]
    w = _writer(stream)
    w.writerow(header)
    for i, t in enumerate(times):
        row = [t, epsilon * t]
        for q in COMPARE_QUANTITIES:
            row += [numeric[q][i], reference[q][i]]
        w.writerow([fmt(v) for v in row])
    deviations = {q: relative_deviation(numeric[q], reference[q]) for q in COMPARE_QUANTITIES}
    summary = " ".join(f"{q}={fmt(v)}" for q, v in deviations.items())
    stream.write(f"# reference={reference_name} max_rel_dev {summary}\n")
    return deviations


def write_block_report(stream, rows: Iterable, prediction, levels: int):
    w = _writer(stream)
    w.writerow(["E", "dim", "has_null", "min_abs_eigenvalue", "null_support"])
    for r in rows:
        support = " ".join(f"({j};{k})" for j, k in r.support)
        w.writerow([r.excitation, r.dim, "true" if r.has_null else "false", fmt(r.min_abs_eigenvalue), support])
    cap = "unbounded" if prediction.unbounded else str(prediction.max_photons)
    chain = " ".join(str(e) for e in prediction.resonant_chain)
    stream.write(f"# N={levels} max_photons={cap} resonant_chain={chain}\n")


def to_text(fn, *args, **kwargs) -> str:
    buf = io.StringIO()
    fn(buf, *args, **kwargs)
    return buf.getvalue()
