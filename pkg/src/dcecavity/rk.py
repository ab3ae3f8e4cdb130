"""Explicit embedded Runge-Kutta pairs with PI step-size control.

Two pairs are provided: Dormand-Prince 5(4) and Dormand-Prince 8(5,3).  The
error of a step is measured in the max-norm over all components, weighted by
``abs_tol + rel_tol * max(|y|, |y_new|)``, and the driver lands exactly on
every requested output time instead of interpolating.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop853

from .errors import DCEError, NonFiniteAmplitude


@dataclass(frozen=True)
class Tableau:
    name: str
    order: int
    # exponent used by the controller: the local error estimate is O(h**error_exponent)
    error_exponent: int
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    # error weights over the stages plus the first-same-as-last stage f(t+h, y_new)
    e: np.ndarray
    # secondary weights for the 8(5,3) style combined estimate; None for plain pairs
    e_low: Optional[np.ndarray] = None

    @property
    def stages(self) -> int:
        return len(self.b)


DOPRI5 = Tableau(
    name="dopri5",
    order=5,
    error_exponent=5,
    c=np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0]),
    a=np.array(
        [
            [0, 0, 0, 0, 0],
            [1 / 5, 0, 0, 0, 0],
            [3 / 40, 9 / 40, 0, 0, 0],
            [44 / 45, -56 / 15, 32 / 9, 0, 0],
            [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
            [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        ]
    ),
    b=np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
    e=np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]),
)

DOP853 = Tableau(
    name="dop853",
    order=8,
    error_exponent=8,
    c=_dop853.C[: _dop853.N_STAGES].copy(),
    a=_dop853.A[: _dop853.N_STAGES, : _dop853.N_STAGES].copy(),
    b=_dop853.B.copy(),
    e=_dop853.E5.copy(),
    e_low=_dop853.E3.copy(),
)

TABLEAUX = {t.name: t for t in (DOPRI5, DOP853)}

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    max_norm_error: float = 0.0
    max_parity_leak: float = 0.0


def _error_norm(tab: Tableau, k: np.ndarray, h: float, scale: np.ndarray) -> float:
    err = np.tensordot(tab.e, k, axes=1) / scale
    e_hi = float(np.max(np.abs(err)))
    if tab.e_low is None:
        return abs(h) * e_hi
    e_lo = float(np.max(np.abs(np.tensordot(tab.e_low, k, axes=1) / scale)))
    denom = e_hi**2 + 0.01 * e_lo**2
    if denom == 0.0:
        return 0.0
    return abs(h) * e_hi**2 / np.sqrt(denom)


class EmbeddedRK:
    """Single-step machinery for an explicit embedded pair on array states."""

    def __init__(self, fun: Callable[[float, np.ndarray], np.ndarray], tableau: Tableau = DOP853):
        self.fun = fun
        self.tableau = tableau

    def stages(self, t: float, y: np.ndarray, h: float, f0: np.ndarray) -> tuple:
        """Return ``(y_new, k)`` where ``k`` stacks every stage plus ``f(t+h, y_new)``."""
        tab = self.tableau
        s = tab.stages
        k = np.empty((s + 1,) + y.shape, dtype=y.dtype)
        k[0] = f0
        for i in range(1, s):
            dy = np.tensordot(tab.a[i, :i], k[:i], axes=1)
            k[i] = self.fun(t + tab.c[i] * h, y + h * dy)
        y_new = y + h * np.tensordot(tab.b, k[:s], axes=1)
        k[s] = self.fun(t + h, y_new)
        return y_new, k

    def fixed(self, y0: np.ndarray, t0: float, t1: float, steps: int) -> np.ndarray:
        """Integrate with ``steps`` equal steps (no error control)."""
        y = np.asarray(y0)
        h = (t1 - t0) / steps
        t = t0
        f = self.fun(t, y)
        for _ in range(steps):
            y, k = self.stages(t, y, h, f)
            f = k[-1]
            t += h
        return y


def integrate(
    fun: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    times: Sequence[float],
    rel_tol: float,
    abs_tol: float,
    first_step: float,
    tableau: Tableau = DOP853,
    on_accept: Optional[Callable[[float, np.ndarray], None]] = None,
    max_steps: int = 50_000_000,
    stats: Optional[StepStats] = None,
) -> tuple:
    """Adaptive integration reporting the solution at each entry of ``times``.

    ``times[0]`` is the start time.  ``on_accept(t, y)`` runs after every
    accepted step and may raise to abort.  Returns ``(solutions, stats)``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("output times must be strictly increasing")
    stats = stats if stats is not None else StepStats()
    rk = EmbeddedRK(fun, tableau)
    k_exp = tableau.error_exponent
    alpha, beta = 0.7 / k_exp, 0.4 / k_exp

    t = float(times[0])
    y = np.array(y0, copy=True)
    out = [y.copy()]
    f = fun(t, y)
    stats.evaluations += 1
    h = float(first_step)
    err_prev = 1e-4
    for target in times[1:]:
        while t < target:
            if stats.accepted + stats.rejected >= max_steps:
                raise DCEError(f"step budget of {max_steps} exhausted at t={t:.6g}")
            remaining = target - t
            landing = 1.01 * h >= remaining
            h_step = remaining if landing else h
            if h_step <= 1e-14 * max(1.0, abs(t)):
                raise DCEError(f"step size underflow at t={t:.6g}")
            scale_base = np.abs(y)
            y_new, k = rk.stages(t, y, h_step, f)
            stats.evaluations += tableau.stages
            scale = abs_tol + rel_tol * np.maximum(scale_base, np.abs(y_new))
            err = _error_norm(tableau, k, h_step, scale)
            if not np.isfinite(err):
                err = np.inf
            if err <= 1.0:
                t = float(target) if landing else t + h_step
                y = y_new
                f = k[-1]
                stats.accepted += 1
                if on_accept is not None:
                    on_accept(t, y)
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * err**-alpha * err_prev**beta
                    factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                err_prev = max(err, 1e-4)
                # a landing step is often artificially short; do not let it shrink h
                h = max(h, h_step * factor) if landing else h_step * factor
            else:
                stats.rejected += 1
                if not np.isfinite(err):
                    if h_step < 1e-8 * max(1.0, abs(t)):
                        raise NonFiniteAmplitude(f"non-finite amplitudes at t={t:.6g}")
                    factor = MIN_FACTOR
                else:
                    factor = max(MIN_FACTOR, SAFETY * err ** (-1.0 / k_exp))
                h = h_step * factor
        out.append(y.copy())
    return out, stats
