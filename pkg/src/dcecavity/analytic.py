"""Closed-form results for the empty cavity and the harmonic-oscillator detector.

All functions accept a scalar time or a NumPy array of times.  Quantities that
are undefined at a point (the Mandel factor and the detector/field ratio when
no photons are present yet) are returned as NaN.

Notation: ``C_b = cosh(beta t)``, ``S_b = sinh(beta t)``, ``c_g = cos(gamma t)``,
``s_g = sin(gamma t) / gamma`` with ``gamma^2 = g^2 - beta^2``.  When
``gamma^2 < 0`` the trigonometric functions become hyperbolic in
``sqrt(beta^2 - g^2)``.  ``S_2b``, ``C_2b`` and ``s_2g`` use doubled arguments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

DEGENERATE_TOL = 1e-14
# below |gamma t| = 1e-4 the Taylor series is exact to double precision
_SERIES_BELOW = 1e-8


class Branch(str, enum.Enum):
    TRIGONOMETRIC = "trigonometric"
    HYPERBOLIC = "hyperbolic"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class HOParams:
    beta: float
    g: float

    @classmethod
    def from_epsilon(cls, epsilon: float, g: float) -> "HOParams":
        return cls(beta=epsilon / 4, g=g)

    @property
    def gamma_sq(self) -> float:
        return self.g * self.g - self.beta * self.beta

    @property
    def branch(self) -> Branch:
        if abs(abs(self.g) - abs(self.beta)) <= DEGENERATE_TOL:
            return Branch.DEGENERATE
        return Branch.TRIGONOMETRIC if abs(self.g) > abs(self.beta) else Branch.HYPERBOLIC

    @property
    def gamma(self) -> float:
        """``gamma`` on the trigonometric branch, ``gamma~`` on the hyperbolic one."""
        return math.sqrt(abs(self.gamma_sq))


def _c_s(gamma_sq: float, t):
    """``c_gamma`` and ``s_gamma`` for a signed ``gamma^2``, continuous through zero."""
    t = np.asarray(t, dtype=float)
    x = gamma_sq * t * t
    small = np.abs(x) < _SERIES_BELOW
    c_series = 1 - x / 2 + x * x / 24
    s_series = t * (1 - x / 6 + x * x / 120)
    if gamma_sq > 0:
        w = math.sqrt(gamma_sq)
        c = np.cos(w * t)
        s = np.sin(w * t) / w
    elif gamma_sq < 0:
        w = math.sqrt(-gamma_sq)
        c = np.cosh(w * t)
        s = np.sinh(w * t) / w
    else:
        return c_series, s_series
    return np.where(small, c_series, c), np.where(small, s_series, s)


@dataclass(frozen=True)
class EmptyCavity:
    n_mean: np.ndarray
    mandel_q: np.ndarray
    p_var: np.ndarray
    x_var: np.ndarray


def empty_cavity(t, epsilon: float) -> EmptyCavity:
    et = epsilon * np.asarray(t, dtype=float)
    n = np.sinh(et / 2) ** 2
    return EmptyCavity(n_mean=n, mandel_q=1 + 2 * n, p_var=0.5 * np.exp(-et), x_var=0.5 * np.exp(et))


@dataclass(frozen=True)
class BogoliubovCoeffs:
    """Operator expansions ``a(t)`` and ``b(t)`` over ``(a0, b0, a0^dag, b0^dag)``."""

    a: tuple
    b: tuple

    def symplectic_defect(self):
        """``|u_a|^2 + |u_b|^2 - |v_a|^2 - |v_b|^2 - 1`` for both operators."""
        return tuple(
            np.abs(u0) ** 2 + np.abs(u1) ** 2 - np.abs(v0) ** 2 - np.abs(v1) ** 2 - 1
            for (u0, u1, v0, v1) in (self.a, self.b)
        )


def ho_bogoliubov_coeffs(params: HOParams, t) -> BogoliubovCoeffs:
    beta, g = params.beta, params.g
    t = np.asarray(t, dtype=float)
    cb, sb = np.cosh(beta * t), np.sinh(beta * t)
    c, s = _c_s(params.gamma_sq, t)
    a_coeffs = (
        (cb * c + beta * sb * s) + 0j,
        -1j * g * cb * s,
        (sb * c + beta * cb * s) + 0j,
        1j * g * sb * s,
    )
    b_coeffs = (
        -1j * g * cb * s,
        (cb * c - beta * sb * s) + 0j,
        -1j * g * sb * s,
        -(sb * c - beta * cb * s) + 0j,
    )
    return BogoliubovCoeffs(a=a_coeffs, b=b_coeffs)


@dataclass(frozen=True)
class HOObservables:
    n_field: np.ndarray
    n_detector: np.ndarray
    mandel_q: np.ndarray
    p_var: np.ndarray
    x_var: np.ndarray
    uncertainty_product: np.ndarray
    purity: np.ndarray


def _moments(params: HOParams, t):
    beta = params.beta
    t = np.asarray(t, dtype=float)
    c, s = _c_s(params.gamma_sq, t)
    s2 = s * c
    return beta, t, s, s2, np.sinh(beta * t), np.sinh(2 * beta * t), np.cosh(2 * beta * t)


def ho_observables(params: HOParams, t) -> HOObservables:
    beta, t, s, s2, sb, sh2, ch2 = _moments(params, t)
    common = sb**2 + beta**2 * ch2 * s**2
    n = common + beta * sh2 * s2
    nb = common - beta * sh2 * s2
    bracket = sh2 * (1 + 2 * beta**2 * s**2) + 2 * beta * ch2 * s2
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(n < 1e-12, np.nan, n + bracket**2 / (4 * n))
    p_var = np.exp(-2 * beta * t) * (0.5 - beta * s2 + beta**2 * s**2)
    x_var = np.exp(2 * beta * t) * (0.5 + beta * s2 + beta**2 * s**2)
    delta = 0.25 + params.g**2 * beta**2 * s**4
    return HOObservables(
        n_field=n,
        n_detector=nb,
        mandel_q=q,
        p_var=p_var,
        x_var=x_var,
        uncertainty_product=delta,
        purity=(4 * delta) ** -0.5,
    )


def ho_asymptotic_n(params: HOParams, t):
    """Large ``beta t`` form ``e^{2 beta t}/4 [1 + 2 beta s_2g + 2 beta^2 s_g^2]``.

    On the trigonometric branch this is
    ``e^{2bt}/4 [1 + (b/g) sin(2 g t) + (2 b^2/g^2) sin^2(g t)]``.  It is only
    meaningful once ``beta t >> 1``; at ``beta = 0`` it returns 1/4 while the
    exact photon number is zero.
    """
    beta, t, s, s2, *_ = _moments(params, t)
    return 0.25 * np.exp(2 * beta * t) * (1 + 2 * beta * s2 + 2 * beta**2 * s**2)


def detector_field_ratio(params: HOParams, t):
    """``<n_b(t)> / <n(t)>``; raises for a scalar time with no photons yet."""
    obs = ho_observables(params, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(obs.n_field > 0, obs.n_detector / obs.n_field, np.nan)
    if np.ndim(ratio) == 0:
        if not np.isfinite(ratio):
            raise ValueError("detector/field ratio is undefined while <n> = 0")
        return float(ratio)
    return ratio


def shelf_times(params: HOParams, count: int) -> np.ndarray:
    """Times ``t_n`` with ``2 gamma t_n = (2n + 1) pi`` for ``n = 1..count``."""
    if params.branch is not Branch.TRIGONOMETRIC:
        raise ValueError("shelves only exist on the trigonometric branch (|g| > |beta|)")
    n = np.arange(1, count + 1)
    return (2 * n + 1) * np.pi / (2 * params.gamma)
