"""Interaction-picture dynamics of the modulated cavity coupled to a ladder detector.

The amplitudes obey

    dp[j,m]/dt = beta (sqrt(m(m-1)) p[j,m-2] - sqrt((m+1)(m+2)) p[j,m+2])
                 - i (g_j sqrt(m) p[j+1,m-1] + g_{j-1} sqrt(m+1) p[j-1,m+1])

with ``g_0 = g_N = 0`` and a hard wall at the Fock cutoff.  Integration uses an
adaptive embedded Runge-Kutta pair; ``expm_oracle`` gives an exact reference
for small systems by diagonalising the Hamiltonian assembled from operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import rk
from .errors import ConfigError, NonFiniteAmplitude, NormDriftExceeded, TruncationOverflow
from .statespace import (
    CouplingProfile,
    DetectorKind,
    StateVector,
    SystemSpec,
    Tolerances,
    TAIL_WIDTH,
    observe,
    parity_mask,
)

#: Integration aborts once the total probability drifts further than this.
NORM_ABORT = 1e-8
#: Largest dense problem the eigendecomposition oracle accepts.
ORACLE_MAX_DIM = 2000


def coupling_profile(kind, levels: int, g: float) -> CouplingProfile:
    """Couplings ``g_1..g_{N-1}`` for a detector kind.

    Ladder and truncated oscillator detectors use ``g_j = g sqrt(j)``; an
    ensemble of ``N-1`` identical two-level atoms in the Dicke basis uses
    ``g_j = g sqrt(j (N - j))``.
    """
    kind = DetectorKind.parse(kind)
    if levels < 1:
        raise ConfigError(f"levels must be >= 1, got {levels}")
    if g < 0:
        raise ConfigError(f"g must be non-negative, got {g}")
    j = np.arange(1, levels, dtype=float)
    if kind is DetectorKind.TWO_LEVEL_ENSEMBLE:
        values = g * np.sqrt(j * (levels - j))
    else:
        values = g * np.sqrt(j)
    return CouplingProfile(tuple(values.tolist()))


@dataclass(frozen=True)
class GeneratorSpec:
    beta: float
    profile: CouplingProfile
    levels: int
    fock_cutoff: int

    def __post_init__(self):
        if len(self.profile) != self.levels - 1:
            raise ConfigError(
                f"profile has {len(self.profile)} couplings, expected {self.levels - 1}"
            )
        if self.fock_cutoff < 2:
            raise ConfigError(f"fock_cutoff must be >= 2, got {self.fock_cutoff}")

    @classmethod
    def from_spec(cls, spec: SystemSpec, fock_cutoff: Optional[int] = None) -> "GeneratorSpec":
        return cls(
            beta=spec.beta,
            profile=coupling_profile(spec.detector_kind, spec.levels, spec.g),
            levels=spec.levels,
            fock_cutoff=spec.fock_cutoff if fock_cutoff is None else fock_cutoff,
        )

    @property
    def shape(self):
        return (self.levels, self.fock_cutoff + 1)

    @property
    def dim(self) -> int:
        return self.levels * (self.fock_cutoff + 1)


class _Derivative:
    """Precomputed coefficient arrays for repeated derivative evaluation."""

    def __init__(self, gen: GeneratorSpec):
        m = np.arange(gen.fock_cutoff + 1, dtype=float)
        self.shape = gen.shape
        beta = gen.beta
        # beta sqrt(m(m-1)) for m >= 2 and beta sqrt((m+1)(m+2)) for m <= K-2
        self.up2 = beta * np.sqrt(m[2:] * (m[2:] - 1))
        self.down2 = beta * np.sqrt((m[:-2] + 1) * (m[:-2] + 2))
        g = gen.profile.as_array()[:, None]
        # -i g_j sqrt(m) feeding row j from row j+1 (m >= 1)
        self.from_above = -1j * g * np.sqrt(m[1:])[None, :]
        # -i g_{j-1} sqrt(m+1) feeding row j from row j-1 (m <= K-1)
        self.from_below = -1j * g * np.sqrt(m[:-1] + 1)[None, :]

    def __call__(self, t, p):
        dp = np.zeros_like(p)
        dp[:, 2:] += self.up2 * p[:, :-2]
        dp[:, :-2] -= self.down2 * p[:, 2:]
        if p.shape[0] > 1:
            dp[:-1, 1:] += self.from_above * p[1:, :-1]
            dp[1:, :-1] += self.from_below * p[:-1, 1:]
        return dp


def rhs_apply(state, gen: GeneratorSpec) -> np.ndarray:
    """Time derivative of the amplitude table under the interaction Hamiltonian."""
    table = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    if table.shape != gen.shape:
        raise ConfigError(f"state shape {table.shape} does not match generator {gen.shape}")
    return _Derivative(gen)(0.0, table)


def initial_step(gen: GeneratorSpec) -> float:
    g_max = max(gen.profile.couplings, default=0.0)
    rate = max(g_max * math.sqrt(gen.fock_cutoff), abs(gen.beta) * gen.fock_cutoff)
    if rate == 0.0:
        return 0.1
    return min(0.1, 0.05 / rate)


@dataclass
class Trajectory:
    samples: List[StateVector]
    stats: rk.StepStats = field(default_factory=rk.StepStats)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.samples])

    @property
    def final(self) -> StateVector:
        return self.samples[-1]

    def observables(self) -> list:
        return [observe(s) for s in self.samples]


def integrate_adaptive(
    state0: StateVector,
    gen: GeneratorSpec,
    t_final: float,
    tols: Optional[Tolerances] = None,
    *,
    times: Optional[Sequence[float]] = None,
    sample_count: Optional[int] = None,
    method: str = "dop853",
    first_step: Optional[float] = None,
) -> Trajectory:
    """Propagate ``state0`` to ``t_final`` with adaptive step-size control.

    Output times default to ``[state0.time, t_final]``; pass ``times`` or
    ``sample_count`` (uniform grid including both ends) to sample more densely.
    After every accepted step the norm drift, the tail occupation and the
    parity-forbidden sector are inspected.

    Raises NormDriftExceeded, TruncationOverflow or NonFiniteAmplitude.
    """
    tols = tols or Tolerances()
    if state0.amplitudes.shape != gen.shape:
        raise ConfigError(f"state shape {state0.amplitudes.shape} does not match generator {gen.shape}")
    t0 = state0.time
    if not (np.isfinite(t_final) and t_final >= t0):
        raise ConfigError(f"t_final must be >= start time {t0}, got {t_final}")
    if times is None:
        count = 2 if sample_count is None else sample_count
        times = np.linspace(t0, t_final, count) if t_final > t0 else np.array([t0])
    times = np.asarray(times, dtype=float)
    if times[0] != t0:
        raise ConfigError("the first output time must equal the start time")
    try:
        tableau = rk.TABLEAUX[method]
    except KeyError:
        raise ConfigError(f"unknown integration method {method!r}") from None

    stats = rk.StepStats()
    forbidden = parity_mask(gen.levels, gen.fock_cutoff)
    tail_start = max(gen.fock_cutoff - TAIL_WIDTH + 1, 0)
    parity_check = bool(np.all(state0.amplitudes[forbidden] == 0))

    def check(t, p):
        norm = float(np.vdot(p, p).real)
        if not np.isfinite(norm):
            raise NonFiniteAmplitude(f"non-finite amplitudes at t={t:.6g}")
        drift = abs(norm - 1.0)
        stats.max_norm_error = max(stats.max_norm_error, drift)
        if drift > NORM_ABORT:
            raise NormDriftExceeded(drift, t)
        tail = float(np.sum(np.abs(p[:, tail_start:]) ** 2))
        if tail > tols.tail_threshold:
            raise TruncationOverflow(tail, gen.fock_cutoff, t)
        if parity_check:
            stats.max_parity_leak = max(stats.max_parity_leak, float(np.max(np.abs(p[forbidden]))))

    check(t0, state0.amplitudes)
    h0 = initial_step(gen) if first_step is None else first_step
    tables, _ = rk.integrate(
        _Derivative(gen),
        state0.amplitudes,
        times,
        tols.rel_tol,
        tols.abs_tol,
        h0,
        tableau=tableau,
        on_accept=check,
        stats=stats,
    )
    samples = [StateVector(p, t) for p, t in zip(tables, times)]
    return Trajectory(samples, stats)


def assemble_hamiltonian(gen: GeneratorSpec) -> np.ndarray:
    """Dense interaction Hamiltonian built from ladder and field operators.

    Basis index is ``(j - 1) * (K_max + 1) + k``.
    """
    n_f = gen.fock_cutoff + 1
    a = np.diag(np.sqrt(np.arange(1, n_f, dtype=float)), 1)
    ad = a.T
    field_part = -1j * gen.beta * (a @ a - ad @ ad)
    h = np.kron(np.eye(gen.levels), field_part)
    for i in range(1, gen.levels):
        raise_ = np.zeros((gen.levels, gen.levels))
        raise_[i, i - 1] = 1.0  # sigma_{i+1,i} in 1-based labels
        h = h + gen.profile[i] * (np.kron(raise_, a) + np.kron(raise_.T, ad))
    return h


def expm_oracle(gen: GeneratorSpec, state0: StateVector, t: float) -> StateVector:
    """Exact propagation by Hermitian eigendecomposition (reference for tests)."""
    if gen.dim > ORACLE_MAX_DIM:
        raise ConfigError(f"oracle dimension {gen.dim} exceeds {ORACLE_MAX_DIM}")
    h = assemble_hamiltonian(gen)
    w, v = np.linalg.eigh(h)
    psi0 = state0.amplitudes.reshape(-1)
    dt = t - state0.time
    psi = v @ (np.exp(-1j * w * dt) * (v.conj().T @ psi0))
    return StateVector(psi.reshape(gen.shape), t)


AUTO_CUTOFF_FLOOR = 16


def auto_cutoff(spec: SystemSpec) -> int:
    """Fock cutoff from the empty-cavity growth envelope.

    The detector only slows photon production, so the envelope
    ``<n> = sinh^2(eps t / 2)`` bounds the occupied Fock range.
    """
    envelope = math.sinh(abs(spec.epsilon) * spec.t_final / 2) ** 2
    return max(AUTO_CUTOFF_FLOOR, math.ceil(8 * envelope + 24))


def simulate(
    spec: SystemSpec,
    times: Optional[Sequence[float]] = None,
    *,
    sample_count: int = 600,
    auto: bool = False,
    max_doublings: int = 3,
    method: str = "dop853",
) -> Trajectory:
    """Evolve the vacuum ``|1,0>`` for a full system configuration.

    With ``auto=True`` the cutoff starts at ``auto_cutoff(spec)`` and is doubled
    on TruncationOverflow up to ``max_doublings`` times; otherwise
    ``spec.fock_cutoff`` is used as given.
    """
    cutoff = auto_cutoff(spec) if auto else spec.fock_cutoff
    retries = max_doublings if auto else 0
    if times is None:
        times = np.linspace(0.0, spec.t_final, sample_count) if spec.t_final > 0 else [0.0]
    while True:
        gen = GeneratorSpec.from_spec(spec, fock_cutoff=cutoff)
        state0 = StateVector(_vacuum_table(gen), 0.0)
        try:
            return integrate_adaptive(state0, gen, spec.t_final, spec.tolerances, times=times, method=method)
        except TruncationOverflow:
            if retries == 0:
                raise
            retries -= 1
            cutoff *= 2


def _vacuum_table(gen: GeneratorSpec) -> np.ndarray:
    table = np.zeros(gen.shape, dtype=complex)
    table[0, 0] = 1.0
    return table
