"""Joint detector-field state and the observables computed from it.

The state of the detector (levels ``j = 1..N``) and the cavity mode (Fock
states ``k = 0..K_max``) is kept as a dense complex table ``p[j-1, k]``.
Detector levels are 1-based in every public API, photon numbers 0-based.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, NormDriftExceeded

#: Mean photon number below which the Mandel factor is reported undefined.
MANDEL_UNDEFINED_BELOW = 1e-12
#: Largest norm drift that report functions silently renormalise.
RENORMALIZE_LIMIT = 1e-8
#: Number of top Fock levels counted as the truncation tail.
TAIL_WIDTH = 4


class DetectorKind(str, enum.Enum):
    LADDER = "ladder"
    TWO_LEVEL_ENSEMBLE = "two-level-ensemble"
    HARMONIC_OSCILLATOR = "harmonic-oscillator"

    @classmethod
    def parse(cls, value) -> "DetectorKind":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        aliases = {
            "ladder": cls.LADDER,
            "two-level-ensemble": cls.TWO_LEVEL_ENSEMBLE,
            "twolevelensemble": cls.TWO_LEVEL_ENSEMBLE,
            "dicke": cls.TWO_LEVEL_ENSEMBLE,
            "ensemble": cls.TWO_LEVEL_ENSEMBLE,
            "harmonic-oscillator": cls.HARMONIC_OSCILLATOR,
            "harmonicoscillatortruncated": cls.HARMONIC_OSCILLATOR,
            "harmonic-oscillator-truncated": cls.HARMONIC_OSCILLATOR,
            "ho": cls.HARMONIC_OSCILLATOR,
        }
        try:
            return aliases[text]
        except KeyError:
            raise ConfigError(f"unknown detector kind {value!r}") from None


@dataclass(frozen=True)
class Tolerances:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    tail_threshold: float = 1e-10

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "tail_threshold"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class SystemSpec:
    """Physical configuration of one run, in units with hbar = omega_0 = 1.

    ``levels`` is the number of detector levels N; for a two-level ensemble it
    is the atom count plus one (the number of Dicke states).
    """

    detector_kind: DetectorKind = DetectorKind.LADDER
    levels: int = 3
    g: float = 1e-2
    epsilon: float = 1e-3
    fock_cutoff: int = 16
    t_final: float = 0.0
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        object.__setattr__(self, "detector_kind", DetectorKind.parse(self.detector_kind))
        if int(self.levels) != self.levels or self.levels < 1:
            raise ConfigError(f"levels must be a positive integer, got {self.levels!r}")
        object.__setattr__(self, "levels", int(self.levels))
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ConfigError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff!r}")
        object.__setattr__(self, "fock_cutoff", int(self.fock_cutoff))
        if self.detector_kind is DetectorKind.HARMONIC_OSCILLATOR and self.levels < 4:
            raise ConfigError("a truncated oscillator detector needs at least 4 levels")
        if not (np.isfinite(self.g) and self.g >= 0):
            raise ConfigError(f"g must be finite and non-negative, got {self.g!r}")
        if not np.isfinite(self.epsilon):
            raise ConfigError(f"epsilon must be finite, got {self.epsilon!r}")
        if not (np.isfinite(self.t_final) and self.t_final >= 0):
            raise ConfigError(f"t_final must be finite and non-negative, got {self.t_final!r}")

    @property
    def beta(self) -> float:
        return self.epsilon / 4

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.levels, self.fock_cutoff + 1)


@dataclass(frozen=True)
class CouplingProfile:
    """Ladder couplings ``g_1..g_{N-1}``; ``g_0`` and ``g_{j>=N}`` are zero."""

    couplings: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(c) for c in self.couplings)
        if any(not np.isfinite(c) or c < 0 for c in values):
            raise ConfigError(f"couplings must be finite and non-negative: {values}")
        object.__setattr__(self, "couplings", values)

    @property
    def levels(self) -> int:
        return len(self.couplings) + 1

    def __len__(self):
        return len(self.couplings)

    def __getitem__(self, j: int) -> float:
        """Coupling ``g_j`` with the boundary convention applied."""
        if 1 <= j <= len(self.couplings):
            return self.couplings[j - 1]
        return 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.couplings, dtype=float)


class StateVector:
    """Amplitude table ``p[j-1, k]`` at a given time.

    The table is copied on construction and frozen, so snapshots can be handed
    around freely.
    """

    __slots__ = ("amplitudes", "time")

    def __init__(self, amplitudes, time: float = 0.0):
        table = np.array(amplitudes, dtype=complex, copy=True)
        if table.ndim != 2 or table.shape[0] < 1 or table.shape[1] < 3:
            raise ConfigError(f"amplitude table must be 2-D with shape (N>=1, K+1>=3), got {table.shape}")
        table.setflags(write=False)
        self.amplitudes = table
        self.time = float(time)

    @classmethod
    def from_components(
        cls,
        levels: int,
        fock_cutoff: int,
        components: Mapping[Tuple[int, int], complex],
        time: float = 0.0,
        normalize: bool = True,
    ) -> "StateVector":
        """Build a state from ``{(j, k): amplitude}`` with 1-based ``j``."""
        table = np.zeros((levels, fock_cutoff + 1), dtype=complex)
        for (j, k), amp in components.items():
            if not (1 <= j <= levels and 0 <= k <= fock_cutoff):
                raise ConfigError(f"component ({j}, {k}) outside {levels} x {fock_cutoff + 1}")
            table[j - 1, k] += amp
        if normalize:
            table /= np.linalg.norm(table)
        return cls(table, time)

    @property
    def levels(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def fock_cutoff(self) -> int:
        return self.amplitudes.shape[1] - 1

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def norm_error(self) -> float:
        return abs(self.norm_squared() - 1.0)

    def __repr__(self):
        return f"StateVector(levels={self.levels}, fock_cutoff={self.fock_cutoff}, time={self.time:g})"


@dataclass(frozen=True)
class QuadratureMoments:
    x_mean: float
    p_mean: float
    x_var: float
    p_var: float
    xp_cov: float

    @property
    def uncertainty_product(self) -> float:
        return self.x_var * self.p_var - self.xp_cov**2


@dataclass(frozen=True)
class ObservableRecord:
    time: float
    n_mean: float
    n_second_moment: float
    mandel_q: Optional[float]
    x_var: float
    p_var: float
    xp_cov: float
    purity: float
    n_detector: float
    level_probs: Tuple[float, ...]
    photon_probs: Tuple[float, ...]
    norm_error: float


def new_vacuum(spec: SystemSpec) -> StateVector:
    """Detector in its ground level, field in vacuum: only ``p_{1,0} = 1``."""
    table = np.zeros(spec.shape, dtype=complex)
    table[0, 0] = 1.0
    return StateVector(table, 0.0)


def _photon_numbers(state: StateVector) -> np.ndarray:
    return np.arange(state.fock_cutoff + 1, dtype=float)


def mean_photon(state: StateVector) -> float:
    weights = np.abs(state.amplitudes) ** 2
    return float(weights.sum(axis=0) @ _photon_numbers(state))


def photon_second_moment(state: StateVector) -> float:
    weights = np.abs(state.amplitudes) ** 2
    return float(weights.sum(axis=0) @ _photon_numbers(state) ** 2)


def mandel_q(state: StateVector) -> Optional[float]:
    """Mandel factor ``(Var n - <n>) / <n>``; ``None`` when ``<n>`` is negligible."""
    n = mean_photon(state)
    if n < MANDEL_UNDEFINED_BELOW:
        return None
    var = photon_second_moment(state) - n * n
    return (var - n) / n


def quadrature_moments(state: StateVector) -> QuadratureMoments:
    p = state.amplitudes
    k = _photon_numbers(state)
    a1 = np.vdot(p[:, :-1], np.sqrt(k[1:]) * p[:, 1:])
    a2 = np.vdot(p[:, :-2], np.sqrt(k[1:-1] * k[2:]) * p[:, 2:])
    n = mean_photon(state)
    x_mean = np.sqrt(2.0) * a1.real
    p_mean = np.sqrt(2.0) * a1.imag
    x_var = a2.real + n + 0.5 - x_mean**2
    p_var = -a2.real + n + 0.5 - p_mean**2
    xp_cov = a2.imag - x_mean * p_mean
    return QuadratureMoments(float(x_mean), float(p_mean), float(x_var), float(p_var), float(xp_cov))


def _renormalized(probs: np.ndarray, state: StateVector) -> np.ndarray:
    total = probs.sum()
    drift = abs(total - 1.0)
    if drift >= RENORMALIZE_LIMIT:
        raise NormDriftExceeded(drift, state.time)
    return probs / total


def photon_distribution(state: StateVector) -> np.ndarray:
    """``P_K = sum_j |p_{j,K}|^2`` for ``K = 0..K_max``."""
    return _renormalized((np.abs(state.amplitudes) ** 2).sum(axis=0), state)


def detector_distribution(state: StateVector) -> np.ndarray:
    """``P_j = sum_k |p_{j,k}|^2``; entry ``i`` is level ``j = i + 1``."""
    return _renormalized((np.abs(state.amplitudes) ** 2).sum(axis=1), state)


def detector_excitation(state: StateVector) -> float:
    """Mean detector excitation ``sum_j (j-1) P_j`` (``<n_b>`` for the oscillator)."""
    weights = (np.abs(state.amplitudes) ** 2).sum(axis=1)
    return float(weights @ np.arange(state.levels, dtype=float))


def field_purity(state: StateVector) -> float:
    """``Tr(rho_f^2)`` of the reduced field density matrix."""
    p = state.amplitudes
    rho = p.T @ p.conj()
    return float(np.sum(np.abs(rho) ** 2))


def tail_occupation(state: StateVector, width: int = TAIL_WIDTH) -> float:
    """Probability carried by the Fock states ``k > K_max - width``."""
    start = max(state.fock_cutoff - width + 1, 0)
    return float(np.sum(np.abs(state.amplitudes[:, start:]) ** 2))


def parity_mask(levels: int, fock_cutoff: int) -> np.ndarray:
    """Boolean table marking the ``(j + k)`` even entries (1-based ``j``)."""
    j = np.arange(1, levels + 1)[:, None]
    k = np.arange(fock_cutoff + 1)[None, :]
    return (j + k) % 2 == 0


def parity_leak(state: StateVector) -> float:
    """Largest amplitude in the sector that evolution from ``|1,0>`` never reaches."""
    mask = parity_mask(state.levels, state.fock_cutoff)
    return float(np.max(np.abs(state.amplitudes[mask]), initial=0.0))


def observe(state: StateVector) -> ObservableRecord:
    quad = quadrature_moments(state)
    return ObservableRecord(
        time=state.time,
        n_mean=mean_photon(state),
        n_second_moment=photon_second_moment(state),
        mandel_q=mandel_q(state),
        x_var=quad.x_var,
        p_var=quad.p_var,
        xp_cov=quad.xp_cov,
        purity=field_purity(state),
        n_detector=detector_excitation(state),
        level_probs=tuple(detector_distribution(state).tolist()),
        photon_probs=tuple(photon_distribution(state).tolist()),
        norm_error=state.norm_error(),
    )


def observe_all(states: Sequence[StateVector]) -> list:
    return [observe(s) for s in states]
