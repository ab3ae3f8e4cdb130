"""Fixed-excitation blocks of the unmodulated Hamiltonian and the photon-cap rule.

Without modulation the coupling conserves ``E = (j - 1) + k``.  The block for a
given ``E`` is spanned by ``(1, E), (2, E-1), ...`` and is a symmetric
tridiagonal matrix with zero diagonal.  Odd-dimensional blocks carry exactly one
zero eigenvalue whose eigenvector lives on odd positions (odd detector level,
even photon number); the modulation couples the vacuum resonantly only through
that chain of null vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConvergenceError, ZeroCoupling
from .statespace import CouplingProfile

NULL_REL_TOL = 1e-12
SUPPORT_REL_TOL = 1e-10
QL_MAX_ITER = 60


@dataclass(frozen=True)
class ExcitationBlock:
    excitation: int
    offdiag: Tuple[float, ...]
    # basis states (j, k) in block order, j 1-based
    basis: Tuple[Tuple[int, int], ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def matrix(self) -> np.ndarray:
        e = np.asarray(self.offdiag, dtype=float)
        return np.diag(e, 1) + np.diag(e, -1)


@dataclass(frozen=True)
class TridiagonalSpectrum:
    eigenvalues: np.ndarray
    # column i is the normalised eigenvector of eigenvalues[i]
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class NullSpace:
    has_null: bool
    # 1-based block positions carrying the null vector
    support: Tuple[int, ...]
    states: Tuple[Tuple[int, int], ...]
    vector: Optional[np.ndarray]
    min_abs_eigenvalue: float


@dataclass(frozen=True)
class ParityPrediction:
    max_photons: Optional[int]
    resonant_chain: Tuple[int, ...]

    @property
    def unbounded(self) -> bool:
        return self.max_photons is None


def build_block(profile: CouplingProfile, levels: int, excitation: int) -> ExcitationBlock:
    if excitation < 0:
        raise ValueError(f"excitation must be >= 0, got {excitation}")
    if len(profile) != levels - 1:
        raise ValueError(f"profile has {len(profile)} couplings, expected {levels - 1}")
    dim = min(levels, excitation + 1)
    basis = tuple((j, excitation - j + 1) for j in range(1, dim + 1))
    offdiag = tuple(profile[j] * math.sqrt(excitation - j + 1) for j in range(1, dim))
    return ExcitationBlock(excitation, offdiag, basis)


def tridiagonal_eigh(diag: Sequence[float], offdiag: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric tridiagonal matrix by implicit QL.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    (as columns).
    """
    d = np.array(diag, dtype=float)
    n = d.size
    e = np.zeros(n)
    e[: n - 1] = offdiag
    z = np.eye(n)
    eps = np.finfo(float).eps
    anorm = float(np.max(np.abs(d), initial=0.0) + 2 * np.max(np.abs(e), initial=0.0))
    tiny = eps * eps * anorm
    for l in range(n):
        iterations = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd or abs(e[m]) <= tiny:
                    break
                m += 1
            if m == l:
                break
            iterations += 1
            if iterations > QL_MAX_ITER:
                raise ConvergenceError(f"QL iteration did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            deflated = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = z[:, i].copy()
                z[:, i] = c * zi - s * z[:, i + 1]
                z[:, i + 1] = s * zi + c * z[:, i + 1]
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    order = np.argsort(d, kind="stable")
    return d[order], z[:, order]


def eigen_tridiag(block: ExcitationBlock) -> TridiagonalSpectrum:
    if block.dim < 1:
        raise ValueError("empty block")
    values, vectors = tridiagonal_eigh(np.zeros(block.dim), block.offdiag)
    return TridiagonalSpectrum(values, vectors)


def null_space_analysis(block: ExcitationBlock) -> NullSpace:
    if any(e <= 0 for e in block.offdiag):
        raise ZeroCoupling(f"block E={block.excitation} has a vanishing coupling: {block.offdiag}")
    spectrum = eigen_tridiag(block)
    magnitudes = np.abs(spectrum.eigenvalues)
    i_min = int(np.argmin(magnitudes))
    scale = float(np.max(magnitudes))
    min_abs = float(magnitudes[i_min])
    if min_abs > NULL_REL_TOL * scale:
        return NullSpace(False, (), (), None, min_abs)
    v = spectrum.eigenvectors[:, i_min]
    v = v * np.sign(v[0]) if v[0] != 0 else v
    keep = np.flatnonzero(np.abs(v) > SUPPORT_REL_TOL * np.linalg.norm(v))
    support = tuple(int(i) + 1 for i in keep)
    states = tuple(block.basis[i] for i in keep)
    return NullSpace(True, support, states, v, min_abs)


def null_vector_recurrence(offdiag: Sequence[float]) -> np.ndarray:
    """Null vector of an odd-dimensional zero-diagonal tridiagonal matrix.

    Row ``i`` of ``M v = 0`` reads ``e_{i-1} v_{i-1} + e_i v_{i+1} = 0``, so the
    even positions vanish and odd positions follow a two-term recurrence.
    """
    e = np.asarray(offdiag, dtype=float)
    n = e.size + 1
    if n % 2 == 0:
        raise ValueError("even-dimensional blocks have no null vector")
    v = np.zeros(n)
    v[0] = 1.0
    for i in range(1, n - 1, 2):
        v[i + 1] = -e[i - 1] * v[i - 1] / e[i]
    return v / np.linalg.norm(v)


def predict_max_photons(levels: int, profile: Optional[CouplingProfile] = None) -> ParityPrediction:
    """Largest photon number reachable through resonant null-vector chains.

    The chain starts at the vacuum block ``E = 0`` and moves through
    ``E = 2, 4, ...`` while each block has a null eigenvalue.  Once the block
    dimension saturates at ``N`` with a null eigenvalue, every further block
    has one too and photon production is unbounded (``max_photons = None``).
    """
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if profile is None:
        profile = CouplingProfile(tuple(math.sqrt(j) for j in range(1, levels)))
    chain = [0]
    excitation = 0
    while True:
        excitation += 2
        block = build_block(profile, levels, excitation)
        if not null_space_analysis(block).has_null:
            return ParityPrediction(chain[-1], tuple(chain))
        chain.append(excitation)
        if block.dim == levels:
            return ParityPrediction(None, tuple(chain))


@dataclass(frozen=True)
class BlockReportRow:
    excitation: int
    dim: int
    has_null: bool
    min_abs_eigenvalue: float
    support: Tuple[Tuple[int, int], ...]


def block_report(profile: CouplingProfile, levels: int, max_excitation: int) -> list:
    rows = []
    for excitation in range(max_excitation + 1):
        block = build_block(profile, levels, excitation)
        info = null_space_analysis(block)
        rows.append(BlockReportRow(excitation, block.dim, info.has_null, info.min_abs_eigenvalue, info.states))
    return rows
