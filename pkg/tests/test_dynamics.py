import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcecavity.dynamics import (
    GeneratorSpec,
    assemble_hamiltonian,
    auto_cutoff,
    coupling_profile,
    expm_oracle,
    integrate_adaptive,
    rhs_apply,
    simulate,
)
from dcecavity.errors import ConfigError, NonFiniteAmplitude, NormDriftExceeded, TruncationOverflow
from dcecavity.statespace import (
    CouplingProfile,
    StateVector,
    SystemSpec,
    Tolerances,
    mandel_q,
    mean_photon,
    observe,
    parity_mask,
    quadrature_moments,
)

from conftest import random_state


def vacuum(gen):
    table = np.zeros(gen.shape, dtype=complex)
    table[0, 0] = 1
    return StateVector(table)


def gen_for(kind, levels, g, epsilon, cutoff):
    return GeneratorSpec(epsilon / 4, coupling_profile(kind, levels, g), levels, cutoff)


# -- coupling profiles -------------------------------------------------------

def test_ladder_profile():
    prof = coupling_profile("ho", 4, 0.01)
    np.testing.assert_allclose(prof.couplings, [0.01, 0.01 * math.sqrt(2), 0.01 * math.sqrt(3)], rtol=1e-15)


def test_dicke_profile():
    prof = coupling_profile("two-level-ensemble", 4, 0.01)
    np.testing.assert_allclose(prof.couplings, [0.01 * math.sqrt(3), 0.02, 0.01 * math.sqrt(3)], rtol=1e-15)


@pytest.mark.parametrize("kind", ["ladder", "two-level-ensemble", "ho"])
def test_single_level_profile_is_empty(kind):
    assert coupling_profile(kind, 1, 0.3).couplings == ()


def test_profile_boundary_convention():
    prof = coupling_profile("ladder", 3, 1.0)
    assert prof[0] == 0.0 and prof[3] == 0.0 and prof[2] == pytest.approx(math.sqrt(2))


def test_generator_rejects_wrong_profile_length():
    with pytest.raises(ConfigError):
        GeneratorSpec(0.1, CouplingProfile((1.0,)), 3, 8)


# -- right-hand side ---------------------------------------------------------

def test_rhs_from_vacuum():
    gen = gen_for("ladder", 3, 0.01, 1e-3, 8)
    d = rhs_apply(vacuum(gen), gen)
    expected = np.zeros(gen.shape, complex)
    expected[0, 2] = math.sqrt(2) * gen.beta
    np.testing.assert_allclose(d, expected, atol=1e-18)


def test_rhs_coupling_rows():
    g1, g2 = 0.013, 0.029
    gen = GeneratorSpec(0.0, CouplingProfile((g1, g2)), 3, 6)
    state = StateVector.from_components(3, 6, {(2, 1): 1})
    d = rhs_apply(state, gen)
    expected = np.zeros(gen.shape, complex)
    expected[0, 2] = -1j * g1 * math.sqrt(2)
    expected[2, 0] = -1j * g2
    np.testing.assert_allclose(d, expected, atol=1e-18)


def test_rhs_matches_operator_hamiltonian(rng):
    gen = GeneratorSpec(0.37, CouplingProfile((0.2, 0.5, 0.11)), 4, 9)
    state = random_state(rng, 4, 9)
    h = assemble_hamiltonian(gen)
    expected = (-1j * h @ state.amplitudes.reshape(-1)).reshape(gen.shape)
    np.testing.assert_allclose(rhs_apply(state, gen), expected, atol=1e-14)


def test_rhs_dimension_mismatch():
    gen = gen_for("ladder", 3, 0.01, 1e-3, 8)
    with pytest.raises(ConfigError):
        rhs_apply(np.zeros((3, 5)), gen)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), levels=st.integers(1, 5), cutoff=st.integers(2, 12),
       beta=st.floats(-1, 1), g=st.floats(0, 1))
def test_generator_is_norm_preserving(seed, levels, cutoff, beta, g):
    rng = np.random.default_rng(seed)
    gen = GeneratorSpec(beta, coupling_profile("ladder", levels, g), levels, cutoff)
    state = random_state(rng, levels, cutoff)
    d = rhs_apply(state, gen)
    assert abs(np.vdot(state.amplitudes, d).real) < 1e-12


def test_parity_sector_stays_empty(rng):
    gen = gen_for("two-level-ensemble", 5, 0.3, 0.2, 11)
    state = random_state(rng, 5, 11, parity_sector=True)
    d = rhs_apply(state, gen)
    assert np.all(d[parity_mask(5, 11)] == 0)


# -- integration -------------------------------------------------------------

def test_empty_cavity_growth():
    eps = 1e-3
    gen = GeneratorSpec(eps / 4, CouplingProfile(()), 1, 40)
    traj = integrate_adaptive(vacuum(gen), gen, 1.0 / eps)
    n = mean_photon(traj.final)
    assert n == pytest.approx(math.sinh(0.5) ** 2, rel=1e-6)
    assert mandel_q(traj.final) == pytest.approx(1 + 2 * n, rel=1e-6)
    q = quadrature_moments(traj.final)
    assert q.p_var == pytest.approx(math.exp(-1) / 2, rel=1e-6)
    assert q.x_var == pytest.approx(math.exp(1) / 2, rel=1e-6)


def test_two_level_vacuum_is_stationary_without_modulation():
    gen = gen_for("ladder", 2, 1e-2, 0.0, 8)
    times = 2 * math.pi / (math.sqrt(2) * 1e-2) * np.arange(4)
    traj = integrate_adaptive(vacuum(gen), gen, times[-1], times=times)
    for s in traj.samples:
        np.testing.assert_array_equal(s.amplitudes, vacuum(gen).amplitudes)


def test_two_level_against_oracle():
    gen = gen_for("ladder", 2, 1e-2, 1e-3, 8)
    # tail health only matters for physical runs; here both routes share the truncation
    traj = integrate_adaptive(vacuum(gen), gen, 2000.0, Tolerances(tail_threshold=1.0))
    ref = expm_oracle(gen, vacuum(gen), 2000.0)
    assert np.max(np.abs(traj.final.amplitudes - ref.amplitudes)) < 1e-8


def test_trajectory_times_and_stats():
    gen = gen_for("ladder", 3, 1e-2, 1e-3, 20)
    traj = integrate_adaptive(vacuum(gen), gen, 300.0, sample_count=7)
    times = traj.times
    assert times[0] == 0.0 and times[-1] == 300.0
    assert np.all(np.diff(times) > 0)
    assert traj.stats.accepted >= 6
    assert traj.stats.max_norm_error < 1e-12
    assert traj.stats.max_parity_leak == 0.0


def test_time_reversal():
    gen = gen_for("two-level-ensemble", 4, 2e-2, 4e-3, 48)
    forward = integrate_adaptive(vacuum(gen), gen, 500.0).final
    backward_gen = GeneratorSpec(-gen.beta, gen.profile, gen.levels, gen.fock_cutoff)
    back = integrate_adaptive(StateVector(forward.amplitudes.conj()), backward_gen, 500.0).final
    assert np.max(np.abs(back.amplitudes - vacuum(gen).amplitudes)) < 1e-7


def test_tighter_tolerance_changes_little():
    tol = Tolerances(rel_tol=1e-8, abs_tol=1e-10)
    gen = gen_for("ladder", 3, 1e-2, 1e-3, 64)
    times = np.linspace(0, 1500, 6)
    coarse = [observe(s) for s in integrate_adaptive(vacuum(gen), gen, 1500, tol, times=times).samples]
    fine_tol = Tolerances(rel_tol=1e-10, abs_tol=1e-12)
    fine = [observe(s) for s in integrate_adaptive(vacuum(gen), gen, 1500, fine_tol, times=times).samples]
    for a, b in zip(coarse, fine):
        for name in ("n_mean", "x_var", "p_var", "purity"):
            assert abs(getattr(a, name) - getattr(b, name)) < 10 * tol.rel_tol * max(1.0, abs(getattr(b, name)))


def test_norm_drift_is_detected():
    gen = gen_for("ladder", 3, 1e-1, 1e-2, 30)
    with pytest.raises(NormDriftExceeded):
        integrate_adaptive(vacuum(gen), gen, 500.0, Tolerances(rel_tol=1e-2, abs_tol=1e-2, tail_threshold=1.0),
                           method="dopri5")


def test_truncation_overflow():
    gen = gen_for("ladder", 1, 0.0, 1e-2, 6)
    with pytest.raises(TruncationOverflow):
        integrate_adaptive(vacuum(gen), gen, 200.0)


def test_non_finite_start_rejected():
    gen = gen_for("ladder", 2, 1e-2, 1e-3, 6)
    table = np.zeros(gen.shape, complex)
    table[0, 0] = np.nan
    with pytest.raises(NonFiniteAmplitude):
        integrate_adaptive(StateVector(table), gen, 10.0)


# -- oracle ------------------------------------------------------------------

def test_oracle_identity_at_zero(rng):
    gen = gen_for("ladder", 3, 0.1, 0.02, 8)
    state = random_state(rng, 3, 8)
    np.testing.assert_allclose(expm_oracle(gen, state, 0.0).amplitudes, state.amplitudes, atol=1e-14)


def test_oracle_block_eigenvalues():
    g1 = 0.013
    gen = GeneratorSpec(0.0, CouplingProfile((g1,)), 2, 6)
    h = assemble_hamiltonian(gen)
    # E = 2 block: (1,2) -> index 2, (2,1) -> index 7 + 1
    idx = [0 * 7 + 2, 1 * 7 + 1]
    block = h[np.ix_(idx, idx)]
    np.testing.assert_allclose(np.linalg.eigvalsh(block), [-math.sqrt(2) * g1, math.sqrt(2) * g1], atol=1e-15)


def test_oracle_unitarity(rng):
    gen = gen_for("ladder", 4, 0.05, 0.01, 12)
    state = random_state(rng, 4, 12)
    for t in rng.uniform(0, 1e3, size=4):
        assert abs(expm_oracle(gen, state, t).norm_squared() - 1) < 1e-12


def test_oracle_size_limit():
    gen = gen_for("ladder", 40, 0.01, 1e-3, 60)
    with pytest.raises(ConfigError):
        expm_oracle(gen, vacuum(gen), 1.0)


@settings(max_examples=12, deadline=None)
@given(kind=st.sampled_from(["ladder", "two-level-ensemble", "ho"]), levels=st.integers(4, 5),
       cutoff=st.integers(6, 20), g=st.floats(1e-3, 1e-1), eps=st.floats(1e-4, 1e-2), seed=st.integers(0, 999))
def test_integrator_matches_oracle(kind, levels, cutoff, g, eps, seed):
    gen = gen_for(kind, levels, g, eps, cutoff)
    times = np.sort(np.random.default_rng(seed).uniform(1, 400, size=5))
    times = np.concatenate([[0.0], times])
    traj = integrate_adaptive(vacuum(gen), gen, times[-1], Tolerances(tail_threshold=1.0), times=times)
    for s in traj.samples[1:]:
        ref = expm_oracle(gen, vacuum(gen), s.time)
        assert np.max(np.abs(s.amplitudes - ref.amplitudes)) < 1e-7


# -- cutoff selection --------------------------------------------------------

def test_auto_cutoff_floor():
    assert auto_cutoff(SystemSpec(epsilon=1e-3, t_final=0.0)) == 24


def test_auto_cutoff_envelope():
    expected = math.ceil(8 * math.sinh(3.0) ** 2 + 24)
    assert expected == 827
    assert auto_cutoff(SystemSpec(epsilon=1e-3, t_final=6000.0)) == expected


def test_auto_doubling_on_overflow():
    spec = SystemSpec(levels=1, g=0.0, epsilon=1e-3, t_final=3000.0)
    traj = simulate(spec, sample_count=4, auto=True)
    assert traj.final.fock_cutoff > auto_cutoff(spec)
    assert mean_photon(traj.final) == pytest.approx(math.sinh(1.5) ** 2, rel=1e-8)


def test_fixed_cutoff_is_not_doubled():
    spec = SystemSpec(levels=3, g=1e-2, epsilon=1e-3, fock_cutoff=4, t_final=2000.0)
    with pytest.raises(TruncationOverflow):
        simulate(spec, sample_count=3)


def test_doubled_cutoff_converges():
    spec = SystemSpec(levels=3, g=1e-2, epsilon=1e-3, t_final=2000.0)
    times = np.linspace(0, 2000, 5)
    base = simulate(spec, times, auto=True)
    K = base.final.fock_cutoff
    wide = simulate(SystemSpec(levels=3, g=1e-2, epsilon=1e-3, fock_cutoff=2 * K, t_final=2000.0), times)
    for a, b in zip(base.samples[1:], wide.samples[1:]):
        assert abs(mean_photon(a) - mean_photon(b)) < 1e-8 * mean_photon(b)


@pytest.mark.slow
def test_wide_oscillator_detector_matches_closed_form():
    from dcecavity.analytic import HOParams, ho_observables

    # the detector ladder needs room for the squeezed tail before it behaves as an oscillator
    spec = SystemSpec(detector_kind="ho", levels=80, g=1e-2, epsilon=1e-3, t_final=4500.0)
    traj = simulate(spec, np.linspace(0, 4500, 10), auto=True)
    params = HOParams.from_epsilon(1e-3, 1e-2)
    for s in traj.samples[1:]:
        rec, ref = observe(s), ho_observables(params, s.time)
        assert float(ref.n_field + ref.n_detector) < 4
        for num, exact in ((rec.n_mean, ref.n_field), (rec.n_detector, ref.n_detector),
                           (rec.x_var, ref.x_var), (rec.p_var, ref.p_var), (rec.purity, ref.purity)):
            assert num == pytest.approx(float(exact), rel=1e-4)
