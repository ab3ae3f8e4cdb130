import numpy as np
import pytest

from dcecavity import rk
from dcecavity.errors import DCEError


def rotation(t, y):
    return -1j * np.array([1.0, 2.0]) * y


@pytest.mark.parametrize("tableau", [rk.DOPRI5, rk.DOP853])
def test_consistency_conditions(tableau):
    assert tableau.b.sum() == pytest.approx(1.0, abs=1e-14)
    for i in range(1, tableau.stages):
        assert tableau.a[i, :i].sum() == pytest.approx(tableau.c[i], abs=1e-13)


@pytest.mark.parametrize("tableau", [rk.DOPRI5, rk.DOP853])
def test_observed_convergence_order(tableau):
    # global error on y' = -i w y must fall as h**order
    y0 = np.array([1.0 + 0j, 1.0 + 0j])
    exact = np.exp(-1j * np.array([1.0, 2.0]) * 4.0)
    solver = rk.EmbeddedRK(rotation, tableau)
    errors = []
    steps = (20, 40) if tableau.order >= 8 else (40, 80)
    for n in steps:
        errors.append(np.max(np.abs(solver.fixed(y0, 0.0, 4.0, n) - exact)))
    observed = np.log2(errors[0] / errors[1])
    assert observed == pytest.approx(tableau.order, abs=0.6)


@pytest.mark.parametrize("method", ["dopri5", "dop853"])
def test_adaptive_meets_tolerance_and_lands_on_outputs(method):
    times = np.linspace(0.0, 10.0, 7)
    out, stats = rk.integrate(rotation, np.array([1.0 + 0j, 1.0]), times, 1e-10, 1e-12, 0.01, rk.TABLEAUX[method])
    for t, y in zip(times, out):
        np.testing.assert_allclose(y, np.exp(-1j * np.array([1.0, 2.0]) * t), atol=1e-8)
    assert stats.accepted > 0


def test_rejects_unsorted_times():
    with pytest.raises(ValueError):
        rk.integrate(rotation, np.ones(2, complex), [0.0, 2.0, 1.0], 1e-8, 1e-10, 0.1)


def test_on_accept_sees_every_step():
    seen = []
    _, stats = rk.integrate(rotation, np.ones(2, complex), [0.0, 3.0], 1e-9, 1e-12, 0.1,
                            on_accept=lambda t, y: seen.append(t))
    assert len(seen) == stats.accepted
    assert seen[-1] == 3.0
    assert all(b > a for a, b in zip(seen, seen[1:]))


def test_step_budget():
    with pytest.raises(DCEError):
        rk.integrate(rotation, np.ones(2, complex), [0.0, 100.0], 1e-12, 1e-14, 0.01, max_steps=5)
