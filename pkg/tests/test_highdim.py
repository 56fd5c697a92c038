import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tanksep.errors import InvalidInputError
from tanksep.highdim import (KsSpec, Lorenz96Spec, integrate_ks, integrate_lorenz96, ks_initial, lorenz96_field,
                             lorenz96_initial, substeps_for)

KS = KsSpec()
L96 = Lorenz96Spec()


@pytest.fixture(scope="module")
def ks_chaotic_state():
    y0 = ks_initial(KS, np.random.default_rng(0))
    return integrate_ks(KS, y0, 100.0).values[-1]


def test_spec_defaults():
    assert (KS.domain_length, KS.n_modes, KS.dt) == (22.0, 32, 1.0 / 16.0)
    assert (L96.n, L96.forcing, L96.dt) == (32, 8.0, 0.001)
    with pytest.raises(InvalidInputError):
        Lorenz96Spec(n=3)
    with pytest.raises(InvalidInputError):
        KsSpec(domain_length=-1.0)


@pytest.mark.parametrize("sample_dt, step, k", [(0.03, 1 / 16, 1), (0.125, 1 / 16, 2), (0.03, 0.001, 30)])
def test_substeps(sample_dt, step, k):
    assert substeps_for(sample_dt, step) == k


def test_ks_zero_is_fixed():
    traj = integrate_ks(KS, np.zeros(32), 10.0)
    assert traj.n_samples == 160
    assert traj.dt == 1.0 / 16.0
    assert np.all(traj.values == 0.0)


def test_ks_mean_conserved_long_run():
    y0 = 0.1 * np.random.default_rng(5).standard_normal(32) + 0.3
    traj = integrate_ks(KS, y0, 1000.0)
    assert np.abs(traj.values.mean(axis=1) - y0.mean()).max() < 1e-8


def test_ks_bounded_chaos():
    traj = integrate_ks(KS, ks_initial(KS, np.random.default_rng(1)), 500.0)
    late = traj.values[traj.n_samples // 2:]
    assert np.abs(traj.values).max() < 5.0
    assert late.std() > 0.5  # did not decay to the flat state


def test_ks_matches_fine_reference(ks_chaotic_state):
    coarse = integrate_ks(KS, ks_chaotic_state, 5.0).values
    fine = integrate_ks(KsSpec(dt=1.0 / 64.0), ks_chaotic_state, 5.0, sample_dt=1.0 / 16.0).values
    assert coarse.shape == fine.shape
    assert np.abs(coarse - fine).max() < 1e-4


def test_ks_etdrk4_third_order_or_better(ks_chaotic_state):
    def final(dt):
        return integrate_ks(KsSpec(dt=dt), ks_chaotic_state, 10.0 + dt).values[-1]

    ref = final(1.0 / 1024.0)
    errs = [np.linalg.norm(final(2.0 ** -k) - ref) for k in (4, 5, 6)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 3.0), orders


def test_ks_resampled_to_tank_step(ks_chaotic_state):
    traj = integrate_ks(KS, ks_chaotic_state, 3.0, sample_dt=0.03)
    assert traj.dt == pytest.approx(0.03)
    assert traj.n_samples == 100


def test_ks_input_checks():
    with pytest.raises(InvalidInputError):
        integrate_ks(KS, np.zeros(16), 1.0)
    with pytest.raises(InvalidInputError):
        integrate_ks(KS, np.full(32, np.nan), 1.0)


def test_l96_fixed_point():
    traj = integrate_lorenz96(L96, np.full(32, 8.0), 5.0)
    assert np.all(traj.values == 8.0)


l96_states = arrays(np.float64, 32, elements=st.floats(-20.0, 20.0, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(x=l96_states)
def test_l96_energy_identity(x):
    # the advection term conserves sum x_i^2
    lhs = 2.0 * np.dot(x, lorenz96_field(x))
    rhs = 2.0 * np.sum(x * (8.0 - x))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-8 * (1 + np.dot(x, x)))


def test_l96_field_indices():
    x = np.arange(32, dtype=float)
    f = lorenz96_field(x)
    i = 5
    assert f[i] == (x[i + 1] - x[i - 2]) * x[i - 1] - x[i] + 8.0
    assert f[0] == (x[1] - x[30]) * x[31] - x[0] + 8.0


def test_l96_twin_divergence():
    x0 = np.full(32, 8.0)
    x0[0] += 1e-3
    traj = integrate_lorenz96(L96, x0, 10.0, sample_dt=0.1)
    err = np.linalg.norm(traj.values - 8.0, axis=1) / np.sqrt(32)
    assert err[0] < 1e-3
    assert err.max() > 1.0


def test_l96_rk4_fourth_order():
    x0 = lorenz96_initial(L96, np.random.default_rng(2), amplitude=1.0)

    def final(dt):
        return integrate_lorenz96(Lorenz96Spec(dt=dt), x0, 1.0 + 0.1, sample_dt=0.1).values[-1]

    ref = final(1e-4)
    errs = [np.linalg.norm(final(dt) - ref) for dt in (0.01, 0.005, 0.0025)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    np.testing.assert_allclose(orders, 4.0, atol=0.3)


def test_l96_resampling():
    traj = integrate_lorenz96(L96, lorenz96_initial(L96, np.random.default_rng(0)), 3.0, sample_dt=0.03)
    assert traj.n_samples == 100
    assert traj.dt == pytest.approx(0.03)
