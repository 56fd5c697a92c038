import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import fsolve

from tanksep.attractors import (ATTRACTORS, CONSTANT_TRACE, SYSTEM_NAMES, advance, eval_vector_field,
                                get_attractor, integrate_rk4, jacobian, kaplan_yorke, lyapunov_spectrum,
                                normalize, on_attractor_state)
from tanksep.errors import DegenerateChannelError, InvalidInputError, NumericalBlowupError
from tanksep.trajectory import Trajectory

finite = st.floats(-20.0, 20.0, allow_nan=False)
states = st.tuples(finite, finite, finite).map(np.array)


def test_six_systems_of_dimension_three():
    assert SYSTEM_NAMES == ("SprottN", "Rossler", "Halvorsen", "Lorenz", "SprottB", "Thomas")
    for spec in ATTRACTORS:
        assert spec.dimension == 3
        assert spec.integration_dt == 1e-4


@pytest.mark.parametrize("alias", ["rossler", "Rössler", "ROSSLER", "roessler"])
def test_lookup_aliases(alias):
    assert get_attractor(alias).name == "Rossler"


def test_unknown_name():
    with pytest.raises(InvalidInputError, match="unknown attractor"):
        get_attractor("Chua")


@pytest.mark.parametrize("name, state, expected", [
    ("Lorenz", (0, 0, 0), (0, 0, 0)),
    ("Thomas", (0, 0, 0), (0, 0, 0)),
    ("SprottN", (0, 0, 0), (0, 0, 5)),
])
def test_vector_field_examples(name, state, expected):
    np.testing.assert_array_equal(eval_vector_field(name, np.array(state, float)), expected)


def test_vector_field_coefficients():
    s = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(eval_vector_field("SprottN", s), [-20, 50, -15])
    np.testing.assert_allclose(eval_vector_field("Rossler", s), [-25, 10, -35])
    np.testing.assert_allclose(eval_vector_field("Halvorsen", s), [-1.4 - 8 - 12 - 4, -2.8 - 12 - 4 - 9, -4.2 - 4 - 8 - 1])
    np.testing.assert_allclose(eval_vector_field("Lorenz", s), [10, 23, -8 + 2])
    np.testing.assert_allclose(eval_vector_field("SprottB", s), [48, -8, -8])
    np.testing.assert_allclose(eval_vector_field("Thomas", s),
                               [-1.85 + 10 * math.sin(2), -3.7 + 10 * math.sin(3), -5.55 + 10 * math.sin(1)])


@pytest.mark.parametrize("bad", [(np.nan, 0, 0), (0, np.inf, 0)])
def test_vector_field_rejects_non_finite(bad):
    with pytest.raises(InvalidInputError):
        eval_vector_field("Lorenz", np.array(bad, float))


def test_vector_field_rejects_wrong_shape():
    with pytest.raises(InvalidInputError):
        eval_vector_field("Lorenz", np.zeros(4))


@settings(max_examples=60, deadline=None)
@given(spec=st.sampled_from(ATTRACTORS), s=states)
def test_jacobian_matches_finite_differences(spec, s):
    eps = 1e-6
    fd = np.column_stack([(eval_vector_field(spec, s + eps * e) - eval_vector_field(spec, s - eps * e)) / (2 * eps)
                          for e in np.eye(3)])
    np.testing.assert_allclose(jacobian(spec, s), fd, atol=1e-5 * (1 + np.abs(fd)).max())


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(sorted(CONSTANT_TRACE)), s=states)
def test_constant_trace(name, s):
    assert np.trace(jacobian(name, s)) == pytest.approx(CONSTANT_TRACE[name], rel=1e-12)


def test_lorenz_origin_constant_trajectory():
    traj = integrate_rk4("Lorenz", np.zeros(3), 3000, subsample=300)
    assert traj.n_samples == 10
    assert traj.dt == pytest.approx(0.03)
    assert np.all(traj.values == 0.0)


def _fixed_points(spec):
    found = []
    rng = np.random.default_rng(3)
    for start in rng.uniform(-10, 10, size=(40, 3)):
        root, info, ier, _ = fsolve(lambda s: eval_vector_field(spec, s), start, fprime=lambda s: jacobian(spec, s),
                                    full_output=True, xtol=1e-14)
        if ier == 1 and np.linalg.norm(eval_vector_field(spec, root)) < 1e-10:
            if not any(np.linalg.norm(root - f) < 1e-6 for f in found):
                found.append(root)
    return found


@pytest.mark.parametrize("spec", ATTRACTORS, ids=SYSTEM_NAMES)
def test_fixed_points_give_constant_trajectories(spec):
    points = _fixed_points(spec)
    assert points, "no fixed point found"
    for p in points:
        traj = integrate_rk4(spec, p, 1000, subsample=100)
        drift = np.abs(traj.values - p).max()
        assert drift < 1e-8, (p, drift)


def test_rk4_fourth_order_self_convergence():
    x0 = np.array([1.0, 1.0, 1.0])
    T = 1.0
    ref = advance("Lorenz", x0, T, dt=1e-6)
    errors = [np.linalg.norm(advance("Lorenz", x0, T, dt=dt) - ref) for dt in (2e-3, 1e-3, 5e-4)]
    ratios = [errors[i] / errors[i + 1] for i in range(2)]
    for r in ratios:
        assert 13.0 < r < 19.0, ratios


def test_thomas_long_run_bounded():
    traj = integrate_rk4("Thomas", np.array([1.0, 0.0, 0.0]), 50_000_000, subsample=300)
    assert np.abs(traj.values).max() < 10.0


def test_blowup_reports_step():
    with pytest.raises(NumericalBlowupError) as info:
        integrate_rk4("Lorenz", np.array([1.0, 1.0, 1.0]), 100, dt=1.0)
    assert info.value.step is not None and info.value.step >= 1


def test_integrate_argument_checks():
    with pytest.raises(InvalidInputError):
        integrate_rk4("Lorenz", np.ones(3), 10, dt=-1e-4)
    with pytest.raises(InvalidInputError):
        integrate_rk4("Lorenz", np.ones(3), 10, subsample=0)


def test_stored_spacing():
    traj = integrate_rk4("Rossler", on_attractor_state("Rossler"), 3000, subsample=300)
    assert traj.dt == pytest.approx(0.03)
    assert traj.n_samples == 10


def test_on_attractor_state_is_deterministic():
    np.testing.assert_array_equal(on_attractor_state("Lorenz", 3.0), on_attractor_state("Lorenz", 3.0))


# normalization

def test_normalize_hand_example():
    out = normalize(Trajectory(np.array([0.0, 2.0, 4.0]), 1.0))
    # population std of (0, 2, 4) is sqrt(8/3)
    np.testing.assert_allclose(out.values[:, 0], [-math.sqrt(1.5), 0.0, math.sqrt(1.5)], rtol=1e-15)
    assert out.values[0, 0] == pytest.approx(-1.224744871391589)
    assert out.normalization.mean[0] == 2.0
    assert out.normalization.std[0] == pytest.approx(math.sqrt(8.0 / 3.0))


def test_normalize_constant_channel():
    vals = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
    with pytest.raises(DegenerateChannelError, match="c1"):
        normalize(Trajectory(vals, 1.0))


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-1e3, 1e3), n=st.integers(1, 50))
def test_normalize_any_constant_channel(c, n):
    with pytest.raises(DegenerateChannelError):
        normalize(Trajectory(np.full(n, c), 1.0))


def test_normalize_already_normalized_is_identity():
    v = np.random.default_rng(0).standard_normal((500, 3))
    v = (v - v.mean(0)) / v.std(0)
    out = normalize(Trajectory(v, 0.1))
    np.testing.assert_allclose(out.values, v, atol=1e-12)
    np.testing.assert_allclose(out.normalization.mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(out.normalization.std, 1.0, atol=1e-12)


series = arrays(np.float64, st.tuples(st.integers(3, 60), st.integers(1, 4)),
                elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=80, deadline=None)
@given(v=series)
def test_normalize_properties(v):
    assume(np.all(v.std(axis=0) > 1e-6 * (1 + np.abs(v).max())))
    once = normalize(Trajectory(v, 1.0))
    np.testing.assert_allclose(once.values.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(once.values.var(axis=0), 1.0, atol=1e-6)
    twice = normalize(once)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)
    np.testing.assert_allclose(once.normalization.invert(once.values), v, atol=1e-9 * (1 + np.abs(v).max()))


# Kaplan-Yorke

@pytest.mark.parametrize("lam, expected", [((1.0, -2.0), 1.5), ((-1.0, -2.0), 0.0), ((1.0, 0.5), 2.0),
                                           ((0.0, -1.0), 1.0)])
def test_kaplan_yorke_definition(lam, expected):
    assert kaplan_yorke(lam) == pytest.approx(expected)


def test_kaplan_yorke_lorenz_row():
    assert kaplan_yorke((0.931, -0.017, -14.588)) == pytest.approx(2.0627, abs=5e-4)


def test_kaplan_yorke_unsorted():
    with pytest.raises(InvalidInputError, match="descending"):
        kaplan_yorke((-1.0, 0.5))


spectra = st.lists(st.floats(-20.0, 5.0, allow_nan=False), min_size=1, max_size=6).map(
    lambda xs: sorted(xs, reverse=True))


@settings(max_examples=150, deadline=None)
@given(lam=spectra, extra=st.lists(st.floats(1.0, 100.0), min_size=1, max_size=3))
def test_kaplan_yorke_properties(lam, extra):
    d = kaplan_yorke(lam)
    assert 0.0 <= d <= len(lam)
    if sum(lam) < 0:
        # a partial sum goes negative inside the spectrum, so exponents below it do not matter
        tail = sorted((lam[-1] - e for e in extra), reverse=True)
        assert kaplan_yorke(lam + tail) == pytest.approx(d, rel=1e-12, abs=1e-12)


# Lyapunov spectra (short runs; the full-length values are acceptance checks)

def test_lyapunov_short_lorenz():
    res = lyapunov_spectrum("Lorenz", total_time=100.0)
    assert np.all(np.diff(res.exponents) <= 0)
    assert res.exponent_sum == pytest.approx(-41.0 / 3.0, rel=0.02)
    assert res.mean_trace == pytest.approx(-41.0 / 3.0, rel=1e-9)
    assert 0.0 <= res.kaplan_yorke_dimension <= 3.0
    assert res.integration_time == pytest.approx(100.0)
    assert res.qr_interval == pytest.approx(0.1)


def test_lyapunov_deterministic():
    a = lyapunov_spectrum("Rossler", total_time=20.0)
    b = lyapunov_spectrum("Rossler", total_time=20.0)
    np.testing.assert_array_equal(a.exponents, b.exponents)


def test_lyapunov_blowup():
    with pytest.raises(NumericalBlowupError):
        lyapunov_spectrum("Lorenz", total_time=10.0, dt=0.5, qr_interval=0.5, transient=0.0)


@pytest.mark.slow
@pytest.mark.parametrize("name", SYSTEM_NAMES)
def test_lyapunov_has_flow_exponent(lyapunov_all, name):
    lam = lyapunov_all[name].exponents
    assert np.min(np.abs(lam)) < 0.05, lam


@pytest.mark.slow
@pytest.mark.parametrize("name", SYSTEM_NAMES)
def test_exponent_sum_matches_mean_trace(lyapunov_all, name):
    res = lyapunov_all[name]
    assert res.exponent_sum == pytest.approx(res.mean_trace, rel=0.02)
