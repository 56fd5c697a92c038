import math
from dataclasses import replace

import numpy as np
import pytest

from tanksep import pipeline
from tanksep.attractors import SYSTEM_NAMES
from tanksep.errors import DryCellError, InvalidInputError, NumericalBlowupError
from tanksep.pipeline import (ExperimentConfig, MseMatrix, add_noise, content_hash, correlation_per_channel,
                              highdim_config, labeled_rng, matrix_pairs, mix, noise_sweep, run_matrix,
                              run_separation, source_key, source_pair, source_stretches, write_manifest)
from tanksep.tank import TankConfig
from tanksep.trajectory import Trajectory

TINY_TANK = TankConfig(nx=32, ny=32, n_probes=150)
TINY = ExperimentConfig(tank=TINY_TANK, t_dump=3.0, t_train=30.0, t_test=15.0)


@pytest.fixture(scope="module")
def tiny_result():
    return run_separation(TINY)


@pytest.fixture(scope="module")
def lorenz_rossler_sources():
    return source_pair(ExperimentConfig())


# configuration and seeds

def test_config_defaults():
    cfg = ExperimentConfig()
    assert (cfg.source_a, cfg.source_b) == ("Lorenz", "Rossler")
    assert (cfg.t_dump, cfg.t_train, cfg.t_test, cfg.alpha) == (600.0, 600.0, 600.0, 1e-3)
    assert cfg.n_train == 20000 and cfg.n_dump == 20000 and cfg.n_test == 20000


def test_config_validation():
    with pytest.raises(InvalidInputError, match="multiple"):
        ExperimentConfig(t_train=1.0001)
    with pytest.raises(InvalidInputError):
        ExperimentConfig(t_test=0.0)
    with pytest.raises(InvalidInputError):
        ExperimentConfig(noise_sigma=-1.0)
    with pytest.raises(InvalidInputError):
        ExperimentConfig(source_a="Duffing")


@pytest.mark.parametrize("name, key", [("ks", "KS"), ("Kuramoto-Sivashinsky", "KS"), ("L96", "Lorenz96"),
                                       ("lorenz 96", "Lorenz96"), ("sprott n", "SprottN"), ("Rössler", "Rossler")])
def test_source_keys(name, key):
    assert source_key(name) == key


def test_canonical_is_stable():
    assert TINY.canonical() == replace(TINY).canonical()
    assert "master_seed = 0" in TINY.canonical()
    assert TINY.canonical() != replace(TINY, master_seed=1).canonical()


def test_labeled_rng():
    a = labeled_rng(0, "noise", "Lorenz").standard_normal(5)
    np.testing.assert_array_equal(a, labeled_rng(0, "noise", "Lorenz").standard_normal(5))
    assert not np.array_equal(a, labeled_rng(0, "noise", "Rossler").standard_normal(5))
    assert not np.array_equal(a, labeled_rng(1, "noise", "Lorenz").standard_normal(5))


def test_content_hash_is_git_blob_sha1():
    # git hash-object of an empty file
    assert content_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert content_hash("a", b"b") == content_hash("ab")


# mixing and noise

def test_mix_examples(lorenz_rossler_sources):
    a, b = lorenz_rossler_sources
    zero = b.with_values(np.zeros_like(b.values))
    np.testing.assert_array_equal(mix(a, zero).values, a.values)
    np.testing.assert_array_equal(mix(a, b).values, mix(b, a).values)
    window = mix(a, b).values[:20000]
    assert np.all(np.abs(window.var(axis=0) - 2.0) < 0.2)


def test_mix_misaligned():
    a = Trajectory(np.zeros((10, 3)), 0.03)
    with pytest.raises(InvalidInputError):
        mix(a, Trajectory(np.zeros((9, 3)), 0.03))


def test_add_noise_statistics():
    clean = Trajectory(np.zeros((20000, 3)), 0.03)
    assert add_noise(clean, 0.0, 1) is clean
    for sigma in (0.01, 0.1, 1.0):
        d = add_noise(clean, sigma, 1).values - clean.values
        np.testing.assert_allclose(d.var(axis=0), sigma ** 2, rtol=0.05)
    n1 = add_noise(clean, 1.0, 1).values
    n2 = add_noise(clean, 1.0, 2).values
    for i in range(3):
        assert abs(np.corrcoef(n1[:, i], n2[:, i])[0, 1]) < 0.05
    np.testing.assert_array_equal(n1, add_noise(clean, 1.0, 1).values)
    with pytest.raises(InvalidInputError):
        add_noise(clean, -0.1, 1)


# sources

def test_sources_normalized_per_stretch(lorenz_rossler_sources):
    a, b = lorenz_rossler_sources
    for s in (a, b):
        assert s.n_samples == 80000 and s.dt == pytest.approx(0.03)
        for part in (s.values[:40000], s.values[40000:]):
            np.testing.assert_allclose(part.mean(axis=0), 0.0, atol=1e-9)
            np.testing.assert_allclose(part.var(axis=0), 1.0, atol=1e-6)


def test_test_stretch_starts_fresh(lorenz_rossler_sources):
    a, _ = lorenz_rossler_sources
    steps = np.linalg.norm(np.diff(a.values[39990:40010], axis=0), axis=1)
    # the jump between the stretches dwarfs the ordinary per-sample motion
    assert steps[9] > 5 * np.delete(steps, 9).max()


def test_same_system_sources_start_apart():
    cfg = replace(TINY, source_a="Lorenz", source_b="Lorenz")
    (train_a, test_a), (train_b, test_b) = source_stretches(cfg)
    for x, y in ((train_a, train_b), (test_a, test_b)):
        raw_x = x.normalization.invert(x.values[0])
        raw_y = y.normalization.invert(y.values[0])
        assert np.linalg.norm(raw_x - raw_y) >= 1.0
        assert not np.allclose(x.values, y.values)
    a, _ = source_pair(cfg)
    np.testing.assert_array_equal(a.values[:train_a.n_samples], train_a.values)
    np.testing.assert_array_equal(a.values[train_a.n_samples:], test_a.values)


def test_sources_deterministic():
    a1, b1 = source_pair(TINY)
    a2, b2 = source_pair(TINY)
    assert a1.values.tobytes() == a2.values.tobytes() and b1.values.tobytes() == b2.values.tobytes()
    a3, _ = source_pair(replace(TINY, master_seed=5))
    assert a3.values.tobytes() != a1.values.tobytes()


def test_highdim_sources():
    cfg = highdim_config(48, t_dump=3.0, t_train=3.0, t_test=3.0)
    assert (cfg.source_a, cfg.source_b) == ("KS", "Lorenz96")
    full = highdim_config().tank
    assert (full.nx, full.ny, full.b) == (256, 256, 0.6)
    assert full.input_gain == pytest.approx(math.sqrt(3 / 32))
    a, b = source_pair(cfg)
    assert a.dims == 32 and b.dims == 32
    assert a.n_samples == 400 and b.n_samples == 400


# separation runs

def test_separation_shapes_and_invariants(tiny_result):
    res = tiny_result
    assert res.estimated_a.values.shape == res.true_a.values.shape == (500, 3)
    assert res.estimated_b.values.shape == res.true_b.values.shape == (500, 3)
    assert res.estimated_a.aligned_with(res.true_a)
    assert res.true_a.t0 == pytest.approx((100 + 1000 + 100) * 0.03)
    recomputed = np.mean((res.estimated_a.values - res.true_a.values) ** 2)
    assert res.mse_a == pytest.approx(recomputed, rel=1e-12)
    assert res.mse_a_channels.shape == (3,) and res.train_mse.shape == (6,)
    assert res.model.W.shape == (6, 450) and res.model.split == 3
    assert res.substeps > 0 and len(res.input_hash) == 40


def test_separation_deterministic(tiny_result):
    again = run_separation(TINY)
    for name in ("estimated_a", "estimated_b", "true_a", "true_b"):
        assert getattr(again, name).values.tobytes() == getattr(tiny_result, name).values.tobytes()
    assert (again.mse_a, again.mse_b, again.input_hash) == (tiny_result.mse_a, tiny_result.mse_b,
                                                            tiny_result.input_hash)
    assert again.model.W.tobytes() == tiny_result.model.W.tobytes()


def _additivity_holds(res):
    est = np.hstack([res.estimated_a.values]) + res.estimated_b.values
    tru = res.true_a.values + res.true_b.values
    lhs = np.mean((est - tru) ** 2, axis=0)
    ma, mb = res.mse_a_channels, res.mse_b_channels
    return np.all(lhs <= ma + mb + 2 * np.sqrt(ma * mb) + 1e-12)


def test_estimate_additivity(tiny_result):
    assert _additivity_holds(tiny_result)


def test_phase_hook_and_csv(tmp_path):
    seen = []
    res = run_separation(TINY, phase_hook=lambda phase, tank: seen.append((phase, tank.steps)))
    assert seen == [("train", 1100), ("test", 600)]
    res.to_csv(tmp_path / "sep.csv")
    lines = (tmp_path / "sep.csv").read_text().splitlines()
    assert lines[0].startswith("t,est_a_x,est_a_y,est_a_z,est_b_x")
    assert len(lines) == 501
    back = np.loadtxt(tmp_path / "sep.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, 1:4], res.estimated_a.values)


def test_failure_carries_stage():
    with pytest.raises(DryCellError) as info:
        run_separation(replace(TINY, noise_sigma=1e4))
    assert info.value.stage == "train"
    assert "[train]" in str(info.value)


def test_highdim_tiny_run_deterministic():
    cfg = highdim_config(48, t_dump=3.0, t_train=15.0, t_test=6.0)
    r1 = run_separation(cfg)
    r2 = run_separation(cfg)
    assert r1.estimated_a.values.shape == (200, 32)
    assert r1.estimated_b.values.tobytes() == r2.estimated_b.values.tobytes()


def test_correlation_per_channel():
    rng = np.random.default_rng(0)
    t = Trajectory(rng.standard_normal((1000, 2)), 0.03)
    np.testing.assert_allclose(correlation_per_channel(t, t), 1.0)
    np.testing.assert_allclose(correlation_per_channel(t.with_values(-2 * t.values + 1), t), -1.0)


# matrix plumbing with a stand-in experiment

class _Fake:
    def __init__(self, mse_a, mse_b):
        self.mse_a, self.mse_b = mse_a, mse_b


def _fake_run(cfg):
    i, j = SYSTEM_NAMES.index(cfg.source_a), SYSTEM_NAMES.index(cfg.source_b)
    if (cfg.source_a, cfg.source_b) == ("Halvorsen", "Thomas"):
        raise NumericalBlowupError("synthetic failure", step=7)
    return _Fake(10 * i + j + cfg.noise_sigma, 10 * j + i + 0.5 + cfg.noise_sigma)


def test_matrix_pairs_count():
    pairs = matrix_pairs()
    assert len(pairs) == 21 and len(set(pairs)) == 21
    assert len(matrix_pairs(include_diagonal=False)) == 15


def test_run_matrix_layout_and_failures(monkeypatch, tmp_path):
    monkeypatch.setattr(pipeline, "run_separation", _fake_run)
    seen = []
    mat = run_matrix(TINY, progress=seen.append)
    assert len(seen) == 21
    v = mat.values
    assert v[1, 3] == 13 and v[3, 1] == 31.5  # Rossler+Lorenz pair
    assert v[0, 0] == pytest.approx((0 + 0.5) / 2)  # diagonal holds the mean of both recoveries
    assert math.isnan(v[2, 5]) and math.isnan(v[5, 2])
    assert list(mat.failures) == [("Halvorsen", "Thomas")]
    assert "synthetic failure" in mat.failures[("Halvorsen", "Thomas")]
    assert np.sum(np.isfinite(v)) == 34  # 36 entries less the failed pair
    assert mat.off_diagonal().size == 30
    mat.to_csv(tmp_path / "m.csv")
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert rows[0].split(",")[1:] == list(SYSTEM_NAMES)
    assert rows[2].split(",")[4] == "13"


def test_run_matrix_off_diagonal_only(monkeypatch):
    monkeypatch.setattr(pipeline, "run_separation", _fake_run)
    mat = run_matrix(TINY, systems=("Lorenz", "Rossler", "SprottB"), include_diagonal=False)
    assert np.all(np.isnan(np.diag(mat.values)))
    assert mat.off_diagonal_mean() == pytest.approx(np.mean([v for v in mat.values.ravel() if np.isfinite(v)]))


def test_noise_sweep_zero_sigma_reproduces_matrix():
    systems = ("Lorenz", "Rossler")
    base = replace(TINY, t_train=15.0, t_test=6.0)
    plain = run_matrix(base, systems=systems, include_diagonal=False)
    swept = noise_sweep(base, (0.0, 0.5), systems=systems, include_diagonal=False)
    assert set(swept) == {0.0, 0.5}
    np.testing.assert_array_equal(swept[0.0].values, plain.values)
    assert not np.array_equal(swept[0.5].values, plain.values)


def test_matrix_row_median_helper():
    values = np.arange(9.0).reshape(3, 3)
    mat = MseMatrix(values, ("a", "b", "c"))
    np.testing.assert_array_equal(mat.row_off_diagonal(1), [3.0, 5.0])


def test_manifest(tmp_path):
    write_manifest(tmp_path / "manifest.txt", TINY, outputs=["a.csv 123"], extra={"steps": 5}, input_hash="ff")
    text = (tmp_path / "manifest.txt").read_text()
    assert text.startswith("tool = tanksep ")
    for piece in ("[config]", "[seeds]", "master_seed = 0", "filter_seed = 0", "probe_seed = 1",
                  "content_hash = ff", "steps = 5", "a.csv 123"):
        assert piece in text


# full-size experiments (shared with the acceptance run)

@pytest.mark.slow
def test_lorenz_rossler_default_grid():
    res = run_separation(ExperimentConfig())
    assert res.mse_a < 0.5 and res.mse_b < 0.5, res.summary()
    assert np.all(res.train_mse[:3] < res.mse_a_channels) and np.all(res.train_mse[3:] < res.mse_b_channels)


@pytest.mark.slow
def test_training_error_below_test_error(matrix64):
    res = matrix64.results[("Rossler", "Lorenz")]
    test_mse = np.concatenate([res.mse_a_channels, res.mse_b_channels])
    assert np.all(res.train_mse < test_mse), (res.train_mse, test_mse)


@pytest.mark.slow
def test_same_system_pair_is_worse(matrix64):
    i, j = SYSTEM_NAMES.index("Lorenz"), SYSTEM_NAMES.index("Rossler")
    lorenz_lorenz = matrix64.results[("Lorenz", "Lorenz")].mse_a
    assert lorenz_lorenz > matrix64.values[i, j]


@pytest.mark.slow
def test_additivity_on_every_pair(matrix64):
    assert len(matrix64.results) == 21
    for pair, res in matrix64.results.items():
        assert _additivity_holds(res), pair


@pytest.mark.slow
def test_diagonal_above_every_row_companion(matrix64):
    v = matrix64.values
    for i in range(len(SYSTEM_NAMES)):
        off = np.delete(v[i], i)
        assert v[i, i] > off.max(), (SYSTEM_NAMES[i], v[i])


@pytest.mark.slow
def test_small_noise_entrywise_within_factor_two(matrix64, noise64):
    clean = matrix64.values
    noisy = noise64[0.01].values
    mask = ~np.eye(len(SYSTEM_NAMES), dtype=bool)
    ratio = noisy[mask] / clean[mask]
    assert np.all((ratio <= 2.0) & (ratio >= 0.5)), ratio


@pytest.mark.slow
def test_strong_noise_hurts(noise64):
    assert noise64[1.0].off_diagonal_mean() > noise64[0.01].off_diagonal_mean()
