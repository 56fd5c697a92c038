"""End-to-end separation experiments.

A run generates two normalized source signals, mixes them, drives a tank
from rest with the mixture, trains a ridge readout on the recorded probe
heights and scores it on a fresh mixture with the tank restarted from rest.
Each source is stored as

    [train dump | train | test dump | test]

where the test half starts from new initial conditions.  Each half is
normalized over its own length.  Every random draw comes from a generator
labelled by its role and derived from ``master_seed``.
"""

from __future__ import annotations

import hashlib
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import combinations_with_replacement

import numpy as np

from . import __version__
from .attractors import ATTRACTORS, SYSTEM_NAMES, get_attractor, integrate_rk4, on_attractor_state, normalize
from .errors import InvalidInputError, NumericalError, TanksepError
from .highdim import (KsSpec, Lorenz96Spec, integrate_ks, integrate_lorenz96, ks_initial,
                      lorenz96_initial)
from .readout import GramAccumulator, ReadoutModel, features, mse
from .tank import Tank, TankConfig, iter_probe_blocks, make_filters, make_probes
from .trajectory import Trajectory, atomic_write_text, matrix_to_csv

HIGHDIM_SOURCES = ("KS", "Lorenz96")
SOURCE_TRANSIENT = 100.0
# same-system sources start at least this far apart in state space
MIN_SEPARATION = 1.0
MAX_OFFSET = 100.0


def labeled_rng(master_seed, *labels):
    """Independent generator for ``labels`` derived from ``master_seed``."""
    words = [int(master_seed)]
    for label in labels:
        digest = hashlib.sha256(str(label).encode()).digest()
        words.append(int.from_bytes(digest[:8], "little"))
    return np.random.default_rng(np.random.SeedSequence(words))


def source_key(name):
    key = "".join(ch for ch in str(name).lower() if ch.isalnum())
    if key in ("ks", "kuramotosivashinsky"):
        return "KS"
    if key in ("lorenz96", "l96"):
        return "Lorenz96"
    return get_attractor(name).name


@dataclass(frozen=True)
class ExperimentConfig:
    source_a: str = "Lorenz"
    source_b: str = "Rossler"
    t_dump: float = 600.0
    t_train: float = 600.0
    t_test: float = 600.0
    tank: TankConfig = field(default_factory=TankConfig)
    alpha: float = 1e-3
    noise_sigma: float = 0.0
    master_seed: int = 0
    ks: KsSpec = field(default_factory=KsSpec)
    l96: Lorenz96Spec = field(default_factory=Lorenz96Spec)
    block: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "source_a", source_key(self.source_a))
        object.__setattr__(self, "source_b", source_key(self.source_b))
        for name in ("t_dump", "t_train", "t_test"):
            value = getattr(self, name)
            n = value / self.tank.dt
            if not value >= 0 or abs(n - round(n)) > 1e-6:
                raise InvalidInputError(f"{name}={value} is not a non-negative multiple of dt={self.tank.dt}")
        if self.t_train <= 0 or self.t_test <= 0:
            raise InvalidInputError("t_train and t_test must be positive")
        if self.alpha < 0 or self.noise_sigma < 0:
            raise InvalidInputError("alpha and noise_sigma must be non-negative")
        if self.block < 1:
            raise InvalidInputError("block must be positive")

    def samples(self, duration):
        return int(round(duration / self.tank.dt))

    @property
    def n_dump(self):
        return self.samples(self.t_dump)

    @property
    def n_train(self):
        return self.samples(self.t_train)

    @property
    def n_test(self):
        return self.samples(self.t_test)

    def canonical(self):
        """Stable text form used for manifests and content hashes."""
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, dict):
                lines += [f"{key}.{k} = {v!r}" for k, v in value.items()]
            else:
                lines.append(f"{key} = {value!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SeparationResult:
    estimated_a: Trajectory
    estimated_b: Trajectory
    true_a: Trajectory
    true_b: Trajectory
    mse_a: float
    mse_b: float
    mse_a_channels: np.ndarray
    mse_b_channels: np.ndarray
    train_mse: np.ndarray
    config: ExperimentConfig
    probe_set_id: str
    input_hash: str
    substeps: int
    model: ReadoutModel | None = field(default=None, repr=False)

    def to_csv(self, path):
        """Per-channel estimates and truths on the test window."""
        cols = ([f"est_a_{n}" for n in self.estimated_a.names] + [f"est_b_{n}" for n in self.estimated_b.names]
                + [f"true_a_{n}" for n in self.true_a.names] + [f"true_b_{n}" for n in self.true_b.names])
        data = np.column_stack([self.true_a.times, self.estimated_a.values, self.estimated_b.values,
                                self.true_a.values, self.true_b.values])
        buf = io.StringIO()
        buf.write(",".join(["t"] + cols) + "\n")
        np.savetxt(buf, data, delimiter=",", fmt="%.17g")
        atomic_write_text(path, buf.getvalue())

    def summary(self):
        c = self.config
        return (f"{c.source_a}+{c.source_b} grid={c.tank.nx}x{c.tank.ny} sigma={c.noise_sigma:g}: "
                f"mse_a={self.mse_a:.6g} mse_b={self.mse_b:.6g}")


# --------------------------------------------------------------------------
# sources

def _initial_state(source, cfg, rng):
    if source == "KS":
        return ks_initial(cfg.ks, rng)
    if source == "Lorenz96":
        return lorenz96_initial(cfg.l96, rng)
    return on_attractor_state(source, offset=rng.uniform(0.0, MAX_OFFSET))


def _raw_source(source, x0, n_samples, cfg):
    """Raw trajectory of ``n_samples`` samples at the tank step, starting at ``x0``."""
    dt = cfg.tank.dt
    T = n_samples * dt
    if source == "KS":
        # burn in from the small random start, then keep the chaotic part
        warm = integrate_ks(cfg.ks, x0, SOURCE_TRANSIENT + dt, sample_dt=dt)
        traj = integrate_ks(cfg.ks, warm.values[-1], T, sample_dt=dt)
    elif source == "Lorenz96":
        warm = integrate_lorenz96(cfg.l96, x0, SOURCE_TRANSIENT + dt, sample_dt=dt)
        traj = integrate_lorenz96(cfg.l96, warm.values[-1], T, sample_dt=dt)
    else:
        spec = get_attractor(source)
        sub = dt / spec.integration_dt
        if abs(sub - round(sub)) > 1e-9:
            raise InvalidInputError(f"tank dt {dt} is not a multiple of the {source} RK4 step")
        traj = integrate_rk4(spec, x0, n_samples * int(round(sub)), subsample=int(round(sub)))
    if traj.n_samples != n_samples:
        raise InvalidInputError(f"{source}: produced {traj.n_samples} samples, wanted {n_samples}")
    return traj


def _initial_pair(cfg, phase):
    rng_a = labeled_rng(cfg.master_seed, "initial", phase, "a", cfg.source_a, cfg.source_b)
    rng_b = labeled_rng(cfg.master_seed, "initial", phase, "b", cfg.source_a, cfg.source_b)
    xa = _initial_state(cfg.source_a, cfg, rng_a)
    xb = _initial_state(cfg.source_b, cfg, rng_b)
    if cfg.source_a == cfg.source_b:
        for _ in range(100):
            if np.linalg.norm(xa - xb) >= MIN_SEPARATION:
                break
            xb = _initial_state(cfg.source_b, cfg, rng_b)
        else:
            raise InvalidInputError("could not draw distinct initial conditions for a same-system pair")
    return xa, xb


def source_stretches(cfg):
    """Training and test stretches ``((train_a, test_a), (train_b, test_b))``.

    The test stretch starts from fresh initial conditions.  Each stretch is
    a trajectory of its own and is normalized over its own length.
    """
    lengths = {"train": cfg.n_dump + cfg.n_train, "test": cfg.n_dump + cfg.n_test}
    starts = {phase: _initial_pair(cfg, phase) for phase in lengths}
    out = []
    for i, (role, src) in enumerate((("a", cfg.source_a), ("b", cfg.source_b))):
        try:
            out.append(tuple(normalize(_raw_source(src, starts[phase][i], n, cfg)) for phase, n in lengths.items()))
        except TanksepError as exc:
            raise exc.with_stage(f"source-{role}")
    return out[0], out[1]


def source_pair(cfg):
    """Sources (a, b) as one array each: the training stretch, then the test stretch."""
    out = []
    for train, test in source_stretches(cfg):
        out.append(train.with_values(np.vstack([train.values, test.values]), normalization=None))
    return out[0], out[1]


def mix(a, b):
    """s_+ = s_a + s_b."""
    if not a.aligned_with(b):
        raise InvalidInputError(f"cannot mix {a.values.shape}@{a.dt} with {b.values.shape}@{b.dt}")
    names = tuple(f"{x}+{y}" for x, y in zip(a.names, b.names))
    return Trajectory(a.values + b.values, a.dt, names, a.t0)


def add_noise(traj, sigma, seed):
    """Add independent N(0, sigma^2) samples to every channel and time sample.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    if sigma == 0:
        return traj
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return traj.with_values(traj.values + sigma * rng.standard_normal(traj.values.shape))


def content_hash(*chunks):
    """Git-style blob hash (sha1 over ``blob <len>\\0`` + content)."""
    body = b"".join(c.encode() if isinstance(c, str) else bytes(c) for c in chunks)
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


# --------------------------------------------------------------------------
# experiments

def run_separation(cfg, *, phase_hook=None):
    """Train on one mixture, test on a freshly generated one.

    ``phase_hook(phase, tank)`` is called at the end of the "train" and
    "test" phases (used for snapshot export).
    """
    a, b = source_pair(cfg)
    rng_noise = labeled_rng(cfg.master_seed, "noise", cfg.source_a, cfg.source_b)
    a_meas = add_noise(a, cfg.noise_sigma, rng_noise)
    b_meas = add_noise(b, cfg.noise_sigma, rng_noise)
    mixed = mix(a_meas, b_meas)
    targets = np.hstack([a_meas.values, b_meas.values])

    filters = make_filters(mixed.dims, cfg.tank)
    probes = make_probes(cfg.tank)
    n1 = cfg.n_dump + cfg.n_train
    train_in = mixed.segment(0, n1)
    test_in = mixed.segment(n1, mixed.n_samples)
    input_hash = content_hash(cfg.canonical(), mixed.to_bytes())

    tank = Tank(cfg.tank, filters)
    acc = GramAccumulator(3 * len(probes), targets.shape[1])
    try:
        for start, block in iter_probe_blocks(tank, train_in, probes, cfg.t_dump, cfg.block):
            k = cfg.n_dump + start
            acc.add(features(block), targets[k:k + block.shape[0]])
        if phase_hook is not None:
            phase_hook("train", tank)
        model = acc.solve(cfg.alpha, probe_set_id=probes.id, split=a.dims)
    except TanksepError as exc:
        raise exc.with_stage("train")
    train_mse = acc.train_mse(model)
    substeps = tank.substeps
    del acc

    tank.reset()
    est = np.empty((cfg.n_test, targets.shape[1]))
    try:
        for start, block in iter_probe_blocks(tank, test_in, probes, cfg.t_dump, cfg.block):
            est[start:start + block.shape[0]] = features(block) @ model.W.T
        if phase_hook is not None:
            phase_hook("test", tank)
    except TanksepError as exc:
        raise exc.with_stage("test")
    substeps += tank.substeps

    t_start = n1 + cfg.n_dump
    true_a = a.segment(t_start, a.n_samples)
    true_b = b.segment(t_start, b.n_samples)
    est_a = true_a.with_values(est[:, :a.dims], normalization=None)
    est_b = true_b.with_values(est[:, a.dims:], normalization=None)
    mse_a_ch, mse_a = mse(est_a, true_a)
    mse_b_ch, mse_b = mse(est_b, true_b)
    return SeparationResult(est_a, est_b, true_a, true_b, mse_a, mse_b, mse_a_ch, mse_b_ch,
                            train_mse, cfg, probes.id, input_hash, substeps, model)


@dataclass
class MseMatrix:
    """Entry (i, j) is the error recovering system i from the i + j mixture."""

    values: np.ndarray
    labels: tuple[str, ...]
    failures: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict, repr=False)

    @property
    def valid(self):
        return not self.failures and bool(np.all(np.isfinite(self.values)))

    def off_diagonal(self):
        mask = ~np.eye(len(self.labels), dtype=bool)
        return self.values[mask]

    def off_diagonal_mean(self):
        return float(np.mean(self.off_diagonal()))

    def row_off_diagonal(self, i):
        return np.delete(self.values[i], i)

    def to_csv(self, path):
        matrix_to_csv(path, self.values, row_labels=self.labels, col_labels=self.labels, corner="system")


def _pair_job(args):
    cfg, keep = args
    try:
        res = run_separation(cfg)
        return cfg.source_a, cfg.source_b, res.mse_a, res.mse_b, None, (res if keep else None)
    except NumericalError as exc:
        return cfg.source_a, cfg.source_b, math.nan, math.nan, str(exc), None


def matrix_pairs(systems=SYSTEM_NAMES, include_diagonal=True):
    return [(a, b) for a, b in combinations_with_replacement(systems, 2) if include_diagonal or a != b]


def run_matrix(base_cfg, *, systems=SYSTEM_NAMES, include_diagonal=True, workers=1, progress=None,
               keep_results=False):
    """Run every unordered pair and collect per-source test MSEs.

    A diagonal entry averages the two recovery errors of the same-system
    pair.  Pairs that fail numerically leave NaN entries and are listed in
    ``failures``; pairs not run (diagonal excluded) are NaN as well.  With
    ``keep_results`` the full :class:`SeparationResult` of every pair is
    kept in ``results``.  ``progress`` receives
    ``(a, b, mse_a, mse_b, error)`` after each pair (serial runs only).
    """
    systems = tuple(source_key(s) for s in systems)
    index = {s: i for i, s in enumerate(systems)}
    jobs = [(replace(base_cfg, source_a=a, source_b=b), keep_results)
            for a, b in matrix_pairs(systems, include_diagonal)]
    values = np.full((len(systems), len(systems)), math.nan)
    failures = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_pair_job, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_pair_job(job))
            if progress is not None:
                progress(results[-1][:5])
    kept = {}
    for a, b, ma, mb, err, res in results:
        i, j = index[a], index[b]
        if res is not None:
            kept[(a, b)] = res
        if err is not None:
            failures[(a, b)] = err
        if i == j:
            values[i, i] = 0.5 * (ma + mb)
        else:
            values[i, j] = ma
            values[j, i] = mb
    return MseMatrix(values, systems, failures, kept)


def noise_sweep(base_cfg, sigmas=(0.01, 0.1, 1.0), **kwargs):
    """``run_matrix`` for each noise level; returns ``{sigma: MseMatrix}``."""
    return {float(s): run_matrix(replace(base_cfg, noise_sigma=float(s)), **kwargs) for s in sigmas}


# brings the 32-channel mass source down to the rms of the 3-channel one
HIGHDIM_INPUT_GAIN = math.sqrt(3.0 / 32.0)


def highdim_config(grid=256, **overrides):
    """KS + Lorenz 96 experiment on a ``grid``^2, b=0.6 tank (256^2 by default)."""
    base = dict(source_a="KS", source_b="Lorenz96",
                tank=TankConfig(nx=grid, ny=grid, b=0.6, input_gain=HIGHDIM_INPUT_GAIN))
    base.update(overrides)
    return ExperimentConfig(**base)


def run_highdim(cfg=None, **overrides):
    return run_separation(cfg if cfg is not None else highdim_config(**overrides))


def correlation_per_channel(estimate, truth):
    e = estimate.values - estimate.values.mean(axis=0)
    t = truth.values - truth.values.mean(axis=0)
    return (e * t).sum(axis=0) / np.sqrt((e * e).sum(axis=0) * (t * t).sum(axis=0))


def write_manifest(path, cfg, *, outputs=(), extra=None, input_hash=None):
    """Run manifest: config, derived seeds, version and output list (no timestamps)."""
    lines = [f"tool = tanksep {__version__}", "[config]", cfg.canonical().rstrip(),
             "[seeds]", f"master_seed = {cfg.master_seed}",
             f"filter_seed = {cfg.tank.filter_seed}", f"probe_seed = {cfg.tank.probe_seed}"]
    if input_hash:
        lines += ["[inputs]", f"content_hash = {input_hash}"]
    if extra:
        lines.append("[run]")
        lines += [f"{k} = {v}" for k, v in extra.items()]
    if outputs:
        lines.append("[outputs]")
        lines += [str(o) for o in outputs]
    atomic_write_text(path, "\n".join(lines) + "\n")


__all__ = ["ATTRACTORS", "ExperimentConfig", "HIGHDIM_SOURCES", "MseMatrix", "SeparationResult",
           "add_noise", "content_hash", "correlation_per_channel", "highdim_config", "labeled_rng",
           "matrix_pairs", "mix", "noise_sweep", "run_highdim", "run_matrix", "run_separation",
           "source_pair", "source_stretches", "write_manifest"]
