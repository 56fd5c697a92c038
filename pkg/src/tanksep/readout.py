"""Nonlinear probe features and the ridge-regression readout.

Features of a probe vector x (heights minus the equilibrium depth) are
``[x, tanh(x**2), tanh(x**3)]``, elementwise.  The readout W minimizes

    ||Y - W Phi||^2 + alpha ||W||^2

with alpha added to the diagonal of the feature Gram matrix as is (no
scaling by the sample count).  Sample-major arrays are used throughout:
a feature matrix is (n_samples, n_features) and targets are
(n_samples, out_dim).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.linalg.blas import dsyrk

from .errors import InvalidInputError, RankDeficiencyError
from .trajectory import Trajectory, atomic_write_bytes, atomic_write_text

FEATURE_SPEC = "x,tanh(x^2),tanh(x^3)"
MODEL_MAGIC = b"RDO1"
_MODEL_HEADER = struct.Struct("<4sIId16s")


def features(x):
    """Feature vector(s) of probe heights; the last axis is the probe axis."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("non-finite probe heights")
    x2 = x * x
    return np.concatenate([x, np.tanh(x2), np.tanh(x2 * x)], axis=-1)


@dataclass(frozen=True)
class ReadoutModel:
    W: np.ndarray
    alpha: float
    probe_set_id: str = ""
    split: int | None = None
    feature_spec: str = FEATURE_SPEC

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        if W.ndim != 2:
            raise InvalidInputError(f"W must be (out_dim, n_features), got {W.shape}")
        if not np.all(np.isfinite(W)):
            raise InvalidInputError("W has non-finite entries")
        object.__setattr__(self, "W", W)

    @property
    def out_dim(self):
        return self.W.shape[0]

    @property
    def n_features(self):
        return self.W.shape[1]

    @property
    def n_probes(self):
        """Probe count for the three-block feature map."""
        return self.W.shape[1] // 3

    def to_bytes(self):
        pid = self.probe_set_id.encode("ascii")[:16].ljust(16, b"\0")
        head = _MODEL_HEADER.pack(MODEL_MAGIC, self.out_dim, self.n_features, float(self.alpha), pid)
        return head + self.W.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob):
        magic, out_dim, n_feat, alpha, pid = _MODEL_HEADER.unpack_from(blob)
        if magic != MODEL_MAGIC:
            raise InvalidInputError(f"bad readout magic {magic!r}")
        W = np.frombuffer(blob, dtype="<f8", count=out_dim * n_feat, offset=_MODEL_HEADER.size)
        return cls(W.reshape(out_dim, n_feat).copy(), alpha, pid.rstrip(b"\0").decode("ascii"))

    def save(self, path):
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self, path):
        buf = io.StringIO()
        buf.write(f"# alpha={self.alpha!r} probe_set_id={self.probe_set_id} features={self.feature_spec}\n")
        np.savetxt(buf, self.W, delimiter=",", fmt="%.17g")
        atomic_write_text(path, buf.getvalue())


def _solve(gram, rhs, alpha):
    """Solve ``gram @ X = rhs`` for symmetric positive-definite ``gram`` (upper triangle used)."""
    try:
        c, lower = sla.cho_factor(gram, lower=False, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError(f"feature Gram matrix is singular (alpha={alpha})") from None
    d = np.abs(np.diag(c))
    # Cholesky succeeds on numerically singular matrices; a tiny diagonal
    # ratio means the solution is dominated by rounding
    if alpha == 0 and d.min() <= d.max() * np.sqrt(gram.shape[0] * np.finfo(float).eps):
        raise RankDeficiencyError("feature Gram matrix is numerically singular with alpha=0")
    return sla.cho_solve((c, lower), rhs, check_finite=False)


class GramAccumulator:
    """Streams (features, targets) blocks into Phi^T Phi and Phi^T Y.

    Only the upper triangle of the Gram matrix is formed (BLAS syrk).
    Training MSE is available afterwards from the accumulated moments, so
    the feature matrix itself never has to be held in memory.
    """

    def __init__(self, n_features, out_dim):
        self.gram = np.zeros((n_features, n_features), order="F")
        self.cross = np.zeros((n_features, out_dim))
        self.yy = np.zeros(out_dim)
        self.n = 0

    def add(self, phi, y):
        phi = np.asarray(phi, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if phi.ndim != 2 or y.ndim != 2 or phi.shape[0] != y.shape[0]:
            raise InvalidInputError("features and targets need matching sample counts")
        if phi.shape[1] != self.gram.shape[0] or y.shape[1] != self.cross.shape[1]:
            raise InvalidInputError("block width does not match the accumulator")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(y))):
            raise InvalidInputError("non-finite training data")
        if phi.shape[0] == 0:
            return
        # dsyrk on the transposed (Fortran-ordered) block gives phi.T @ phi
        self.gram = dsyrk(1.0, phi.T, beta=1.0, c=self.gram, trans=0, lower=0, overwrite_c=1)
        self.cross += phi.T @ y
        self.yy += np.einsum("ij,ij->j", y, y)
        self.n += phi.shape[0]

    def full_gram(self):
        upper = np.triu(self.gram)
        return upper + np.triu(upper, 1).T

    def solve(self, alpha, *, probe_set_id="", split=None):
        if alpha < 0:
            raise InvalidInputError("alpha must be non-negative")
        if self.n == 0:
            raise InvalidInputError("no training samples")
        g = np.array(self.gram, order="F")
        g[np.diag_indices_from(g)] += alpha
        X = _solve(g, self.cross, alpha)
        return ReadoutModel(X.T.copy(), float(alpha), probe_set_id, split)

    def train_mse(self, model):
        """Per-output training MSE, from the accumulated moments."""
        W = model.W
        fit = np.einsum("ij,jk,ik->i", W, self.full_gram(), W)
        cross = np.einsum("ij,ji->i", W, self.cross)
        return (self.yy - 2.0 * cross + fit) / self.n


def train(phi, targets, alpha, *, probe_set_id="", split=None, block=4096):
    """Ridge readout from a feature matrix ``phi`` (n_samples, n_features)."""
    phi = np.asarray(phi, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if phi.ndim != 2 or y.shape[0] != phi.shape[0]:
        raise InvalidInputError(f"features {phi.shape} and targets {y.shape} disagree on n_samples")
    acc = GramAccumulator(phi.shape[1], y.shape[1])
    for s in range(0, phi.shape[0], block):
        acc.add(phi[s:s + block], y[s:s + block])
    return acc.solve(alpha, probe_set_id=probe_set_id, split=split)


def apply(model, phi):
    """Readout applied to precomputed features (rows are samples)."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape[-1] != model.n_features:
        raise InvalidInputError(f"{phi.shape[-1]} features for a {model.n_features}-feature model")
    return phi @ model.W.T


def predict(model, probe_heights):
    """Readout output(s); rows of a 2-D input are samples."""
    x = np.asarray(probe_heights, dtype=np.float64)
    if model.n_features % 3 or x.shape[-1] != model.n_probes:
        raise InvalidInputError(f"{x.shape[-1]} probe heights for a {model.n_probes}-probe model")
    return features(x) @ model.W.T


def mse(estimate, truth):
    """Per-channel time-mean squared error and its channel mean."""
    if isinstance(estimate, Trajectory) and isinstance(truth, Trajectory):
        if not estimate.aligned_with(truth):
            raise InvalidInputError("estimate and truth are not aligned")
        e, t = estimate.values, truth.values
    else:
        e, t = np.asarray(estimate, dtype=float), np.asarray(truth, dtype=float)
        if e.shape != t.shape:
            raise InvalidInputError(f"shape mismatch {e.shape} vs {t.shape}")
        if e.ndim == 1:
            e, t = e[:, None], t[:, None]
    per = np.mean((e - t) ** 2, axis=0)
    return per, float(per.mean())
