"""Uniformly sampled multichannel time series and their file formats.

Values are stored time-major, ``values[k, i]`` being channel ``i`` at time
``t0 + k * dt``.  CSV files carry a time column followed by one column per
channel.  The binary layout is::

    b"TRJ1" | uint32 n_samples | uint32 dims | float64 dt | float64 t0 | values

all little-endian, values row-major float64.
"""

from __future__ import annotations

import io
import os
import struct
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

TRAJ_MAGIC = b"TRJ1"
_HEADER = struct.Struct("<4sIIdd")


@dataclass(frozen=True)
class Normalization:
    """Per-channel affine map used by :func:`tanksep.attractors.normalize`."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, values):
        return (values - self.mean) / self.std

    def invert(self, values):
        return values * self.std + self.mean


@dataclass(frozen=True)
class Trajectory:
    values: np.ndarray
    dt: float
    names: tuple[str, ...] = ()
    t0: float = 0.0
    normalization: Normalization | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1:
            raise InvalidInputError(f"trajectory values must be (n_samples>=1, dims), got {values.shape}")
        if not self.dt > 0:
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "values", values)
        names = tuple(self.names) if self.names else tuple(f"c{i}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise InvalidInputError(f"{len(names)} channel names for {values.shape[1]} channels")
        object.__setattr__(self, "names", names)

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def dims(self):
        return self.values.shape[1]

    @property
    def duration(self):
        return self.n_samples * self.dt

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_samples)

    def segment(self, start, stop):
        """Samples ``start:stop`` as a new trajectory with shifted ``t0``."""
        return replace(self, values=self.values[start:stop], t0=self.t0 + start * self.dt)

    def with_values(self, values, **changes):
        return replace(self, values=values, **changes)

    def aligned_with(self, other, *, atol=1e-12):
        return (self.values.shape == other.values.shape
                and abs(self.dt - other.dt) <= atol * max(1.0, self.dt))

    # ---- serialization -------------------------------------------------

    def to_csv(self, path):
        buf = io.StringIO()
        buf.write(",".join(("t",) + self.names) + "\n")
        data = np.column_stack([self.times, self.values])
        np.savetxt(buf, data, delimiter=",", fmt="%.17g")
        atomic_write_text(path, buf.getvalue())

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if header[0] != "t" or data.shape[1] != len(header):
            raise InvalidInputError(f"{path}: expected a leading 't' column and {len(header)} columns")
        t = data[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
        return cls(data[:, 1:], dt, tuple(header[1:]), float(t[0]))

    def to_bytes(self):
        n, d = self.values.shape
        head = _HEADER.pack(TRAJ_MAGIC, n, d, float(self.dt), float(self.t0))
        return head + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob):
        magic, n, d, dt, t0 = _HEADER.unpack_from(blob)
        if magic != TRAJ_MAGIC:
            raise InvalidInputError(f"bad trajectory magic {magic!r}")
        values = np.frombuffer(blob, dtype="<f8", count=n * d, offset=_HEADER.size).reshape(n, d)
        return cls(values.copy(), dt, (), t0)

    def to_binary(self, path):
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def from_binary(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode())


def matrix_to_csv(path, matrix, *, row_labels=None, col_labels=None, corner=""):
    """Dense matrix CSV with optional labels, full round-trip precision."""
    matrix = np.asarray(matrix, dtype=float)
    lines = []
    if col_labels is not None:
        lines.append(",".join(([corner] if row_labels is not None else []) + list(col_labels)))
    for r, row in enumerate(matrix):
        cells = ["%.17g" % v for v in row]
        if row_labels is not None:
            cells.insert(0, str(row_labels[r]))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")
