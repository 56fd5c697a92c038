"""Forced, damped shallow-water tank on the unit square.

    h_t + (hu)_x + (hv)_y = p
    (hu)_t + (hu^2 + g h^2/2)_x + (huv)_y = -b hu
    (hv)_t + (huv)_x + (hv^2 + g h^2/2)_y = -b hv

with p = sum_i D_i(x, y) s_i(t).  The update is the two-step (Richtmyer)
Lax-Wendroff scheme in conservative variables with transverse flux terms in
the face predictors and sources evaluated at the half step.  Walls are
reflective through one layer of ghost cells.

The sampling interval ``dt`` (0.03) is far beyond the explicit stability
limit on a 64^2 or finer grid, so every sample is advanced with ``nsub``
equal substeps chosen from the current wave speed, and the forcing is held
constant across the interval.
"""

from __future__ import annotations

import hashlib
import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from ._backend import kernels
from .errors import DryCellError, InvalidInputError, NumericalBlowupError, StabilityError
from .trajectory import atomic_write_bytes, atomic_write_text

SNAPSHOT_MAGIC = b"SWE1"
_SNAP_HEADER = struct.Struct("<4sII")
LW_WORK_ARRAYS = 11

# full width at half maximum of the filter smoothing kernel, domain units
FILTER_FWHM = 1.0 / 16.0
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class TankConfig:
    nx: int = 128
    ny: int = 128
    g: float = 9.8
    b: float = 0.3
    dt: float = 0.03
    n_probes: int = 2000
    filter_seed: int = 0
    probe_seed: int = 1
    courant_target: float = 0.45
    cfl_limit: float = 0.6
    # scales the mass source p; 1 for the 3-channel experiments
    input_gain: float = 1.0

    def __post_init__(self):
        if self.nx < 16 or self.ny < 16:
            raise InvalidInputError(f"grid must be at least 16x16, got {self.nx}x{self.ny}")
        if self.b < 0 or not self.g > 0 or not self.dt > 0:
            raise InvalidInputError("need g > 0, dt > 0 and b >= 0")
        if not (self.input_gain > 0 and math.isfinite(self.input_gain)):
            raise InvalidInputError(f"input_gain must be positive and finite, got {self.input_gain}")
        if not 0 < self.courant_target <= self.cfl_limit:
            raise InvalidInputError("need 0 < courant_target <= cfl_limit")
        if not 1 <= self.n_probes <= self.nx * self.ny:
            raise InvalidInputError(f"n_probes must lie in [1, {self.nx * self.ny}]")

    @property
    def dx(self):
        return 1.0 / self.nx

    @property
    def dy(self):
        return 1.0 / self.ny

    @property
    def rest_courant(self):
        """Courant number of one unsplit ``dt`` step on still water of depth 1."""
        return self.dt * math.sqrt(self.g) * max(self.nx, self.ny)

    def substeps_for_rate(self, rate):
        """Substeps per sample so that ``rate * dt / nsub <= courant_target``.

        ``rate`` is the largest (|u| + sqrt(gh)) / dx over the grid; never
        fewer substeps than still water of unit depth needs.
        """
        rest = self.rest_courant / self.courant_target
        return max(1, math.ceil(rest - 1e-9), math.ceil(self.dt * rate / self.courant_target - 1e-9))


@dataclass
class WaveField:
    """Depth ``h`` and velocities ``u`` (along axis 0), ``v`` (along axis 1)."""

    h: np.ndarray
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.h = np.array(self.h, dtype=np.float64)
        self.u = np.array(self.u, dtype=np.float64)
        self.v = np.array(self.v, dtype=np.float64)
        if self.h.ndim != 2 or self.u.shape != self.h.shape or self.v.shape != self.h.shape:
            raise InvalidInputError("h, u, v must be 2-D arrays of one shape")

    @classmethod
    def at_rest(cls, nx, ny=None):
        ny = nx if ny is None else ny
        return cls(np.ones((nx, ny)), np.zeros((nx, ny)), np.zeros((nx, ny)))

    @property
    def shape(self):
        return self.h.shape

    def validate(self):
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise InvalidInputError("wave field contains non-finite values")
        if not np.all(self.h > 0):
            raise DryCellError("wave field has non-positive depth")

    def volume(self):
        nx, ny = self.shape
        return float(self.h.sum()) / (nx * ny)

    def energy(self, g=9.8):
        """Kinetic plus potential energy relative to the flat lake."""
        nx, ny = self.shape
        e = 0.5 * self.h * (self.u ** 2 + self.v ** 2) + 0.5 * g * (self.h - 1.0) ** 2
        return float(e.sum()) / (nx * ny)

    def copy(self):
        return WaveField(self.h.copy(), self.u.copy(), self.v.copy(), self.t)

    # SWE1 snapshots
    def to_bytes(self):
        nx, ny = self.shape
        parts = [_SNAP_HEADER.pack(SNAPSHOT_MAGIC, nx, ny)]
        parts += [a.astype("<f8").tobytes(order="C") for a in (self.h, self.u, self.v)]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob):
        magic, nx, ny = _SNAP_HEADER.unpack_from(blob)
        if magic != SNAPSHOT_MAGIC:
            raise InvalidInputError(f"bad snapshot magic {magic!r}")
        count = nx * ny
        expected = _SNAP_HEADER.size + 3 * 8 * count
        if len(blob) != expected:
            raise InvalidInputError(f"snapshot is {len(blob)} bytes, expected {expected}")
        arr = np.frombuffer(blob, dtype="<f8", offset=_SNAP_HEADER.size).reshape(3, nx, ny)
        return cls(arr[0], arr[1], arr[2])

    def save(self, path):
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True)
class InputFilterSet:
    """``filters[i]`` is the spatial pattern through which input channel ``i`` adds water."""

    filters: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        f = np.asarray(self.filters, dtype=np.float64)
        if f.ndim != 3 or f.shape[0] < 1:
            raise InvalidInputError(f"filters must have shape (d, nx, ny), got {f.shape}")
        object.__setattr__(self, "filters", f)

    @property
    def d(self):
        return self.filters.shape[0]

    @property
    def shape(self):
        return self.filters.shape[1:]

    def source(self, amplitudes):
        """Mass source p = sum_i a_i D_i."""
        return np.tensordot(np.asarray(amplitudes, dtype=np.float64), self.filters, axes=1)


def make_filters(d, cfg):
    """Smoothed random filters with unit peak magnitude and zero area integral."""
    if int(d) != d or d < 1:
        raise InvalidInputError(f"need a positive input dimension, got {d}")
    rng = np.random.default_rng(cfg.filter_seed)
    sigma = (FILTER_FWHM * _FWHM_TO_SIGMA * cfg.nx, FILTER_FWHM * _FWHM_TO_SIGMA * cfg.ny)
    out = np.empty((int(d), cfg.nx, cfg.ny))
    for i in range(int(d)):
        w = gaussian_filter(rng.standard_normal((cfg.nx, cfg.ny)), sigma, mode="reflect")
        w /= np.abs(w).max()
        w -= w.mean()
        out[i] = w
    return InputFilterSet(out, cfg.filter_seed)


@dataclass(frozen=True)
class ProbeSet:
    rows: np.ndarray
    cols: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        cols = np.asarray(self.cols, dtype=np.intp)
        nx, ny = self.shape
        if rows.shape != cols.shape or rows.ndim != 1:
            raise InvalidInputError("rows and cols must be matching 1-D arrays")
        if rows.size and (rows.min() < 0 or rows.max() >= nx or cols.min() < 0 or cols.max() >= ny):
            raise InvalidInputError("probe index out of range")
        flat = rows * ny + cols
        if np.unique(flat).size != flat.size:
            raise InvalidInputError("duplicate probe locations")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "shape", (int(nx), int(ny)))

    def __len__(self):
        return self.rows.size

    @property
    def flat(self):
        return self.rows * self.shape[1] + self.cols

    @property
    def id(self):
        """Short content hash identifying the probe layout."""
        h = hashlib.sha256(struct.pack("<II", *self.shape))
        h.update(self.flat.astype("<i8").tobytes())
        return h.hexdigest()[:16]

    def sample(self, h):
        return h[self.rows, self.cols]


def make_probes(cfg):
    rng = np.random.default_rng(cfg.probe_seed)
    flat = rng.choice(cfg.nx * cfg.ny, size=cfg.n_probes, replace=False)
    return ProbeSet(flat // cfg.ny, flat % cfg.ny, (cfg.nx, cfg.ny))


@dataclass(frozen=True)
class ProbeSeries:
    """Recorded ``h - 1`` at the probes, ``values[k, j]`` for sample ``k`` and probe ``j``."""

    values: np.ndarray
    dt: float
    t0: float = 0.0
    probe_set_id: str = ""

    @property
    def n_samples(self):
        return self.values.shape[0]

    def to_csv(self, path):
        buf = io.StringIO()
        n, p = self.values.shape
        buf.write(",".join(["t"] + [f"p{j}" for j in range(p)]) + "\n")
        t = self.t0 + self.dt * np.arange(n)
        np.savetxt(buf, np.column_stack([t, self.values]), delimiter=",", fmt="%.17g")
        atomic_write_text(path, buf.getvalue())


class Tank:
    """Stepping context that owns one padded tank state.

    The state lives in ghost-padded conservative arrays (h, hu, hv); the
    public :attr:`field` view converts back to (h, u, v).
    """

    def __init__(self, cfg, filters=None, initial=None):
        self.cfg = cfg
        if filters is not None and filters.shape != (cfg.nx, cfg.ny):
            raise InvalidInputError(f"filters are {filters.shape}, tank is {(cfg.nx, cfg.ny)}")
        self.filters = filters
        shape = (cfg.nx + 2, cfg.ny + 2)
        self._h = np.ones(shape)
        self._m = np.zeros(shape)
        self._n = np.zeros(shape)
        self._p = np.zeros(shape)
        self._work = np.empty(LW_WORK_ARRAYS * shape[0] * shape[1])
        self.reset(initial)

    def reset(self, initial=None):
        """Restart from ``initial`` or, by default, from the flat lake at rest."""
        cfg = self.cfg
        if initial is None:
            initial = WaveField.at_rest(cfg.nx, cfg.ny)
        if initial.shape != (cfg.nx, cfg.ny):
            raise InvalidInputError(f"initial field is {initial.shape}, tank is {(cfg.nx, cfg.ny)}")
        initial.validate()
        c = slice(1, -1)
        self._h[c, c] = initial.h
        self._m[c, c] = initial.h * initial.u
        self._n[c, c] = initial.h * initial.v
        self._p[:] = 0.0
        self.t = float(initial.t)
        self.steps = 0
        self.substeps = 0
        self._rate = self._max_rate()

    def _max_rate(self):
        c = slice(1, -1)
        h = self._h[c, c]
        cel = np.sqrt(self.cfg.g * h)
        ru = (np.abs(self._m[c, c]) / h + cel).max() * self.cfg.nx
        rv = (np.abs(self._n[c, c]) / h + cel).max() * self.cfg.ny
        return float(max(ru, rv))

    @property
    def field(self):
        c = slice(1, -1)
        h = self._h[c, c].copy()
        return WaveField(h, self._m[c, c] / h, self._n[c, c] / h, self.t)

    @property
    def depth(self):
        """Read-only view of the interior depth."""
        v = self._h[1:-1, 1:-1]
        v.flags.writeable = False
        return v

    def volume(self):
        return float(self._h[1:-1, 1:-1].sum()) / (self.cfg.nx * self.cfg.ny)

    def energy(self):
        return self.field.energy(self.cfg.g)

    def step(self, amplitudes=None):
        """Advance one sample interval with the forcing held at ``amplitudes``."""
        cfg = self.cfg
        if amplitudes is not None:
            if self.filters is None:
                raise InvalidInputError("tank has no input filters")
            a = np.asarray(amplitudes, dtype=np.float64)
            if a.shape != (self.filters.d,) or not np.all(np.isfinite(a)):
                raise InvalidInputError(f"forcing must be {self.filters.d} finite amplitudes")
            self._p[1:-1, 1:-1] = self.filters.source(a)
            if cfg.input_gain != 1.0:
                self._p[1:-1, 1:-1] *= cfg.input_gain
        else:
            self._p[:] = 0.0
        nsub = cfg.substeps_for_rate(self._rate)
        sub_dt = cfg.dt / nsub
        status, bad_sub, courant = kernels.lw_advance(
            self._h, self._m, self._n, self._p, sub_dt, cfg.dx, cfg.dy, cfg.g, cfg.b,
            nsub, cfg.cfl_limit, self._work)
        if status != 0:
            self._raise(status, bad_sub, nsub, courant)
        self._rate = courant / sub_dt
        self.steps += 1
        self.substeps += nsub
        self.t += cfg.dt

    def _raise(self, status, bad_sub, nsub, courant):
        where = f"step {self.steps} (t={self.t:.6g}, substep {bad_sub + 1}/{nsub})"
        if status == 2:
            raise DryCellError(f"non-positive depth at {where}", step=self.steps)
        if not np.all(np.isfinite(self._h)):
            raise NumericalBlowupError(f"non-finite tank state at {where}", step=self.steps)
        raise StabilityError(
            f"Courant number {courant:.4f} exceeds {self.cfg.cfl_limit} at {where}", step=self.steps)


def step(field, forcing, filters, cfg):
    """One sample interval from ``field``; returns the new field."""
    tank = Tank(cfg, filters, field)
    tank.step(forcing)
    return tank.field


def _check_drive(mixed, filters, probes, cfg, t_dump):
    if abs(mixed.dt - cfg.dt) > 1e-12 * cfg.dt:
        raise InvalidInputError(f"mixed signal dt {mixed.dt} differs from tank dt {cfg.dt}")
    if mixed.dims != filters.d:
        raise InvalidInputError(f"{mixed.dims}-channel signal for {filters.d} filters")
    if probes.shape != (cfg.nx, cfg.ny):
        raise InvalidInputError("probe set was drawn for a different grid")
    n_dump = int(round(t_dump / cfg.dt))
    if not 0 <= n_dump < mixed.n_samples:
        raise InvalidInputError(f"signal duration {mixed.duration} does not exceed t_dump {t_dump}")
    return n_dump


def iter_probe_blocks(tank, mixed, probes, t_dump, block=1000):
    """Drive ``tank`` with ``mixed`` and yield recorded probe heights in blocks.

    Sample ``k`` of the mixed signal forces step ``k``; the state after
    that step is record ``k - n_dump``, with ``n_dump = round(t_dump / dt)``.
    Yields ``(first_record_index, heights)`` with ``heights`` of shape
    (rows, n_probes); the buffer is reused between yields.
    """
    n_dump = _check_drive(mixed, tank.filters, probes, tank.cfg, t_dump)
    n_rec = mixed.n_samples - n_dump
    buf = np.empty((min(block, n_rec), len(probes)))
    rows, cols = probes.rows + 1, probes.cols + 1
    values = mixed.values
    for k in range(n_dump):
        tank.step(values[k])
    start = 0
    while start < n_rec:
        stop = min(start + buf.shape[0], n_rec)
        out = buf[:stop - start]
        for r in range(stop - start):
            tank.step(values[n_dump + start + r])
            out[r] = tank._h[rows, cols]
        out -= 1.0
        yield start, out
        start = stop


def drive_and_record(initial, mixed, filters, probes, cfg, t_dump):
    """Probe series of a tank started from ``initial`` (see :func:`iter_probe_blocks`)."""
    n_dump = _check_drive(mixed, filters, probes, cfg, t_dump)
    tank = Tank(cfg, filters, initial)
    out = np.empty((mixed.n_samples - n_dump, len(probes)))
    for start, block in iter_probe_blocks(tank, mixed, probes, t_dump):
        out[start:start + block.shape[0]] = block
    return ProbeSeries(out, cfg.dt, mixed.t0 + (n_dump + 1) * cfg.dt, probes.id)


def gaussian_bump(cfg, amplitude=0.05, center=(0.4, 0.55), width=0.1):
    """Still water with a smooth Gaussian hump, handy for tests and demos."""
    x = (np.arange(cfg.nx) + 0.5) / cfg.nx
    y = (np.arange(cfg.ny) + 0.5) / cfg.ny
    X, Y = np.meshgrid(x, y, indexing="ij")
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    h = 1.0 + amplitude * np.exp(-r2 / width ** 2)
    return WaveField(h, np.zeros_like(h), np.zeros_like(h))
