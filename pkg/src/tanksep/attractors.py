"""Six 3-D chaotic flows, RK4 trajectories, normalization and Lyapunov spectra.

The flows are time-rescaled versions of the classical systems so that all of
them evolve on comparable time scales:

    Sprott N   x' = -10y             y' = 5x + 5z^2         z' = 5 + 5y - 10z
    Rossler    x' = -5y - 5z         y' = 5x + 2.5y         z' = 10 + 5xz - 20z
    Halvorsen  x' = -1.4x-4y-4z-y^2  (cyclic in x, y, z)
    Lorenz     x' = -10x + 10y       y' = 28x - y - xz      z' = -8z/3 + xy
    Sprott B   x' = 8yz              y' = 8x - 8y           z' = 8 - 8xy
    Thomas     x' = -1.85x + 10 sin y  (cyclic in x, y, z)

The Rossler row is the standard a=0.5, b=2, c=4 system scaled by 5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DegenerateChannelError, InvalidInputError, NumericalBlowupError
from .trajectory import Normalization, Trajectory

DEFAULT_DT = 1e-4
TRANSIENT = 100.0


@dataclass(frozen=True)
class AttractorSpec:
    name: str
    kind: int
    default_initial_condition: tuple[float, float, float]
    integration_dt: float = DEFAULT_DT
    dimension: int = 3

    def __post_init__(self):
        if not self.integration_dt > 0:
            raise InvalidInputError("integration_dt must be positive")

    @property
    def label(self):
        return self.name


SPROTT_N = AttractorSpec("SprottN", 0, (0.1, 0.1, 0.1))
ROSSLER = AttractorSpec("Rossler", 1, (0.1, 0.1, 0.1))
HALVORSEN = AttractorSpec("Halvorsen", 2, (-1.0, 0.0, 0.5))
LORENZ = AttractorSpec("Lorenz", 3, (1.0, 1.0, 1.0))
SPROTT_B = AttractorSpec("SprottB", 4, (0.5, 0.5, 0.5))
THOMAS = AttractorSpec("Thomas", 5, (1.0, 0.0, 0.0))

ATTRACTORS = (SPROTT_N, ROSSLER, HALVORSEN, LORENZ, SPROTT_B, THOMAS)
SYSTEM_NAMES = tuple(s.name for s in ATTRACTORS)

# constant Jacobian trace where the divergence does not depend on the state
CONSTANT_TRACE = {
    "SprottN": -10.0,
    "Halvorsen": -4.2,
    "Lorenz": -41.0 / 3.0,
    "SprottB": -8.0,
    "Thomas": -5.55,
}


def _key(name):
    return "".join(ch for ch in name.lower() if ch.isalnum()).replace("ö", "o")


_LOOKUP = {_key(s.name): s for s in ATTRACTORS}
_LOOKUP.update({"roessler": ROSSLER, "rössler": ROSSLER})


def get_attractor(name):
    """Look up a spec by name, case- and punctuation-insensitively."""
    if isinstance(name, AttractorSpec):
        return name
    try:
        return _LOOKUP[_key(name)]
    except KeyError:
        raise InvalidInputError(
            f"unknown attractor {name!r}; expected one of {', '.join(SYSTEM_NAMES)}") from None


def _check_state(state):
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (3,):
        raise InvalidInputError(f"state must have shape (3,), got {state.shape}")
    if not np.all(np.isfinite(state)):
        raise InvalidInputError(f"non-finite state {state}")
    return state


def eval_vector_field(spec, state):
    spec = get_attractor(spec)
    s = _check_state(state)
    x, y, z = s
    k = spec.kind
    if k == 0:
        return np.array([-10.0 * y, 5.0 * x + 5.0 * z * z, 5.0 + 5.0 * y - 10.0 * z])
    if k == 1:
        return np.array([-5.0 * y - 5.0 * z, 5.0 * x + 2.5 * y, 10.0 + 5.0 * x * z - 20.0 * z])
    if k == 2:
        return np.array([-1.4 * x - 4.0 * y - 4.0 * z - y * y,
                         -1.4 * y - 4.0 * z - 4.0 * x - z * z,
                         -1.4 * z - 4.0 * x - 4.0 * y - x * x])
    if k == 3:
        return np.array([-10.0 * x + 10.0 * y, 28.0 * x - y - x * z, -8.0 * z / 3.0 + x * y])
    if k == 4:
        return np.array([8.0 * y * z, 8.0 * x - 8.0 * y, 8.0 - 8.0 * x * y])
    return np.array([-1.85 * x + 10.0 * math.sin(y),
                     -1.85 * y + 10.0 * math.sin(z),
                     -1.85 * z + 10.0 * math.sin(x)])


def jacobian(spec, state):
    """Analytic Jacobian of :func:`eval_vector_field`."""
    spec = get_attractor(spec)
    x, y, z = _check_state(state)
    k = spec.kind
    if k == 0:
        J = [[0.0, -10.0, 0.0], [5.0, 0.0, 10.0 * z], [0.0, 5.0, -10.0]]
    elif k == 1:
        J = [[0.0, -5.0, -5.0], [5.0, 2.5, 0.0], [5.0 * z, 0.0, 5.0 * x - 20.0]]
    elif k == 2:
        J = [[-1.4, -4.0 - 2.0 * y, -4.0], [-4.0, -1.4, -4.0 - 2.0 * z], [-4.0 - 2.0 * x, -4.0, -1.4]]
    elif k == 3:
        J = [[-10.0, 10.0, 0.0], [28.0 - z, -1.0, -x], [y, x, -8.0 / 3.0]]
    elif k == 4:
        J = [[0.0, 8.0 * z, 8.0 * y], [8.0, -8.0, 0.0], [-8.0 * y, -8.0 * x, 0.0]]
    else:
        J = [[-1.85, 10.0 * math.cos(y), 0.0], [0.0, -1.85, 10.0 * math.cos(z)],
             [10.0 * math.cos(x), 0.0, -1.85]]
    return np.array(J)


def integrate_rk4(spec, x0, n_steps, dt=None, subsample=1):
    """Classical fixed-step RK4.

    Sample ``k`` of the result is the state after ``k * subsample`` steps, so
    the returned trajectory has ``n_steps // subsample`` samples spaced
    ``dt * subsample`` apart, starting at ``x0``.
    """
    spec = get_attractor(spec)
    dt = spec.integration_dt if dt is None else float(dt)
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if subsample < 1 or n_steps < subsample:
        raise InvalidInputError("need subsample >= 1 and n_steps >= subsample")
    out, _, failed = kernels.rk4_attractor(spec.kind, _check_state(x0), dt, int(n_steps), int(subsample))
    if failed >= 0:
        raise NumericalBlowupError(f"{spec.name}: |state| exceeded 1e6 at step {failed}", step=failed)
    return Trajectory(out, dt * subsample, ("x", "y", "z"))


def advance(spec, x0, duration, dt=None):
    """State after integrating ``duration`` time units from ``x0``."""
    spec = get_attractor(spec)
    dt = spec.integration_dt if dt is None else float(dt)
    n = int(round(duration / dt))
    if n == 0:
        return _check_state(x0).copy()
    _, final, failed = kernels.rk4_attractor(spec.kind, _check_state(x0), dt, n, n)
    if failed >= 0:
        raise NumericalBlowupError(f"{spec.name}: |state| exceeded 1e6 at step {failed}", step=failed)
    return final


def on_attractor_state(spec, offset=0.0, transient=TRANSIENT):
    """Default initial condition pushed ``transient + offset`` time units along the flow."""
    spec = get_attractor(spec)
    return advance(spec, spec.default_initial_condition, transient + offset)


def normalize(traj):
    """Rescale every channel to zero mean and unit population variance."""
    mean = traj.values.mean(axis=0)
    std = traj.values.std(axis=0)
    bad = [traj.names[i] for i in np.flatnonzero(~(std > 1e-12))]
    if bad:
        raise DegenerateChannelError(f"zero-variance channel(s): {', '.join(bad)}")
    norm = Normalization(mean, std)
    return traj.with_values(norm.apply(traj.values), normalization=norm)


@dataclass(frozen=True)
class LyapunovResult:
    exponents: np.ndarray
    kaplan_yorke_dimension: float
    integration_time: float
    qr_interval: float
    mean_trace: float

    @property
    def exponent_sum(self):
        return float(self.exponents.sum())


def kaplan_yorke(exponents):
    lam = np.asarray(exponents, dtype=float)
    if lam.ndim != 1 or lam.size == 0 or not np.all(np.isfinite(lam)):
        raise InvalidInputError("exponents must be a non-empty finite 1-D sequence")
    if np.any(np.diff(lam) > 0):
        raise InvalidInputError("exponents must be sorted in descending order")
    partial = np.cumsum(lam)
    if partial[0] < 0:
        return 0.0
    nonneg = np.flatnonzero(partial >= 0)
    k = int(nonneg[-1]) + 1
    if k == lam.size:
        return float(lam.size)
    return k + float(partial[k - 1]) / abs(float(lam[k]))


def lyapunov_spectrum(spec, total_time=2000.0, qr_interval=0.1, transient=TRANSIENT,
                      dt=None, x0=None):
    """Benettin spectrum with periodic Gram-Schmidt re-orthonormalization."""
    spec = get_attractor(spec)
    dt = spec.integration_dt if dt is None else float(dt)
    steps_per_qr = max(1, int(round(qr_interval / dt)))
    n_qr = max(1, int(round(total_time / (steps_per_qr * dt))))
    n_transient = int(round(transient / dt))
    start = _check_state(spec.default_initial_condition if x0 is None else x0)
    logs, trace_int, _, failed = kernels.lyapunov_attractor(
        spec.kind, start, dt, n_transient, n_qr, steps_per_qr)
    if failed >= 0:
        raise NumericalBlowupError(f"{spec.name}: tangent integration blew up at step {failed}", step=failed)
    measured = n_qr * steps_per_qr * dt
    exps = np.sort(np.asarray(logs) / measured)[::-1]
    return LyapunovResult(exps, kaplan_yorke(exps), measured, steps_per_qr * dt, trace_int / measured)
