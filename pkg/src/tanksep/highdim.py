"""32-channel chaotic sources: Kuramoto-Sivashinsky and Lorenz 96.

KS is integrated in Fourier space with ETDRK4 (Cox-Matthews scheme, phi
functions by contour averaging as in Kassam & Trefethen 2005) and a 2/3-rule
dealiased nonlinear term.  Lorenz 96 uses the compiled RK4 kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import InvalidInputError, NumericalBlowupError
from .trajectory import Trajectory

BLOWUP = 1e6


@dataclass(frozen=True)
class KsSpec:
    domain_length: float = 22.0
    n_modes: int = 32
    dt: float = 1.0 / 16.0
    contour_points: int = 32

    def __post_init__(self):
        if not self.domain_length > 0 or self.n_modes < 4 or not self.dt > 0:
            raise InvalidInputError(f"invalid KS spec {self}")

    @property
    def grid(self):
        return self.domain_length * np.arange(self.n_modes) / self.n_modes


@dataclass(frozen=True)
class Lorenz96Spec:
    n: int = 32
    forcing: float = 8.0
    dt: float = 0.001

    def __post_init__(self):
        if self.n < 4 or not self.dt > 0:
            raise InvalidInputError(f"invalid Lorenz 96 spec {self}")


def substeps_for(sample_dt, max_step):
    """Smallest integer k with ``sample_dt / k <= max_step``."""
    k = max(1, math.ceil(sample_dt / max_step - 1e-9))
    return k


def _sampling(spec_dt, sample_dt):
    if sample_dt is None:
        return spec_dt, 1
    k = substeps_for(sample_dt, spec_dt)
    return sample_dt / k, k


class KsIntegrator:
    """ETDRK4 stepper for y_t = -y y_x - y_xx - y_xxxx on a periodic domain."""

    def __init__(self, spec: KsSpec, step: float):
        self.spec = spec
        self.step_size = step
        n = spec.n_modes
        k = 2.0 * np.pi * np.fft.rfftfreq(n, d=spec.domain_length / n)
        lin = k ** 2 - k ** 4
        kd = k.copy()
        if n % 2 == 0:
            kd[-1] = 0.0
        keep = np.arange(k.size) <= n // 3
        self._nl_factor = np.where(keep, -0.5j * kd, 0.0)

        h = step
        self.E = np.exp(h * lin)
        self.E2 = np.exp(h * lin / 2.0)
        m = spec.contour_points
        r = np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
        LR = h * lin[:, None] + r[None, :]
        self.Q = h * np.real(np.mean((np.exp(LR / 2.0) - 1.0) / LR, axis=1))
        self.f1 = h * np.real(np.mean((-4.0 - LR + np.exp(LR) * (4.0 - 3.0 * LR + LR ** 2)) / LR ** 3, axis=1))
        self.f2 = h * np.real(np.mean((2.0 + LR + np.exp(LR) * (LR - 2.0)) / LR ** 3, axis=1))
        self.f3 = h * np.real(np.mean((-4.0 - 3.0 * LR - LR ** 2 + np.exp(LR) * (4.0 - LR)) / LR ** 3, axis=1))

    def nonlinear(self, v):
        n = self.spec.n_modes
        y = np.fft.irfft(v, n)
        return self._nl_factor * np.fft.rfft(y * y)

    def step(self, v):
        Nv = self.nonlinear(v)
        a = self.E2 * v + self.Q * Nv
        Na = self.nonlinear(a)
        b = self.E2 * v + self.Q * Na
        Nb = self.nonlinear(b)
        c = self.E2 * a + self.Q * (2.0 * Nb - Nv)
        Nc = self.nonlinear(c)
        return self.E * v + Nv * self.f1 + 2.0 * (Na + Nb) * self.f2 + Nc * self.f3


def integrate_ks(spec, y0, T, sample_dt=None):
    """KS trajectory of ``round(T / sample_dt)`` samples, first sample ``y0``.

    With ``sample_dt`` given, the ETDRK4 step is ``sample_dt / k`` for the
    smallest integer ``k`` keeping it at or below ``spec.dt``.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    if y0.shape != (spec.n_modes,) or not np.all(np.isfinite(y0)):
        raise InvalidInputError(f"y0 must be finite with shape ({spec.n_modes},)")
    step, k = _sampling(spec.dt, sample_dt)
    n_out = int(round(T / (step * k)))
    if n_out < 1:
        raise InvalidInputError("T shorter than one sample")
    integ = KsIntegrator(spec, step)
    out = np.empty((n_out, spec.n_modes))
    v = np.fft.rfft(y0)
    out[0] = y0
    for s in range(1, n_out):
        for _ in range(k):
            v = integ.step(v)
        y = np.fft.irfft(v, spec.n_modes)
        if not np.all(np.abs(y) <= BLOWUP):
            raise NumericalBlowupError(f"KS blew up at sample {s}", step=s * k)
        out[s] = y
    names = tuple(f"y{i}" for i in range(spec.n_modes))
    return Trajectory(out, step * k, names)


def integrate_lorenz96(spec, x0, T, sample_dt=None):
    """Lorenz 96 trajectory sampled every ``sample_dt`` (default ``spec.dt``)."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (spec.n,) or not np.all(np.isfinite(x0)):
        raise InvalidInputError(f"x0 must be finite with shape ({spec.n},)")
    step, k = _sampling(spec.dt, sample_dt)
    n_out = int(round(T / (step * k)))
    if n_out < 1:
        raise InvalidInputError("T shorter than one sample")
    out, _, failed = kernels.rk4_lorenz96(x0, float(spec.forcing), step, n_out * k, k)
    if failed >= 0:
        raise NumericalBlowupError(f"Lorenz 96 blew up at step {failed}", step=failed)
    names = tuple(f"x{i}" for i in range(spec.n))
    return Trajectory(out, step * k, names)


def lorenz96_field(x, forcing=8.0):
    x = np.asarray(x, dtype=float)
    return (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1) - x + forcing


def ks_initial(spec, rng, amplitude=0.1):
    return amplitude * rng.standard_normal(spec.n_modes)


def lorenz96_initial(spec, rng, amplitude=0.01):
    x = np.full(spec.n, float(spec.forcing))
    return x + amplitude * rng.standard_normal(spec.n)
