"""Numerical observability diagnostics for the summed output y = s_a + s_b.

Two sources form one block-diagonal system x = [s_a; s_b] with output
y = s_a + s_b.  The stack G_k(x) = [y, y', ..., y^(k)] is estimated from
short forward and backward RK4 runs of each source around the state: a
symmetric (2m + 1)-point Taylor fit of the summed samples gives all
derivatives at once, and two step sizes h and h/2 are combined by Richardson
extrapolation, their difference serving as the error estimate.

When both sources are the same system, exchanging the halves leaves every
g_k unchanged, so G_k cannot distinguish x from its swap.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .attractors import eval_vector_field, get_attractor, integrate_rk4, on_attractor_state
from .errors import InvalidInputError, NumericalBlowupError, PrecisionError
from .trajectory import atomic_write_text

K_MAX_LIMIT = 4
DEFAULT_STEP = 4e-3
FINE_STEPS = 20
HALF_WIDTH = 4


@dataclass(frozen=True)
class ObservabilityStack:
    g: np.ndarray
    error: np.ndarray
    step: float
    half_width: int
    fine_steps: int

    @property
    def k_max(self):
        return self.g.shape[0] - 1

    def truncated(self, k):
        """Stack G_k = [g_0; ...; g_k] flattened."""
        return self.g[:k + 1].ravel()


def _split(spec_a, spec_b, x):
    a, b = get_attractor(spec_a), get_attractor(spec_b)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.dimension + b.dimension,):
        raise InvalidInputError(f"combined state must have {a.dimension + b.dimension} entries, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("non-finite combined state")
    return a, b, x[:a.dimension], x[a.dimension:]


def swap(x):
    """Exchange the two halves of a combined state."""
    x = np.asarray(x)
    d = x.shape[-1] // 2
    return np.concatenate([x[..., d:], x[..., :d]], axis=-1)


def combined_field(spec_a, spec_b, x):
    a, b, sa, sb = _split(spec_a, spec_b, x)
    return np.concatenate([eval_vector_field(a, sa), eval_vector_field(b, sb)])


def _window(spec, s, h, fine, m):
    """Samples of one source at t = j h, j = -m..m."""
    delta = h / fine
    fw, _, bad_f = kernels.rk4_attractor(spec.kind, s, delta, (m + 1) * fine, fine)
    bw, _, bad_b = kernels.rk4_attractor(spec.kind, s, -delta, (m + 1) * fine, fine)
    if bad_f >= 0 or bad_b >= 0:
        raise NumericalBlowupError(f"{spec.name}: derivative window blew up", step=max(bad_f, bad_b))
    return np.vstack([bw[:0:-1], fw])


def _taylor_matrix(m):
    j = np.arange(-m, m + 1, dtype=float)
    return np.array([[jj ** i / math.factorial(i) for i in range(2 * m + 1)] for jj in j])


def _fit(y, h, m, k_max):
    c = np.linalg.solve(_taylor_matrix(m), y)
    return c[:k_max + 1] / h ** np.arange(k_max + 1)[:, None]


def _leading_order(k, m):
    # symmetric stencils: odd derivatives lose one order less than even ones
    return 2 * m + 1 - k if k % 2 else 2 * m + 2 - k


def _richardson(a, b, sa, sb, k_max, step, fine_steps, m):
    coarse = _fit(_window(a, sa, step, fine_steps, m) + _window(b, sb, step, fine_steps, m), step, m, k_max)
    h2 = 0.5 * step
    fine = _fit(_window(a, sa, h2, fine_steps, m) + _window(b, sb, h2, fine_steps, m), h2, m, k_max)
    g = np.empty_like(fine)
    err = np.empty_like(fine)
    for k in range(k_max + 1):
        r = 2.0 ** _leading_order(k, m)
        g[k] = (r * fine[k] - coarse[k]) / (r - 1.0)
        err[k] = np.abs(fine[k] - coarse[k]) / (r - 1.0)
    g[0] = sa + sb
    err[0] = 0.0
    return g, err


def _worst_excess(g, err, rtol):
    """Largest error-to-tolerance ratio over k >= 1 (inf when non-finite)."""
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(err))):
        return math.inf, math.inf
    worst, bound = 0.0, 0.0
    for k in range(1, g.shape[0]):
        scale = rtol * np.linalg.norm(g[:k + 1])
        e = np.linalg.norm(err[k])
        if scale == 0.0:
            ratio = 0.0 if e == 0.0 else math.inf
        else:
            ratio = e / scale
        if ratio > worst:
            worst, bound = ratio, e
    return worst, bound


def derivative_stack(spec_a, spec_b, x, k_max, *, step=DEFAULT_STEP, fine_steps=FINE_STEPS,
                     half_width=HALF_WIDTH, rtol=1e-5, max_refinements=8):
    """g_0..g_k_max of y = s_a + s_b at the combined state ``x``.

    The step is halved (at most ``max_refinements`` times) until the
    Richardson error estimate of every g_k is within ``rtol`` times the
    size of the stack up to that order; :class:`PrecisionError` otherwise.
    """
    if not 0 <= k_max <= K_MAX_LIMIT:
        raise InvalidInputError(f"k_max must lie in [0, {K_MAX_LIMIT}]")
    if not step > 0 or fine_steps < 1:
        raise InvalidInputError("step must be positive and fine_steps >= 1")
    if half_width < (k_max + 1) // 2 + 1:
        raise InvalidInputError("half_width too small for the requested order")
    a, b, sa, sb = _split(spec_a, spec_b, x)
    h = float(step)
    bound = math.inf
    for _ in range(max_refinements + 1):
        try:
            g, err = _richardson(a, b, sa, sb, k_max, h, fine_steps, half_width)
        except NumericalBlowupError:
            g = err = None
        if g is not None:
            worst, bound = _worst_excess(g, err, rtol)
            if worst <= 1.0:
                return ObservabilityStack(g, err, h, half_width, fine_steps)
        h *= 0.5
    raise PrecisionError(f"derivative error estimate {bound:.3g} still above rtol={rtol:g} "
                         f"after {max_refinements} step halvings", error_estimate=float(bound))


@dataclass(frozen=True)
class SwapReport:
    """Relative differences ``|G_k(x) - G_k(Px)| / |G_k(x)|`` for k = 0..k_max."""

    state: np.ndarray
    ratios: np.ndarray
    residuals: np.ndarray
    norms: np.ndarray

    @property
    def k_max(self):
        return self.ratios.size - 1


def swap_symmetry_check(spec, x, k_max, *, spec_b=None, **stack_options):
    """Compare G_k at ``x`` with G_k at the half-swapped state.

    ``spec_b`` defaults to ``spec`` (the identical-systems case); give a
    different system to measure how far a distinct pair is from symmetry.
    """
    spec_b = spec if spec_b is None else spec_b
    x = np.asarray(x, dtype=np.float64)
    s1 = derivative_stack(spec, spec_b, x, k_max, **stack_options)
    s2 = derivative_stack(spec, spec_b, swap(x), k_max, **stack_options)
    res = np.empty(k_max + 1)
    nrm = np.empty(k_max + 1)
    for k in range(k_max + 1):
        res[k] = np.linalg.norm(s1.truncated(k) - s2.truncated(k))
        nrm[k] = np.linalg.norm(s1.truncated(k))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(nrm > 0, res / nrm, np.where(res > 0, np.inf, 0.0))
    return SwapReport(x.copy(), ratios, res, nrm)


def attractor_states(spec, n, rng, *, duration=200.0, sample_dt=0.03):
    """``n`` states drawn uniformly from one on-attractor trajectory."""
    spec = get_attractor(spec)
    x0 = on_attractor_state(spec, offset=rng.uniform(0.0, 100.0))
    sub = int(round(sample_dt / spec.integration_dt))
    traj = integrate_rk4(spec, x0, int(round(duration / spec.integration_dt)), subsample=sub)
    return traj.values[rng.integers(0, traj.n_samples, size=n)]


def combined_states(spec_a, spec_b, n, rng, **kwargs):
    return np.hstack([attractor_states(spec_a, n, rng, **kwargs), attractor_states(spec_b, n, rng, **kwargs)])


@dataclass(frozen=True)
class UnivalenceStats:
    min_ratio: float
    near_collision_fraction: float
    n_pairs: int
    threshold: float
    ratios: np.ndarray


def univalence_probe(spec_a, spec_b, n_samples, k_max, rng, *, threshold=1e-4, include_swaps=True,
                     **stack_options):
    """Empirical injectivity check of G_k over sampled pairs of states.

    Pairs are (x_i, x_{i+1}) over ``n_samples`` sampled combined states and,
    when ``include_swaps`` and the systems coincide, (x_i, P x_i).  Pairs
    closer than 1e-12 are dropped.  The ratio is
    ``|G_k(x) - G_k(x')| / |x - x'|``.
    """
    a, b = get_attractor(spec_a), get_attractor(spec_b)
    states = combined_states(a, b, n_samples, rng)
    stacks = [derivative_stack(a, b, s, k_max, **stack_options).truncated(k_max) for s in states]
    pairs = [(states[i], stacks[i], states[i + 1], stacks[i + 1]) for i in range(n_samples - 1)]
    if include_swaps and a == b:
        for s, g in zip(states, stacks):
            ps = swap(s)
            pairs.append((s, g, ps, derivative_stack(a, b, ps, k_max, **stack_options).truncated(k_max)))
    ratios = []
    for x1, g1, x2, g2 in pairs:
        dist = np.linalg.norm(x1 - x2)
        if dist < 1e-12:
            continue
        ratios.append(np.linalg.norm(g1 - g2) / dist)
    ratios = np.array(ratios)
    if ratios.size == 0:
        raise InvalidInputError("no non-degenerate pairs")
    return UnivalenceStats(float(ratios.min()), float(np.mean(ratios < threshold)), ratios.size,
                           threshold, ratios)


def write_swap_report(path, reports):
    """CSV rows (state index, state entries, k, residual ratio)."""
    reports = list(reports)
    if not reports:
        raise InvalidInputError("no reports")
    d = reports[0].state.size
    buf = io.StringIO()
    buf.write(",".join(["state"] + [f"x{i}" for i in range(d)] + ["k", "residual", "norm", "ratio"]) + "\n")
    for i, rep in enumerate(reports):
        xs = ",".join("%.17g" % v for v in rep.state)
        for k in range(rep.k_max + 1):
            buf.write(f"{i},{xs},{k},{rep.residuals[k]:.17g},{rep.norms[k]:.17g},{rep.ratios[k]:.17g}\n")
    atomic_write_text(path, buf.getvalue())


def summarize_swaps(reports, threshold):
    """Human-readable summary lines for a batch of swap reports."""
    ratios = np.array([r.ratios for r in reports])
    lines = [f"states: {len(reports)}"]
    for k in range(ratios.shape[1]):
        col = ratios[:, k]
        lines.append(f"k={k}: max ratio {col.max():.3g}, median {np.median(col):.3g}, "
                     f"fraction > {threshold:g}: {np.mean(col > threshold):.3f}")
    return "\n".join(lines)
