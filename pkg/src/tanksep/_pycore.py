"""Pure numpy/Python implementations of the kernels in ``_core.pyx``.

Selected automatically when the compiled extension is unavailable, or on
request through ``TANKSEP_PURE_PYTHON=1``.  Same signatures, same return
conventions; results agree with the compiled path to rounding.
"""

import math

import numpy as np

BLOWUP = 1e6


def _field3(kind, x, y, z):
    if kind == 0:
        return (-10.0 * y, 5.0 * x + 5.0 * z * z, 5.0 + 5.0 * y - 10.0 * z)
    if kind == 1:
        return (-5.0 * y - 5.0 * z, 5.0 * x + 2.5 * y, 10.0 + 5.0 * x * z - 20.0 * z)
    if kind == 2:
        return (-1.4 * x - 4.0 * y - 4.0 * z - y * y,
                -1.4 * y - 4.0 * z - 4.0 * x - z * z,
                -1.4 * z - 4.0 * x - 4.0 * y - x * x)
    if kind == 3:
        return (-10.0 * x + 10.0 * y, 28.0 * x - y - x * z, -8.0 * z / 3.0 + x * y)
    if kind == 4:
        return (8.0 * y * z, 8.0 * x - 8.0 * y, 8.0 - 8.0 * x * y)
    return (-1.85 * x + 10.0 * math.sin(y),
            -1.85 * y + 10.0 * math.sin(z),
            -1.85 * z + 10.0 * math.sin(x))


def _jac3(kind, x, y, z):
    if kind == 0:
        return ((0.0, -10.0, 0.0), (5.0, 0.0, 10.0 * z), (0.0, 5.0, -10.0))
    if kind == 1:
        return ((0.0, -5.0, -5.0), (5.0, 2.5, 0.0), (5.0 * z, 0.0, 5.0 * x - 20.0))
    if kind == 2:
        return ((-1.4, -4.0 - 2.0 * y, -4.0),
                (-4.0, -1.4, -4.0 - 2.0 * z),
                (-4.0 - 2.0 * x, -4.0, -1.4))
    if kind == 3:
        return ((-10.0, 10.0, 0.0), (28.0 - z, -1.0, -x), (y, x, -8.0 / 3.0))
    if kind == 4:
        return ((0.0, 8.0 * z, 8.0 * y), (8.0, -8.0, 0.0), (-8.0 * y, -8.0 * x, 0.0))
    return ((-1.85, 10.0 * math.cos(y), 0.0),
            (0.0, -1.85, 10.0 * math.cos(z)),
            (10.0 * math.cos(x), 0.0, -1.85))


def _rk4_step3(kind, s, dt):
    h2 = 0.5 * dt
    x, y, z = s
    k1 = _field3(kind, x, y, z)
    k2 = _field3(kind, x + h2 * k1[0], y + h2 * k1[1], z + h2 * k1[2])
    k3 = _field3(kind, x + h2 * k2[0], y + h2 * k2[1], z + h2 * k2[2])
    k4 = _field3(kind, x + dt * k3[0], y + dt * k3[1], z + dt * k3[2])
    new = [s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(3)]
    ok = all(abs(v) <= BLOWUP for v in new)
    return new, ok


def rk4_attractor(kind, x0, dt, n_steps, subsample):
    n_out = n_steps // subsample
    out = np.empty((n_out, 3))
    s = [float(v) for v in x0]
    step = 0
    for k in range(n_out):
        out[k] = s
        for _ in range(subsample):
            step += 1
            s, ok = _rk4_step3(kind, s, dt)
            if not ok:
                return out, np.array(s), step
    for _ in range(n_steps - n_out * subsample):
        step += 1
        s, ok = _rk4_step3(kind, s, dt)
        if not ok:
            return out, np.array(s), step
    return out, np.array(s), -1


def _mgs3(Q):
    Q = [list(row) for row in Q]
    rdiag = [0.0, 0.0, 0.0]
    for a in range(3):
        for b in range(a):
            dot = sum(Q[r][a] * Q[r][b] for r in range(3))
            for r in range(3):
                Q[r][a] -= dot * Q[r][b]
        nrm = math.sqrt(sum(Q[r][a] * Q[r][a] for r in range(3)))
        if not nrm > 0.0:
            return None, None
        rdiag[a] = nrm
        for r in range(3):
            Q[r][a] /= nrm
    return Q, rdiag


def lyapunov_attractor(kind, x0, dt, n_transient, n_qr, steps_per_qr):
    s = np.array(x0, dtype=float)
    step = 0
    for _ in range(n_transient):
        step += 1
        s_list, ok = _rk4_step3(kind, list(s), dt)
        s = np.array(s_list)
        if not ok:
            return np.zeros(3), 0.0, s, step
    Q = np.eye(3)
    acc = np.zeros(3)
    trace_sum = 0.0
    h2 = 0.5 * dt

    def rhs(state, basis):
        return np.array(_field3(kind, *state)), np.array(_jac3(kind, *state)) @ basis

    for _ in range(n_qr):
        for _ in range(steps_per_qr):
            step += 1
            trace_sum += float(np.trace(np.array(_jac3(kind, *s))))
            d1, D1 = rhs(s, Q)
            d2, D2 = rhs(s + h2 * d1, Q + h2 * D1)
            d3, D3 = rhs(s + h2 * d2, Q + h2 * D2)
            d4, D4 = rhs(s + dt * d3, Q + dt * D3)
            s = s + dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
            Q = Q + dt / 6.0 * (D1 + 2.0 * D2 + 2.0 * D3 + D4)
            if not np.all(np.abs(s) <= BLOWUP):
                return acc, trace_sum * dt, s, step
        Qn, rdiag = _mgs3(Q)
        if Qn is None:
            return acc, trace_sum * dt, s, step
        Q = np.array(Qn)
        acc += np.log(rdiag)
    return acc, trace_sum * dt, s, -1


def _l96_rhs(x, forcing):
    return (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1) - x + forcing


def rk4_lorenz96(x0, forcing, dt, n_steps, subsample):
    s = np.array(x0, dtype=float)
    n_out = n_steps // subsample
    out = np.empty((n_out, s.size))
    for step in range(n_steps):
        if step % subsample == 0 and step // subsample < n_out:
            out[step // subsample] = s
        k1 = _l96_rhs(s, forcing)
        k2 = _l96_rhs(s + 0.5 * dt * k1, forcing)
        k3 = _l96_rhs(s + 0.5 * dt * k2, forcing)
        k4 = _l96_rhs(s + dt * k3, forcing)
        s = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.abs(s) <= BLOWUP):
            return out, s, step + 1
    return out, s, -1


def _fill_ghosts(h, m, n):
    h[1:-1, 0] = h[1:-1, 1]
    m[1:-1, 0] = m[1:-1, 1]
    n[1:-1, 0] = -n[1:-1, 1]
    h[1:-1, -1] = h[1:-1, -2]
    m[1:-1, -1] = m[1:-1, -2]
    n[1:-1, -1] = -n[1:-1, -2]
    h[0, :] = h[1, :]
    m[0, :] = -m[1, :]
    n[0, :] = n[1, :]
    h[-1, :] = h[-2, :]
    m[-1, :] = -m[-2, :]
    n[-1, :] = n[-2, :]


def lw_advance(h, m, n, P, dt, dx, dy, g, b, nsub, cfl_limit, work=None):
    half_g = 0.5 * g
    ax, ay = 0.5 * dt / dx, 0.5 * dt / dy
    tx, ty = 0.125 * dt / dy, 0.125 * dt / dx
    rx, ry = dt / dx, dt / dy
    hdt = 0.5 * dt
    max_cour = 0.0
    c_ = slice(1, -1)
    for sub in range(nsub):
        _fill_ghosts(h, m, n)
        with np.errstate(invalid="ignore", divide="ignore"):
            inv = 1.0 / h
        F2 = m * m * inv + half_g * h * h
        F3 = m * n * inv
        G3 = n * n * inv + half_g * h * h

        # x-faces: padded cells i and i+1, interior rows
        def xpred(q, F, G):
            return (0.5 * (q[:-1, c_] + q[1:, c_])
                    - ax * (F[1:, c_] - F[:-1, c_])
                    - tx * (G[:-1, 2:] - G[:-1, :-2] + G[1:, 2:] - G[1:, :-2]))

        hf = xpred(h, m, n) + 0.25 * dt * (P[:-1, c_] + P[1:, c_])
        mf = xpred(m, F2, F3) - hdt * b * 0.5 * (m[:-1, c_] + m[1:, c_])
        nf = xpred(n, F3, G3) - hdt * b * 0.5 * (n[:-1, c_] + n[1:, c_])
        xf1 = mf
        xf2 = mf * mf / hf + half_g * hf * hf
        xf3 = mf * nf / hf
        xfn = nf

        def ypred(q, G, F):
            return (0.5 * (q[c_, :-1] + q[c_, 1:])
                    - ay * (G[c_, 1:] - G[c_, :-1])
                    - ty * (F[2:, :-1] - F[:-2, :-1] + F[2:, 1:] - F[:-2, 1:]))

        hf = ypred(h, n, m) + 0.25 * dt * (P[c_, :-1] + P[c_, 1:])
        mf = ypred(m, F3, F2) - hdt * b * 0.5 * (m[c_, :-1] + m[c_, 1:])
        nf = ypred(n, G3, F3) - hdt * b * 0.5 * (n[c_, :-1] + n[c_, 1:])
        yf1 = nf
        yf2 = mf * nf / hf
        yf3 = nf * nf / hf + half_g * hf * hf
        yfm = mf

        mh = 0.25 * (xf1[:-1] + xf1[1:] + yfm[:, :-1] + yfm[:, 1:])
        nh = 0.25 * (xfn[:-1] + xfn[1:] + yf1[:, :-1] + yf1[:, 1:])
        hh = (h[c_, c_] - rx * (xf1[1:] - xf1[:-1])
              - ry * (yf1[:, 1:] - yf1[:, :-1]) + dt * P[c_, c_])
        mm = (m[c_, c_] - rx * (xf2[1:] - xf2[:-1])
              - ry * (yf2[:, 1:] - yf2[:, :-1]) - dt * b * mh)
        nn = (n[c_, c_] - rx * (xf3[1:] - xf3[:-1])
              - ry * (yf3[:, 1:] - yf3[:, :-1]) - dt * b * nh)
        h[c_, c_] = hh
        m[c_, c_] = mm
        n[c_, c_] = nn
        if sub < nsub - 1:
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.sqrt(g * np.abs(hh))
            cu = (np.abs(mm) / hh + c) * rx
            cv = (np.abs(nn) / hh + c) * ry
            # fmax skips NaN cells, as the compiled kernel does
            max_cour = float(max(np.fmax.reduce(cu, axis=None, initial=0.0),
                                 np.fmax.reduce(cv, axis=None, initial=0.0)))
        if not np.isfinite(hh.sum() + mm.sum() + nn.sum()):
            return 1, sub, max_cour
        if not np.all(hh > 0.0):
            return 2, sub, max_cour
        if max_cour > cfl_limit:
            return 1, sub, max_cour
    _fill_ghosts(h, m, n)
    return 0, -1, max_cour
