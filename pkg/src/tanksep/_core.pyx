# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: fixed-step RK4 for the 3-D flows and Lorenz 96, tangent
space Lyapunov integration, and the two-step Lax-Wendroff shallow-water update.

Every routine here has a numpy twin in ``_pycore`` with the same signature.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, log, fabs, isfinite

cnp.import_array()

cdef double BLOWUP = 1e6


cdef inline void field3(int kind, double x, double y, double z, double* out) noexcept nogil:
    if kind == 0:      # Sprott N
        out[0] = -10.0 * y
        out[1] = 5.0 * x + 5.0 * z * z
        out[2] = 5.0 + 5.0 * y - 10.0 * z
    elif kind == 1:    # Rossler
        out[0] = -5.0 * y - 5.0 * z
        out[1] = 5.0 * x + 2.5 * y
        out[2] = 10.0 + 5.0 * x * z - 20.0 * z
    elif kind == 2:    # Halvorsen
        out[0] = -1.4 * x - 4.0 * y - 4.0 * z - y * y
        out[1] = -1.4 * y - 4.0 * z - 4.0 * x - z * z
        out[2] = -1.4 * z - 4.0 * x - 4.0 * y - x * x
    elif kind == 3:    # Lorenz
        out[0] = -10.0 * x + 10.0 * y
        out[1] = 28.0 * x - y - x * z
        out[2] = -8.0 * z / 3.0 + x * y
    elif kind == 4:    # Sprott B
        out[0] = 8.0 * y * z
        out[1] = 8.0 * x - 8.0 * y
        out[2] = 8.0 - 8.0 * x * y
    else:              # Thomas
        out[0] = -1.85 * x + 10.0 * sin(y)
        out[1] = -1.85 * y + 10.0 * sin(z)
        out[2] = -1.85 * z + 10.0 * sin(x)


cdef inline void jac3(int kind, double x, double y, double z, double* J) noexcept nogil:
    # row-major 3x3
    cdef int i
    for i in range(9):
        J[i] = 0.0
    if kind == 0:
        J[1] = -10.0
        J[3] = 5.0; J[5] = 10.0 * z
        J[7] = 5.0; J[8] = -10.0
    elif kind == 1:
        J[1] = -5.0; J[2] = -5.0
        J[3] = 5.0; J[4] = 2.5
        J[6] = 5.0 * z; J[8] = 5.0 * x - 20.0
    elif kind == 2:
        J[0] = -1.4; J[1] = -4.0 - 2.0 * y; J[2] = -4.0
        J[3] = -4.0; J[4] = -1.4; J[5] = -4.0 - 2.0 * z
        J[6] = -4.0 - 2.0 * x; J[7] = -4.0; J[8] = -1.4
    elif kind == 3:
        J[0] = -10.0; J[1] = 10.0
        J[3] = 28.0 - z; J[4] = -1.0; J[5] = -x
        J[6] = y; J[7] = x; J[8] = -8.0 / 3.0
    elif kind == 4:
        J[1] = 8.0 * z; J[2] = 8.0 * y
        J[3] = 8.0; J[4] = -8.0
        J[6] = -8.0 * y; J[7] = -8.0 * x
    else:
        J[0] = -1.85; J[1] = 10.0 * cos(y)
        J[4] = -1.85; J[5] = 10.0 * cos(z)
        J[6] = 10.0 * cos(x); J[8] = -1.85


cdef inline bint rk4_step3(int kind, double* s, double dt) noexcept nogil:
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double h2 = 0.5 * dt
    field3(kind, s[0], s[1], s[2], k1)
    field3(kind, s[0] + h2 * k1[0], s[1] + h2 * k1[1], s[2] + h2 * k1[2], k2)
    field3(kind, s[0] + h2 * k2[0], s[1] + h2 * k2[1], s[2] + h2 * k2[2], k3)
    field3(kind, s[0] + dt * k3[0], s[1] + dt * k3[1], s[2] + dt * k3[2], k4)
    cdef int i
    cdef bint ok = True
    for i in range(3):
        s[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not (fabs(s[i]) <= BLOWUP):
            ok = False
    return ok


def rk4_attractor(int kind, x0, double dt, long n_steps, long subsample):
    """Integrate a 3-D flow; sample the state every ``subsample`` steps.

    Returns ``(samples, final_state, failed_step)`` where ``samples[k]`` is the
    state after ``k * subsample`` steps and ``failed_step`` is -1 on success.
    """
    cdef long n_out = n_steps // subsample
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_out, 3))
    cdef double s[3]
    cdef long step = 0, k, j
    cdef long failed = -1
    x0 = np.asarray(x0, dtype=np.float64)
    s[0] = x0[0]; s[1] = x0[1]; s[2] = x0[2]
    with nogil:
        for k in range(n_out):
            out[k, 0] = s[0]; out[k, 1] = s[1]; out[k, 2] = s[2]
            for j in range(subsample):
                step += 1
                if not rk4_step3(kind, s, dt):
                    failed = step
                    break
            if failed >= 0:
                break
        if failed < 0:
            for j in range(n_steps - n_out * subsample):
                step += 1
                if not rk4_step3(kind, s, dt):
                    failed = step
                    break
    return out, np.array([s[0], s[1], s[2]]), failed


cdef inline void tangent_rhs(int kind, double* s, double* Q, double* ds, double* dQ) noexcept nogil:
    cdef double J[9]
    cdef int r, c, k
    cdef double acc
    field3(kind, s[0], s[1], s[2], ds)
    jac3(kind, s[0], s[1], s[2], J)
    for r in range(3):
        for c in range(3):
            acc = 0.0
            for k in range(3):
                acc += J[3 * r + k] * Q[3 * k + c]
            dQ[3 * r + c] = acc


cdef inline double trace3(int kind, double* s) noexcept nogil:
    cdef double J[9]
    jac3(kind, s[0], s[1], s[2], J)
    return J[0] + J[4] + J[8]


cdef inline bint mgs3(double* Q, double* rdiag) noexcept nogil:
    # modified Gram-Schmidt on the columns of Q, in place
    cdef int a, b, r
    cdef double dot, nrm
    for a in range(3):
        for b in range(a):
            dot = 0.0
            for r in range(3):
                dot += Q[3 * r + a] * Q[3 * r + b]
            for r in range(3):
                Q[3 * r + a] -= dot * Q[3 * r + b]
        nrm = 0.0
        for r in range(3):
            nrm += Q[3 * r + a] * Q[3 * r + a]
        nrm = sqrt(nrm)
        if not (nrm > 0.0):
            return False
        rdiag[a] = nrm
        for r in range(3):
            Q[3 * r + a] /= nrm
    return True


def lyapunov_attractor(int kind, x0, double dt, long n_transient, long n_qr, long steps_per_qr):
    """Benettin tangent-space integration with periodic re-orthonormalization.

    Returns ``(log_growth[3], trace_integral, final_state, failed_step)``;
    ``log_growth`` are the accumulated log stretch factors of the ordered
    Gram-Schmidt basis, ``trace_integral`` the rectangle-rule time integral of
    the Jacobian trace over the measured interval.
    """
    cdef double s[3]
    cdef double Q[9]
    cdef double ds[4][3]
    cdef double dQ[4][9]
    cdef double st[3]
    cdef double Qt[9]
    cdef double rdiag[3]
    cdef double acc[3]
    cdef double trace_sum = 0.0
    cdef double h2 = 0.5 * dt
    cdef long step = 0, blk, it, i
    cdef long failed = -1
    cdef int stage
    x0 = np.asarray(x0, dtype=np.float64)
    s[0] = x0[0]; s[1] = x0[1]; s[2] = x0[2]
    for i in range(9):
        Q[i] = 1.0 if i % 4 == 0 else 0.0
    acc[0] = acc[1] = acc[2] = 0.0
    with nogil:
        for it in range(n_transient):
            step += 1
            if not rk4_step3(kind, s, dt):
                failed = step
                break
        if failed < 0:
            for blk in range(n_qr):
                for it in range(steps_per_qr):
                    step += 1
                    trace_sum += trace3(kind, s)
                    tangent_rhs(kind, s, Q, ds[0], dQ[0])
                    for i in range(3):
                        st[i] = s[i] + h2 * ds[0][i]
                    for i in range(9):
                        Qt[i] = Q[i] + h2 * dQ[0][i]
                    tangent_rhs(kind, st, Qt, ds[1], dQ[1])
                    for i in range(3):
                        st[i] = s[i] + h2 * ds[1][i]
                    for i in range(9):
                        Qt[i] = Q[i] + h2 * dQ[1][i]
                    tangent_rhs(kind, st, Qt, ds[2], dQ[2])
                    for i in range(3):
                        st[i] = s[i] + dt * ds[2][i]
                    for i in range(9):
                        Qt[i] = Q[i] + dt * dQ[2][i]
                    tangent_rhs(kind, st, Qt, ds[3], dQ[3])
                    for i in range(3):
                        s[i] = s[i] + dt / 6.0 * (ds[0][i] + 2.0 * ds[1][i] + 2.0 * ds[2][i] + ds[3][i])
                        if not (fabs(s[i]) <= BLOWUP):
                            failed = step
                    for i in range(9):
                        Q[i] = Q[i] + dt / 6.0 * (dQ[0][i] + 2.0 * dQ[1][i] + 2.0 * dQ[2][i] + dQ[3][i])
                    if failed >= 0:
                        break
                if failed >= 0:
                    break
                if not mgs3(Q, rdiag):
                    failed = step
                    break
                for i in range(3):
                    acc[i] += log(rdiag[i])
    return (np.array([acc[0], acc[1], acc[2]]), trace_sum * dt,
            np.array([s[0], s[1], s[2]]), failed)


cdef inline void l96_rhs(double* x, double* out, int n, double forcing) noexcept nogil:
    cdef int i
    for i in range(n):
        out[i] = (x[(i + 1) % n] - x[(i - 2 + n) % n]) * x[(i - 1 + n) % n] - x[i] + forcing


def rk4_lorenz96(x0, double forcing, double dt, long n_steps, long subsample):
    """RK4 for the cyclic Lorenz 96 model; same return convention as ``rk4_attractor``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.array(x0, dtype=np.float64, copy=True)
    cdef int n = s.shape[0]
    cdef long n_out = n_steps // subsample
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_out, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] work = np.empty((5, n))
    cdef double* ps = &s[0]
    cdef double* k1 = &work[0, 0]
    cdef double* k2 = &work[1, 0]
    cdef double* k3 = &work[2, 0]
    cdef double* k4 = &work[3, 0]
    cdef double* tmp = &work[4, 0]
    cdef long step = 0, k, j, total
    cdef long failed = -1
    cdef int i
    total = n_steps
    with nogil:
        for step in range(total):
            if step % subsample == 0 and step // subsample < n_out:
                k = step // subsample
                for i in range(n):
                    out[k, i] = ps[i]
            l96_rhs(ps, k1, n, forcing)
            for i in range(n):
                tmp[i] = ps[i] + 0.5 * dt * k1[i]
            l96_rhs(tmp, k2, n, forcing)
            for i in range(n):
                tmp[i] = ps[i] + 0.5 * dt * k2[i]
            l96_rhs(tmp, k3, n, forcing)
            for i in range(n):
                tmp[i] = ps[i] + dt * k3[i]
            l96_rhs(tmp, k4, n, forcing)
            for i in range(n):
                ps[i] = ps[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not (fabs(ps[i]) <= BLOWUP):
                    failed = step + 1
            if failed >= 0:
                break
    return out, s, failed


cdef extern from "lw_kernel.h":
    int LW_WORK_ARRAYS
    int lw_substeps(double *h, double *m, double *n, const double *P, double *work,
                    int nx, int ny, double dt, double dx, double dy, double g,
                    double b, int nsub, double cfl_limit, int *bad_sub,
                    double *max_courant) nogil


def lw_advance(double[:, ::1] h, double[:, ::1] m, double[:, ::1] n,
               double[:, ::1] P, double dt, double dx, double dy,
               double g, double b, int nsub, double cfl_limit, work=None):
    """Advance the ghost-padded state ``(h, hu, hv)`` by ``nsub`` substeps of ``dt``.

    ``P`` is the ghost-padded mass source, held fixed over the call.
    Returns ``(status, substep, max_courant)``; status 0 ok, 1 CFL violation
    or non-finite state, 2 non-positive depth.
    """
    cdef int nx = h.shape[0] - 2
    cdef int ny = h.shape[1] - 2
    cdef Py_ssize_t size = (nx + 2) * (ny + 2)
    if (m.shape[0] != nx + 2 or n.shape[0] != nx + 2 or P.shape[0] != nx + 2
            or m.shape[1] != ny + 2 or n.shape[1] != ny + 2 or P.shape[1] != ny + 2):
        raise ValueError("h, m, n, P must share one padded shape")
    if work is None or work.size < LW_WORK_ARRAYS * size:
        work = np.empty(LW_WORK_ARRAYS * size)
    cdef double[::1] w = work
    cdef int bad_sub = -1
    cdef double max_cour = 0.0
    cdef int status
    with nogil:
        status = lw_substeps(&h[0, 0], &m[0, 0], &n[0, 0], &P[0, 0], &w[0],
                             nx, ny, dt, dx, dy, g, b, nsub, cfl_limit,
                             &bad_sub, &max_cour)
    return status, bad_sub, max_cour
