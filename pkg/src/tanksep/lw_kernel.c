#include <math.h>
#include "lw_kernel.h"

void lw_fill_ghosts(double *h, double *m, double *n, int nx, int ny)
{
    const int W = ny + 2;
    for (int i = 1; i <= nx; ++i) {
        double *hr = h + i * W, *mr = m + i * W, *nr = n + i * W;
        hr[0] = hr[1];
        mr[0] = mr[1];
        nr[0] = -nr[1];
        hr[ny + 1] = hr[ny];
        mr[ny + 1] = mr[ny];
        nr[ny + 1] = -nr[ny];
    }
    for (int j = 0; j < W; ++j) {
        h[j] = h[W + j];
        m[j] = -m[W + j];
        n[j] = n[W + j];
        h[(nx + 1) * W + j] = h[nx * W + j];
        m[(nx + 1) * W + j] = -m[nx * W + j];
        n[(nx + 1) * W + j] = n[nx * W + j];
    }
}

static void cell_fluxes(const double *restrict h, const double *restrict m,
                        const double *restrict n, double *restrict F2,
                        double *restrict F3, double *restrict G3, int size,
                        double half_g)
{
    for (int k = 0; k < size; ++k) {
        const double inv = 1.0 / h[k];
        const double hh = half_g * h[k] * h[k];
        F2[k] = m[k] * m[k] * inv + hh;
        F3[k] = m[k] * n[k] * inv;
        G3[k] = n[k] * n[k] * inv + hh;
    }
}

/* x-face between padded rows i and i+1, for one row pair */
static void xface_row(const double *restrict h0, const double *restrict h1,
                      const double *restrict m0, const double *restrict m1,
                      const double *restrict n0, const double *restrict n1,
                      const double *restrict F20, const double *restrict F21,
                      const double *restrict F30, const double *restrict F31,
                      const double *restrict G30, const double *restrict G31,
                      const double *restrict P0, const double *restrict P1,
                      double *restrict f1, double *restrict f2,
                      double *restrict f3, double *restrict fn, int ny,
                      double ax, double tx, double qdt, double hdtb,
                      double half_g)
{
    for (int j = 1; j <= ny; ++j) {
        const double hf = 0.5 * (h0[j] + h1[j]) - ax * (m1[j] - m0[j])
            - tx * (n0[j + 1] - n0[j - 1] + n1[j + 1] - n1[j - 1])
            + qdt * (P0[j] + P1[j]);
        const double mavg = 0.5 * (m0[j] + m1[j]);
        const double navg = 0.5 * (n0[j] + n1[j]);
        const double mf = mavg - ax * (F21[j] - F20[j])
            - tx * (F30[j + 1] - F30[j - 1] + F31[j + 1] - F31[j - 1])
            - hdtb * mavg;
        const double nf = navg - ax * (F31[j] - F30[j])
            - tx * (G30[j + 1] - G30[j - 1] + G31[j + 1] - G31[j - 1])
            - hdtb * navg;
        const double inv = 1.0 / hf;
        f1[j] = mf;
        f2[j] = mf * mf * inv + half_g * hf * hf;
        f3[j] = mf * nf * inv;
        fn[j] = nf;
    }
}

/* y-faces (j, j+1) within padded row i */
static void yface_row(const double *restrict h, const double *restrict m,
                      const double *restrict n, const double *restrict mu,
                      const double *restrict md, const double *restrict F2u,
                      const double *restrict F2d, const double *restrict F3,
                      const double *restrict F3u, const double *restrict F3d,
                      const double *restrict G3, const double *restrict P,
                      double *restrict f1, double *restrict f2,
                      double *restrict f3, double *restrict fm, int ny,
                      double ay, double ty, double qdt, double hdtb,
                      double half_g)
{
    /* mu/md: rows i+1 and i-1 */
    for (int j = 0; j <= ny; ++j) {
        const double hf = 0.5 * (h[j] + h[j + 1]) - ay * (n[j + 1] - n[j])
            - ty * (mu[j] - md[j] + mu[j + 1] - md[j + 1])
            + qdt * (P[j] + P[j + 1]);
        const double mavg = 0.5 * (m[j] + m[j + 1]);
        const double navg = 0.5 * (n[j] + n[j + 1]);
        const double mf = mavg - ay * (F3[j + 1] - F3[j])
            - ty * (F2u[j] - F2d[j] + F2u[j + 1] - F2d[j + 1])
            - hdtb * mavg;
        const double nf = navg - ay * (G3[j + 1] - G3[j])
            - ty * (F3u[j] - F3d[j] + F3u[j + 1] - F3d[j + 1])
            - hdtb * navg;
        const double inv = 1.0 / hf;
        f1[j] = nf;
        f2[j] = mf * nf * inv;
        f3[j] = nf * nf * inv + half_g * hf * hf;
        fm[j] = mf;
    }
}

static void correct_row(double *restrict h, double *restrict m,
                        double *restrict n, const double *restrict P,
                        const double *restrict x1l, const double *restrict x1r,
                        const double *restrict x2l, const double *restrict x2r,
                        const double *restrict x3l, const double *restrict x3r,
                        const double *restrict xnl, const double *restrict xnr,
                        const double *restrict y1, const double *restrict y2,
                        const double *restrict y3, const double *restrict ym,
                        int ny, double rx, double ry, double dt, double b)
{
    for (int j = 1; j <= ny; ++j) {
        const double mh = 0.25 * (x1l[j] + x1r[j] + ym[j - 1] + ym[j]);
        const double nh = 0.25 * (xnl[j] + xnr[j] + y1[j - 1] + y1[j]);
        h[j] = h[j] - rx * (x1r[j] - x1l[j]) - ry * (y1[j] - y1[j - 1]) + dt * P[j];
        m[j] = m[j] - rx * (x2r[j] - x2l[j]) - ry * (y2[j] - y2[j - 1]) - dt * b * mh;
        n[j] = n[j] - rx * (x3r[j] - x3l[j]) - ry * (y3[j] - y3[j - 1]) - dt * b * nh;
    }
}

static void row_stats(const double *restrict h, const double *restrict m,
                      const double *restrict n, int ny, double g, double rx,
                      double ry, double *hmin, double *hsum, double *cmax)
{
    double lo = h[1], acc = 0.0, c = 0.0;
    for (int j = 1; j <= ny; ++j) {
        const double hh = h[j];
        const double inv = 1.0 / hh;
        const double s = sqrt(g * fabs(hh));
        const double cu = (fabs(m[j]) * inv + s) * rx;
        const double cv = (fabs(n[j]) * inv + s) * ry;
        lo = fmin(lo, hh);
        acc += hh + m[j] + n[j];
        c = fmax(c, fmax(cu, cv));
    }
    *hmin = fmin(*hmin, lo);
    *hsum += acc;
    *cmax = fmax(*cmax, c);
}

int lw_substeps(double *h, double *m, double *n, const double *P, double *work,
                int nx, int ny, double dt, double dx, double dy, double g,
                double b, int nsub, double cfl_limit, int *bad_sub,
                double *max_courant)
{
    const int W = ny + 2;
    const int size = (nx + 2) * W;
    double *F2 = work, *F3 = work + size, *G3 = work + 2 * size;
    double *xf1 = work + 3 * size, *xf2 = work + 4 * size;
    double *xf3 = work + 5 * size, *xfn = work + 6 * size;
    double *yf1 = work + 7 * size, *yf2 = work + 8 * size;
    double *yf3 = work + 9 * size, *yfm = work + 10 * size;
    const double half_g = 0.5 * g;
    const double ax = 0.5 * dt / dx, ay = 0.5 * dt / dy;
    const double tx = 0.125 * dt / dy, ty = 0.125 * dt / dx;
    const double qdt = 0.25 * dt, hdtb = 0.5 * dt * b;
    const double rx = dt / dx, ry = dt / dy;

    *bad_sub = -1;
    *max_courant = 0.0;
    for (int sub = 0; sub < nsub; ++sub) {
        lw_fill_ghosts(h, m, n, nx, ny);
        cell_fluxes(h, m, n, F2, F3, G3, size, half_g);
        for (int i = 0; i <= nx; ++i) {
            const int r0 = i * W, r1 = (i + 1) * W;
            xface_row(h + r0, h + r1, m + r0, m + r1, n + r0, n + r1,
                      F2 + r0, F2 + r1, F3 + r0, F3 + r1, G3 + r0, G3 + r1,
                      P + r0, P + r1, xf1 + r0, xf2 + r0, xf3 + r0, xfn + r0,
                      ny, ax, tx, qdt, hdtb, half_g);
        }
        for (int i = 1; i <= nx; ++i) {
            const int r = i * W, ru = (i + 1) * W, rd = (i - 1) * W;
            yface_row(h + r, m + r, n + r, m + ru, m + rd, F2 + ru, F2 + rd,
                      F3 + r, F3 + ru, F3 + rd, G3 + r, P + r,
                      yf1 + r, yf2 + r, yf3 + r, yfm + r,
                      ny, ay, ty, qdt, hdtb, half_g);
        }
        double hmin = INFINITY, hsum = 0.0, cmax = 0.0;
        for (int i = 1; i <= nx; ++i) {
            const int r = i * W, rl = (i - 1) * W;
            correct_row(h + r, m + r, n + r, P + r,
                        xf1 + rl, xf1 + r, xf2 + rl, xf2 + r,
                        xf3 + rl, xf3 + r, xfn + rl, xfn + r,
                        yf1 + r, yf2 + r, yf3 + r, yfm + r,
                        ny, rx, ry, dt, b);
            if (sub == nsub - 1)
                row_stats(h + r, m + r, n + r, ny, g, rx, ry, &hmin, &hsum, &cmax);
        }
        if (sub < nsub - 1)
            continue;
        *max_courant = cmax;
        if (!isfinite(hsum)) {
            *bad_sub = sub;
            return 1;
        }
        if (!(hmin > 0.0)) {
            *bad_sub = sub;
            return 2;
        }
        if (cmax > cfl_limit) {
            *bad_sub = sub;
            return 1;
        }
    }
    lw_fill_ghosts(h, m, n, nx, ny);
    return 0;
}
