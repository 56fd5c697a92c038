/* Two-step Lax-Wendroff update for the forced, damped shallow-water
 * equations on a ghost-padded grid.  Row-major arrays of (nx+2) x (ny+2).
 */
#ifndef TANKSEP_LW_KERNEL_H
#define TANKSEP_LW_KERNEL_H

#define LW_WORK_ARRAYS 11

/* Returns 0 on success, 1 on CFL violation or non-finite state, 2 when some
 * depth is non-positive, all checked after the final substep.  *bad_sub
 * receives the failing substep (or -1) and *max_courant the largest
 * per-direction Courant number at the end of the call.  work must hold
 * LW_WORK_ARRAYS * (nx+2) * (ny+2) doubles. */
int lw_substeps(double *h, double *m, double *n, const double *P, double *work,
                int nx, int ny, double dt, double dx, double dy, double g,
                double b, int nsub, double cfl_limit, int *bad_sub,
                double *max_courant);

void lw_fill_ghosts(double *h, double *m, double *n, int nx, int ny);

#endif
