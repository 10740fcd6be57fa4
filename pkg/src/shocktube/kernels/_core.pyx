# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: profile/variational/zero-frequency integrations and
Drury frame evolution.

Semantics mirror :mod:`shocktube.kernels.pyfallback` (same Dormand-Prince
5(4) tableau, PI step controller, TR-BDF2 constants, event conventions and
status codes); parity is covered by tests.  All inner loops run without the
GIL, so scans parallelize across threads.
"""

import numpy as np

cimport cython
from libc.math cimport INFINITY, NAN, fabs, fmax, fmin, isfinite, isnan, log, pow, sqrt

__all__ = [
    "poly_profile",
    "poly_variational",
    "poly_d0",
    "local_profile",
    "local_d0",
    "frame_evolve",
]

DEF MAXDIM = 8
DEF NSTAGE = 7
DEF MAXEV = 2
DEF FRAME_N = 5
DEF FRAME_MAXK = 5

from shocktube.errors import IntegratorFailure

# ---------------------------------------------------------------------------
# Dormand-Prince tableau (shared with the Python backend)
# ---------------------------------------------------------------------------

cdef double DP_C[NSTAGE]
DP_C[0] = 0.0; DP_C[1] = 1.0/5.0; DP_C[2] = 3.0/10.0; DP_C[3] = 4.0/5.0
DP_C[4] = 8.0/9.0; DP_C[5] = 1.0; DP_C[6] = 1.0

cdef double DP_A[NSTAGE][NSTAGE]
cdef int _i, _j
for _i in range(NSTAGE):
    for _j in range(NSTAGE):
        DP_A[_i][_j] = 0.0
DP_A[1][0] = 1.0/5.0
DP_A[2][0] = 3.0/40.0;        DP_A[2][1] = 9.0/40.0
DP_A[3][0] = 44.0/45.0;       DP_A[3][1] = -56.0/15.0;      DP_A[3][2] = 32.0/9.0
DP_A[4][0] = 19372.0/6561.0;  DP_A[4][1] = -25360.0/2187.0; DP_A[4][2] = 64448.0/6561.0
DP_A[4][3] = -212.0/729.0
DP_A[5][0] = 9017.0/3168.0;   DP_A[5][1] = -355.0/33.0;     DP_A[5][2] = 46732.0/5247.0
DP_A[5][3] = 49.0/176.0;      DP_A[5][4] = -5103.0/18656.0
DP_A[6][0] = 35.0/384.0;      DP_A[6][1] = 0.0;             DP_A[6][2] = 500.0/1113.0
DP_A[6][3] = 125.0/192.0;     DP_A[6][4] = -2187.0/6784.0;  DP_A[6][5] = 11.0/84.0

cdef double DP_B5[NSTAGE]
DP_B5[0] = 35.0/384.0; DP_B5[1] = 0.0; DP_B5[2] = 500.0/1113.0
DP_B5[3] = 125.0/192.0; DP_B5[4] = -2187.0/6784.0; DP_B5[5] = 11.0/84.0; DP_B5[6] = 0.0

cdef double DP_E[NSTAGE]
DP_E[0] = 71.0/57600.0; DP_E[1] = 0.0; DP_E[2] = -71.0/16695.0
DP_E[3] = 71.0/1920.0; DP_E[4] = -17253.0/339200.0; DP_E[5] = 22.0/525.0
DP_E[6] = -1.0/40.0

cdef double DP_D[NSTAGE]
DP_D[0] = -12715105075.0/11282082432.0
DP_D[1] = 0.0
DP_D[2] = 87487479700.0/32700410799.0
DP_D[3] = -10690763975.0/1880347072.0
DP_D[4] = 701980252875.0/199316789632.0
DP_D[5] = -1453857185.0/822651844.0
DP_D[6] = 69997945.0/29380423.0

cdef double TB_GAMMA = 2.0 - sqrt(2.0)
cdef double TB_D = 1.0 - sqrt(2.0) / 2.0
cdef double TB_B0 = sqrt(2.0) / 4.0
cdef double TB_B1 = sqrt(2.0) / 4.0
cdef double TB_B2 = 1.0 - sqrt(2.0) / 2.0
cdef double TB_BH1 = 1.0 / (6.0 * TB_GAMMA * (1.0 - TB_GAMMA))
cdef double TB_BH2 = (2.0 - 3.0 * TB_GAMMA) / (6.0 * (1.0 - TB_GAMMA))
cdef double TB_BH0 = 1.0 - TB_BH1 - TB_BH2


# ---------------------------------------------------------------------------
# Model right-hand sides (tags select the system inside the driver)
# ---------------------------------------------------------------------------

cdef struct SysCtx:
    int tag               # 0 poly_profile, 1 poly_var, 2 poly_d0,
                          # 3 local_profile, 4 local_d0
    int ndim
    double pars[12]
    # Hermite mesh for base-profile interpolation (tag 4)
    double* mx
    double* mw1
    double* mw2
    double* md1
    double* md2
    int nmesh
    double sign           # direction factor for transformed spans


cdef inline void poly_rhs_c(double u, double e, double c1, double c2,
                            double G, double al, double nu, double u0,
                            double* du, double* de) nogil:
    du[0] = (u0 / al) * (c1 + u + G * e / u)
    de[0] = (u0 / nu) * (c2 - c1 * u - 0.5 * u * u + e)


cdef inline void local_eos_c(double rho, double T, double* p, double* e) nogil:
    p[0] = rho * (T - 1.0) - 1.0 / rho
    e[0] = T - 1.0 + log((T - 1.0) / rho) + 0.5 / (rho * rho)


cdef inline void local_rhs_c(double u, double T, double m, double C1, double C2,
                             double al, double ka, double* du, double* dT) nogil:
    cdef double rho = m / u
    cdef double p, e
    local_eos_c(rho, T, &p, &e)
    du[0] = (m * u + p - C1) / al
    dT[0] = (m * (e + 0.5 * u * u) + p * u - al * u * du[0] - C2) / ka


cdef inline void hermite2(double x, double* mx, double* w1, double* w2,
                          double* d1, double* d2, int n,
                          double* a, double* b) nogil:
    cdef int lo = 0, hi = n - 1, mid
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if mx[mid] <= x:
            lo = mid
        else:
            hi = mid
    cdef double h = mx[lo + 1] - mx[lo]
    cdef double th = (x - mx[lo]) / h
    cdef double h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th)
    cdef double h10 = th * (1.0 - th) * (1.0 - th)
    cdef double h01 = th * th * (3.0 - 2.0 * th)
    cdef double h11 = th * th * (th - 1.0)
    a[0] = h00 * w1[lo] + h10 * h * d1[lo] + h01 * w1[lo + 1] + h11 * h * d1[lo + 1]
    b[0] = h00 * w2[lo] + h10 * h * d2[lo] + h01 * w2[lo + 1] + h11 * h * d2[lo + 1]


cdef int sys_rhs(SysCtx* ctx, double x, double* y, double* dy) nogil:
    """Evaluate the tagged system; returns 0, or 1 for a domain violation
    (treated by the driver as a rejected step)."""
    cdef double G, al, nu, u0, c1, c2, ka, kn
    cdef double u, e, du, de, j11, j12, j21, j22
    cdef double m11, m12, m21, m22, d1a, d2a, d1b, d2b
    cdef double m, C1, C2, kap, rho, p, ee
    cdef double p_r, p_T, e_r, e_T
    cdef double uh, Th, duh, dTh, uL, a11, a12, b_u, b_T, rho_of_u
    cdef int j

    if ctx.tag <= 2:
        G = ctx.pars[0]; al = ctx.pars[1]; nu = ctx.pars[2]; u0 = ctx.pars[3]
        c1 = ctx.pars[4]; c2 = ctx.pars[5]
        u = y[0]; e = y[1]
        if u == 0.0 or not isfinite(u) or not isfinite(e):
            return 1
        poly_rhs_c(u, e, c1, c2, G, al, nu, u0, &du, &de)
        dy[0] = du; dy[1] = de
        if ctx.tag == 0:
            return 0
        ka = u0 / al; kn = u0 / nu
        j11 = ka * (1.0 - G * e / (u * u)); j12 = ka * G / u
        if ctx.tag == 1:
            j21 = kn * (-c1 - u); j22 = kn
            dy[2] = ka + j11 * y[2] + j12 * y[3]
            dy[3] = kn * (-u) + j21 * y[2] + j22 * y[3]
            dy[4] = j11 * y[4] + j12 * y[5]
            dy[5] = kn + j21 * y[4] + j22 * y[5]
            return 0
        # tag 2: zero-frequency system
        m21 = kn * (-(al / u0) * du + G * e / u); m22 = kn
        d1a = al / u0; d2a = al
        d1b = 0.0;     d2b = nu / u0
        dy[2] = ka * d1a + j11 * y[2] + j12 * y[3]
        dy[3] = kn * (d2a - d1a * u) + m21 * y[2] + m22 * y[3]
        dy[4] = ka * d1b + j11 * y[4] + j12 * y[5]
        dy[5] = kn * (d2b - d1b * u) + m21 * y[4] + m22 * y[5]
        return 0

    if ctx.tag == 3:
        m = ctx.pars[0]; C1 = ctx.pars[1]; C2 = ctx.pars[2]
        al = ctx.pars[3]; kap = ctx.pars[4]
        u = y[0]
        if u <= 0.0 or y[1] <= 1.0 or not isfinite(u) or not isfinite(y[1]):
            return 1
        local_rhs_c(u, y[1], m, C1, C2, al, kap, &du, &de)
        dy[0] = ctx.sign * du
        dy[1] = ctx.sign * de
        return 0

    # tag 4: local zero-frequency system along an interpolated base profile
    m = ctx.pars[0]; C1 = ctx.pars[1]; C2 = ctx.pars[2]
    al = ctx.pars[3]; kap = ctx.pars[4]; uL = ctx.pars[5]
    hermite2(x, ctx.mx, ctx.mw1, ctx.mw2, ctx.md1, ctx.md2, ctx.nmesh, &uh, &Th)
    local_rhs_c(uh, Th, m, C1, C2, al, kap, &duh, &dTh)
    rho = m / uh
    local_eos_c(rho, Th, &p, &ee)
    p_r = (Th - 1.0) + 1.0 / (rho * rho)
    p_T = rho
    e_r = -1.0 / rho - 1.0 / (rho * rho * rho)
    e_T = 1.0 + 1.0 / (Th - 1.0)
    rho_of_u = -rho / uh
    a11 = (2.0 * m + (uh * uh + p_r) * rho_of_u) / al
    a12 = p_T / al
    b_u = (m * e_r + uh * p_r) * rho_of_u + m * uh + p - al * duh
    b_T = m * e_T + uh * p_T
    cdef double d1, d2, uj, Tj, duj
    for j in range(2):
        d1 = 1.0 if j == 0 else 0.0
        d2 = 0.0 if j == 0 else 1.0
        uj = y[2 * j]; Tj = y[2 * j + 1]
        duj = d1 + a11 * uj + a12 * Tj
        dy[2 * j] = duj
        dy[2 * j + 1] = (kap * d2 + al * uL * d1 + b_u * uj + b_T * Tj
                         - al * uh * duj) / kap
    return 0


cdef int sys_jac2(SysCtx* ctx, double x, double* y, double* J) nogil:
    """Analytic 2x2 Jacobian for the stiff driver (tags 0 and 3 only)."""
    cdef double G, al, nu, u0, c1, c2, u, e
    cdef double m, C1, C2, kap, rho, p, ee, p_r, p_T, e_r, e_T
    cdef double drho_du, duv, dT
    cdef double j00, j01, j10, j11
    if ctx.tag == 0:
        G = ctx.pars[0]; al = ctx.pars[1]; nu = ctx.pars[2]; u0 = ctx.pars[3]
        c1 = ctx.pars[4]; c2 = ctx.pars[5]
        u = y[0]; e = y[1]
        if u == 0.0:
            return 1
        J[0] = (u0 / al) * (1.0 - G * e / (u * u))
        J[1] = (u0 / al) * G / u
        J[2] = (u0 / nu) * (-c1 - u)
        J[3] = u0 / nu
        return 0
    m = ctx.pars[0]; C1 = ctx.pars[1]; C2 = ctx.pars[2]
    al = ctx.pars[3]; kap = ctx.pars[4]
    u = y[0]
    if u <= 0.0 or y[1] <= 1.0:
        return 1
    rho = m / u
    local_eos_c(rho, y[1], &p, &ee)
    p_r = (y[1] - 1.0) + 1.0 / (rho * rho)
    p_T = rho
    e_r = -1.0 / rho - 1.0 / (rho * rho * rho)
    e_T = 1.0 + 1.0 / (y[1] - 1.0)
    drho_du = -m / (u * u)
    duv = (m * u + p - C1) / al
    # unsigned Jacobian of the forward-direction right-hand side
    j00 = (m + p_r * drho_du) / al
    j01 = p_T / al
    j10 = (m * (e_r * drho_du + u) + p_r * drho_du * u + p
           - al * duv - al * u * j00) / kap
    j11 = (m * e_T + p_T * u - al * u * j01) / kap
    J[0] = ctx.sign * j00
    J[1] = ctx.sign * j01
    J[2] = ctx.sign * j10
    J[3] = ctx.sign * j11
    return 0


# ---------------------------------------------------------------------------
# Event specification and result buffers
# ---------------------------------------------------------------------------

cdef struct EvSpec:
    int index
    double offset
    int terminal          # 1 terminal, 0 recorded only


cdef struct DriveResult:
    int status            # 0 ok, 2 terminal event, 3 blowup, 4 minstep, 6 maxsteps
    int event_which       # index into the event list for status 2
    double x_end
    double x_rec          # first non-terminal crossing (NAN if none)
    double resid


cdef inline double dense_eval(double* r, int ndim, int comp, double th) nogil:
    """contd5-style dense output for one component."""
    cdef double r0 = r[comp], r1 = r[ndim + comp], r2 = r[2 * ndim + comp]
    cdef double r3 = r[3 * ndim + comp], r4 = r[4 * ndim + comp]
    return r0 + th * (r1 + (1.0 - th) * (r2 + th * (r3 + (1.0 - th) * r4)))


cdef inline double dense_deriv(double* r, int ndim, int comp, double th, double h) nogil:
    cdef double r1 = r[ndim + comp], r2 = r[2 * ndim + comp]
    cdef double r3 = r[3 * ndim + comp], r4 = r[4 * ndim + comp]
    return (r1 + (1.0 - 2.0 * th) * r2 + (2.0 * th - 3.0 * th * th) * r3
            + (2.0 * th - 6.0 * th * th + 4.0 * th * th * th) * r4) / h


cdef inline double hermite_eval(double y0, double y1, double f0, double f1,
                                double h, double th) nogil:
    cdef double h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th)
    cdef double h10 = th * (1.0 - th) * (1.0 - th)
    cdef double h01 = th * th * (3.0 - 2.0 * th)
    cdef double h11 = th * th * (th - 1.0)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


cdef inline double hermite_deriv(double y0, double y1, double f0, double f1,
                                 double h, double th) nogil:
    return ((6.0 * th * th - 6.0 * th) * (y0 - y1) / h
            + (3.0 * th * th - 4.0 * th + 1.0) * f0
            + (3.0 * th * th - 2.0 * th) * f1)


cdef double SAFETY = 0.9
cdef double PI_A_RK = 0.7 / 5.0
cdef double PI_B_RK = 0.4 / 5.0
cdef double PI_A_TB = 0.7 / 3.0
cdef double PI_B_TB = 0.4 / 3.0
cdef double EV_REL = 1e-12


cdef void drive_dp45(SysCtx* ctx, double a, double b, double* y,
                     double rtol, double atol, double h_init, double h_min,
                     double h_max, double blowup, long max_steps,
                     EvSpec* evs, int nev,
                     double* rec_x, double* rec_y, long rec_cap, long* rec_n,
                     int n_resid, DriveResult* out) nogil:
    """Dormand-Prince driver with events, optional mesh recording and
    midpoint-defect accumulation."""
    cdef double k[NSTAGE][MAXDIM]
    cdef double yi[MAXDIM]
    cdef double ynew[MAXDIM]
    cdef double err[MAXDIM]
    cdef double rc[5 * MAXDIM]
    cdef double fval[MAXDIM]
    cdef int ndim = ctx.ndim
    cdef double x = a, h, err_norm, err_prev = 1.0, fac, sc, s2
    cdef long nacc = 0, ntot = 0
    cdef int i, j, q, bad, iev
    cdef double g0, g1, xa, xb, ga, gm, xm, th, xstar
    cdef int which_first
    cdef double x_first, x_rec_step
    cdef long ridx = 0
    cdef double span = b - a
    cdef double resid = 0.0, span_tol = EV_REL * span
    cdef long smp_i = 0
    cdef double xs_s, d_abs, f_abs, dv

    out.x_rec = NAN
    out.resid = 0.0
    if sys_rhs(ctx, x, y, k[0]) != 0:
        out.status = 4; out.x_end = x; return
    if rec_cap > 0:
        for j in range(ndim):
            rec_y[j] = y[j]
        rec_x[0] = x
        ridx = 1
    h = fmin(h_init, fmin(h_max, span))

    while x < b:
        ntot += 1
        if ntot > max_steps:
            out.status = 6; out.x_end = x; rec_n[0] = ridx; return
        h = fmin(h, b - x)
        bad = 0
        for i in range(1, NSTAGE):
            for j in range(ndim):
                sc = 0.0
                for q in range(i):
                    sc += DP_A[i][q] * k[q][j]
                yi[j] = y[j] + h * sc
            if sys_rhs(ctx, x + DP_C[i] * h, yi, k[i]) != 0:
                bad = 1
                break
            for j in range(ndim):
                if not isfinite(k[i][j]):
                    bad = 1
                    break
            if bad:
                break
        if not bad:
            for j in range(ndim):
                sc = 0.0
                s2 = 0.0
                for q in range(NSTAGE):
                    sc += DP_B5[q] * k[q][j]
                    s2 += DP_E[q] * k[q][j]
                ynew[j] = y[j] + h * sc
                err[j] = h * s2
                if not isfinite(ynew[j]):
                    bad = 1
        if bad:
            h *= 0.5
            if h < h_min:
                out.status = 4; out.x_end = x; rec_n[0] = ridx; return
            continue
        err_norm = 0.0
        for j in range(ndim):
            sc = atol + rtol * fmax(fabs(y[j]), fabs(ynew[j]))
            err_norm += (err[j] / sc) * (err[j] / sc)
        err_norm = sqrt(err_norm / ndim)
        if err_norm < 1e-12:
            err_norm = 1e-12
        if err_norm <= 1.0:
            # dense-output coefficients for this step
            for j in range(ndim):
                rc[j] = y[j]
                rc[ndim + j] = ynew[j] - y[j]
                rc[2 * ndim + j] = h * k[0][j] - rc[ndim + j]
                rc[3 * ndim + j] = 2.0 * rc[ndim + j] - h * (k[0][j] + k[6][j])
                sc = 0.0
                for q in range(NSTAGE):
                    sc += DP_D[q] * k[q][j]
                rc[4 * ndim + j] = h * sc
            # events: locate terminal crossings first, then commit the
            # earliest non-terminal crossing only if it precedes them
            which_first = -1
            x_first = b + 1.0
            x_rec_step = NAN
            for iev in range(nev):
                g0 = y[evs[iev].index] - evs[iev].offset
                g1 = ynew[evs[iev].index] - evs[iev].offset
                if g0 > 0.0 >= g1:
                    xa = x; xb = x + h
                    ga = g0
                    while xb - xa > span_tol:
                        xm = 0.5 * (xa + xb)
                        th = (xm - x) / h
                        gm = dense_eval(rc, ndim, evs[iev].index, th) - evs[iev].offset
                        if (ga > 0.0) == (gm > 0.0):
                            xa = xm; ga = gm
                        else:
                            xb = xm
                    xstar = 0.5 * (xa + xb)
                    if evs[iev].terminal:
                        if xstar < x_first:
                            x_first = xstar
                            which_first = iev
                    else:
                        if isnan(x_rec_step) or xstar < x_rec_step:
                            x_rec_step = xstar
            if not isnan(x_rec_step) and isnan(out.x_rec) and (
                which_first < 0 or x_rec_step <= x_first
            ):
                out.x_rec = x_rec_step
            if which_first >= 0:
                th = (x_first - x) / h
                for j in range(ndim):
                    y[j] = dense_eval(rc, ndim, j, th)
                if rec_cap > 0 and ridx < rec_cap:
                    for j in range(ndim):
                        rec_y[ridx * ndim + j] = y[j]
                    rec_x[ridx] = x_first
                    ridx += 1
                out.status = 2
                out.event_which = which_first
                out.x_end = x_first
                rec_n[0] = ridx
                return
            # residual accumulation over global midpoint samples in (x, x+h]
            if n_resid > 0:
                while smp_i < n_resid:
                    xs_s = a + (smp_i + 0.5) * span / n_resid
                    if xs_s <= x or xs_s > x + h:
                        if xs_s <= x:
                            smp_i += 1
                            continue
                        break
                    th = (xs_s - x) / h
                    for j in range(ndim):
                        yi[j] = dense_eval(rc, ndim, j, th)
                    if sys_rhs(ctx, xs_s, yi, fval) == 0:
                        d_abs = 0.0
                        f_abs = 0.0
                        for j in range(ndim):
                            dv = dense_deriv(rc, ndim, j, th, h) - fval[j]
                            if fabs(dv) > d_abs:
                                d_abs = fabs(dv)
                            if fabs(fval[j]) > f_abs:
                                f_abs = fabs(fval[j])
                        if d_abs / (1.0 + f_abs) > resid:
                            resid = d_abs / (1.0 + f_abs)
                    smp_i += 1
            x += h
            for j in range(ndim):
                y[j] = ynew[j]
                k[0][j] = k[6][j]
            nacc += 1
            if rec_cap > 0:
                if ridx >= rec_cap:
                    out.status = 6; out.x_end = x; rec_n[0] = ridx; return
                for j in range(ndim):
                    rec_y[ridx * ndim + j] = y[j]
                rec_x[ridx] = x
                ridx += 1
            # blowup check
            sc = 0.0
            for j in range(ndim):
                if fabs(y[j]) > sc:
                    sc = fabs(y[j])
            if sc > blowup:
                out.status = 3; out.x_end = x; rec_n[0] = ridx; out.resid = resid
                return
            fac = SAFETY * pow(err_norm, -PI_A_RK) * pow(err_prev, PI_B_RK)
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            h = fmin(h * fac, h_max)
            err_prev = fmax(err_norm, 1e-10)
        else:
            fac = SAFETY * pow(err_norm, -0.2)
            if fac > 1.0:
                fac = 1.0
            if fac < 0.2:
                fac = 0.2
            h *= fac
        if h < h_min:
            out.status = 4; out.x_end = x; rec_n[0] = ridx; out.resid = resid
            return

    out.status = 0
    out.x_end = b
    out.resid = resid
    rec_n[0] = ridx


cdef void drive_trbdf2(SysCtx* ctx, double a, double b, double* y,
                       double rtol, double atol, double h_init, double h_min,
                       double h_max, double blowup, long max_steps,
                       EvSpec* evs, int nev,
                       double* rec_x, double* rec_y, long rec_cap, long* rec_n,
                       DriveResult* out) nogil:
    """TR-BDF2 driver for the 2-dimensional profile systems (tags 0, 3)."""
    cdef double f0[2]
    cdef double f1[2]
    cdef double f2[2]
    cdef double z1[2]
    cdef double z2[2]
    cdef double zc[2]
    cdef double cst[2]
    cdef double dz[2]
    cdef double J[4]
    cdef double M[4]
    cdef double est[2]
    cdef double x = a, h, g = TB_GAMMA, d = TB_D
    cdef double det, r0, r1, nrm, last, err_norm, sc, fac, err_prev = 1.0
    cdef long nacc = 0, ntot = 0, ridx = 0
    cdef int j, it, ok, iev, which_first
    cdef double g0, g1, xa, xb, ga, gm, xm, th, xstar, x_first, x_rec_step
    cdef double span = b - a, span_tol = EV_REL * span

    out.x_rec = NAN
    out.resid = 0.0
    if sys_rhs(ctx, x, y, f0) != 0:
        out.status = 4; out.x_end = x; return
    if rec_cap > 0:
        rec_x[0] = x
        rec_y[0] = y[0]; rec_y[1] = y[1]
        ridx = 1
    h = fmin(h_init, fmin(h_max, span))

    while x < b:
        ntot += 1
        if ntot > max_steps:
            out.status = 6; out.x_end = x; rec_n[0] = ridx; return
        h = fmin(h, b - x)
        ok = 1
        if sys_jac2(ctx, x, y, J) != 0:
            ok = 0
        if ok:
            M[0] = 1.0 - d * h * J[0]; M[1] = -d * h * J[1]
            M[2] = -d * h * J[2];      M[3] = 1.0 - d * h * J[3]
            det = M[0] * M[3] - M[1] * M[2]
            if det == 0.0 or not isfinite(det):
                ok = 0
        # TR stage
        if ok:
            cst[0] = y[0] + d * h * f0[0]
            cst[1] = y[1] + d * h * f0[1]
            z1[0] = y[0] + g * h * f0[0]
            z1[1] = y[1] + g * h * f0[1]
            ok = 0
            last = INFINITY
            for it in range(12):
                if sys_rhs(ctx, x + g * h, z1, f1) != 0:
                    break
                r0 = cst[0] + d * h * f1[0] - z1[0]
                r1 = cst[1] + d * h * f1[1] - z1[1]
                dz[0] = (M[3] * r0 - M[1] * r1) / det
                dz[1] = (M[0] * r1 - M[2] * r0) / det
                z1[0] += dz[0]; z1[1] += dz[1]
                nrm = fmax(fabs(dz[0]) / (atol + rtol * fmax(fabs(z1[0]), 1.0)),
                           fabs(dz[1]) / (atol + rtol * fmax(fabs(z1[1]), 1.0)))
                if nrm <= 0.05:
                    if sys_rhs(ctx, x + g * h, z1, f1) == 0:
                        ok = 1
                    break
                if nrm > 2.0 * last and nrm > 1.0:
                    break
                last = nrm
        # BDF2 stage
        if ok:
            cst[0] = (z1[0] - (1.0 - g) * (1.0 - g) * y[0]) / (g * (2.0 - g))
            cst[1] = (z1[1] - (1.0 - g) * (1.0 - g) * y[1]) / (g * (2.0 - g))
            z2[0] = z1[0] + (1.0 - g) * (z1[0] - y[0]) / g
            z2[1] = z1[1] + (1.0 - g) * (z1[1] - y[1]) / g
            ok = 0
            last = INFINITY
            for it in range(12):
                if sys_rhs(ctx, x + h, z2, f2) != 0:
                    break
                r0 = cst[0] + d * h * f2[0] - z2[0]
                r1 = cst[1] + d * h * f2[1] - z2[1]
                dz[0] = (M[3] * r0 - M[1] * r1) / det
                dz[1] = (M[0] * r1 - M[2] * r0) / det
                z2[0] += dz[0]; z2[1] += dz[1]
                nrm = fmax(fabs(dz[0]) / (atol + rtol * fmax(fabs(z2[0]), 1.0)),
                           fabs(dz[1]) / (atol + rtol * fmax(fabs(z2[1]), 1.0)))
                if nrm <= 0.05:
                    if sys_rhs(ctx, x + h, z2, f2) == 0:
                        ok = 1
                    break
                if nrm > 2.0 * last and nrm > 1.0:
                    break
                last = nrm
        if not ok:
            h *= 0.25
            if h < h_min:
                out.status = 4; out.x_end = x; rec_n[0] = ridx; return
            continue
        # embedded error through the stiff filter
        for j in range(2):
            est[j] = h * ((TB_BH0 - TB_B0) * f0[j] + (TB_BH1 - TB_B1) * f1[j]
                          + (TB_BH2 - TB_B2) * f2[j])
        r0 = (M[3] * est[0] - M[1] * est[1]) / det
        r1 = (M[0] * est[1] - M[2] * est[0]) / det
        est[0] = r0; est[1] = r1
        if not (isfinite(z2[0]) and isfinite(z2[1]) and isfinite(est[0])
                and isfinite(est[1])):
            h *= 0.5
            if h < h_min:
                out.status = 4; out.x_end = x; rec_n[0] = ridx; return
            continue
        err_norm = 0.0
        for j in range(2):
            sc = atol + rtol * fmax(fabs(y[j]), fabs(z2[j]))
            err_norm += (est[j] / sc) * (est[j] / sc)
        err_norm = sqrt(err_norm / 2.0)
        if err_norm < 1e-12:
            err_norm = 1e-12
        if err_norm <= 1.0:
            # events via cubic Hermite dense output
            which_first = -1
            x_first = b + 1.0
            x_rec_step = NAN
            for iev in range(nev):
                g0 = y[evs[iev].index] - evs[iev].offset
                g1 = z2[evs[iev].index] - evs[iev].offset
                if g0 > 0.0 >= g1:
                    xa = x; xb = x + h; ga = g0
                    while xb - xa > span_tol:
                        xm = 0.5 * (xa + xb)
                        th = (xm - x) / h
                        gm = hermite_eval(y[evs[iev].index], z2[evs[iev].index],
                                          f0[evs[iev].index], f2[evs[iev].index],
                                          h, th) - evs[iev].offset
                        if (ga > 0.0) == (gm > 0.0):
                            xa = xm; ga = gm
                        else:
                            xb = xm
                    xstar = 0.5 * (xa + xb)
                    if evs[iev].terminal:
                        if xstar < x_first:
                            x_first = xstar
                            which_first = iev
                    else:
                        if isnan(x_rec_step) or xstar < x_rec_step:
                            x_rec_step = xstar
            if not isnan(x_rec_step) and isnan(out.x_rec) and (
                which_first < 0 or x_rec_step <= x_first
            ):
                out.x_rec = x_rec_step
            if which_first >= 0:
                th = (x_first - x) / h
                zc[0] = hermite_eval(y[0], z2[0], f0[0], f2[0], h, th)
                zc[1] = hermite_eval(y[1], z2[1], f0[1], f2[1], h, th)
                y[0] = zc[0]; y[1] = zc[1]
                if rec_cap > 0 and ridx < rec_cap:
                    rec_x[ridx] = x_first
                    rec_y[ridx * 2] = y[0]; rec_y[ridx * 2 + 1] = y[1]
                    ridx += 1
                out.status = 2; out.event_which = which_first; out.x_end = x_first
                rec_n[0] = ridx
                return
            x += h
            y[0] = z2[0]; y[1] = z2[1]
            f0[0] = f2[0]; f0[1] = f2[1]
            nacc += 1
            if rec_cap > 0:
                if ridx >= rec_cap:
                    out.status = 6; out.x_end = x; rec_n[0] = ridx; return
                rec_x[ridx] = x
                rec_y[ridx * 2] = y[0]; rec_y[ridx * 2 + 1] = y[1]
                ridx += 1
            if fmax(fabs(y[0]), fabs(y[1])) > blowup:
                out.status = 3; out.x_end = x; rec_n[0] = ridx; return
            fac = SAFETY * pow(err_norm, -PI_A_TB) * pow(err_prev, PI_B_TB)
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            h = fmin(h * fac, h_max)
            err_prev = fmax(err_norm, 1e-10)
        else:
            fac = SAFETY * pow(err_norm, -PI_A_TB)
            if fac > 1.0:
                fac = 1.0
            if fac < 0.2:
                fac = 0.2
            h *= fac
        if h < h_min:
            out.status = 4; out.x_end = x; rec_n[0] = ridx
            return

    out.status = 0
    out.x_end = b
    rec_n[0] = ridx


# ---------------------------------------------------------------------------
# Public entry points (mirror pyfallback signatures)
# ---------------------------------------------------------------------------

DEF REC_CAP = 400000


def poly_profile(double u0, double e0, double Gamma, double alpha, double nu,
                 double c1, double c2, double rtol, double atol, double hmax,
                 double blowup, int method, int n_resid):
    cdef SysCtx ctx
    ctx.tag = 0; ctx.ndim = 2; ctx.sign = 1.0; ctx.nmesh = 0
    ctx.pars[0] = Gamma; ctx.pars[1] = alpha; ctx.pars[2] = nu
    ctx.pars[3] = u0; ctx.pars[4] = c1; ctx.pars[5] = c2
    cdef EvSpec evs[2]
    evs[0].index = 1; evs[0].offset = 0.0; evs[0].terminal = 0
    evs[1].index = 0; evs[1].offset = 0.0; evs[1].terminal = 1
    cdef double y[2]
    y[0] = u0; y[1] = e0
    xs_np = np.empty(REC_CAP, dtype=np.float64)
    ys_np = np.empty(REC_CAP * 2, dtype=np.float64)
    cdef double[::1] xs_v = xs_np
    cdef double[::1] ys_v = ys_np
    cdef DriveResult out
    cdef long nrec = 0
    cdef double h_init = fmin(1e-3, hmax)
    with nogil:
        if method == 1:
            drive_trbdf2(&ctx, 0.0, 1.0, y, rtol, atol, h_init, 1e-14, hmax,
                         blowup, 1000000, evs, 2, &xs_v[0], &ys_v[0], REC_CAP,
                         &nrec, &out)
            if out.status == 0 and n_resid > 0 and isnan(out.x_rec):
                # certificate needs the higher-order dense output
                y[0] = u0; y[1] = e0
                drive_dp45(&ctx, 0.0, 1.0, y, rtol, atol, h_init, 1e-14, hmax,
                           blowup, 1000000, evs, 2, &xs_v[0], &ys_v[0], REC_CAP,
                           &nrec, n_resid, &out)
        else:
            drive_dp45(&ctx, 0.0, 1.0, y, rtol, atol, h_init, 1e-14, hmax,
                       blowup, 1000000, evs, 2, &xs_v[0], &ys_v[0], REC_CAP,
                       &nrec, n_resid, &out)
    if out.status == 6:
        raise IntegratorFailure(f"step budget exhausted at x={out.x_end}")
    xs = xs_np[:nrec].copy()
    ys2 = ys_np[: 2 * nrec].reshape(nrec, 2)
    status = 0 if out.status == 0 else (2 if out.status == 2 else out.status)
    return (status, out.x_end, out.x_rec, xs, ys2[:, 0].copy(), ys2[:, 1].copy(),
            out.resid)


def poly_variational(double u0, double e0, double Gamma, double alpha, double nu,
                     double c1, double c2, double rtol, double atol, double hmax,
                     double blowup, int method):
    cdef SysCtx ctx
    ctx.tag = 1; ctx.ndim = 6; ctx.sign = 1.0; ctx.nmesh = 0
    ctx.pars[0] = Gamma; ctx.pars[1] = alpha; ctx.pars[2] = nu
    ctx.pars[3] = u0; ctx.pars[4] = c1; ctx.pars[5] = c2
    cdef EvSpec evs[2]
    evs[0].index = 1; evs[0].offset = 0.0; evs[0].terminal = 1
    evs[1].index = 0; evs[1].offset = 0.0; evs[1].terminal = 1
    cdef double y[6]
    y[0] = u0; y[1] = e0
    y[2] = 0.0; y[3] = 0.0; y[4] = 0.0; y[5] = 0.0
    cdef DriveResult out
    cdef long nrec = 0
    with nogil:
        drive_dp45(&ctx, 0.0, 1.0, y, rtol, atol, fmin(1e-3, hmax), 1e-14, hmax,
                   blowup, 1000000, evs, 2, NULL, NULL, 0, &nrec, 0, &out)
    if out.status == 6:
        raise IntegratorFailure(f"step budget exhausted at x={out.x_end}")
    status = out.status
    if status == 2:
        status = 1 if out.event_which == 0 else 2
    J = np.array([[y[2], y[4]], [y[3], y[5]]])
    return status, out.x_end, y[0], y[1], J


def poly_d0(double u0, double e0, double Gamma, double alpha, double nu,
            double c1, double c2, double rtol, double atol, double hmax,
            double blowup):
    cdef SysCtx ctx
    ctx.tag = 2; ctx.ndim = 6; ctx.sign = 1.0; ctx.nmesh = 0
    ctx.pars[0] = Gamma; ctx.pars[1] = alpha; ctx.pars[2] = nu
    ctx.pars[3] = u0; ctx.pars[4] = c1; ctx.pars[5] = c2
    cdef EvSpec evs[2]
    evs[0].index = 1; evs[0].offset = 0.0; evs[0].terminal = 1
    evs[1].index = 0; evs[1].offset = 0.0; evs[1].terminal = 1
    cdef double y[6]
    y[0] = u0; y[1] = e0
    y[2] = 0.0; y[3] = 0.0; y[4] = 0.0; y[5] = 0.0
    cdef DriveResult out
    cdef long nrec = 0
    with nogil:
        drive_dp45(&ctx, 0.0, 1.0, y, rtol, atol, fmin(1e-3, hmax), 1e-14, hmax,
                   blowup, 1000000, evs, 2, NULL, NULL, 0, &nrec, 0, &out)
    if out.status == 6:
        raise IntegratorFailure(f"step budget exhausted at x={out.x_end}")
    status = out.status
    if status == 2:
        status = 1 if out.event_which == 0 else 2
    d0 = y[2] * y[5] - y[4] * y[3]
    return status, d0, (y[2], y[3], y[4], y[5])


def local_profile(double m, double C1, double C2, double alpha, double kappa,
                  double x0, double x1, double u_init, double T_init,
                  double rtol, double atol, double hmax, double blowup,
                  int method):
    cdef SysCtx ctx
    ctx.tag = 3; ctx.ndim = 2; ctx.nmesh = 0
    ctx.pars[0] = m; ctx.pars[1] = C1; ctx.pars[2] = C2
    ctx.pars[3] = alpha; ctx.pars[4] = kappa
    ctx.sign = 1.0 if x1 >= x0 else -1.0
    cdef double length = fabs(x1 - x0)
    cdef EvSpec evs[2]
    evs[0].index = 1; evs[0].offset = 1.0; evs[0].terminal = 1
    evs[1].index = 0; evs[1].offset = 0.0; evs[1].terminal = 1
    cdef double y[2]
    y[0] = u_init; y[1] = T_init
    xs_np = np.empty(REC_CAP, dtype=np.float64)
    ys_np = np.empty(REC_CAP * 2, dtype=np.float64)
    cdef double[::1] xs_v = xs_np
    cdef double[::1] ys_v = ys_np
    cdef DriveResult out
    cdef long nrec = 0
    cdef double h_init = fmin(1e-3, hmax)
    with nogil:
        if method == 1:
            drive_trbdf2(&ctx, 0.0, length, y, rtol, atol, h_init, 1e-13 * length,
                         hmax, blowup, 2000000, evs, 2, &xs_v[0], &ys_v[0],
                         REC_CAP, &nrec, &out)
        else:
            drive_dp45(&ctx, 0.0, length, y, rtol, atol, h_init, 1e-13 * length,
                       hmax, blowup, 2000000, evs, 2, &xs_v[0], &ys_v[0],
                       REC_CAP, &nrec, 0, &out)
    if out.status == 6:
        raise IntegratorFailure(f"step budget exhausted at s={out.x_end}")
    status = out.status
    if status == 2:
        status = 1 if out.event_which == 0 else 2
    sgn = 1.0 if x1 >= x0 else -1.0
    xs = x0 + sgn * xs_np[:nrec]
    ys2 = ys_np[: 2 * nrec].reshape(nrec, 2)
    return status, x0 + sgn * out.x_end, xs, ys2[:, 0].copy(), ys2[:, 1].copy()


def local_d0(xs, us, Ts, double m, double C1, double C2, double alpha,
             double kappa, double xL, double xR, double rtol, double atol):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    us = np.ascontiguousarray(us, dtype=np.float64)
    Ts = np.ascontiguousarray(Ts, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    dus = np.empty(n, dtype=np.float64)
    dTs = np.empty(n, dtype=np.float64)
    cdef double[::1] xs_v = xs, us_v = us, Ts_v = Ts, dus_v = dus, dTs_v = dTs
    cdef Py_ssize_t i
    cdef double du, dT
    for i in range(n):
        local_rhs_c(us_v[i], Ts_v[i], m, C1, C2, alpha, kappa, &du, &dT)
        dus_v[i] = du
        dTs_v[i] = dT
    cdef SysCtx ctx
    ctx.tag = 4; ctx.ndim = 4; ctx.sign = 1.0
    ctx.pars[0] = m; ctx.pars[1] = C1; ctx.pars[2] = C2
    ctx.pars[3] = alpha; ctx.pars[4] = kappa
    ctx.mx = &xs_v[0]; ctx.mw1 = &us_v[0]; ctx.mw2 = &Ts_v[0]
    ctx.md1 = &dus_v[0]; ctx.md2 = &dTs_v[0]; ctx.nmesh = <int> n
    cdef double uL, TL
    hermite2(xL, ctx.mx, ctx.mw1, ctx.mw2, ctx.md1, ctx.md2, ctx.nmesh, &uL, &TL)
    ctx.pars[5] = uL
    cdef double y[4]
    y[0] = 0.0; y[1] = 0.0; y[2] = 0.0; y[3] = 0.0
    cdef DriveResult out
    cdef long nrec = 0
    cdef double hmax = (xR - xL) / 64.0
    with nogil:
        drive_dp45(&ctx, xL, xR, y, rtol, atol, fmin(1e-3, hmax),
                   1e-13 * (xR - xL), hmax, 1e300, 2000000, NULL, 0,
                   NULL, NULL, 0, &nrec, 0, &out)
    if out.status == 6:
        raise IntegratorFailure(f"step budget exhausted at x={out.x_end}")
    if out.status != 0:
        return (4, 0.0, None)
    W = np.array([[y[0], y[2]], [y[1], y[3]]])
    return 0, y[0] * y[3] - y[2] * y[1], W


# ---------------------------------------------------------------------------
# Drury frame evolution (complex)
# ---------------------------------------------------------------------------

cdef void poly_eigs_c(double u, double e, double* pars, double complex lam,
                      double complex* A) nogil:
    """Polytropic 5x5 eigensystem matrix; pars = [Gamma, alpha, nu, u0, c1, c2]."""
    cdef double G = pars[0], al = pars[1], nu = pars[2], u0 = pars[3]
    cdef double c1 = pars[4], c2 = pars[5]
    cdef double duh, deh
    poly_rhs_c(u, e, c1, c2, G, al, nu, u0, &duh, &deh)
    cdef double rh = u0 / u
    cdef double drh = -u0 * duh / (u * u)
    cdef int i
    for i in range(25):
        A[i] = 0.0
    A[0 * 5 + 0] = -(lam + duh) / u
    A[0 * 5 + 1] = -drh / u
    A[0 * 5 + 3] = -rh / u
    A[1 * 5 + 3] = 1.0
    A[2 * 5 + 4] = 1.0
    A[3 * 5 + 0] = (G * deh + duh * u - G * e * (lam + duh) / u) / al
    A[3 * 5 + 1] = (lam * rh + duh * rh - G * e * drh / u) / al
    A[3 * 5 + 2] = G * drh / al
    A[3 * 5 + 3] = (u0 - G * e * rh / u) / al
    A[3 * 5 + 4] = G * rh / al
    A[4 * 5 + 0] = (deh * u + G * duh * e) / nu
    A[4 * 5 + 1] = deh * rh / nu
    A[4 * 5 + 2] = (lam * rh + G * duh * rh) / nu
    A[4 * 5 + 3] = (G * rh * e - 2.0 * al * duh) / nu
    A[4 * 5 + 4] = u0 / nu


cdef void local_eigs_c(double uh, double Th, double* pars, double complex lam,
                       double complex* A) nogil:
    """Local-model 5x5 eigensystem matrix; pars = [alpha, kappa, m, C1, C2]."""
    cdef double al = pars[0], kap = pars[1], m = pars[2]
    cdef double C1 = pars[3], C2 = pars[4]
    cdef double duh, dTh
    local_rhs_c(uh, Th, m, C1, C2, al, kap, &duh, &dTh)
    cdef double rh = m / uh
    cdef double drh = -m * duh / (uh * uh)
    cdef double p, e
    local_eos_c(rh, Th, &p, &e)
    cdef double p_r = (Th - 1.0) + 1.0 / (rh * rh)
    cdef double p_T = rh
    cdef double p_rr = -2.0 / (rh * rh * rh)
    cdef double p_rT = 1.0
    cdef double p_TT = 0.0
    cdef double e_r = -1.0 / rh - 1.0 / (rh * rh * rh)
    cdef double e_T = 1.0 + 1.0 / (Th - 1.0)
    cdef double e_rr = 1.0 / (rh * rh) + 3.0 / (rh * rh * rh * rh)
    cdef double e_rT = 0.0
    cdef double e_TT = -1.0 / ((Th - 1.0) * (Th - 1.0))
    cdef double dp_r = p_rr * drh + p_rT * dTh
    cdef double dp_T = p_rT * drh + p_TT * dTh
    cdef double de_r = e_rr * drh + e_rT * dTh
    cdef double de_T = e_rT * drh + e_TT * dTh
    cdef double dp = p_r * drh + p_T * dTh
    cdef double de = e_r * drh + e_T * dTh
    cdef double Eh = e + 0.5 * uh * uh
    cdef double dEh = de + uh * duh
    cdef double dduh = (m * duh + dp) / al
    cdef int i
    for i in range(25):
        A[i] = 0.0
    cdef double complex a_r0 = -(lam + duh) / uh
    cdef double a_r1 = -drh / uh
    cdef double a_r3 = -rh / uh
    A[0 * 5 + 0] = a_r0
    A[0 * 5 + 1] = a_r1
    A[0 * 5 + 3] = a_r3
    A[1 * 5 + 3] = 1.0
    A[2 * 5 + 4] = 1.0
    cdef double Mr = uh * uh + p_r
    cdef double dMr = 2.0 * uh * duh + dp_r
    cdef double complex c_rho = lam * uh + dMr + Mr * a_r0
    cdef double complex c_u = lam * rh + Mr * a_r1
    cdef double c_T = dp_T
    cdef double c_up = 2.0 * m + Mr * a_r3
    cdef double c_Tp = p_T
    A[3 * 5 + 0] = c_rho / al
    A[3 * 5 + 1] = c_u / al
    A[3 * 5 + 2] = c_T / al
    A[3 * 5 + 3] = c_up / al
    A[3 * 5 + 4] = c_Tp / al
    cdef double Fr = uh * Eh + m * e_r + uh * p_r
    cdef double Fu = rh * Eh + m * uh + p
    cdef double FT = m * e_T + uh * p_T
    cdef double dFr = duh * Eh + uh * dEh + m * de_r + duh * p_r + uh * dp_r
    cdef double dFu = drh * Eh + rh * dEh + m * duh + dp
    cdef double dFT = m * de_T + duh * p_T + uh * dp_T
    cdef double complex g_rho = lam * (rh * e_r + Eh) + dFr + Fr * a_r0
    cdef double complex g_u = lam * rh * uh + dFu + Fr * a_r1 - al * dduh
    cdef double complex g_T = lam * rh * e_T + dFT
    cdef double g_up = Fr * a_r3 + Fu - 2.0 * al * duh
    cdef double g_Tp = FT
    A[4 * 5 + 0] = (g_rho - uh * c_rho) / kap
    A[4 * 5 + 1] = (g_u - uh * c_u) / kap
    A[4 * 5 + 2] = (g_T - uh * c_T) / kap
    A[4 * 5 + 3] = (g_up - uh * c_up) / kap
    A[4 * 5 + 4] = (g_Tp - uh * c_Tp) / kap


cdef void frame_rhs(int model, double* pars, double complex lam,
                    double* mx, double* mw1, double* mw2, double* md1,
                    double* md2, int nmesh, double x0, double sign,
                    double s, double complex* Q, int k,
                    double complex* dQ, double complex* dr) nogil:
    cdef double complex A[25]
    cdef double complex W[FRAME_N * FRAME_MAXK]
    cdef double complex S[FRAME_MAXK * FRAME_MAXK]
    cdef double a, b
    cdef int i, j, q
    hermite2(x0 + sign * s, mx, mw1, mw2, md1, md2, nmesh, &a, &b)
    if model == 0:
        poly_eigs_c(a, b, pars, lam, A)
    else:
        local_eigs_c(a, b, pars, lam, A)
    # W = A Q
    for i in range(FRAME_N):
        for j in range(k):
            W[i * k + j] = 0.0
            for q in range(FRAME_N):
                W[i * k + j] += A[i * 5 + q] * Q[q * k + j]
    # S = Q^* W
    for i in range(k):
        for j in range(k):
            S[i * k + j] = 0.0
            for q in range(FRAME_N):
                S[i * k + j] += Q[q * k + i].conjugate() * W[q * k + j]
    # dQ = sign * (W - Q S), dr = sign * trace S
    for i in range(FRAME_N):
        for j in range(k):
            dQ[i * k + j] = W[i * k + j]
            for q in range(k):
                dQ[i * k + j] -= Q[i * k + q] * S[q * k + j]
            dQ[i * k + j] *= sign
    dr[0] = 0.0
    for i in range(k):
        dr[0] += S[i * k + i]
    dr[0] *= sign


cdef double frame_mgs(double complex* Q, int k, double complex* logdet) nogil:
    """In-place modified Gram-Schmidt; accumulates log det R into logdet.
    Returns -1.0 on a rank drop."""
    cdef int i, j, q
    cdef double complex proj
    cdef double nrm
    for j in range(k):
        for i in range(j):
            proj = 0.0
            for q in range(FRAME_N):
                proj += Q[q * k + i].conjugate() * Q[q * k + j]
            for q in range(FRAME_N):
                Q[q * k + j] -= proj * Q[q * k + i]
        nrm = 0.0
        for q in range(FRAME_N):
            nrm += (Q[q * k + j].real * Q[q * k + j].real
                    + Q[q * k + j].imag * Q[q * k + j].imag)
        nrm = sqrt(nrm)
        if nrm == 0.0:
            return -1.0
        for q in range(FRAME_N):
            Q[q * k + j] /= nrm
        logdet[0] += log(nrm)
    return 0.0


cdef double frame_drift(double complex* Q, int k) nogil:
    """Frobenius norm of Q^*Q - I."""
    cdef int i, j, q
    cdef double complex s
    cdef double acc = 0.0
    for i in range(k):
        for j in range(k):
            s = 0.0
            for q in range(FRAME_N):
                s += Q[q * k + i].conjugate() * Q[q * k + j]
            if i == j:
                s -= 1.0
            acc += s.real * s.real + s.imag * s.imag
    return sqrt(acc)


def frame_evolve(int model, xs, w1, w2, pars, lam, double x0, double x1,
                 q0, double rtol, double atol, double hmax, int reorth_every,
                 double drift_tol):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    w1 = np.ascontiguousarray(w1, dtype=np.float64)
    w2 = np.ascontiguousarray(w2, dtype=np.float64)
    pars_arr = np.ascontiguousarray(pars, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    dw1 = np.empty(n, dtype=np.float64)
    dw2 = np.empty(n, dtype=np.float64)
    cdef double[::1] xs_v = xs, w1_v = w1, w2_v = w2
    cdef double[::1] dw1_v = dw1, dw2_v = dw2, pars_v = pars_arr
    cdef Py_ssize_t i0
    cdef double da, db
    for i0 in range(n):
        if model == 0:
            poly_rhs_c(w1_v[i0], w2_v[i0], pars_v[4], pars_v[5], pars_v[0],
                       pars_v[1], pars_v[2], pars_v[3], &da, &db)
        else:
            local_rhs_c(w1_v[i0], w2_v[i0], pars_v[2], pars_v[3], pars_v[4],
                        pars_v[0], pars_v[1], &da, &db)
        dw1_v[i0] = da
        dw2_v[i0] = db

    q0_arr = np.ascontiguousarray(q0, dtype=np.complex128)
    cdef int k = q0_arr.shape[1]
    if q0_arr.shape[0] != FRAME_N or k > FRAME_MAXK:
        raise ValueError("frame must be 5 x k with k <= 5")
    cdef double complex[:, ::1] q0_v = q0_arr

    cdef double complex Q[FRAME_N * FRAME_MAXK]
    cdef double complex Qn[FRAME_N * FRAME_MAXK]
    cdef double complex kQ[NSTAGE][FRAME_N * FRAME_MAXK]
    cdef double complex kr[NSTAGE]
    cdef double complex Qi[FRAME_N * FRAME_MAXK]
    cdef double complex errq
    cdef double complex r = 0.0, dlog = 0.0
    cdef double complex lam_c = complex(lam)
    cdef int i, j, q, st, bad
    for i in range(FRAME_N):
        for j in range(k):
            Q[i * k + j] = q0_v[i, j]

    cdef double sign = 1.0 if x1 >= x0 else -1.0
    cdef double length = fabs(x1 - x0)
    cdef double h = fmin(fmin(hmax, length / 50.0), 1e-2)
    cdef double h_min = 1e-13 * fmax(length, 1.0)
    cdef double s = 0.0, err_norm, err_prev = 1.0, fac, scl
    cdef double max_drift = 0.0, drift
    cdef int steps_since = 0, nk = FRAME_N * k
    cdef int status = 0
    cdef double complex csc

    with nogil:
        while s < length:
            h = fmin(h, length - s)
            frame_rhs(model, &pars_v[0], lam_c, &xs_v[0], &w1_v[0], &w2_v[0],
                      &dw1_v[0], &dw2_v[0], <int> n, x0, sign, s, Q, k, kQ[0],
                      &kr[0])
            bad = 0
            for st in range(1, NSTAGE):
                for j in range(nk):
                    csc = 0.0
                    for q in range(st):
                        csc += DP_A[st][q] * kQ[q][j]
                    Qi[j] = Q[j] + h * csc
                frame_rhs(model, &pars_v[0], lam_c, &xs_v[0], &w1_v[0],
                          &w2_v[0], &dw1_v[0], &dw2_v[0], <int> n, x0, sign,
                          s + DP_C[st] * h, Qi, k, kQ[st], &kr[st])
                for j in range(nk):
                    if not (isfinite(kQ[st][j].real) and isfinite(kQ[st][j].imag)):
                        bad = 1
                        break
                if bad:
                    break
            if bad:
                h *= 0.5
                if h < h_min:
                    status = 4
                    break
                continue
            err_norm = 0.0
            for j in range(nk):
                csc = 0.0
                errq = 0.0
                for q in range(NSTAGE):
                    csc += DP_B5[q] * kQ[q][j]
                    errq += DP_E[q] * kQ[q][j]
                Qn[j] = Q[j] + h * csc
                scl = atol + rtol * fmax(
                    sqrt(Q[j].real * Q[j].real + Q[j].imag * Q[j].imag),
                    sqrt(Qn[j].real * Qn[j].real + Qn[j].imag * Qn[j].imag))
                errq *= h
                err_norm += (errq.real * errq.real + errq.imag * errq.imag) / (scl * scl)
            err_norm = sqrt(err_norm / nk)
            if err_norm < 1e-12:
                err_norm = 1e-12
            if err_norm <= 1.0:
                s += h
                for j in range(nk):
                    Q[j] = Qn[j]
                csc = 0.0
                for q in range(NSTAGE):
                    csc += DP_B5[q] * kr[q]
                r += h * csc
                steps_since += 1
                drift = frame_drift(Q, k)
                if drift > max_drift:
                    max_drift = drift
                if drift > 1e-6:
                    status = 5
                    break
                if steps_since >= reorth_every or drift > drift_tol:
                    dlog = 0.0
                    if frame_mgs(Q, k, &dlog) < 0.0:
                        status = 5
                        break
                    r += dlog
                    steps_since = 0
                fac = SAFETY * pow(err_norm, -PI_A_RK) * pow(err_prev, PI_B_RK)
                if fac > 5.0:
                    fac = 5.0
                if fac < 0.2:
                    fac = 0.2
                h = fmin(h * fac, hmax)
                err_prev = fmax(err_norm, 1e-10)
            else:
                fac = SAFETY * pow(err_norm, -0.2)
                if fac > 1.0:
                    fac = 1.0
                if fac < 0.2:
                    fac = 0.2
                h *= fac
            if h < h_min:
                status = 4
                break
        if status == 0:
            dlog = 0.0
            if frame_mgs(Q, k, &dlog) < 0.0:
                status = 5
            else:
                r += dlog

    Q_out = np.empty((FRAME_N, k), dtype=np.complex128)
    cdef double complex[:, ::1] Qo = Q_out
    for i in range(FRAME_N):
        for j in range(k):
            Qo[i, j] = Q[i * k + j]
    return status, Q_out, complex(r), max_drift
