"""Pure-Python implementation of the kernel API.

Semantics match the compiled backend: same Dormand-Prince / TR-BDF2
stepping (via :mod:`shocktube.odecore`), same event conventions, same
status codes.  Status codes: 0 success, 1 first state functional crossed
its floor (e or T), 2 velocity crossed zero, 3 blowup, 4 minimum step.
"""

from __future__ import annotations

import math

import numpy as np

from .. import models
from ..errors import NewtonDivergence
from ..odecore import (
    _DP_A,
    _DP_B5,
    _DP_C,
    _DP_E,
    EventSpec,
    IntegratorConfig,
    integrate_rk45,
    integrate_stiff,
)

STATUS_OK = 0
STATUS_FLOOR = 1  # e (polytropic) or T-1 (local) crossed zero
STATUS_U_NEG = 2
STATUS_BLOWUP = 3
STATUS_MINSTEP = 4
STATUS_DEGENERATE = 5

_TERM_TO_STATUS = {"blowup": STATUS_BLOWUP, "min_step": STATUS_MINSTEP}


def _cfg(rtol, atol, hmax, blowup):
    return IntegratorConfig(
        rtol=rtol,
        atol=atol,
        h_init=min(1e-3, hmax),
        h_max=hmax,
        blowup_threshold=blowup,
    )


def _status_of(traj, floor_event_index=0):
    t = traj.termination
    if t.kind == "reached_end":
        return STATUS_OK, t.x
    if t.kind == "event":
        return (
            STATUS_FLOOR if t.event_index == floor_event_index else STATUS_U_NEG,
            t.x,
        )
    return _TERM_TO_STATUS[t.kind], t.x


def poly_profile(
    u0, e0, Gamma, alpha, nu, c1, c2, rtol, atol, hmax, blowup, method, n_resid
):
    """Profile IVP on [0, 1], continued past a sign change of e.

    Returns (status, x_end, x_e, xs, us, es, residual) where x_e is the
    first e-crossing (NaN if none).  The e-crossing is recorded but not
    terminal: the ODE stays regular there, and the distinct downstream
    behaviors (completion, u crossing zero, norm blowup, derivative
    blowup / simultaneous collapse at a stall) are what the classifier
    distinguishes.  ``residual`` is the max dense-output midpoint defect
    relative to 1 + |rhs| over ``n_resid`` sample points (0.0 when not
    requested or on failure).
    """

    def rhs(x, y):
        if y[0] == 0.0:
            return np.array([np.nan, np.nan])
        du, de = models.poly_rhs(y[0], y[1], c1, c2, Gamma, alpha, nu, u0)
        return np.array([du, de])

    def jac(x, y):
        return models.poly_jac(y[0], y[1], c1, c2, Gamma, alpha, nu, u0)

    events = [EventSpec(1, -1, False), EventSpec(0, -1, True)]
    cfg = _cfg(rtol, atol, hmax, blowup)
    integrate = integrate_stiff if method == 1 else integrate_rk45
    kwargs = {"jac": jac} if method == 1 else {}
    try:
        traj = integrate(rhs, (0.0, 1.0), [u0, e0], cfg, events, **kwargs)
    except NewtonDivergence as exc:  # singular stall: report as min_step
        traj = exc.trajectory
    if (
        method == 1
        and n_resid > 0
        and traj.termination.kind == "reached_end"
        and not any(j == 0 for j, _ in traj.events_hit)
    ):
        # The residual certificate needs the higher-order dense output.
        traj = integrate_rk45(rhs, (0.0, 1.0), [u0, e0], cfg, events)
    x_e = math.nan
    for j, xev in traj.events_hit:
        if j == 0:
            x_e = xev
            break
    t = traj.termination
    if t.kind == "reached_end":
        status = STATUS_OK
    elif t.kind == "event":
        status = STATUS_U_NEG
    else:
        status = _TERM_TO_STATUS[t.kind]
    x_end = t.x
    resid = 0.0
    if status == STATUS_OK and math.isnan(x_e) and n_resid > 0:
        for x in (np.arange(n_resid) + 0.5) / n_resid:
            y = traj.eval(x)
            if y[0] <= 0.0:
                resid = math.inf
                break
            f = rhs(x, y)
            d = traj.eval_deriv(x) - f
            resid = max(
                resid, float(np.max(np.abs(d)) / (1.0 + np.max(np.abs(f))))
            )
    return status, x_end, x_e, traj.xs, traj.ys[:, 0], traj.ys[:, 1], resid


def poly_variational(u0, e0, Gamma, alpha, nu, c1, c2, rtol, atol, hmax, blowup, method):
    """Profile co-integrated with its two c-variations.

    Returns (status, x_end, u_end, e_end, dpsi) where dpsi is the 2x2
    endpoint variation matrix with columns for unit c1 and c2
    perturbations.
    """

    def rhs(x, y):
        if y[0] <= 0.0:
            return np.full(6, np.nan)
        return models.poly_var_rhs(y, c1, c2, Gamma, alpha, nu, u0)

    events = [EventSpec(1, -1, True), EventSpec(0, -1, True)]
    cfg = _cfg(rtol, atol, hmax, blowup)
    integrate = integrate_stiff if method == 1 else integrate_rk45
    y0 = np.array([u0, e0, 0.0, 0.0, 0.0, 0.0])
    try:
        traj = integrate(rhs, (0.0, 1.0), y0, cfg, events)
    except NewtonDivergence as exc:
        traj = exc.trajectory
    status, x_end = _status_of(traj)
    y = traj.y_end
    dpsi = np.array([[y[2], y[4]], [y[3], y[5]]])
    return status, x_end, y[0], y[1], dpsi


def poly_d0(u0, e0, Gamma, alpha, nu, c1, c2, rtol, atol, hmax, blowup):
    """Zero-frequency Evans value by direct integration.

    Returns (status, d0, endpoints) where endpoints = (u1, e1, u2, e2)(1)
    and d0 = u1*e2 - u2*e1.
    """

    def rhs(x, y):
        if y[0] <= 0.0:
            return np.full(6, np.nan)
        return models.poly_d0_rhs(y, c1, c2, Gamma, alpha, nu, u0)

    events = [EventSpec(1, -1, True), EventSpec(0, -1, True)]
    cfg = _cfg(rtol, atol, hmax, blowup)
    y0 = np.array([u0, e0, 0.0, 0.0, 0.0, 0.0])
    traj = integrate_rk45(rhs, (0.0, 1.0), y0, cfg, events)
    status, _ = _status_of(traj)
    u1, e1, u2, e2 = traj.y_end[2:]
    d0 = u1 * e2 - u2 * e1
    return status, d0, (u1, e1, u2, e2)


def local_profile(m, C1, C2, alpha, kappa, x0, x1, u_init, T_init, rtol, atol, hmax, blowup, method):
    """Local-model steady IVP from x0 to x1 (either direction).

    Returns (status, x_end, xs, us, Ts) with xs in true coordinates,
    ordered in the direction of integration.  Status 1 flags T crossing 1,
    status 2 flags u crossing 0.
    """
    sign = 1.0 if x1 >= x0 else -1.0
    length = abs(x1 - x0)

    def rhs(s, y):
        if y[0] <= 0.0 or y[1] <= 1.0:
            return np.array([np.nan, np.nan])
        du, dT = models.local_rhs(y[0], y[1], m, C1, C2, alpha, kappa)
        return sign * np.array([du, dT])

    def jac(s, y):
        return sign * models.local_jac(y[0], y[1], m, C1, C2, alpha, kappa)

    events = [EventSpec(1, -1, True, offset=1.0), EventSpec(0, -1, True)]
    cfg = _cfg(rtol, atol, hmax, blowup)
    integrate = integrate_stiff if method == 1 else integrate_rk45
    kwargs = {"jac": jac} if method == 1 else {}
    try:
        traj = integrate(rhs, (0.0, length), [u_init, T_init], cfg, events, **kwargs)
    except NewtonDivergence as exc:
        traj = exc.trajectory
    status, s_end = _status_of(traj)
    xs = x0 + sign * traj.xs
    return status, x0 + sign * s_end, xs, traj.ys[:, 0], traj.ys[:, 1]


def _hermite_factory(xs, w1, w2, dw1, dw2):
    """Cubic Hermite evaluator over a strictly increasing mesh."""

    def interp(x):
        i = int(np.searchsorted(xs, x, side="right")) - 1
        i = min(max(i, 0), xs.size - 2)
        h = xs[i + 1] - xs[i]
        th = (x - xs[i]) / h
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th * th * (3 - 2 * th)
        h11 = th * th * (th - 1)
        a = h00 * w1[i] + h10 * h * dw1[i] + h01 * w1[i + 1] + h11 * h * dw1[i + 1]
        b = h00 * w2[i] + h10 * h * dw2[i] + h01 * w2[i + 1] + h11 * h * dw2[i + 1]
        return a, b

    return interp


def _local_node_derivs(xs, us, Ts, m, C1, C2, alpha, kappa):
    dus = np.empty_like(us)
    dTs = np.empty_like(Ts)
    for i in range(us.size):
        dus[i], dTs[i] = models.local_rhs(us[i], Ts[i], m, C1, C2, alpha, kappa)
    return dus, dTs


def local_d0(xs, us, Ts, m, C1, C2, alpha, kappa, xL, xR, rtol, atol):
    """Zero-frequency Evans value of the truncated local-model problem.

    The base profile is interpolated from (xs, us, Ts).  Returns
    (status, d0, W) with W the 2x2 endpoint matrix of the two
    unit-initial-slope solutions.
    """
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    Ts = np.asarray(Ts, dtype=float)
    dus, dTs = _local_node_derivs(xs, us, Ts, m, C1, C2, alpha, kappa)
    base = _hermite_factory(xs, us, Ts, dus, dTs)
    uL = base(xL)[0]

    def rhs(x, y):
        return models.local_d0_rhs(x, y, base, m, C1, C2, alpha, kappa, uL)

    cfg = _cfg(rtol, atol, (xR - xL) / 64.0, 1e300)
    traj = integrate_rk45(rhs, (xL, xR), np.zeros(4), cfg)
    if traj.termination.kind != "reached_end":
        return _TERM_TO_STATUS.get(traj.termination.kind, STATUS_MINSTEP), 0.0, None
    u1, T1, u2, T2 = traj.y_end
    W = np.array([[u1, u2], [T1, T2]])
    return STATUS_OK, u1 * T2 - u2 * T1, W


def _assemble_A(model, pars, lam):
    if model == 0:
        Gamma, alpha, nu, u0, c1, c2 = pars

        def A_of(u, e):
            return models.poly_eigs_matrix(u, e, c1, c2, Gamma, alpha, nu, u0, lam)

        def deriv_of(u, e):
            return models.poly_rhs(u, e, c1, c2, Gamma, alpha, nu, u0)

    else:
        alpha, kappa, m, C1, C2 = pars

        def A_of(u, T):
            return models.local_eigs_matrix(u, T, m, C1, C2, alpha, kappa, lam)

        def deriv_of(u, T):
            return models.local_rhs(u, T, m, C1, C2, alpha, kappa)

    return A_of, deriv_of


def _mgs(Q):
    """Modified Gram-Schmidt; returns (Q_orth, log det R) with R the upper
    triangular factor (positive diagonal)."""
    Q = Q.copy()
    k = Q.shape[1]
    logdet = 0.0 + 0.0j
    for j in range(k):
        for i in range(j):
            Q[:, j] -= (Q[:, i].conj() @ Q[:, j]) * Q[:, i]
        nrm = float(np.linalg.norm(Q[:, j]))
        if nrm == 0.0:
            return Q, complex(-math.inf)
        Q[:, j] /= nrm
        logdet += math.log(nrm)
    return Q, logdet


def frame_evolve(
    model,
    xs,
    w1,
    w2,
    pars,
    lam,
    x0,
    x1,
    q0,
    rtol,
    atol,
    hmax,
    reorth_every,
    drift_tol,
):
    """Integrate an orthonormal frame of the linearized eigenvalue system
    from x0 to x1 (either direction) by Drury's method, accumulating the
    radial log-determinant.

    Returns (status, Q, logdet, max_drift).  The frame ODE is
    Q' = (I - Q Q*) A Q with radial rate trace(Q* A Q); the accumulated
    factor absorbs every re-orthonormalization, so det of the propagated
    full solution equals det(R0) * exp(logdet) * (returned frame).
    """
    xs = np.asarray(xs, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    A_of, deriv_of = _assemble_A(model, pars, lam)
    dw1 = np.empty_like(w1)
    dw2 = np.empty_like(w2)
    for i in range(w1.size):
        dw1[i], dw2[i] = deriv_of(w1[i], w2[i])
    base = _hermite_factory(xs, w1, w2, dw1, dw2)

    sign = 1.0 if x1 >= x0 else -1.0
    length = abs(x1 - x0)
    Q = np.asarray(q0, dtype=complex).copy()
    n, k = Q.shape
    r = 0.0 + 0.0j

    def rhs(s, Q):
        a, b = base(x0 + sign * s)
        A = A_of(a, b)
        W = A @ Q
        S = Q.conj().T @ W
        return sign * (W - Q @ S), sign * np.trace(S)

    h = min(hmax, length / 50.0, 1e-2)
    h_min = 1e-13 * max(length, 1.0)
    s = 0.0
    err_prev = 1.0
    max_drift = 0.0
    steps_since_reorth = 0
    nsteps = 0
    while s < length:
        h = min(h, length - s)
        # Dormand-Prince stages on the (Q, r) pair.
        kQ = [None] * 7
        kr = [0.0j] * 7
        kQ[0], kr[0] = rhs(s, Q)
        bad = False
        for i in range(1, 7):
            Qi = Q + h * sum(aij * kQ[j] for j, aij in enumerate(_DP_A[i]))
            kQ[i], kr[i] = rhs(s + _DP_C[i] * h, Qi)
            if not np.all(np.isfinite(kQ[i])):
                bad = True
                break
        if bad:
            h *= 0.5
            if h < h_min:
                return STATUS_MINSTEP, Q, r, max_drift
            continue
        Q_new = Q + h * sum(b * kQ[j] for j, b in enumerate(_DP_B5) if b)
        r_new = r + h * sum(b * kr[j] for j, b in enumerate(_DP_B5) if b)
        errQ = h * sum(e * kQ[j] for j, e in enumerate(_DP_E) if e)
        scale = atol + rtol * np.maximum(np.abs(Q), np.abs(Q_new))
        err_norm = max(float(np.sqrt(np.mean((np.abs(errQ) / scale) ** 2))), 1e-12)
        if err_norm <= 1.0:
            s += h
            Q, r = Q_new, r_new
            nsteps += 1
            steps_since_reorth += 1
            drift = float(np.linalg.norm(Q.conj().T @ Q - np.eye(k)))
            max_drift = max(max_drift, drift)
            if drift > 1e-6:
                return STATUS_DEGENERATE, Q, r, max_drift
            if steps_since_reorth >= reorth_every or drift > drift_tol:
                Q, dlog = _mgs(Q)
                r += dlog
                steps_since_reorth = 0
            fac = 0.9 * err_norm ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0)
            h *= min(5.0, max(0.2, fac))
            h = min(h, hmax)
            err_prev = max(err_norm, 1e-10)
        else:
            h *= min(1.0, max(0.2, 0.9 * err_norm ** (-0.2)))
        if h < h_min:
            return STATUS_MINSTEP, Q, r, max_drift
    Q, dlog = _mgs(Q)
    r += dlog
    return STATUS_OK, Q, r, max_drift
