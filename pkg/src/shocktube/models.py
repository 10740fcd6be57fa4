"""Right-hand sides, Jacobians and linearization matrices for the two gas
models.

This is a leaf module: plain functions of floats and small arrays, no
package-internal imports.  The compiled kernel mirrors these formulas in C;
parity between the two is covered by tests.

Polytropic profile ODE in (u, e) on [0, 1] (inflow-normalized, rho0 = 1):

    (alpha/u0) u' = c1 + u + Gamma*e/u
    (nu/u0)    e' = c2 - c1*u - u^2/2 + e

Local-model steady ODE in (u, T) with mass flux m and EOS generated by
ebar(tau, S) = e^S/tau + S + tau^2/2 (tau = 1/rho):

    S = ln((T-1)/rho),  p = rho*(T-1) - 1/rho,
    e = T - 1 + ln((T-1)/rho) + 1/(2 rho^2):

    alpha u' = m*u + p(m/u, T) - C1
    kappa T' = m*(e(m/u,T) + u^2/2) + p*u - alpha*u*u' - C2
"""

from __future__ import annotations

import math

import numpy as np

# ---------------------------------------------------------------------------
# polytropic model
# ---------------------------------------------------------------------------


def poly_rhs(u, e, c1, c2, Gamma, alpha, nu, u0):
    """Profile ODE right-hand side; requires u > 0."""
    du = (u0 / alpha) * (c1 + u + Gamma * e / u)
    de = (u0 / nu) * (c2 - c1 * u - 0.5 * u * u + e)
    return du, de


def poly_jac(u, e, c1, c2, Gamma, alpha, nu, u0):
    """Jacobian of poly_rhs with respect to (u, e)."""
    return np.array(
        [
            [(u0 / alpha) * (1.0 - Gamma * e / (u * u)), (u0 / alpha) * Gamma / u],
            [(u0 / nu) * (-c1 - u), u0 / nu],
        ]
    )


def poly_var_rhs(y, c1, c2, Gamma, alpha, nu, u0):
    """Profile co-integrated with its two variational solutions.

    y = (u, e, a1, b1, a2, b2) where (a_i, b_i) is the endpoint variation
    for a unit perturbation of c_i.  Variations vanish at x = 0.
    """
    u, e, a1, b1, a2, b2 = y
    du, de = poly_rhs(u, e, c1, c2, Gamma, alpha, nu, u0)
    ka = u0 / alpha
    kn = u0 / nu
    j11 = ka * (1.0 - Gamma * e / (u * u))
    j12 = ka * Gamma / u
    j21 = kn * (-c1 - u)
    j22 = kn
    return np.array(
        [
            du,
            de,
            ka * 1.0 + j11 * a1 + j12 * b1,
            kn * (-u) + j21 * a1 + j22 * b1,
            j11 * a2 + j12 * b2,
            kn * 1.0 + j21 * a2 + j22 * b2,
        ]
    )


def poly_d0_rhs(y, c1, c2, Gamma, alpha, nu, u0):
    """Profile co-integrated with the two zero-frequency Evans solutions.

    y = (u, e, u1, e1, u2, e2).  The (u_j, e_j) satisfy the once-integrated
    lambda = 0 eigenvalue system with inhomogeneities corresponding to unit
    initial slopes (u'(0), e'(0)) = (1,0) and (0,1):

        (alpha/u0) u_j' = d1 + (1 - Gamma*e/u^2) u_j + (Gamma/u) e_j
        (nu/u0)    e_j' = d2 - d1*u - (alpha/u0) u' u_j + e_j + (Gamma*e/u) u_j

    with (d1, d2) = (alpha/u0, alpha) and (0, nu/u0) respectively.
    """
    u, e, u1, e1, u2, e2 = y
    du, de = poly_rhs(u, e, c1, c2, Gamma, alpha, nu, u0)
    ka = u0 / alpha
    kn = u0 / nu
    m11 = ka * (1.0 - Gamma * e / (u * u))
    m12 = ka * Gamma / u
    m21 = kn * (-(alpha / u0) * du + Gamma * e / u)
    m22 = kn
    d1a, d2a = alpha / u0, alpha
    d1b, d2b = 0.0, nu / u0
    return np.array(
        [
            du,
            de,
            ka * d1a + m11 * u1 + m12 * e1,
            kn * (d2a - d1a * u) + m21 * u1 + m22 * e1,
            ka * d1b + m11 * u2 + m12 * e2,
            kn * (d2b - d1b * u) + m21 * u2 + m22 * e2,
        ]
    )


def poly_eigs_matrix(u, e, c1, c2, Gamma, alpha, nu, u0, lam):
    """5x5 first-order coefficient matrix A(x; lambda) of the eigenvalue
    problem about a profile, state Y = (rho, u, e, u', e').

    The base-profile derivatives are evaluated exactly from the profile
    right-hand side, so this needs only the pointwise profile values.
    """
    uh = u
    eh = e
    duh, deh = poly_rhs(uh, eh, c1, c2, Gamma, alpha, nu, u0)
    rh = u0 / uh
    drh = -u0 * duh / (uh * uh)
    A = np.zeros((5, 5), dtype=complex)
    # rho' from the mass equation.
    A[0, 0] = -(lam + duh) / uh
    A[0, 1] = -drh / uh
    A[0, 3] = -rh / uh
    A[1, 3] = 1.0
    A[2, 4] = 1.0
    # u'' from the momentum equation (rho' substituted).
    A[3, 0] = (Gamma * deh + duh * uh - Gamma * eh * (lam + duh) / uh) / alpha
    A[3, 1] = (lam * rh + duh * rh - Gamma * eh * drh / uh) / alpha
    A[3, 2] = Gamma * drh / alpha
    A[3, 3] = (u0 - Gamma * eh * rh / uh) / alpha
    A[3, 4] = Gamma * rh / alpha
    # e'' from the energy equation.
    A[4, 0] = (deh * uh + Gamma * duh * eh) / nu
    A[4, 1] = deh * rh / nu
    A[4, 2] = (lam * rh + Gamma * duh * rh) / nu
    A[4, 3] = (Gamma * rh * eh - 2.0 * alpha * duh) / nu
    A[4, 4] = u0 / nu
    return A


# ---------------------------------------------------------------------------
# local model (artificial equation of state)
# ---------------------------------------------------------------------------


def local_eos(rho, T):
    """EOS closure: returns (p, e, S); domain rho > 0, T > 1."""
    S = math.log((T - 1.0) / rho)
    p = rho * (T - 1.0) - 1.0 / rho
    e = T - 1.0 + S + 0.5 / (rho * rho)
    return p, e, S


def local_eos_derivs(rho, T):
    """First and second partials of p and e with respect to (rho, T)."""
    p_r = (T - 1.0) + 1.0 / (rho * rho)
    p_T = rho
    p_rr = -2.0 / rho**3
    p_rT = 1.0
    p_TT = 0.0
    e_r = -1.0 / rho - 1.0 / rho**3
    e_T = 1.0 + 1.0 / (T - 1.0)
    e_rr = 1.0 / (rho * rho) + 3.0 / rho**4
    e_rT = 0.0
    e_TT = -1.0 / (T - 1.0) ** 2
    return p_r, p_T, p_rr, p_rT, p_TT, e_r, e_T, e_rr, e_rT, e_TT


def local_rhs(u, T, m, C1, C2, alpha, kappa):
    """Steady local-model ODE right-hand side in (u, T)."""
    rho = m / u
    p, e, _ = local_eos(rho, T)
    du = (m * u + p - C1) / alpha
    dT = (m * (e + 0.5 * u * u) + p * u - alpha * u * du - C2) / kappa
    return du, dT


def local_jac(u, T, m, C1, C2, alpha, kappa):
    """Jacobian of local_rhs with respect to (u, T)."""
    rho = m / u
    p, e, _ = local_eos(rho, T)
    p_r, p_T, _, _, _, e_r, e_T, _, _, _ = local_eos_derivs(rho, T)
    drho_du = -m / (u * u)
    du_val = (m * u + p - C1) / alpha
    ddu_du = (m + p_r * drho_du) / alpha
    ddu_dT = p_T / alpha
    ddT_du = (
        m * (e_r * drho_du + u)
        + p_r * drho_du * u
        + p
        - alpha * du_val
        - alpha * u * ddu_du
    ) / kappa
    ddT_dT = (m * e_T + p_T * u - alpha * u * ddu_dT) / kappa
    return np.array([[ddu_du, ddu_dT], [ddT_du, ddT_dT]])


def local_eigs_matrix(u, T, m, C1, C2, alpha, kappa, lam):
    """5x5 coefficient matrix of the local-model eigenvalue problem, state
    Y = (rho, u, T, u', T').

    Derived by linearizing the time-dependent equations about the steady
    profile, substituting rho' from the mass equation and u'' from the
    momentum equation.  Validated by the flux-form defect oracle in the
    tests.
    """
    uh = u
    Th = T
    duh, dTh = local_rhs(uh, Th, m, C1, C2, alpha, kappa)
    rh = m / uh
    drh = -m * duh / (uh * uh)
    p, e, _ = local_eos(rh, Th)
    p_r, p_T, p_rr, p_rT, p_TT, e_r, e_T, e_rr, e_rT, e_TT = local_eos_derivs(rh, Th)
    # x-derivatives of the EOS coefficient fields along the profile.
    dp_r = p_rr * drh + p_rT * dTh
    dp_T = p_rT * drh + p_TT * dTh
    de_r = e_rr * drh + e_rT * dTh
    de_T = e_rT * drh + e_TT * dTh
    dp = p_r * drh + p_T * dTh
    de = e_r * drh + e_T * dTh
    Eh = e + 0.5 * uh * uh
    dEh = de + uh * duh
    # alpha*u_hat'' from differentiating the profile ODE.
    dduh = (m * duh + dp) / alpha

    A = np.zeros((5, 5), dtype=complex)
    # rho' from the mass equation.
    a_r0 = -(lam + duh) / uh
    a_r1 = -drh / uh
    a_r3 = -rh / uh
    A[0, 0] = a_r0
    A[0, 1] = a_r1
    A[0, 3] = a_r3
    A[1, 3] = 1.0
    A[2, 4] = 1.0
    # Momentum flux d(rho u^2 + p) = Mr*rho + 2m*u + p_T*Tpert, Mr below.
    Mr = uh * uh + p_r
    dMr = 2.0 * uh * duh + dp_r
    # alpha u'' = lam*(rh u + uh rho) + d/dx(momentum flux), rho'
    # substituted from the mass row.
    c_rho = lam * uh + dMr + Mr * a_r0
    c_u = lam * rh + Mr * a_r1
    c_T = dp_T
    c_up = 2.0 * m + Mr * a_r3
    c_Tp = p_T
    A[3, 0] = c_rho / alpha
    A[3, 1] = c_u / alpha
    A[3, 2] = c_T / alpha
    A[3, 3] = c_up / alpha
    A[3, 4] = c_Tp / alpha
    # Energy flux d(rho u E_tot + p u) = Fr*rho + Fu*u + FT*Tpert.
    Fr = uh * Eh + m * e_r + uh * p_r
    Fu = rh * Eh + m * uh + p
    FT = m * e_T + uh * p_T
    dFr = duh * Eh + uh * dEh + m * de_r + duh * p_r + uh * dp_r
    dFu = drh * Eh + rh * dEh + m * duh + dp
    dFT = m * de_T + duh * p_T + uh * dp_T
    # kappa T'' = lam*(rh*(e_r rho + e_T Tpert + uh u) + Eh rho)
    #   + d/dx(energy flux) - alpha*(uh u' + uh' u)'
    # with rho' from the mass row and u'' from the momentum row.
    g_rho = lam * (rh * e_r + Eh) + dFr + Fr * a_r0
    g_u = lam * rh * uh + dFu + Fr * a_r1 - alpha * dduh
    g_T = lam * rh * e_T + dFT
    g_up = Fr * a_r3 + Fu - 2.0 * alpha * duh
    g_Tp = FT
    A[4, 0] = (g_rho - uh * c_rho) / kappa
    A[4, 1] = (g_u - uh * c_u) / kappa
    A[4, 2] = (g_T - uh * c_T) / kappa
    A[4, 3] = (g_up - uh * c_up) / kappa
    A[4, 4] = (g_Tp - uh * c_Tp) / kappa
    return A


def local_d0_rhs(x, y, base_uT, m, C1, C2, alpha, kappa, uL):
    """Reduced lambda = 0 system for the local-model Evans value at zero.

    y = (u1, T1, u2, T2): the two once-integrated zero-frequency solutions
    with unit initial slopes (u', T')(xL) = (1,0)/(0,1).  ``base_uT`` maps x
    to the base profile (u, T); ``uL`` is the base u at the left endpoint.
    """
    uh, Th = base_uT(x)
    duh, dTh = local_rhs(uh, Th, m, C1, C2, alpha, kappa)
    rh = m / uh
    p, e, _ = local_eos(rh, Th)
    p_r, p_T, _, _, _, e_r, e_T, _, _, _ = local_eos_derivs(rh, Th)
    # m-perturbation vanishes for Evans solutions: rho = -rh*u/uh.
    rho_of_u = -rh / uh
    # Momentum, integrated once from xL:
    #   alpha u' = alpha*delta1 + 2m u + (uh^2 + p_r) rho + p_T Tpert
    a11 = (2.0 * m + (uh * uh + p_r) * rho_of_u) / alpha
    a12 = p_T / alpha
    # Energy, integrated once (the (rh u + uh rho)*Eh flux term vanishes):
    #   kappa T' = kappa*delta2 + alpha*u(xL)*delta1
    #     + m(e_r rho + e_T Tpert + uh u) + p u + uh(p_r rho + p_T Tpert)
    #     - alpha(uh u' + uh' u)
    b_u = (m * e_r + uh * p_r) * rho_of_u + m * uh + p - alpha * duh
    b_T = m * e_T + uh * p_T
    out = np.empty(4)
    for j, (d1, d2) in enumerate(((1.0, 0.0), (0.0, 1.0))):
        uj = y[2 * j]
        Tj = y[2 * j + 1]
        duj = d1 + a11 * uj + a12 * Tj
        dTj = (
            kappa * d2
            + alpha * uL * d1
            + b_u * uj
            + b_T * Tj
            - alpha * uh * duj
        ) / kappa
        out[2 * j] = duj
        out[2 * j + 1] = dTj
    return out
