"""The artificial-EOS local model: Rankine-Hugoniot end states, whole-line
viscous shock profiles by continuation and shooting, truncation to finite
intervals, zero-frequency sign scans, nullcline-based nonuniqueness, Hopf
detection and the standing-shock-limit experiment.

The equation of state is generated by ebar(tau, S) = e^S/tau + S + tau^2/2
in specific volume tau = 1/rho; in (rho, T) variables

    S = ln((T-1)/rho),  p = rho (T-1) - 1/rho,
    e = T - 1 + ln((T-1)/rho) + 1/(2 rho^2),

with temperature domain T > 1.  The negative entropy is a convex function
of the conservative variables, which makes this model the counterexample:
convexity alone does not force uniqueness or stability on an interval.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import models
from .contours import adaptive_trace, semicircle_with_diameter, winding_number
from .errors import (
    DomainError,
    FewerThanTwoIntersections,
    FrameDegeneracy,
    NoConvergence,
    NonPositiveInput,
    ContinuationStall,
    OutOfDomain,
)
from .odecore import IntegratorConfig
from .spectral import EvansValue

__all__ = [
    "LocalEOSParams",
    "ThermoState",
    "ShockData",
    "WholeLineProfile",
    "TruncatedProblem",
    "eos",
    "entropy_hessian",
    "rankine_hugoniot",
    "rankine_hugoniot_from_entropy",
    "local_profile_rhs",
    "whole_line_profile",
    "truncate",
    "local_evans",
    "local_d0",
    "nullcline_nonuniqueness",
    "hopf_scan",
    "standing_shock_experiment",
]

END_STATE_TOL = 1e-6
FLUX_TOL = 1e-10


@dataclass(frozen=True)
class LocalEOSParams:
    """Viscosity and heat-conduction coefficients of the local model."""

    alpha: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.kappa > 0):
            raise NonPositiveInput("alpha and kappa must be positive")


@dataclass(frozen=True)
class ThermoState:
    """Pointwise thermodynamic state; the EOS needs T > 1."""

    rho: float
    u: float
    T: float

    def __post_init__(self):
        if not (self.rho > 0 and self.u > 0):
            raise NonPositiveInput("rho and u must be positive")
        if not self.T > 1.0:
            raise DomainError("EOS domain requires T > 1")

    @property
    def pressure(self):
        return models.local_eos(self.rho, self.T)[0]

    @property
    def energy(self):
        return models.local_eos(self.rho, self.T)[1]

    @property
    def entropy(self):
        return models.local_eos(self.rho, self.T)[2]


def eos(rho, T):
    """EOS closure: returns (p, e, S); domain rho > 0, T > 1."""
    if not rho > 0:
        raise DomainError("rho must be positive")
    if not T > 1.0:
        raise DomainError("EOS domain requires T > 1")
    return models.local_eos(rho, T)


def _T_from_e(rho, e, bracket=(1.0 + 1e-12, 1e6)):
    """Invert e = e(rho, T) for T (monotone: e_T > 0 for T > 1)."""
    f = lambda T: models.local_eos(rho, T)[1] - e
    lo, hi = bracket
    lo = 1.0 + 1e-12
    while f(lo) > 0 and lo - 1.0 > 1e-300:
        lo = 1.0 + (lo - 1.0) * 1e-3
    return brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16)


def entropy_hessian(state, h=1e-5, variables="lagrangian"):
    """Finite-difference Hessian of the negative entropy in conservative
    variables.

    With ``variables="lagrangian"`` the function is eta = -S(tau, u, E)
    (specific volume, velocity, specific total energy), the form in which
    -S itself is the convex entropy of the model; ``"eulerian"`` checks the
    classical density-weighted -rho*S over (rho, rho u, rho E).
    """

    if variables == "lagrangian":

        def eta(w):
            tau, u, En = w
            rho = 1.0 / tau
            e = En - 0.5 * u * u
            T = _T_from_e(rho, e)
            return -models.local_eos(rho, T)[2]

        p, e, _ = models.local_eos(state.rho, state.T)
        w0 = np.array([1.0 / state.rho, state.u, e + 0.5 * state.u**2])
    else:

        def eta(w):
            rho, mom, En = w
            u = mom / rho
            e = En / rho - 0.5 * u * u
            T = _T_from_e(rho, e)
            return -rho * models.local_eos(rho, T)[2]

        p, e, _ = models.local_eos(state.rho, state.T)
        w0 = np.array(
            [state.rho, state.rho * state.u,
             state.rho * (e + 0.5 * state.u**2)]
        )
    H = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            hi = h * max(1.0, abs(w0[i]))
            hj = h * max(1.0, abs(w0[j]))
            wpp = w0.copy(); wpp[i] += hi; wpp[j] += hj
            wpm = w0.copy(); wpm[i] += hi; wpm[j] -= hj
            wmp = w0.copy(); wmp[i] -= hi; wmp[j] += hj
            wmm = w0.copy(); wmm[i] -= hi; wmm[j] -= hj
            H[i, j] = (eta(wpp) - eta(wpm) - eta(wmp) + eta(wmm)) / (4 * hi * hj)
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class ShockData:
    """End states of a standing viscous shock with its integrated fluxes.

    m is the mass flux rho*u (equal on both sides); C1 and C2 are the
    momentum and energy flux constants m*u + p and m*(e + u^2/2) + p*u.
    """

    left: ThermoState
    right: ThermoState
    m: float
    C1: float
    C2: float

    def flux_residuals(self):
        out = []
        for s in (self.left, self.right):
            p, e, _ = models.local_eos(s.rho, s.T)
            out.append(
                (
                    abs(s.rho * s.u - self.m),
                    abs(self.m * s.u + p - self.C1),
                    abs(self.m * (e + 0.5 * s.u**2) + p * s.u - self.C2),
                )
            )
        return np.array(out)

    def validate(self, tol=FLUX_TOL):
        if float(np.max(self.flux_residuals())) > tol:
            raise NoConvergence("flux equalities violated")
        return self

    @property
    def S_minus(self):
        return self.left.entropy

    @property
    def is_trivial(self):
        return (
            abs(self.left.u - self.right.u) < 1e-12
            and abs(self.left.T - self.right.T) < 1e-12
        )

    def to_json(self):
        return json.dumps(
            {
                "left": {"rho": self.left.rho, "u": self.left.u, "T": self.left.T},
                "right": {"rho": self.right.rho, "u": self.right.u, "T": self.right.T},
                "m": self.m,
                "C1": self.C1,
                "C2": self.C2,
                "S_minus": self.S_minus,
            },
            indent=2,
        )


def _shock_from_right_and_left(rho_p, u_p, T_p, rho_m, u_m, T_m):
    m = rho_p * u_p
    p_p, e_p, _ = models.local_eos(rho_p, T_p)
    C1 = m * u_p + p_p
    C2 = m * (e_p + 0.5 * u_p**2) + p_p * u_p
    return ShockData(
        left=ThermoState(rho_m, u_m, T_m),
        right=ThermoState(rho_p, u_p, T_p),
        m=m,
        C1=C1,
        C2=C2,
    )


def rankine_hugoniot(rho_plus, u_plus, T_plus, seed=None, max_iter=60):
    """Solve the jump conditions for the left state given the full right
    state (the mass flux is rho_plus * u_plus).

    Newton on the momentum/energy flux equalities in (u_minus, T_minus),
    seeded at ``seed`` or at the right state (which finds the trivial
    zero-jump solution when no seed is given).
    """
    m = rho_plus * u_plus
    p_p, e_p, _ = models.local_eos(rho_plus, T_plus)
    C1 = m * u_plus + p_p
    C2 = m * (e_p + 0.5 * u_plus**2) + p_p * u_plus

    def F(z):
        u, T = z
        if u <= 0 or T <= 1:
            return None
        rho = m / u
        p, e, _ = models.local_eos(rho, T)
        return np.array(
            [m * u + p - C1, m * (e + 0.5 * u * u) + p * u - C2]
        )

    z = np.array(seed if seed is not None else (u_plus, T_plus), dtype=float)
    for _ in range(max_iter):
        Fz = F(z)
        if Fz is None:
            raise NoConvergence("iterate left the EOS domain")
        if np.max(np.abs(Fz)) <= 1e-13 * max(1.0, abs(C1), abs(C2)):
            break
        J = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * max(1.0, abs(z[j]))
            zp = z.copy(); zp[j] += h
            zm = z.copy(); zm[j] -= h
            Fp, Fm = F(zp), F(zm)
            if Fp is None or Fm is None:
                raise NoConvergence("finite-difference stencil left the domain")
            J[:, j] = (Fp - Fm) / (2 * h)
        try:
            dz = np.linalg.solve(J, -Fz)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular jump Jacobian") from exc
        z = z + dz
    else:
        raise NoConvergence("jump-condition Newton did not converge")
    u_m, T_m = float(z[0]), float(z[1])
    return _shock_from_right_and_left(
        rho_plus, u_plus, T_plus, m / u_m, u_m, T_m
    ).validate()


def _hugoniot_residual(tau_m, S_minus, rho_p, T_p):
    tau_p = 1.0 / rho_p
    p_p, e_p, _ = models.local_eos(rho_p, T_p)
    rho_m = 1.0 / tau_m
    T_m = 1.0 + rho_m * math.exp(S_minus)
    p_m, e_m, _ = models.local_eos(rho_m, T_m)
    return e_m - e_p + (tau_m - tau_p) * (p_m + p_p) / 2.0


def rankine_hugoniot_from_entropy(rho_plus, T_plus, S_minus, tau_range=(0.02, 60.0)):
    """Solve the jump conditions parameterized by the left entropy.

    Scans the Hugoniot locus in specific volume for a sign change and
    refines by bisection; the mass flux follows from the momentum jump.
    Raises MultipleBranches if more than one admissible root exists on
    the scan range.
    """
    tau_p = 1.0 / rho_plus
    taus = np.concatenate(
        [
            np.linspace(tau_range[0], tau_p * (1 - 1e-6), 3000),
            np.linspace(tau_p * (1 + 1e-6), tau_range[1], 6000),
        ]
    )
    vals = np.array([_hugoniot_residual(t, S_minus, rho_plus, T_plus) for t in taus])
    roots = []
    for i in range(len(taus) - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0:
            r = brentq(
                _hugoniot_residual,
                taus[i],
                taus[i + 1],
                args=(S_minus, rho_plus, T_plus),
                xtol=1e-14,
            )
            rho_m = 1.0 / r
            T_m = 1.0 + rho_m * math.exp(S_minus)
            p_mewline, e_m, _ = models.local_eos(rho_m, T_m)
            p_p, e_p, _ = models.local_eos(rho_plus, T_plus)
            m2 = -(p_mewline - p_p) / (r - tau_p)
            if m2 > 0:
                roots.append((r, math.sqrt(m2)))
    if not roots:
        raise NoConvergence(f"no Hugoniot root for S_minus={S_minus}")
    if len(roots) > 1:
        from .errors import MultipleBranches

        raise MultipleBranches(
            f"{len(roots)} Hugoniot roots for S_minus={S_minus}: "
            f"{[r for r, _ in roots]}"
        )
    tau_m, m = roots[0]
    rho_m = 1.0 / tau_m
    T_m = 1.0 + rho_m * math.exp(S_minus)
    return _shock_from_right_and_left(
        rho_plus, m * tau_p, T_plus, rho_m, m * tau_m, T_m
    ).validate()


def local_profile_rhs(state, fluxes, params):
    """Steady local-model ODE right-hand side in (u, T).

    ``fluxes`` is (m, C1, C2).
    """
    u, T = float(state[0]), float(state[1])
    if u <= 0:
        raise DomainError("u must be positive")
    if T <= 1.0:
        raise DomainError("EOS domain requires T > 1")
    m, C1, C2 = fluxes
    du, dT = models.local_rhs(u, T, m, C1, C2, params.alpha, params.kappa)
    return np.array([du, dT])


class WholeLineProfile:
    """Whole-line viscous shock profile on a computed core mesh, with
    linearized exponential tails outside it.

    ``xs`` is strictly increasing and centered so that u crosses the mean
    of the end-state velocities at x = 0.  ``eval(x)`` is valid for all x;
    outside the core the state decays onto the end states along the slow
    eigen-direction of the local linearization (accurate to the square of
    the tail amplitude).
    """

    def __init__(self, shock, params, xs, us, Ts):
        self.shock = shock
        self.params = params
        self.xs = np.asarray(xs, dtype=float)
        self.us = np.asarray(us, dtype=float)
        self.Ts = np.asarray(Ts, dtype=float)
        fl = (shock.m, shock.C1, shock.C2)
        self._dus = np.empty_like(self.us)
        self._dTs = np.empty_like(self.Ts)
        for i in range(self.us.size):
            self._dus[i], self._dTs[i] = models.local_rhs(
                self.us[i], self.Ts[i], shock.m, shock.C1, shock.C2,
                params.alpha, params.kappa,
            )
        # tail decay rates from the end-state linearizations
        JL = models.local_jac(shock.left.u, shock.left.T, *fl,
                              params.alpha, params.kappa)
        JR = models.local_jac(shock.right.u, shock.right.T, *fl,
                              params.alpha, params.kappa)
        evL = np.linalg.eigvals(JL)
        evR = np.linalg.eigvals(JR)
        # left tail grows forward (decays as x -> -inf): smallest positive
        self._mu_left = float(min(ev.real for ev in evL if ev.real > 0))
        # right tail decays forward: largest negative
        self._mu_right = float(max(ev.real for ev in evR if ev.real < 0))

    @property
    def core_range(self):
        """Range covered by the computed orbit mesh; outside it the
        linearized exponential tails apply (their error is quadratic in the
        already-certified core-edge defect)."""
        return float(self.xs[0]), float(self.xs[-1])

    @property
    def domain_half_length(self):
        return min(-self.xs[0], self.xs[-1])

    def end_defects(self):
        """End-state defects at the core-mesh edges."""
        s = self.shock
        return (
            math.hypot(self.us[0] - s.left.u, self.Ts[0] - s.left.T),
            math.hypot(self.us[-1] - s.right.u, self.Ts[-1] - s.right.T),
        )

    def eval(self, x):
        xs = self.xs
        if x < xs[0]:
            du = self.us[0] - self.shock.left.u
            dT = self.Ts[0] - self.shock.left.T
            f = math.exp(self._mu_left * (x - xs[0]))
            return self.shock.left.u + du * f, self.shock.left.T + dT * f
        if x > xs[-1]:
            du = self.us[-1] - self.shock.right.u
            dT = self.Ts[-1] - self.shock.right.T
            f = math.exp(self._mu_right * (x - xs[-1]))
            return self.shock.right.u + du * f, self.shock.right.T + dT * f
        i = int(np.searchsorted(xs, x, side="right")) - 1
        i = min(max(i, 0), xs.size - 2)
        h = xs[i + 1] - xs[i]
        th = (x - xs[i]) / h
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th * th * (3 - 2 * th)
        h11 = th * th * (th - 1)
        u = (h00 * self.us[i] + h10 * h * self._dus[i]
             + h01 * self.us[i + 1] + h11 * h * self._dus[i + 1])
        T = (h00 * self.Ts[i] + h10 * h * self._dTs[i]
             + h01 * self.Ts[i + 1] + h11 * h * self._dTs[i + 1])
        return float(u), float(T)

    def sample(self, xvals):
        out = np.array([self.eval(x) for x in xvals])
        return out[:, 0], out[:, 1]

    def monotone_tail_fraction(self, frac=0.1):
        """Check monotone approach of u within the last ``frac`` of each
        side of the core mesh."""
        n = self.xs.size
        k = max(int(n * frac), 4)
        left = np.abs(self.us[:k] - self.shock.left.u)
        right = np.abs(self.us[-k:] - self.shock.right.u)
        return bool(np.all(np.diff(left) >= -1e-12)) and bool(
            np.all(np.diff(right) <= 1e-12)
        )


def _shoot_connection(shock, params, span, eps, cfg, seed=None):
    """One eigen-direction shoot toward the opposite rest point.

    The end with a one-dimensional connecting manifold is shot from:
    backward from the right state along its stable direction when the
    right state is a saddle, else forward from the left state along its
    unstable direction.  ``seed`` carries (sign, span) from a previous
    continuation step.  Returns (defect, sign, xs, us, Ts).
    """
    from .kernels import get_backend

    JL = models.local_jac(shock.left.u, shock.left.T, shock.m, shock.C1,
                          shock.C2, params.alpha, params.kappa)
    JR = models.local_jac(shock.right.u, shock.right.T, shock.m, shock.C1,
                          shock.C2, params.alpha, params.kappa)
    n_st_R = int(np.sum(np.linalg.eigvals(JR).real < 0))
    n_unst_L = int(np.sum(np.linalg.eigvals(JL).real > 0))
    if n_st_R == 1:
        J, anchor, target, direction = JR, shock.right, shock.left, -1.0
        w, V = np.linalg.eig(J)
        idx = int(np.argmin(w.real))
    elif n_unst_L == 1:
        J, anchor, target, direction = JL, shock.left, shock.right, 1.0
        w, V = np.linalg.eig(J)
        idx = int(np.argmax(w.real))
    else:
        raise ContinuationStall(
            f"no one-dimensional connecting manifold "
            f"(unstable(left)={n_unst_L}, stable(right)={n_st_R})"
        )
    v = V[:, idx].real
    v /= np.linalg.norm(v)
    signs = (seed[0],) if seed and seed[0] is not None else (1.0, -1.0)
    best = None
    for sgn in signs if len(signs) == 2 else (signs[0], -signs[0]):
        u0 = anchor.u + sgn * eps * v[0]
        T0 = anchor.T + sgn * eps * v[1]
        if u0 <= 0 or T0 <= 1:
            continue
        status, x_end, xs, us, Ts = get_backend().local_profile(
            shock.m, shock.C1, shock.C2, params.alpha, params.kappa,
            0.0, direction * span, u0, T0, cfg.rtol, cfg.atol, cfg.h_max,
            cfg.blowup_threshold, 1,
        )
        if len(xs) < 8:
            continue
        d_end = math.hypot(us[-1] - target.u, Ts[-1] - target.T)
        if best is None or d_end < best[0]:
            best = (d_end, sgn, xs, us, Ts)
        if best[0] <= 1e-12:
            break
    if best is None:
        raise ContinuationStall("both shoot directions left the domain")
    return best


def _slow_rate(shock, params):
    """Smallest-magnitude nonzero decay rate of the two end states."""
    rates = []
    for st in (shock.left, shock.right):
        J = models.local_jac(st.u, st.T, shock.m, shock.C1, shock.C2,
                             params.alpha, params.kappa)
        rates.extend(abs(ev.real) for ev in np.linalg.eigvals(J) if ev.real != 0)
    return min(rates)


def _solve_connection(shock, params, cfg=None, eps=1e-8, tol=END_STATE_TOL,
                      seed=None):
    """Heteroclinic orbit by eigen-direction shooting with domain doubling.

    Returns (xs, us, Ts, (sign, span)) with the orbit mesh in shoot order.
    """
    cfg = cfg or IntegratorConfig(rtol=1e-12, atol=1e-13, h_max=0.25)
    scale = max(
        abs(shock.left.u - shock.right.u), abs(shock.left.T - shock.right.T)
    )
    eps_abs = eps * max(scale, 1e-3)
    span = seed[1] if seed and seed[1] else max(60.0, 25.0 / _slow_rate(shock, params))
    d_end = math.inf
    for _ in range(8):  # domain doubling until the tails are converged
        d_end, sgn, xs, us, Ts = _shoot_connection(
            shock, params, span, eps_abs, cfg, seed=seed
        )
        if d_end <= tol:
            return xs, us, Ts, (sgn, span)
        seed = (sgn, None)
        span *= 2.0
    raise ContinuationStall(f"connection defect {d_end:.2e} above {tol}")


def whole_line_profile(shock, params=None, continuation_steps=30, cfg=None,
                       tol=END_STATE_TOL):
    """Whole-line shock profile, reached by continuation in the left
    entropy in evenly spaced steps, re-solving the jump conditions at each
    step and re-shooting the connecting orbit with the previous step's
    shoot orientation and domain as the seed.

    The ladder starts on the weak-shock side of the family: profiles exist
    only where the left entropy is below the right-state entropy (the
    opposite side has no stable direction at the right rest point), so the
    start is the first ladder point past zero strength.  The returned
    profile is centered by the phase condition u(0) = (u_left+u_right)/2
    and certified by end-state defects below ``tol``.
    """
    params = params or LocalEOSParams()
    if shock.is_trivial:
        raise NoConvergence("zero-jump shock has no connecting orbit")
    S_target = shock.S_minus
    S_plus = shock.right.entropy
    rho_p, T_p = shock.right.rho, shock.right.T
    ladder = np.linspace(S_plus, S_target, continuation_steps + 1)[1:]
    last_good = None
    xs = us = Ts = None
    sdata = None
    seed = None
    for S in ladder:
        sdata = rankine_hugoniot_from_entropy(rho_p, T_p, float(S))
        step_tol = tol if S == ladder[-1] else max(tol, 1e-5)
        try:
            xs, us, Ts, seed = _solve_connection(
                sdata, params, cfg, tol=step_tol, seed=seed
            )
            last_good = float(S)
        except ContinuationStall as exc:
            raise ContinuationStall(
                f"continuation stalled at S_minus={S}", last_good=last_good
            ) from exc
    if xs is None:
        raise ContinuationStall("empty continuation ladder", last_good=None)
    # orient increasing in x and center by the velocity phase condition
    if xs[0] > xs[-1]:
        xs = xs[::-1].copy()
        us = us[::-1].copy()
        Ts = Ts[::-1].copy()
    u_mid = 0.5 * (sdata.left.u + sdata.right.u)
    k = int(np.argmin(np.abs(us - u_mid)))
    x0 = xs[k]
    prof = WholeLineProfile(sdata, params, xs - x0, us, Ts)
    dl, dr = prof.end_defects()
    if max(dl, dr) > tol:
        raise ContinuationStall(
            f"end-state defects ({dl:.2e}, {dr:.2e}) above {tol}",
            last_good=last_good,
        )
    return prof


@dataclass
class TruncatedProblem:
    """A piece of a whole-line profile on [xL, xR], with the boundary data
    it solves and a resampled dense mesh."""

    profile: WholeLineProfile
    xL: float
    xR: float
    xs: np.ndarray = field(repr=False, default=None)
    us: np.ndarray = field(repr=False, default=None)
    Ts: np.ndarray = field(repr=False, default=None)

    @property
    def params(self):
        return self.profile.params

    @property
    def shock(self):
        return self.profile.shock

    @property
    def left_data(self):
        return self.us[0], self.Ts[0]

    @property
    def right_data(self):
        return self.us[-1], self.Ts[-1]


def truncate(profile, xL, xR, n_mesh=1024):
    """Restrict a whole-line profile to [xL, xR].

    The boundary data are the profile's own values there.  The interval may
    extend past the computed core mesh into the certified exponential
    tails; a degenerate interval is rejected.
    """
    if not xL < xR:
        raise OutOfDomain("need xL < xR")
    core = profile.xs[(profile.xs > xL) & (profile.xs < xR)]
    xs = np.unique(np.concatenate([[xL], core, [xR],
                                   np.linspace(xL, xR, n_mesh)]))
    us, Ts = profile.sample(xs)
    return TruncatedProblem(profile=profile, xL=xL, xR=xR, xs=xs, us=us, Ts=Ts)


LEFT_KERNEL = np.eye(5, dtype=complex)[:, 3:5]
RIGHT_KERNEL = np.eye(5, dtype=complex)[:, [0, 3, 4]]


def _local_frame(trunc, lam, x_from, x_to, Q0, cfg):
    from .kernels import get_backend

    s = trunc.shock
    p = trunc.params
    pars = np.array([p.alpha, p.kappa, s.m, s.C1, s.C2])
    return get_backend().frame_evolve(
        1, trunc.xs, trunc.us, trunc.Ts, pars, complex(lam), x_from, x_to,
        Q0, cfg.rtol, cfg.atol, abs(x_to - x_from) / 8.0, 20, 1e-10,
    )


def local_evans(trunc, lam, cfg=None, match_at=None, drop_radial=False):
    """Evans value of the truncated problem by two-sided Drury frames.

    Matching defaults to x = 0 when the interval contains it, else the
    midpoint.
    """
    cfg = cfg or IntegratorConfig(rtol=1e-12, atol=1e-14)
    if match_at is None:
        match_at = 0.0 if trunc.xL < 0.0 < trunc.xR else 0.5 * (trunc.xL + trunc.xR)
    status_f, Qf, rf, drift_f = _local_frame(
        trunc, lam, trunc.xL, match_at, LEFT_KERNEL, cfg
    )
    status_b, Qb, rb, drift_b = _local_frame(
        trunc, lam, trunc.xR, match_at, RIGHT_KERNEL, cfg
    )
    if status_f != 0 or status_b != 0:
        raise FrameDegeneracy(
            f"frame integration failed: statuses ({status_f}, {status_b}), "
            f"drifts ({drift_f:.2e}, {drift_b:.2e})"
        )
    det = complex(np.linalg.det(np.hstack([Qf, Qb])))
    if drop_radial:
        return EvansValue(mantissa=det, log_scale=0.0,
                          normalization=f"two-sided@{match_at},no-radial")
    r = rf + rb
    return EvansValue(
        mantissa=det * cmath.exp(1j * r.imag),
        log_scale=r.real,
        normalization=f"two-sided@{match_at},radial",
    )


def local_d0(trunc, cfg=None):
    """Zero-frequency Evans value of the truncated problem by direct
    integration of the once-integrated system (sign meaningful)."""
    from .kernels import get_backend

    cfg = cfg or IntegratorConfig(rtol=1e-12, atol=1e-14)
    s = trunc.shock
    p = trunc.params
    status, d0, _ = get_backend().local_d0(
        trunc.xs, trunc.us, trunc.Ts, s.m, s.C1, s.C2, p.alpha, p.kappa,
        trunc.xL, trunc.xR, cfg.rtol, cfg.atol,
    )
    if status != 0:
        raise FrameDegeneracy(f"zero-frequency integration failed ({status})")
    return float(d0)


def _backward_map(trunc, c1, c2, cfg):
    """Integrate the profile ODE backward from the fixed right data with
    trial flux constants; returns (u, T) at xL or None if the trajectory
    leaves the domain."""
    from .kernels import get_backend

    s = trunc.shock
    p = trunc.params
    uR, TR = trunc.right_data
    status, x_end, xs, us, Ts = get_backend().local_profile(
        s.m, c1, c2, p.alpha, p.kappa, trunc.xR, trunc.xL, uR, TR,
        cfg.rtol, cfg.atol, cfg.h_max, cfg.blowup_threshold, 1,
    )
    if status != 0:
        return None
    return float(us[-1]), float(Ts[-1]), (xs, us, Ts)


@dataclass
class NonuniquenessReport:
    """Two distinct steady profiles solving the same boundary data."""

    intersections: list
    reference: tuple
    separation_metric: float
    profiles: list = field(repr=False, default_factory=list)
    grid: dict = field(repr=False, default_factory=dict)

    def to_csv(self):
        import csv as _csv
        import io as _io

        buf = _io.StringIO()
        w = _csv.writer(buf, lineterminator="\n")
        w.writerow(["c1", "c2", "M1", "M2"])
        for c1, c2, m1, m2 in self.grid.get("rows", []):
            w.writerow([format(v, ".17e") for v in (c1, c2, m1, m2)])
        return buf.getvalue()


def nullcline_nonuniqueness(trunc, half_width=None, n_grid=41, cfg=None,
                            newton_tol=1e-11):
    """Locate two flux-constant pairs whose backward profiles share the
    truncated problem's boundary data.

    The maps M1, M2 are the left-endpoint velocity/temperature mismatches
    of the backward integration from the fixed right data; their zero sets
    both contain the reference constants.  Marching-squares cells where
    both change sign seed a 2D Newton; distinct refined roots are returned
    with the profile-pair separation metric (max pointwise difference over
    the total variation per component, maximized over components).
    """
    cfg = cfg or IntegratorConfig(rtol=1e-12, atol=1e-14)
    s = trunc.shock
    uL_ref, TL_ref = trunc.left_data

    def M(c1, c2):
        out = _backward_map(trunc, c1, c2, cfg)
        if out is None:
            return None
        uL, TL, _ = out
        return uL - uL_ref, TL - TL_ref

    if half_width is None:
        half_width = 2e-4 * max(1.0, abs(s.C1), abs(s.C2))
    c1v = s.C1 + np.linspace(-half_width, half_width, n_grid)
    c2v = s.C2 + np.linspace(-half_width, half_width, n_grid)
    M1 = np.full((n_grid, n_grid), np.nan)
    M2 = np.full((n_grid, n_grid), np.nan)
    rows = []
    for i, c1 in enumerate(c1v):
        for j, c2 in enumerate(c2v):
            got = M(float(c1), float(c2))
            if got is not None:
                M1[i, j], M2[i, j] = got
                rows.append((float(c1), float(c2), M1[i, j], M2[i, j]))

    # cells where both nullclines pass: sign changes of M1 and M2
    cand = []
    for i in range(n_grid - 1):
        for j in range(n_grid - 1):
            block1 = M1[i : i + 2, j : j + 2]
            block2 = M2[i : i + 2, j : j + 2]
            if np.any(np.isnan(block1)) or np.any(np.isnan(block2)):
                continue
            if block1.min() < 0 < block1.max() and block2.min() < 0 < block2.max():
                cand.append((float(c1v[i] + c1v[i + 1]) / 2,
                             float(c2v[j] + c2v[j + 1]) / 2))

    def newton(c0):
        z = np.array(c0)
        for _ in range(40):
            got = M(*z)
            if got is None:
                return None
            F = np.array(got)
            if np.max(np.abs(F)) <= newton_tol:
                return z
            J = np.empty((2, 2))
            for jj in range(2):
                h = 1e-7 * max(1e-6, abs(z[jj]))
                zp = z.copy(); zp[jj] += h
                zm = z.copy(); zm[jj] -= h
                gp, gm = M(*zp), M(*zm)
                if gp is None or gm is None:
                    return None
                J[:, jj] = (np.array(gp) - np.array(gm)) / (2 * h)
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                return None
            # keep iterates inside the scanned window
            lim = 4.0 * half_width
            step = np.clip(step, -lim, lim)
            z = z + step
        return None

    roots = []
    for c0 in cand:
        z = newton(c0)
        if z is None:
            continue
        if any(
            abs(z[0] - r[0]) < 1e-3 * half_width
            and abs(z[1] - r[1]) < 1e-3 * half_width
            for r in roots
        ):
            continue
        roots.append((float(z[0]), float(z[1])))
    roots.sort()
    grid = {"rows": rows, "c1": c1v, "c2": c2v, "M1": M1, "M2": M2}
    if len(roots) < 2:
        raise FewerThanTwoIntersections(
            f"found {len(roots)} intersection(s) on the window "
            f"(half_width={half_width:.1e}); the computation is delicate",
            found=roots,
        )
    # separation metric between the two backward profiles
    pair = roots[:2]
    xs_eval = np.linspace(trunc.xL, trunc.xR, 1024)
    prof_samples = []
    for c1, c2 in pair:
        out = _backward_map(trunc, c1, c2, cfg)
        xs_b, us_b, Ts_b = out[2]
        order = np.argsort(xs_b)
        us_i = np.interp(xs_eval, xs_b[order], us_b[order])
        Ts_i = np.interp(xs_eval, xs_b[order], Ts_b[order])
        prof_samples.append((us_i, Ts_i))
    seps = []
    for comp in range(2):
        a = prof_samples[0][comp]
        b = prof_samples[1][comp]
        diff = float(np.max(np.abs(a - b)))
        tv = min(
            float(np.sum(np.abs(np.diff(a)))), float(np.sum(np.abs(np.diff(b))))
        )
        if tv > 0:
            seps.append(diff / tv)
    return NonuniquenessReport(
        intersections=pair,
        reference=(s.C1, s.C2),
        separation_metric=max(seps),
        profiles=prof_samples,
        grid=grid,
    )


@dataclass
class HopfReport:
    real_axis_zero_free: bool
    winding: int
    real_values: np.ndarray
    trace: object

    def to_json(self):
        return json.dumps(
            {
                "real_axis_zero_free": self.real_axis_zero_free,
                "winding": self.winding,
                "n_real_samples": int(len(self.real_values)),
            },
            indent=2,
        )


def hopf_scan(trunc, radius=1e-3, n_real=200, cfg=None):
    """Hopf detection on a truncated problem: sign constancy of the Evans
    function on the real segment [1e-8, radius] plus the winding number on
    the half-disk contour of that radius.

    Winding 2 with a zero-free real segment certifies a complex-conjugate
    eigenvalue pair strictly inside the half-disk.
    """
    cfg = cfg or IntegratorConfig(rtol=1e-12, atol=1e-14)
    lam_real = np.linspace(1e-8, radius, n_real)
    vals = np.array(
        [local_evans(trunc, lam, cfg).mantissa.real for lam in lam_real]
    )
    zero_free = bool(np.all(vals > 0) or np.all(vals < 0))
    spec = semicircle_with_diameter(radius, conjugate_symmetry=True)
    evaluator = lambda lam: local_evans(trunc, lam, cfg, drop_radial=True)
    from .errors import OnContourZero

    try:
        trace = adaptive_trace(evaluator, spec)
    except OnContourZero:
        spec = semicircle_with_diameter(radius * 1.1, conjugate_symmetry=True)
        trace = adaptive_trace(evaluator, spec)
    rep = winding_number(trace)
    return HopfReport(
        real_axis_zero_free=zero_free,
        winding=rep.winding,
        real_values=vals,
        trace=trace,
    )


def standing_shock_experiment(profile, eps_values=(0.25, 0.125, 0.0625, 0.03125),
                              cfg=None):
    """Zero-frequency values of the standing-shock family.

    For each epsilon the profile is truncated to [-1/(2 eps), 1/(2 eps)]
    (its own boundary data; the unit-interval rescaling changes the value
    by a positive factor only).  Returns rows (eps, D0) plus a flag for
    sign constancy away from zero.
    """
    cfg = cfg or IntegratorConfig(rtol=1e-12, atol=1e-14)
    rows = []
    for eps in eps_values:
        half = 0.5 / eps
        tr = truncate(profile, -half, half)
        rows.append((float(eps), local_d0(tr, cfg)))
    vals = np.array([v for _, v in rows])
    sign_ok = bool(np.all(vals > 0) or np.all(vals < 0))
    return {
        "rows": rows,
        "sign_constant": sign_ok,
        "min_abs": float(np.min(np.abs(vals))),
    }
