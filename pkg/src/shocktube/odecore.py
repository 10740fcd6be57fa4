"""Adaptive ODE integration with event detection and dense output.

Two schemes are provided behind the same contract: an explicit
Dormand-Prince 5(4) embedded pair and an implicit TR-BDF2 scheme with an
embedded third-order error estimate for stiff problems.  Both produce a
:class:`Trajectory` carrying per-interval dense-output interpolants, so
event locations can be bisected to high relative accuracy after the fact.

All functions here are pure: no shared mutable state, safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegratorFailure, NewtonDivergence, NonFiniteRHS

__all__ = [
    "IntegratorConfig",
    "EventSpec",
    "Termination",
    "Trajectory",
    "integrate_rk45",
    "integrate_stiff",
]

# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: weights of the embedded error estimate.
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Hairer's dense-output coefficients for DOPRI5.
_DP_D = np.array(
    [
        -12715105075.0 / 11282082432.0,
        0.0,
        87487479700.0 / 32700410799.0,
        -10690763975.0 / 1880347072.0,
        701980252875.0 / 199316789632.0,
        -1453857185.0 / 822651844.0,
        69997945.0 / 29380423.0,
    ]
)

# TR-BDF2 constants (gamma = 2 - sqrt(2); both implicit stages share d).
_TB_GAMMA = 2.0 - math.sqrt(2.0)
_TB_D = 1.0 - math.sqrt(2.0) / 2.0
# Effective weights of the scheme on slopes (f_n, f_gamma, f_{n+1}) and the
# weights of the embedded third-order companion, for the error estimate.
_TB_B = np.array([math.sqrt(2.0) / 4.0, math.sqrt(2.0) / 4.0, 1.0 - math.sqrt(2.0) / 2.0])
_TB_BHAT = np.array(
    [
        0.0,  # filled below so the three weights sum to 1
        1.0 / (6.0 * _TB_GAMMA * (1.0 - _TB_GAMMA)),
        (2.0 - 3.0 * _TB_GAMMA) / (6.0 * (1.0 - _TB_GAMMA)),
    ]
)
_TB_BHAT[0] = 1.0 - _TB_BHAT[1] - _TB_BHAT[2]

_EVENT_LOCATE_REL = 1e-12  # of the span, per the event contract
_MAX_GROW = 5.0
_MAX_SHRINK = 0.2
_SAFETY = 0.9
# PI controller exponents for a 5th/2nd order error estimate respectively.
_PI_ALPHA_RK = 0.7 / 5.0
_PI_BETA_RK = 0.4 / 5.0
_PI_ALPHA_TB = 0.7 / 3.0
_PI_BETA_TB = 0.4 / 3.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Step-control and termination parameters.

    ``rtol``/``atol`` default to the tight values used throughout the
    spectral computations.  Step sizes are absolute in the independent
    variable.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = math.inf
    max_steps: int = 1_000_000
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not (self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need h_min <= h_init <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")


@dataclass(frozen=True)
class EventSpec:
    """Level crossing of one state component: y[index] - offset hits zero.

    ``direction`` is -1 for decreasing-through-zero, +1 for increasing,
    0 for either.  Terminal events stop the integration at the localized
    crossing.
    """

    index: int
    direction: int = -1
    terminal: bool = True
    offset: float = 0.0

    def __post_init__(self):
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or +1")


@dataclass(frozen=True)
class Termination:
    """Why the integration stopped.

    ``kind`` is one of ``reached_end``, ``event``, ``blowup``,
    ``min_step``.  ``x`` is the final mesh point; ``event_index`` indexes
    the triggering EventSpec when kind == "event".
    """

    kind: str
    x: float
    event_index: int | None = None


class _DPInterpolant:
    """Quartic dense output of one accepted Dormand-Prince step."""

    __slots__ = ("x0", "h", "r")

    def __init__(self, x0, h, y0, y1, k):
        self.x0 = x0
        self.h = h
        ydiff = y1 - y0
        r = np.empty((5, y0.size))
        r[0] = y0
        r[1] = ydiff
        r[2] = h * k[0] - ydiff
        r[3] = 2.0 * ydiff - h * (k[0] + k[6])
        r[4] = h * (_DP_D @ k)
        self.r = r

    def __call__(self, x):
        th = (x - self.x0) / self.h
        r = self.r
        return r[0] + th * (r[1] + (1.0 - th) * (r[2] + th * (r[3] + (1.0 - th) * r[4])))

    def deriv(self, x):
        th = (x - self.x0) / self.h
        r = self.r
        dp = (
            r[1]
            + (1.0 - 2.0 * th) * r[2]
            + (2.0 * th - 3.0 * th * th) * r[3]
            + (2.0 * th - 6.0 * th * th + 4.0 * th**3) * r[4]
        )
        return dp / self.h


class _HermiteInterpolant:
    """Cubic Hermite dense output (used by the TR-BDF2 steps)."""

    __slots__ = ("x0", "h", "y0", "y1", "f0", "f1")

    def __init__(self, x0, h, y0, y1, f0, f1):
        self.x0 = x0
        self.h = h
        self.y0 = y0
        self.y1 = y1
        self.f0 = f0
        self.f1 = f1

    def __call__(self, x):
        th = (x - self.x0) / self.h
        h00 = (1.0 + 2.0 * th) * (1.0 - th) ** 2
        h10 = th * (1.0 - th) ** 2
        h01 = th * th * (3.0 - 2.0 * th)
        h11 = th * th * (th - 1.0)
        return h00 * self.y0 + h10 * self.h * self.f0 + h01 * self.y1 + h11 * self.h * self.f1

    def deriv(self, x):
        th = (x - self.x0) / self.h
        d00 = (6.0 * th * th - 6.0 * th) / self.h
        d10 = 3.0 * th * th - 4.0 * th + 1.0
        d01 = (6.0 * th - 6.0 * th * th) / self.h
        d11 = 3.0 * th * th - 2.0 * th
        return d00 * self.y0 + d10 * self.f0 + d01 * self.y1 + d11 * self.f1


@dataclass
class Trajectory:
    """Result of one integration: mesh, states and dense output.

    ``eval`` interpolates anywhere inside the covered interval; outside it
    raises.  ``events_hit`` lists (event_index, x) for every crossing seen,
    terminal or not.
    """

    xs: np.ndarray
    ys: np.ndarray
    termination: Termination
    interpolants: list = field(repr=False, default_factory=list)
    events_hit: list = field(default_factory=list)
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def x_end(self):
        return float(self.xs[-1])

    @property
    def y_end(self):
        return self.ys[-1]

    def eval(self, x):
        xs = self.xs
        if not (xs[0] <= x <= xs[-1]):
            raise ValueError(f"x={x} outside trajectory range [{xs[0]}, {xs[-1]}]")
        if x == xs[-1]:
            return self.ys[-1].copy()
        i = int(np.searchsorted(xs, x, side="right")) - 1
        i = min(max(i, 0), len(self.interpolants) - 1)
        return self.interpolants[i](x)

    def eval_many(self, xvals):
        return np.array([self.eval(x) for x in np.asarray(xvals, dtype=float)])

    def eval_deriv(self, x):
        xs = self.xs
        if not (xs[0] <= x <= xs[-1]):
            raise ValueError(f"x={x} outside trajectory range [{xs[0]}, {xs[-1]}]")
        i = int(np.searchsorted(xs, x, side="right")) - 1
        i = min(max(i, 0), len(self.interpolants) - 1)
        return self.interpolants[i].deriv(x)


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    # Floor keeps the step controller finite on exactly-resolved problems.
    return max(float(np.sqrt(np.mean((err / scale) ** 2))), 1e-12)


def _check_events(events, y0, y1):
    """Return [(event_index, g0, g1)] for events crossing in this step."""
    hits = []
    for j, ev in enumerate(events):
        g0 = y0[ev.index] - ev.offset
        g1 = y1[ev.index] - ev.offset
        if ev.direction <= 0 and g0 > 0.0 >= g1:
            hits.append((j, g0, g1))
        elif ev.direction >= 0 and g0 < 0.0 <= g1:
            hits.append((j, g0, g1))
    return hits


def _locate_event(interp, ev, x0, x1, span_tol):
    """Bisect the dense output for the crossing of state component ev.index."""
    lo, hi = x0, x1
    glo = interp(lo)[ev.index] - ev.offset
    while hi - lo > span_tol:
        mid = 0.5 * (lo + hi)
        gmid = interp(mid)[ev.index] - ev.offset
        if (glo > 0.0) == (gmid > 0.0):
            lo, glo = mid, gmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _finish(xs, ys, interps, events_hit, termination, n_steps, n_rejected):
    return Trajectory(
        xs=np.array(xs),
        ys=np.array(ys),
        termination=termination,
        interpolants=interps,
        events_hit=events_hit,
        n_steps=n_steps,
        n_rejected=n_rejected,
    )


def _handle_step_events(
    events, y_prev, y_new, interp, x_prev, x_new, span_tol, events_hit
):
    """Localize crossings in an accepted step.

    Returns (x_star, event_index) of the earliest terminal crossing, or
    None.  Non-terminal crossings are appended to events_hit.
    """
    hits = _check_events(events, y_prev, y_new)
    if not hits:
        return None
    located = []
    for j, _, _ in hits:
        xstar = _locate_event(interp, events[j], x_prev, x_new, span_tol)
        located.append((xstar, j))
    located.sort(key=lambda t: (t[0], t[1]))
    for xstar, j in located:
        if events[j].terminal:
            for xo, jo in located:
                if xo < xstar and not events[jo].terminal:
                    events_hit.append((jo, xo))
            return xstar, j
        events_hit.append((j, xstar))
    return None


def integrate_rk45(rhs, span, y0, cfg=None, events=()):
    """Integrate ``y' = rhs(x, y)`` over ``span`` with Dormand-Prince 5(4).

    Terminal events are localized by bisection on the dense output to a
    relative width of 1e-12 of the span.  Termination kinds: reached_end,
    event, blowup (state norm above ``cfg.blowup_threshold``), min_step.

    Raises NonFiniteRHS if the right-hand side is not finite at the
    initial point, IntegratorFailure if ``max_steps`` is exhausted.
    """
    cfg = cfg or IntegratorConfig()
    a, b = float(span[0]), float(span[1])
    if not a < b:
        raise ValueError("span must satisfy a < b")
    y = np.asarray(y0, dtype=float).copy()
    f = np.asarray(rhs(a, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteRHS(f"rhs not finite at x={a}")

    span_tol = _EVENT_LOCATE_REL * (b - a)
    xs, ys, interps = [a], [y.copy()], []
    events_hit = []
    x = a
    h = min(cfg.h_init, cfg.h_max, b - a)
    err_prev = 1.0
    n_steps = n_rejected = 0
    k = np.empty((7, y.size))

    while x < b:
        if n_steps + n_rejected >= cfg.max_steps:
            raise IntegratorFailure(f"max_steps={cfg.max_steps} exhausted at x={x}")
        h = min(h, b - x)
        k[0] = f
        bad = False
        for i in range(1, 7):
            yi = y + h * (_DP_A[i] @ k[:i])
            fi = rhs(x + _DP_C[i] * h, yi)
            if not np.all(np.isfinite(fi)):
                bad = True
                break
            k[i] = fi
        if not bad:
            y_new = y + h * (_DP_B5 @ k)  # == yi of the last stage (FSAL)
            err = h * (_DP_E @ k)
            if not np.all(np.isfinite(y_new)):
                bad = True
        if bad:
            n_rejected += 1
            h *= 0.5
            if h < cfg.h_min:
                term = Termination("min_step", x)
                return _finish(xs, ys, interps, events_hit, term, n_steps, n_rejected)
            continue

        err_norm = _error_norm(err, y, y_new, cfg.rtol, cfg.atol)
        if err_norm <= 1.0:
            interp = _DPInterpolant(x, h, y, y_new, k.copy())
            x_new = x + h
            hit = _handle_step_events(
                events, y, y_new, interp, x, x_new, span_tol, events_hit
            )
            if hit is not None:
                xstar, j = hit
                ystar = interp(xstar)
                xs.append(xstar)
                ys.append(ystar)
                interps.append(interp)
                events_hit.append((j, xstar))
                term = Termination("event", xstar, event_index=j)
                return _finish(xs, ys, interps, events_hit, term, n_steps + 1, n_rejected)

            xs.append(x_new)
            ys.append(y_new.copy())
            interps.append(interp)
            n_steps += 1
            if float(np.max(np.abs(y_new))) > cfg.blowup_threshold:
                term = Termination("blowup", x_new)
                return _finish(xs, ys, interps, events_hit, term, n_steps, n_rejected)
            x = x_new
            y = y_new
            f = k[6].copy()  # FSAL: stage 7 sits at (x+h, y_new)
            fac = _SAFETY * err_norm ** (-_PI_ALPHA_RK) * err_prev ** (_PI_BETA_RK)
            h *= min(_MAX_GROW, max(_MAX_SHRINK, fac))
            h = min(h, cfg.h_max)
            err_prev = max(err_norm, 1e-10)
        else:
            n_rejected += 1
            h *= min(1.0, max(_MAX_SHRINK, _SAFETY * err_norm ** (-_PI_ALPHA_RK)))
        if h < cfg.h_min:
            term = Termination("min_step", x)
            return _finish(xs, ys, interps, events_hit, term, n_steps, n_rejected)

    term = Termination("reached_end", b)
    return _finish(xs, ys, interps, events_hit, term, n_steps, n_rejected)


def _fd_jacobian(rhs, x, y, f):
    n = y.size
    J = np.empty((n, n))
    for i in range(n):
        h = 1e-8 * max(1.0, abs(y[i]))
        yp = y.copy()
        yp[i] += h
        J[:, i] = (np.asarray(rhs(x, yp)) - f) / h
    return J


def _newton_stage(rhs, x_stage, z0, const, d, h, M_lu, rtol, atol):
    """Solve z - d*h*f(x_stage, z) = const by simplified Newton.

    Returns (z, f(z), converged).
    """
    z = z0.copy()
    tol_fac = 0.05
    last = math.inf
    for _ in range(12):
        fz = np.asarray(rhs(x_stage, z), dtype=float)
        if not np.all(np.isfinite(fz)):
            return z, fz, False
        res = const + d * h * fz - z
        dz = np.linalg.solve(M_lu, res)
        z = z + dz
        nrm = float(np.max(np.abs(dz) / (atol + rtol * np.maximum(np.abs(z), 1.0))))
        if nrm <= tol_fac:
            fz = np.asarray(rhs(x_stage, z), dtype=float)
            return z, fz, np.all(np.isfinite(fz))
        if nrm > 2.0 * last and nrm > 1.0:
            return z, fz, False
        last = nrm
    return z, fz, nrm <= 1.0


def integrate_stiff(rhs, span, y0, cfg=None, events=(), jac=None):
    """Integrate with TR-BDF2 (A-stable, embedded 3rd-order error estimate).

    Same contracts as :func:`integrate_rk45`.  ``jac(x, y)`` may supply the
    Jacobian of the right-hand side; otherwise forward differences are
    used.  Raises NewtonDivergence when the implicit stages fail to
    converge even at the minimum step size.
    """
    cfg = cfg or IntegratorConfig()
    a, b = float(span[0]), float(span[1])
    if not a < b:
        raise ValueError("span must satisfy a < b")
    y = np.asarray(y0, dtype=float).copy()
    f = np.asarray(rhs(a, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteRHS(f"rhs not finite at x={a}")

    span_tol = _EVENT_LOCATE_REL * (b - a)
    xs, ys, interps = [a], [y.copy()], []
    events_hit = []
    x = a
    h = min(cfg.h_init, cfg.h_max, b - a)
    err_prev = 1.0
    n_steps = n_rejected = 0
    n = y.size
    eye = np.eye(n)
    g = _TB_GAMMA
    d = _TB_D

    while x < b:
        if n_steps + n_rejected >= cfg.max_steps:
            raise IntegratorFailure(f"max_steps={cfg.max_steps} exhausted at x={x}")
        h = min(h, b - x)

        J = jac(x, y) if jac is not None else _fd_jacobian(rhs, x, y, f)
        M = eye - d * h * np.asarray(J, dtype=float)

        # TR stage to x + gamma*h.
        const1 = y + d * h * f
        z1, f1, ok1 = _newton_stage(
            rhs, x + g * h, y + g * h * f, const1, d, h, M, cfg.rtol, cfg.atol
        )
        ok2 = False
        if ok1:
            # BDF2 stage to x + h.
            const2 = (z1 - ((1 - g) ** 2) * y) / (g * (2 - g))
            z2_pred = z1 + (1 - g) * (z1 - y) / g
            z2, f2, ok2 = _newton_stage(
                rhs, x + h, z2_pred, const2, d, h, M, cfg.rtol, cfg.atol
            )
        if not (ok1 and ok2):
            n_rejected += 1
            h *= 0.25
            if h < cfg.h_min:
                partial = _finish(
                    xs, ys, interps, events_hit, Termination("min_step", x),
                    n_steps, n_rejected,
                )
                raise NewtonDivergence(
                    f"implicit stage diverged at x={x} with h={h}", trajectory=partial
                )
            continue

        y_new = z2
        # Embedded error: difference to the 3rd-order companion, passed
        # through (I - d h J)^{-1} for stiff robustness.
        est = h * (
            (_TB_BHAT[0] - _TB_B[0]) * f
            + (_TB_BHAT[1] - _TB_B[1]) * f1
            + (_TB_BHAT[2] - _TB_B[2]) * f2
        )
        est = np.linalg.solve(M, est)
        if not np.all(np.isfinite(y_new)) or not np.all(np.isfinite(est)):
            n_rejected += 1
            h *= 0.5
            if h < cfg.h_min:
                term = Termination("min_step", x)
                return _finish(xs, ys, interps, events_hit, term, n_steps, n_rejected)
            continue

        err_norm = _error_norm(est, y, y_new, cfg.rtol, cfg.atol)
        if err_norm <= 1.0:
            interp = _HermiteInterpolant(x, h, y.copy(), y_new.copy(), f.copy(), f2.copy())
            x_new = x + h
            hit = _handle_step_events(
                events, y, y_new, interp, x, x_new, span_tol, events_hit
            )
            if hit is not None:
                xstar, j = hit
                ystar = interp(xstar)
                xs.append(xstar)
                ys.append(ystar)
                interps.append(interp)
                events_hit.append((j, xstar))
                term = Termination("event", xstar, event_index=j)
                return _finish(xs, ys, interps, events_hit, term, n_steps + 1, n_rejected)

            xs.append(x_new)
            ys.append(y_new.copy())
            interps.append(interp)
            n_steps += 1
            if float(np.max(np.abs(y_new))) > cfg.blowup_threshold:
                term = Termination("blowup", x_new)
                return _finish(xs, ys, interps, events_hit, term, n_steps, n_rejected)
            x = x_new
            y = y_new
            f = f2
            fac = _SAFETY * err_norm ** (-_PI_ALPHA_TB) * err_prev ** (_PI_BETA_TB)
            h *= min(_MAX_GROW, max(_MAX_SHRINK, fac))
            h = min(h, cfg.h_max)
            err_prev = max(err_norm, 1e-10)
        else:
            n_rejected += 1
            h *= min(1.0, max(_MAX_SHRINK, _SAFETY * err_norm ** (-_PI_ALPHA_TB)))
        if h < cfg.h_min:
            term = Termination("min_step", x)
            return _finish(xs, ys, interps, events_hit, term, n_steps, n_rejected)

    term = Termination("reached_end", b)
    return _finish(xs, ys, interps, events_hit, term, n_steps, n_rejected)
