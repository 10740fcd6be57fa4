"""Classification of integration constants into the feasible set and its
complement's strata, grid scans, and tracing of the boundary where the
internal energy vanishes at the outflow end.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegratorFailure, NoSignChange
from .odecore import IntegratorConfig
from .polytropic import IntegrationConstants, constant_constants

__all__ = [
    "FeasibilityClass",
    "ScanGrid",
    "ScanResult",
    "BoundaryPoint",
    "classify",
    "scan",
    "trace_boundary",
    "barrier_holds",
    "vanishing_shadow_holds",
]

FEASIBLE = "feasible"
E_NEGATIVE = "e_negative"
U_NEGATIVE = "u_negative"
BLOWUP = "blowup"
ERROR = "error"

# Integer codes used in scan matrices and CSV output.
CODES = {FEASIBLE: 0, E_NEGATIVE: 1, U_NEGATIVE: 2, BLOWUP: 3, ERROR: -1}
TAGS = {v: k for k, v in CODES.items()}


@dataclass(frozen=True)
class FeasibilityClass:
    """Outcome of one classification; x_star locates the first terminal
    event for the non-feasible tags."""

    tag: str
    x_star: float | None = None

    def __post_init__(self):
        if self.tag not in (FEASIBLE, E_NEGATIVE, U_NEGATIVE, BLOWUP):
            raise ValueError(f"unknown tag {self.tag}")
        if self.tag != FEASIBLE and self.x_star is None:
            raise ValueError("non-feasible classification needs x_star")

    @property
    def is_feasible(self):
        return self.tag == FEASIBLE


def _default_cfg():
    return IntegratorConfig()


def _classify_raw(c, params, cfg, method, capture):
    """Run the profile IVP; returns (status, x_end, x_e, xs, us, es)."""
    from .kernels import get_backend

    backend = get_backend()
    hmax = min(cfg.h_max, 1.0 / 256.0) if capture else cfg.h_max
    return backend.poly_profile(
        params.u0,
        params.e0,
        params.Gamma,
        params.alpha,
        params.nu,
        c.c1,
        c.c2,
        cfg.rtol,
        cfg.atol,
        hmax,
        cfg.blowup_threshold,
        1 if method == "stiff" else 0,
        0,
    )[:6]


# Scale below which a stalled state counts as having reached zero.
COLLAPSE_DELTA = 1e-3


def classify(c, params, cfg=None, method="stiff", with_trajectory=False):
    """Classify integration constants by the observable failure mode of the
    profile trajectory.

    While e > 0 the energy term acts as a barrier, so e always reaches
    zero first; the crossing is regular for the ODE, and classification
    follows the trajectory through it:

    - feasible:   reaches x = 1 with u, e positive throughout;
    - e_negative: e crosses zero (located at x*) and the trajectory still
      exists up to x = 1 with u > 0;
    - u_negative: u and e collapse to zero together and integration stalls
      with both below COLLAPSE_DELTA while e > 0 -- the velocity is the
      component observed at zero scale (a resolved u-crossing, possible
      only after an e-crossing in the same step, also lands here);
    - blowup:     the state norm exceeds cfg.blowup_threshold, or the
      trajectory breaks down at finite x after the e-crossing (u' -> -inf
      as u -> 0, the derivative blowup a non-event-aware solver reports as
      a warning).

    Ties between an e- and u-crossing localized in the same step resolve
    e-before-u.  Stalls matching none of the above raise IntegratorFailure
    rather than being silently classified.
    """
    cfg = cfg or _default_cfg()
    status, x_end, x_e, xs, us, es = _classify_raw(
        c, params, cfg, method, with_trajectory
    )
    e_crossed = not math.isnan(x_e)
    fc = None
    if status == 0:
        fc = (
            FeasibilityClass(E_NEGATIVE, x_star=x_e)
            if e_crossed
            else FeasibilityClass(FEASIBLE)
        )
    elif status == 2:
        fc = FeasibilityClass(U_NEGATIVE, x_star=x_end)
    elif status == 3:
        fc = FeasibilityClass(BLOWUP, x_star=x_end)
    elif status == 4:
        u_stall, e_stall = float(us[-1]), float(es[-1])
        if e_crossed and abs(u_stall) <= COLLAPSE_DELTA:
            # Finite-x breakdown of the continued trajectory: u' -> -inf.
            fc = FeasibilityClass(BLOWUP, x_star=x_end)
        elif (
            not e_crossed
            and c.c1 < 0
            and c.c2 < 0
            and 0.0 < u_stall <= COLLAPSE_DELTA
            and 0.0 < e_stall <= COLLAPSE_DELTA
        ):
            # Simultaneous collapse of (u, e) to zero.
            fc = FeasibilityClass(U_NEGATIVE, x_star=x_end)
    if fc is None:
        raise IntegratorFailure(
            f"profile integration stalled at x={x_end} for c={c} "
            f"with state ({us[-1]:.3e}, {es[-1]:.3e})"
        )
    if with_trajectory:
        return fc, (xs, us, es)
    return fc


@dataclass(frozen=True)
class ScanGrid:
    """Grid of integration constants, stored as offsets from a center
    (default: the constants of the constant solution)."""

    dc1: np.ndarray
    dc2: np.ndarray
    center: IntegrationConstants | None = None

    @classmethod
    def centered(cls, half_width=50.0, n=50, center=None):
        ax = np.linspace(-half_width, half_width, n)
        return cls(dc1=ax, dc2=ax.copy(), center=center)

    def axes_for(self, params):
        c0 = self.center or constant_constants(params)
        return c0.c1 + np.asarray(self.dc1), c0.c2 + np.asarray(self.dc2)


@dataclass
class ScanResult:
    """Classification matrix over a grid.

    ``classes[i, j]`` is the integer code for (c1_values[i], c2_values[j]);
    ``x_star`` carries the first-event location (NaN where not
    applicable).  Cells whose integration failed carry the code -1 and an
    entry in ``errors``; the scan itself never aborts.
    """

    c1_values: np.ndarray
    c2_values: np.ndarray
    classes: np.ndarray
    x_star: np.ndarray
    params: object
    elapsed_seconds: float
    errors: list = field(default_factory=list)

    def counts(self):
        out = {}
        for tag, code in CODES.items():
            n = int(np.sum(self.classes == code))
            if n or tag != ERROR:
                out[tag] = n
        return out

    def class_at(self, i, j):
        code = int(self.classes[i, j])
        if code == CODES[ERROR]:
            raise IntegratorFailure(f"cell ({i}, {j}) failed: {dict(self.errors)[(i, j)]}")
        tag = TAGS[code]
        xs = None if tag == FEASIBLE else float(self.x_star[i, j])
        return FeasibilityClass(tag, xs)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["c1", "c2", "class", "x_star"])
        for i, c1 in enumerate(self.c1_values):
            for j, c2 in enumerate(self.c2_values):
                code = int(self.classes[i, j])
                xs = self.x_star[i, j]
                w.writerow(
                    [
                        format(c1, ".17e"),
                        format(c2, ".17e"),
                        TAGS[code],
                        "" if np.isnan(xs) else format(xs, ".17e"),
                    ]
                )
        return buf.getvalue()

    def summary_json(self):
        p = self.params
        return json.dumps(
            {
                "params": {
                    "Gamma": p.Gamma,
                    "alpha": p.alpha,
                    "nu": p.nu,
                    "u0": p.u0,
                    "e0": p.e0,
                },
                "grid": [len(self.c1_values), len(self.c2_values)],
                "counts": self.counts(),
                "elapsed_seconds": self.elapsed_seconds,
                "n_errors": len(self.errors),
            },
            indent=2,
        )


def scan(grid, params, cfg=None, method="stiff", workers=1):
    """Classify every grid cell; deterministic for a given cfg.

    Cells are independent; ``workers`` > 1 distributes them over a thread
    pool (the compiled kernel releases the GIL).  Assembly is by cell
    index, so the result does not depend on completion order.
    """
    cfg = cfg or _default_cfg()
    c1v, c2v = grid.axes_for(params)
    n1, n2 = len(c1v), len(c2v)
    classes = np.full((n1, n2), CODES[ERROR], dtype=int)
    xstar = np.full((n1, n2), np.nan)
    errors = []
    t0 = time.perf_counter()

    def run_cell(ij):
        i, j = ij
        c = IntegrationConstants(float(c1v[i]), float(c2v[j]))
        try:
            fc = classify(c, params, cfg, method)
            return i, j, CODES[fc.tag], fc.x_star if fc.x_star is not None else np.nan, None
        except IntegratorFailure as exc:  # recorded in-cell, scan continues
            return i, j, CODES[ERROR], np.nan, str(exc)

    cells = [(i, j) for i in range(n1) for j in range(n2)]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(ij) for ij in cells]
    for i, j, code, xs, err in results:
        classes[i, j] = code
        xstar[i, j] = xs
        if err is not None:
            errors.append(((i, j), err))
    return ScanResult(
        c1_values=np.asarray(c1v),
        c2_values=np.asarray(c2v),
        classes=classes,
        x_star=xstar,
        params=params,
        elapsed_seconds=time.perf_counter() - t0,
        errors=errors,
    )


@dataclass(frozen=True)
class BoundaryPoint:
    """Feasible-side boundary approximation with its certificate values."""

    c: IntegrationConstants
    e_end: float
    u_end: float
    interval_width: float
    direction: np.ndarray

    def certificate_ok(self, e1_tol=1e-4):
        return abs(self.e_end) <= e1_tol


def _endpoint_of(c, params, cfg, method):
    from .kernels import get_backend

    status, x_end, x_e, xs, us, es, _ = get_backend().poly_profile(
        params.u0,
        params.e0,
        params.Gamma,
        params.alpha,
        params.nu,
        c.c1,
        c.c2,
        cfg.rtol,
        cfg.atol,
        cfg.h_max,
        cfg.blowup_threshold,
        1 if method == "stiff" else 0,
        0,
    )
    ok = status == 0 and math.isnan(x_e)
    return (0 if ok else 1), float(us[-1]), float(es[-1])


def trace_boundary(c_inside, c_outside, params, cfg=None, tol=1e-10, e1_tol=1e-4,
                   method="stiff", max_iter=200):
    """Bisect along the segment from a feasible to an infeasible point for
    the boundary of the feasible set.

    Returns the feasible-side endpoint once the bracketing interval is
    below ``tol`` (in c-space) and the profile's outflow energy satisfies
    |e(1)| <= e1_tol.  Raises NoSignChange when both endpoints classify the
    same way.
    """
    cfg = cfg or _default_cfg()
    a = np.array([c_inside.c1, c_inside.c2])
    b = np.array([c_outside.c1, c_outside.c2])
    fa = classify(c_inside, params, cfg, method).is_feasible
    fb = classify(c_outside, params, cfg, method).is_feasible
    if fa == fb:
        raise NoSignChange(
            f"both endpoints classify as {'feasible' if fa else 'infeasible'}"
        )
    if not fa:
        a, b = b, a
    for _ in range(max_iter):
        width = float(np.linalg.norm(b - a))
        if width <= tol:
            status, u_end, e_end = _endpoint_of(
                IntegrationConstants(*a), params, cfg, method
            )
            if status == 0 and abs(e_end) <= e1_tol:
                return BoundaryPoint(
                    c=IntegrationConstants(*a),
                    e_end=e_end,
                    u_end=u_end,
                    interval_width=width,
                    direction=(b - a) / max(width, 1e-300),
                )
            # keep halving against the certificate even once below tol
        mid = 0.5 * (a + b)
        if classify(IntegrationConstants(*mid), params, cfg, method).is_feasible:
            a = mid
        else:
            b = mid
    status, u_end, e_end = _endpoint_of(IntegrationConstants(*a), params, cfg, method)
    bp = BoundaryPoint(
        c=IntegrationConstants(*a),
        e_end=e_end,
        u_end=u_end,
        interval_width=float(np.linalg.norm(b - a)),
        direction=(b - a) / max(float(np.linalg.norm(b - a)), 1e-300),
    )
    if not bp.certificate_ok(e1_tol):
        raise IntegratorFailure(
            f"boundary trace stalled: |e(1)|={abs(e_end):.3e} > {e1_tol}"
        )
    return bp


def barrier_holds(xs, us, es, c, params, slack=1e-9):
    """Energy-barrier shadow: wherever the running minimum of e on [0, x]
    exceeds c1^2/(4 Gamma), the velocity satisfies u(x) >= u0."""
    thresh = c.c1 * c.c1 / (4.0 * params.Gamma)
    emin = np.minimum.accumulate(es)
    mask = emin > thresh
    return bool(np.all(us[mask] >= params.u0 - slack))


def vanishing_shadow_holds(xs, us, es, c, params, delta=1e-3):
    """Simultaneous-vanishing shadow: for c1, c2 < 0, once (u, e) both drop
    below delta, e stays below delta and u below M*delta up to the end of
    the trajectory, with M = 2 * max(1, 2 Gamma / |c1|).

    Vacuously true when the hypothesis is not met.
    """
    if not (c.c1 < 0 and c.c2 < 0):
        return True
    below = (us <= delta) & (es <= delta) & (us > 0.0) & (es > 0.0)
    if not np.any(below):
        return True
    i0 = int(np.argmax(below))
    M = 2.0 * max(1.0, 2.0 * params.Gamma / abs(c.c1))
    return bool(np.all(es[i0:] <= delta * (1 + 1e-9))) and bool(
        np.all(us[i0:] <= M * delta * (1 + 1e-9))
    )
