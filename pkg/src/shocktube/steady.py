"""The shooting map for steady profiles: endpoint evaluation, its Jacobian
via the variational equations, Newton solving for prescribed outflow data,
and uniqueness diagnostics based on the sign of det d(Psi).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleConstant, NonPositiveInput, NotFound
from .feasibility import ScanGrid, classify, scan
from .odecore import IntegratorConfig
from .polytropic import IntegrationConstants, constant_constants

__all__ = [
    "DataTarget",
    "SolveReport",
    "DetScanResult",
    "psi",
    "dpsi",
    "solve_for_data",
    "find_all_roots",
    "det_dpsi_scan",
]

RESIDUAL_TOL = 1e-8
FD_STEP_FACTOR = 1e-6
ARMIJO_FACTOR = 0.5
ARMIJO_MAX_HALVINGS = 30
BOUNDARY_X_TOL = 1e-6


@dataclass(frozen=True)
class DataTarget:
    """Prescribed outflow values (u, e)(1)."""

    u1: float
    e1: float

    def __post_init__(self):
        if not (self.u1 > 0 and self.e1 > 0):
            raise NonPositiveInput("outflow data must be positive")

    def as_array(self):
        return np.array([self.u1, self.e1])


@dataclass(frozen=True)
class SolveReport:
    """Root of the shooting problem with its certificates."""

    c: IntegrationConstants
    residual: float
    det_dpsi: float
    newton_iterations: int
    seeds_tried: int


def _default_cfg():
    return IntegratorConfig()


def _psi_and_jac(c, params, cfg, method="rk45"):
    """Endpoint and variational Jacobian in one co-integration.

    Returns (ok, endpoint, dpsi_matrix).
    """
    from .kernels import get_backend

    status, x_end, u_end, e_end, J = get_backend().poly_variational(
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
    )
    return status == 0, np.array([u_end, e_end]), J


def psi(c, params, cfg=None, boundary=False):
    """The shooting map: (c1, c2) -> (u, e)(1).

    With ``boundary=True`` the continuous extension to the feasible-set
    boundary applies: a profile whose energy vanishes within BOUNDARY_X_TOL
    of x = 1 (and is positive before) maps to (u(1), 0).  Strictly
    infeasible constants raise InfeasibleConstant.

    Evaluation uses the embedded 5(4) pair: endpoint values feed Newton
    residuals at the 1e-8 scale, which the second-order stiff scheme does
    not reach at the default tolerances.
    """
    cfg = cfg or _default_cfg()
    fc, (xs, us, es) = classify(c, params, cfg, method="rk45", with_trajectory=True)
    if fc.is_feasible:
        return np.array([float(us[-1]), float(es[-1])])
    if (
        boundary
        and fc.tag == "e_negative"
        and fc.x_star is not None
        and fc.x_star >= 1.0 - BOUNDARY_X_TOL
    ):
        iend = int(np.searchsorted(xs, fc.x_star)) if xs[-1] > fc.x_star else len(xs) - 1
        return np.array([float(us[min(iend, len(us) - 1)]), 0.0])
    raise InfeasibleConstant(f"c={c} classifies {fc.tag}")


def dpsi(c, params, cfg=None):
    """Jacobian of the shooting map by the variational equations.

    Columns are the endpoint variations for unit perturbations of c1 and
    c2.  Agrees with central finite differences of psi to relative 1e-5 on
    feasible constants.
    """
    cfg = cfg or _default_cfg()
    ok, _, J = _psi_and_jac(c, params, cfg)
    if not ok:
        raise InfeasibleConstant(f"c={c} is not feasible")
    return J


def dpsi_fd(c, params, cfg=None):
    """Central finite-difference Jacobian of psi (the cross-check oracle)."""
    cfg = cfg or _default_cfg()
    J = np.empty((2, 2))
    for j, cj in enumerate((c.c1, c.c2)):
        h = FD_STEP_FACTOR * max(1.0, abs(cj))
        cp = IntegrationConstants(c.c1 + (h if j == 0 else 0.0), c.c2 + (h if j == 1 else 0.0))
        cm = IntegrationConstants(c.c1 - (h if j == 0 else 0.0), c.c2 - (h if j == 1 else 0.0))
        J[:, j] = (psi(cp, params, cfg) - psi(cm, params, cfg)) / (2.0 * h)
    return J


def _coarse_seeds(target, params, cfg, n=9, half_width=50.0):
    """Feasible cells of a coarse scan, ranked by endpoint mismatch."""
    grid = ScanGrid.centered(half_width=half_width, n=n)
    res = scan(grid, params, cfg, method="rk45")
    seeds = []
    for i, c1 in enumerate(res.c1_values):
        for j, c2 in enumerate(res.c2_values):
            if res.classes[i, j] == 0:
                c = IntegrationConstants(float(c1), float(c2))
                ok, end, _ = _psi_and_jac(c, params, cfg)
                if ok:
                    seeds.append((float(np.linalg.norm(end - target.as_array())), c))
    seeds.sort(key=lambda t: t[0])
    return [c for _, c in seeds]


def _newton_from(seed, target, params, cfg, max_iter=50):
    """Damped Newton on Psi(c) - target.

    Steps whose trial point leaves the feasible set are halved (Armijo
    backtracking, factor 0.5, at most ARMIJO_MAX_HALVINGS halvings).
    Returns (c, residual, det_dpsi, iterations) or None.
    """
    c = np.array([seed.c1, seed.c2])
    ok, end, J = _psi_and_jac(IntegrationConstants(*c), params, cfg)
    if not ok:
        return None
    F = end - target.as_array()
    for it in range(1, max_iter + 1):
        res = float(np.linalg.norm(F))
        if res <= RESIDUAL_TOL * 1e-2 or (res <= RESIDUAL_TOL and it > 1):
            return IntegrationConstants(*c), res, float(np.linalg.det(J)), it - 1
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        accepted = False
        for _ in range(ARMIJO_MAX_HALVINGS):
            trial = c + t * step
            ok, end_t, J_t = _psi_and_jac(IntegrationConstants(*trial), params, cfg)
            if ok:
                F_t = end_t - target.as_array()
                if np.linalg.norm(F_t) <= (1.0 - 1e-4 * t) * np.linalg.norm(F):
                    c, F, J = trial, F_t, J_t
                    accepted = True
                    break
            t *= ARMIJO_FACTOR
        if not accepted:
            return None
    res = float(np.linalg.norm(F))
    if res <= RESIDUAL_TOL:
        return IntegrationConstants(*c), res, float(np.linalg.det(J)), max_iter
    return None


def solve_for_data(target, params, cfg=None, seeds=None, seed_grid_n=9, max_seeds=20):
    """Find integration constants whose profile hits the outflow target.

    Multistart damped Newton: seeds come from a coarse feasibility scan
    ranked by endpoint mismatch (the constant-solution constants are always
    tried first).  Returns the first converged root as a SolveReport;
    raises NotFound when the seed budget is exhausted (a numerics failure:
    existence is guaranteed, so this never asserts nonexistence).
    """
    cfg = cfg or _default_cfg()
    if seeds is None:
        seeds = [constant_constants(params)]
        seeds += _coarse_seeds(target, params, cfg, n=seed_grid_n)
    tried = 0
    for seed in seeds[:max_seeds]:
        tried += 1
        got = _newton_from(seed, target, params, cfg)
        if got is not None:
            c, res, det, iters = got
            return SolveReport(
                c=c,
                residual=res,
                det_dpsi=det,
                newton_iterations=iters,
                seeds_tried=tried,
            )
    raise NotFound(
        f"no root found for target {target} within {tried} seeds "
        "(budget failure, not a nonexistence statement)"
    )


def find_all_roots(target, params, cfg=None, seed_grid_n=9, cluster_tol=1e-6):
    """Newton from every feasible coarse-scan seed; cluster the roots.

    Returns the distinct roots (as SolveReports) sorted by c1.  Used by the
    uniqueness diagnostics: global uniqueness predicts exactly one cluster.
    """
    cfg = cfg or _default_cfg()
    seeds = [constant_constants(params)] + _coarse_seeds(
        target, params, cfg, n=seed_grid_n
    )
    roots = []
    for k, seed in enumerate(seeds):
        got = _newton_from(seed, target, params, cfg)
        if got is None:
            continue
        c, res, det, iters = got
        new = True
        for r in roots:
            scale = max(1.0, abs(r.c.c1), abs(r.c.c2))
            if (
                abs(r.c.c1 - c.c1) <= cluster_tol * scale
                and abs(r.c.c2 - c.c2) <= cluster_tol * scale
            ):
                new = False
                break
        if new:
            roots.append(
                SolveReport(
                    c=c,
                    residual=res,
                    det_dpsi=det,
                    newton_iterations=iters,
                    seeds_tried=k + 1,
                )
            )
    return sorted(roots, key=lambda r: r.c.c1)


@dataclass
class DetScanResult:
    """det d(Psi) over the feasible cells of a grid, with the zero-frequency
    cross-check.

    ``det[i, j]`` is NaN on infeasible cells.  ``d0`` carries the directly
    integrated zero-frequency Evans value (alpha*nu/u0^2 times det dpsi, by
    the exchange-of-stability identity); ``max_rel_mismatch`` measures the
    worst per-cell disagreement of the two routes.
    """

    c1_values: np.ndarray
    c2_values: np.ndarray
    det: np.ndarray
    d0: np.ndarray
    params: object

    @property
    def feasible_mask(self):
        return ~np.isnan(self.det)

    @property
    def min_abs_det(self):
        vals = self.det[self.feasible_mask]
        return float(np.min(np.abs(vals))) if vals.size else math.nan

    @property
    def min_d0(self):
        vals = self.d0[self.feasible_mask]
        return float(np.min(vals)) if vals.size else math.nan

    @property
    def sign_constant(self):
        vals = self.det[self.feasible_mask]
        return bool(vals.size and (np.all(vals > 0) or np.all(vals < 0)))

    @property
    def max_rel_mismatch(self):
        p = self.params
        factor = p.alpha * p.nu / p.u0**2
        det = self.det[self.feasible_mask]
        d0 = self.d0[self.feasible_mask]
        if not det.size:
            return math.nan
        return float(np.max(np.abs(factor * det - d0) / np.abs(d0)))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["c1", "c2", "det", "sign"])
        for i, c1 in enumerate(self.c1_values):
            for j, c2 in enumerate(self.c2_values):
                d = self.det[i, j]
                if np.isnan(d):
                    continue
                w.writerow(
                    [
                        format(c1, ".17e"),
                        format(c2, ".17e"),
                        format(d, ".17e"),
                        int(np.sign(d)),
                    ]
                )
        return buf.getvalue()

    def summary_json(self):
        return json.dumps(
            {
                "min_abs_det": self.min_abs_det,
                "min_d0": self.min_d0,
                "sign_constant": self.sign_constant,
                "max_rel_mismatch": self.max_rel_mismatch,
                "n_feasible": int(np.sum(self.feasible_mask)),
            },
            indent=2,
        )


def det_dpsi_scan(grid, params, cfg=None, with_d0=True):
    """Evaluate det d(Psi) (and optionally the direct zero-frequency value)
    on every feasible cell of the grid."""
    from .kernels import get_backend

    cfg = cfg or _default_cfg()
    backend = get_backend()
    c1v, c2v = grid.axes_for(params)
    n1, n2 = len(c1v), len(c2v)
    det = np.full((n1, n2), np.nan)
    d0 = np.full((n1, n2), np.nan)
    for i in range(n1):
        for j in range(n2):
            c = IntegrationConstants(float(c1v[i]), float(c2v[j]))
            ok, _, J = _psi_and_jac(c, params, cfg)
            if not ok:
                continue
            det[i, j] = float(np.linalg.det(J))
            if with_d0:
                status, val, _ = backend.poly_d0(
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
                )
                if status == 0:
                    d0[i, j] = val
    return DetScanResult(
        c1_values=np.asarray(c1v),
        c2_values=np.asarray(c2v),
        det=det,
        d0=d0,
        params=params,
    )
