"""Adaptive sampling of the Evans function along closed contours and
winding numbers by the argument principle.

The evaluator contract: ``evaluator(lam) -> EvansValue`` (anything with
``mantissa`` and ``log_scale`` attributes works).  Adaptive refinement
bisects the contour parameter until consecutive image points differ by at
most the relative-change bound 0.2, which caps the per-step argument change
at arcsin(0.2) and makes phase unwrapping unambiguous.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousUnwrap,
    OnContourZero,
    RefinementBudgetExceeded,
)

__all__ = [
    "ContourSpec",
    "ContourTrace",
    "WindingReport",
    "semicircle_with_diameter",
    "circle",
    "adaptive_trace",
    "winding_number",
]

REL_CHANGE_BOUND = 0.2
DEFAULT_BUDGET = 20_000
ARC_INIT = 64
DIAMETER_INIT = 33
ZERO_FLOOR_FACTOR = 1e-14


@dataclass(frozen=True)
class ContourSpec:
    """Closed positively oriented contour.

    ``kind`` is "semicircle_with_diameter" (boundary of the right
    half-disk B(0, R) ∩ {Re >= 0}, diameter on the imaginary axis) or
    "circle" (full circle of radius R about ``center``).  With
    ``conjugate_symmetry`` the evaluator is only called on the closed upper
    half of the parameter range and the lower half is mirrored, which is
    valid for real-coefficient problems.
    """

    kind: str
    radius: float
    center: complex = 0.0 + 0.0j
    conjugate_symmetry: bool = False

    def __post_init__(self):
        if self.kind not in ("semicircle_with_diameter", "circle"):
            raise ValueError(f"unknown contour kind {self.kind}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.kind == "semicircle_with_diameter" and abs(self.center) != 0.0:
            raise ValueError("the half-disk contour is centered at the origin")

    def point(self, s):
        """Map parameter s in [0, 1] to the contour, positively oriented."""
        if self.kind == "circle":
            return self.center + self.radius * cmath.exp(2j * math.pi * s)
        # Arc from -iR through +R to +iR on s in [0, 1/2]; diameter from
        # +iR back down to -iR on s in [1/2, 1].
        if s <= 0.5:
            theta = -0.5 * math.pi + 2.0 * math.pi * s
            return self.radius * cmath.exp(1j * theta)
        t = (s - 0.5) * 2.0
        return 1j * self.radius * (1.0 - 2.0 * t)

    def initial_params(self):
        if self.kind == "circle":
            return list(np.linspace(0.0, 1.0, ARC_INIT + 1))
        arc = np.linspace(0.0, 0.5, ARC_INIT + 1)
        diam = np.linspace(0.5, 1.0, DIAMETER_INIT + 1)
        return list(np.concatenate([arc, diam[1:]]))

    def conjugate_param(self, s):
        """Parameter of the complex-conjugate point."""
        if self.kind == "circle":
            return 1.0 - s
        if s <= 0.5:
            return 0.5 - s
        return 1.5 - s


def semicircle_with_diameter(radius, conjugate_symmetry=True):
    return ContourSpec(
        kind="semicircle_with_diameter",
        radius=radius,
        conjugate_symmetry=conjugate_symmetry,
    )


def circle(radius, center=0.0 + 0.0j, conjugate_symmetry=False):
    return ContourSpec(
        kind="circle", radius=radius, center=center,
        conjugate_symmetry=conjugate_symmetry,
    )


@dataclass
class ContourTrace:
    """Ordered samples of the Evans function along a closed contour.

    ``values`` are complex mantissas and ``log_scales`` their real log
    factors; the represented value at sample i is
    values[i] * exp(log_scales[i]).  The first and last samples coincide.
    """

    params: np.ndarray
    lambdas: np.ndarray
    values: np.ndarray
    log_scales: np.ndarray
    n_evaluations: int
    max_rel_change: float

    def rel_change(self, i):
        return _rel_change(
            self.values[i], self.log_scales[i], self.values[i + 1], self.log_scales[i + 1]
        )

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "re_lambda", "im_lambda", "re_D", "im_D"])
        for s, lam, v, ls in zip(
            self.params, self.lambdas, self.values, self.log_scales
        ):
            scale = math.exp(min(ls, 700.0))
            w.writerow(
                [
                    format(s, ".17e"),
                    format(lam.real, ".17e"),
                    format(lam.imag, ".17e"),
                    format(v.real * scale, ".17e"),
                    format(v.imag * scale, ".17e"),
                ]
            )
        return buf.getvalue()


@dataclass
class WindingReport:
    """Argument-principle count along a closed trace."""

    winding: int
    total_argument_change: float
    closure_defect: float

    def to_json(self):
        return json.dumps(
            {
                "winding": self.winding,
                "total_argument_change": self.total_argument_change,
                "closure_defect": self.closure_defect,
            },
            indent=2,
        )


def _rel_change(v1, s1, v2, s2):
    """|D2 - D1| / max(|D1|, |D2|) computed in mantissa/log form."""
    if v1 == 0 or v2 == 0:
        return math.inf
    # Rescale both to the larger log factor.
    if s1 >= s2:
        a, b = v1, v2 * math.exp(max(s2 - s1, -745.0))
    else:
        a, b = v1 * math.exp(max(s1 - s2, -745.0)), v2
    denom = max(abs(a), abs(b))
    return abs(a - b) / denom if denom > 0 else math.inf


def adaptive_trace(evaluator, spec, budget=DEFAULT_BUDGET):
    """Sample the Evans function along ``spec`` until every consecutive
    pair of image points satisfies the 0.2 relative-change rule.

    Refinement bisects the contour parameter.  Raises OnContourZero when
    the sampled modulus falls under ZERO_FLOOR_FACTOR times the trace
    maximum and refinement no longer helps, and
    RefinementBudgetExceeded past ``budget`` evaluations.
    """
    cache = {}
    n_evals = 0

    def eval_at(s):
        nonlocal n_evals
        key = round(s, 15)
        if key in cache:
            return cache[key]
        if spec.conjugate_symmetry:
            sc = round(spec.conjugate_param(s), 15)
            if sc in cache:
                v = cache[sc]
                out = (np.conj(v[0]), v[1])
                cache[key] = out
                return out
        if n_evals >= budget:
            raise RefinementBudgetExceeded(f"budget of {budget} evaluations exhausted")
        n_evals += 1
        val = evaluator(spec.point(s))
        out = (complex(val.mantissa), float(val.log_scale))
        cache[key] = out
        return out

    params = spec.initial_params()
    samples = [eval_at(s) for s in params]

    # Refine until the relative-change rule holds everywhere.
    while True:
        worst = 0.0
        inserts = []
        for i in range(len(params) - 1):
            rc = _rel_change(*samples[i], *samples[i + 1])
            worst = max(worst, rc)
            if rc > REL_CHANGE_BOUND:
                inserts.append(i)
        if not inserts:
            break
        for offset, i in enumerate(inserts):
            s_mid = 0.5 * (params[i + offset] + params[i + 1 + offset])
            if params[i + 1 + offset] - params[i + offset] < 1e-13:
                raise OnContourZero(
                    "refinement cannot separate consecutive image points; "
                    "an Evans zero appears to lie on the contour "
                    "(perturb the radius by ~1%)"
                )
            params.insert(i + 1 + offset, s_mid)
            samples.insert(i + 1 + offset, eval_at(s_mid))

    # Zero-on-contour guard on the final trace.
    mags = np.array([abs(v) * math.exp(min(ls, 700.0)) for v, ls in samples])
    scale_ref = float(np.max(mags))
    if scale_ref > 0 and float(np.min(mags)) < ZERO_FLOOR_FACTOR * scale_ref:
        raise OnContourZero(
            "Evans modulus collapsed below the zero floor on the contour "
            "(perturb the radius by ~1%)"
        )

    max_rc = max(
        _rel_change(*samples[i], *samples[i + 1]) for i in range(len(params) - 1)
    )
    return ContourTrace(
        params=np.array(params),
        lambdas=np.array([spec.point(s) for s in params]),
        values=np.array([v for v, _ in samples]),
        log_scales=np.array([ls for _, ls in samples]),
        n_evaluations=n_evals,
        max_rel_change=max_rc,
    )


def winding_number(trace):
    """Winding number of the image curve about the origin by running phase
    accumulation.

    Requires the trace to satisfy the relative-change rule (so each
    argument increment is below arcsin(0.2) < pi/2).  Raises
    AmbiguousUnwrap if any increment exceeds pi/2.
    """
    vals = trace.values
    total = 0.0
    for i in range(len(vals) - 1):
        if vals[i] == 0 or vals[i + 1] == 0:
            raise AmbiguousUnwrap("zero sample on the trace")
        dphi = cmath.phase(vals[i + 1] / vals[i])
        if abs(dphi) > 0.5 * math.pi:
            raise AmbiguousUnwrap(
                f"argument jump {dphi:.3f} at segment {i} exceeds pi/2"
            )
        total += dphi
    winding = int(round(total / (2.0 * math.pi)))
    return WindingReport(
        winding=winding,
        total_argument_change=total,
        closure_defect=abs(total - 2.0 * math.pi * winding),
    )
