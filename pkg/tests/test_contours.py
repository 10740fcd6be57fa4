import cmath
import math

import numpy as np
import pytest

from shocktube.contours import (
    ContourSpec,
    adaptive_trace,
    circle,
    semicircle_with_diameter,
    winding_number,
)
from shocktube.errors import AmbiguousUnwrap, OnContourZero


class Analytic:
    """Wrap a plain complex function as an Evans-style evaluator."""

    def __init__(self, f):
        self.f = f

    def __call__(self, lam):
        v = self.f(lam)

        class _V:
            pass

        out = _V()
        out.mantissa = v
        out.log_scale = 0.0
        return out


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ContourSpec(kind="square", radius=1.0)
        with pytest.raises(ValueError):
            ContourSpec(kind="circle", radius=-1.0)
        with pytest.raises(ValueError):
            ContourSpec(kind="semicircle_with_diameter", radius=1.0, center=1.0)

    def test_half_disk_geometry(self):
        spec = semicircle_with_diameter(2.0)
        pts = [spec.point(s) for s in np.linspace(0, 1, 400)]
        assert all(p.real >= -1e-12 for p in pts)
        assert abs(spec.point(0.0) - (-2j)) < 1e-12
        assert abs(spec.point(0.25) - 2.0) < 1e-12
        assert abs(spec.point(0.5) - 2j) < 1e-12
        assert abs(spec.point(1.0) - (-2j)) < 1e-12

    def test_closure(self):
        for spec in (circle(1.5, 0.3 + 0.1j), semicircle_with_diameter(3.0)):
            assert abs(spec.point(0.0) - spec.point(1.0)) < 1e-12

    def test_conjugate_param(self):
        spec = semicircle_with_diameter(1.0)
        for s in (0.1, 0.3, 0.6, 0.9):
            assert abs(
                spec.point(spec.conjugate_param(s)) - np.conj(spec.point(s))
            ) < 1e-12


class TestTraceAndWinding:
    def test_no_enclosed_zero(self):
        tr = adaptive_trace(Analytic(lambda z: z - 5.0), circle(1.0))
        rep = winding_number(tr)
        assert rep.winding == 0
        assert rep.closure_defect <= 0.1

    def test_double_zero(self):
        tr = adaptive_trace(Analytic(lambda z: z * z), circle(1.0))
        assert winding_number(tr).winding == 2

    def test_constant_function(self):
        tr = adaptive_trace(Analytic(lambda z: 1.0 + 0.0j), circle(1.0))
        assert winding_number(tr).winding == 0

    def test_zero_count_matches_planted_roots(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            n_in = rng.integers(0, 4)
            roots_in = [
                rng.uniform(0.1, 0.8) * cmath.exp(2j * math.pi * rng.uniform())
                for _ in range(n_in)
            ]
            roots_out = [
                rng.uniform(1.5, 3.0) * cmath.exp(2j * math.pi * rng.uniform())
                for _ in range(3)
            ]

            def f(z, ri=roots_in, ro=roots_out):
                out = 1.0 + 0.0j
                for r in ri + ro:
                    out *= z - r
                return out

            tr = adaptive_trace(Analytic(f), circle(1.0))
            assert winding_number(tr).winding == n_in

    def test_refinement_controls_rel_change(self):
        # a function with a sharp feature near the contour forces refinement
        f = lambda z: (z - 1.02) ** 3
        tr = adaptive_trace(Analytic(f), circle(1.0))
        assert tr.max_rel_change <= 0.2
        for i in range(len(tr.values) - 1):
            dphi = abs(cmath.phase(tr.values[i + 1] / tr.values[i]))
            assert dphi <= math.asin(0.2) + 0.05

    def test_conjugate_symmetry_consistency(self):
        f = lambda z: (z - 0.5 - 0.2j) * (z - 0.5 + 0.2j) * (z + 2.0)
        t1 = adaptive_trace(Analytic(f), semicircle_with_diameter(1.0, True))
        t2 = adaptive_trace(Analytic(f), semicircle_with_diameter(1.0, False))
        assert winding_number(t1).winding == winding_number(t2).winding == 2
        assert t1.n_evaluations < t2.n_evaluations

    def test_on_contour_zero_detected(self):
        with pytest.raises(OnContourZero):
            adaptive_trace(Analytic(lambda z: z - 1.0), circle(1.0))

    def test_closure_of_trace(self):
        tr = adaptive_trace(Analytic(lambda z: z + 3), circle(2.0))
        assert abs(tr.lambdas[0] - tr.lambdas[-1]) < 1e-12
        assert abs(tr.values[0] - tr.values[-1]) < 1e-12

    def test_unwrap_guard(self):
        # hand-build a trace violating the refinement contract
        from shocktube.contours import ContourTrace

        vals = np.array([1.0 + 0j, -1.0 + 0.1j, 1.0 + 0j])
        tr = ContourTrace(
            params=np.array([0.0, 0.5, 1.0]),
            lambdas=np.array([1.0, -1.0, 1.0], dtype=complex),
            values=vals,
            log_scales=np.zeros(3),
            n_evaluations=3,
            max_rel_change=2.0,
        )
        with pytest.raises(AmbiguousUnwrap):
            winding_number(tr)

    def test_csv_format(self):
        tr = adaptive_trace(Analytic(lambda z: z + 3), circle(1.0))
        lines = tr.to_csv().strip().split("\n")
        assert lines[0] == "s,re_lambda,im_lambda,re_D,im_D"
        assert len(lines) == 1 + len(tr.values)
