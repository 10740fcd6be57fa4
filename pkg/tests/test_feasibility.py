import numpy as np
import pytest

from shocktube.errors import NoSignChange
from shocktube.feasibility import (
    BLOWUP,
    E_NEGATIVE,
    FEASIBLE,
    U_NEGATIVE,
    FeasibilityClass,
    ScanGrid,
    barrier_holds,
    classify,
    scan,
    trace_boundary,
    vanishing_shadow_holds,
)
from shocktube.polytropic import (
    GasParams,
    IntegrationConstants,
    constant_constants,
)

FIG_B = GasParams(Gamma=2 / 3, alpha=2.0, nu=3.75, u0=1.0, e0=2.0)


class TestClassify:
    def test_constant_constants_feasible(self):
        assert classify(constant_constants(FIG_B), FIG_B).is_feasible

    def test_energy_crossing_example(self):
        p = GasParams(Gamma=1, alpha=1, nu=1, u0=1, e0=1)
        fc = classify(IntegrationConstants(0.0, -2.0), p)
        assert fc.tag == E_NEGATIVE
        assert 0 < fc.x_star <= 1

    def test_class_invariants(self):
        with pytest.raises(ValueError):
            FeasibilityClass("nonsense")
        with pytest.raises(ValueError):
            FeasibilityClass(E_NEGATIVE)  # missing x_star


class TestScan:
    def test_single_cell_at_cstar(self):
        g = ScanGrid(dc1=np.array([0.0]), dc2=np.array([0.0]))
        res = scan(g, FIG_B)
        assert res.counts()[FEASIBLE] == 1

    def test_four_strata_nonempty_and_contains_cstar(self):
        res = scan(ScanGrid.centered(50.0, 20), FIG_B)
        counts = res.counts()
        for tag in (FEASIBLE, E_NEGATIVE, U_NEGATIVE, BLOWUP):
            assert counts[tag] > 0, f"stratum {tag} empty: {counts}"
        # the center cell (offset ~0) must be feasible: nearest grid point
        i = int(np.argmin(np.abs(res.c1_values - constant_constants(FIG_B).c1)))
        j = int(np.argmin(np.abs(res.c2_values - constant_constants(FIG_B).c2)))
        assert res.class_at(i, j).is_feasible

    def test_unbounded_direction(self):
        # fixing c2 = -e0/2, sufficiently negative c1 stays feasible
        p = FIG_B
        for c1 in (-1e2, -1e3, -1e4):
            fc = classify(IntegrationConstants(c1, -p.e0 / 2.0), p)
            assert fc.is_feasible, f"c1={c1} classified {fc.tag}"

    def test_determinism(self):
        g = ScanGrid.centered(50.0, 6)
        r1 = scan(g, FIG_B)
        r2 = scan(g, FIG_B, workers=2)
        assert np.array_equal(r1.classes, r2.classes)
        assert r1.to_csv() == r2.to_csv()

    def test_csv_shape(self):
        g = ScanGrid.centered(10.0, 4)
        res = scan(g, FIG_B)
        lines = res.to_csv().strip().split("\n")
        assert lines[0] == "c1,c2,class,x_star"
        assert len(lines) == 1 + 16

    def test_integrator_independence(self):
        g = ScanGrid.centered(50.0, 10)
        r1 = scan(g, FIG_B, method="stiff")
        r2 = scan(g, FIG_B, method="rk45")
        # agreement except possibly near-threshold cells
        agree = np.mean(r1.classes == r2.classes)
        assert agree >= 0.95


class TestOpenness:
    def test_feasible_cells_are_open(self):
        res = scan(ScanGrid.centered(50.0, 10), FIG_B)
        rng = np.random.default_rng(3)
        feas = np.argwhere(res.classes == 0)
        picks = feas[rng.choice(len(feas), size=min(20, len(feas)), replace=False)]
        for i, j in picks:
            c1 = float(res.c1_values[i])
            c2 = float(res.c2_values[j])
            for d1, d2 in ((1e-6, 0), (-1e-6, 0), (0, 1e-6), (0, -1e-6)):
                assert classify(
                    IntegrationConstants(c1 + d1, c2 + d2), FIG_B
                ).is_feasible


class TestTraceBoundary:
    def test_boundary_from_cstar(self):
        p = GasParams(Gamma=1, alpha=1, nu=1, u0=1, e0=1)
        bp = trace_boundary(
            constant_constants(p), IntegrationConstants(0.0, -2.0), p
        )
        assert abs(bp.e_end) <= 1e-4
        assert bp.certificate_ok()

    def test_no_sign_change(self):
        p = GasParams(Gamma=1, alpha=1, nu=1, u0=1, e0=1)
        cs = constant_constants(p)
        with pytest.raises(NoSignChange):
            trace_boundary(
                cs, IntegrationConstants(cs.c1 - 0.1, cs.c2 + 0.1), p
            )

    def test_boundary_point_openness(self):
        # pushing a boundary point back toward the interior is feasible
        p = GasParams(Gamma=1, alpha=1, nu=1, u0=1, e0=1)
        cs = constant_constants(p)
        bp = trace_boundary(cs, IntegrationConstants(0.0, -2.0), p)
        inward = np.array([cs.c1 - bp.c.c1, cs.c2 - bp.c.c2])
        inward /= np.linalg.norm(inward)
        c_in = IntegrationConstants(
            bp.c.c1 + 1e-3 * inward[0], bp.c.c2 + 1e-3 * inward[1]
        )
        assert classify(c_in, p).is_feasible


class TestTrajectoryShadows:
    def _sampled_cells(self, n=8):
        res = scan(ScanGrid.centered(50.0, n), FIG_B)
        for i, c1 in enumerate(res.c1_values):
            for j, c2 in enumerate(res.c2_values):
                yield IntegrationConstants(float(c1), float(c2))

    def test_barrier_property_on_scanned_trajectories(self):
        for c in self._sampled_cells(8):
            fc, (xs, us, es) = classify(c, FIG_B, with_trajectory=True)
            assert barrier_holds(xs, us, es, c, FIG_B), f"barrier fails at {c}"

    def test_vanishing_shadow_on_scanned_trajectories(self):
        for c in self._sampled_cells(8):
            fc, (xs, us, es) = classify(c, FIG_B, with_trajectory=True)
            assert vanishing_shadow_holds(xs, us, es, c, FIG_B), f"shadow fails at {c}"
