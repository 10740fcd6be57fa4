import numpy as np
import pytest
import scipy.linalg

from shocktube.errors import InfeasibleConstant, NonPositiveInput
from shocktube.feasibility import ScanGrid, classify, trace_boundary
from shocktube.polytropic import (
    GasParams,
    IntegrationConstants,
    constant_constants,
)
from shocktube.steady import (
    DataTarget,
    dpsi,
    dpsi_fd,
    det_dpsi_scan,
    find_all_roots,
    psi,
    solve_for_data,
)

P_MILD = GasParams.simple_gas(Gamma=1.0, alpha=0.5, e0=1.0)
# the zero-frequency scan slice used in the D(0)-versus-constants study
P_FIG283 = GasParams(Gamma=2 / 3, alpha=0.7333333333333333, nu=1.375, u0=1.0,
                     e0=0.001)


def dpsi_expm_oracle(params):
    """Matrix exponential of the augmented constant-coefficient variational
    system at the constant solution."""
    u0, e0, G = params.u0, params.e0, params.Gamma
    al, nu = params.alpha, params.nu
    cs = constant_constants(params)
    ka, kn = u0 / al, u0 / nu
    M = np.array([[ka * (1 - G * e0 / u0**2), ka * G / u0],
                  [kn * (-cs.c1 - u0), kn]])
    cols = []
    for g in (np.array([ka, kn * (-u0)]), np.array([0.0, kn])):
        B = np.zeros((3, 3))
        B[:2, :2] = M
        B[:2, 2] = g
        cols.append((scipy.linalg.expm(B) @ np.array([0.0, 0.0, 1.0]))[:2])
    return np.column_stack(cols)


class TestPsi:
    def test_constant_solution(self):
        out = psi(constant_constants(P_MILD), P_MILD)
        assert np.allclose(out, [P_MILD.u0, P_MILD.e0], atol=1e-12)

    def test_infeasible_raises(self):
        p = GasParams(Gamma=1, alpha=1, nu=1)
        with pytest.raises(InfeasibleConstant):
            psi(IntegrationConstants(0.0, -2.0), p)

    def test_boundary_extension(self):
        p = GasParams(Gamma=1, alpha=1, nu=1)
        bp = trace_boundary(
            constant_constants(p), IntegrationConstants(0.0, -2.0), p, tol=1e-12
        )
        out = psi(bp.c, p, boundary=True)
        assert out[0] > 0
        assert abs(out[1]) <= 1e-4 or out[1] == 0.0

    def test_boundary_layer_profile_value(self):
        p = GasParams(Gamma=1, alpha=0.1, nu=0.2438, u0=1, e0=0.001)
        out = psi(IntegrationConstants(-18.35, 0.5184), p)
        assert np.all(out > 0) and np.all(np.isfinite(out))


class TestDpsi:
    def test_expm_oracle_at_cstar(self):
        for params in (P_MILD, GasParams.simple_gas(Gamma=2 / 3, alpha=1.5, e0=2.0)):
            J = dpsi(constant_constants(params), params)
            J0 = dpsi_expm_oracle(params)
            assert np.max(np.abs(J - J0)) <= 1e-10 * np.max(np.abs(J0))

    def test_det_nonzero_at_cstar(self):
        J = dpsi(constant_constants(P_MILD), P_MILD)
        assert abs(np.linalg.det(J)) > 1e-6

    def test_fd_cross_check_random_feasible(self):
        rng = np.random.default_rng(11)
        checked = 0
        cs = constant_constants(P_MILD)
        while checked < 12:
            c = IntegrationConstants(
                cs.c1 + rng.uniform(-5, 2), cs.c2 + rng.uniform(-2, 5)
            )
            if not classify(c, P_MILD).is_feasible:
                continue
            J = dpsi(c, P_MILD)
            Jfd = dpsi_fd(c, P_MILD)
            rel = np.max(np.abs(J - Jfd)) / np.max(np.abs(Jfd))
            assert rel <= 1e-5, f"FD mismatch {rel} at {c}"
            checked += 1


class TestSolveForData:
    def test_constant_data_returns_cstar(self):
        rng = np.random.default_rng(5)
        for _ in range(3):
            p = GasParams.simple_gas(
                Gamma=rng.uniform(0.4, 1.2),
                alpha=rng.uniform(0.3, 1.5),
                e0=rng.uniform(0.2, 3.0),
            )
            rep = solve_for_data(DataTarget(p.u0, p.e0), p)
            cs = constant_constants(p)
            err = np.hypot(rep.c.c1 - cs.c1, rep.c.c2 - cs.c2)
            assert err <= 1e-10
            assert rep.residual <= 1e-8

    def test_reachable_target_self_consistency(self):
        # pick a feasible c, compute its endpoint, solve back for it
        cs = constant_constants(P_MILD)
        c = IntegrationConstants(cs.c1 - 2.5, cs.c2 + 1.5)
        target_vec = psi(c, P_MILD)
        rep = solve_for_data(DataTarget(*target_vec), P_MILD)
        re_end = psi(rep.c, P_MILD)
        assert np.linalg.norm(re_end - target_vec) <= 1e-8

    def test_target_validation(self):
        with pytest.raises(NonPositiveInput):
            DataTarget(-1.0, 1.0)

    def test_unique_root_multistart(self):
        cs = constant_constants(P_MILD)
        c = IntegrationConstants(cs.c1 - 2.0, cs.c2 + 1.0)
        target_vec = psi(c, P_MILD)
        roots = find_all_roots(DataTarget(*target_vec), P_MILD, seed_grid_n=7)
        assert len(roots) == 1
        assert rootsclose(roots[0].c, c)


def rootsclose(c1, c2, tol=1e-6):
    return abs(c1.c1 - c2.c1) <= tol * max(1, abs(c2.c1)) and abs(
        c1.c2 - c2.c2
    ) <= tol * max(1, abs(c2.c2))


class TestDetScan:
    def test_fig283_slice_sign_constant_positive(self):
        res = det_dpsi_scan(ScanGrid.centered(20.0, 7), P_FIG283)
        assert res.sign_constant
        vals = res.det[res.feasible_mask]
        assert np.all(vals > 0)
        assert res.min_d0 > 0

    def test_cstar_matches_oracle(self):
        res = det_dpsi_scan(
            ScanGrid(dc1=np.array([0.0]), dc2=np.array([0.0])), P_MILD
        )
        J0 = dpsi_expm_oracle(P_MILD)
        assert abs(res.det[0, 0] - np.linalg.det(J0)) <= 1e-8 * abs(
            np.linalg.det(J0)
        )

    def test_zero_frequency_identity_per_cell(self):
        res = det_dpsi_scan(ScanGrid.centered(15.0, 6), P_MILD)
        assert res.max_rel_mismatch <= 1e-6

    def test_exchange_of_stability_signs(self):
        # sign(det dpsi) == sign(D(0)) cell by cell
        res = det_dpsi_scan(ScanGrid.centered(15.0, 6), P_MILD)
        m = res.feasible_mask
        assert np.all(np.sign(res.det[m]) == np.sign(res.d0[m]))

    def test_csv_format(self):
        res = det_dpsi_scan(ScanGrid.centered(5.0, 3), P_MILD)
        lines = res.to_csv().strip().split("\n")
        assert lines[0] == "c1,c2,det,sign"
        assert len(lines) == 1 + int(np.sum(res.feasible_mask))
