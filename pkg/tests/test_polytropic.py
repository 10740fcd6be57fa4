import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shocktube.errors import DomainError, NonPositiveInput
from shocktube.polytropic import (
    GasParams,
    IntegrationConstants,
    ProfileTermination,
    ProfileSolution,
    constant_constants,
    constants_from_slopes,
    profile_rhs,
    rescale_to_unit,
    slopes_from_constants,
    solve_profile,
)


class TestGasParams:
    def test_positivity(self):
        with pytest.raises(NonPositiveInput):
            GasParams(Gamma=0.0, alpha=1, nu=1)
        with pytest.raises(NonPositiveInput):
            GasParams(Gamma=1, alpha=-1, nu=1)

    def test_simple_gas_ratio(self):
        p = GasParams.simple_gas(Gamma=1.0, alpha=0.1)
        assert abs(16 * p.nu - p.alpha * (27 * 1.0 + 12)) < 1e-14
        assert p.is_simple_gas()

    def test_figure_parameter_sets_are_simple_gas(self):
        # the standard parameter sets used throughout the studies
        for Gamma, alpha, nu in ((1.0, 0.1, 0.24375), (2 / 3, 2.0, 3.75), (2 / 3, 0.7333333333333333, 1.375)):
            p = GasParams(Gamma=Gamma, alpha=alpha, nu=nu)
            assert p.is_simple_gas(rel=1e-3)


class TestRescale:
    def test_identity(self):
        p = rescale_to_unit(1.0, 1.0, 0.7, 0.4, 0.9, 1.1)
        assert (p.alpha, p.nu, p.e0, p.u0) == (0.4, 0.9, 0.7, 1.0)

    def test_worked_example(self):
        p = rescale_to_unit(2.0, 3.0, 9.0, 6.0, 12.0, 1.0)
        assert abs(p.e0 - 1.0) < 1e-15
        assert abs(p.alpha - 1.0) < 1e-15
        assert abs(p.nu - 2.0) < 1e-15

    def test_simple_gas_preserved(self):
        raw = GasParams.simple_gas(Gamma=0.8, alpha=1.3)
        p = rescale_to_unit(2.5, 1.7, 4.0, raw.alpha, raw.nu, 0.8)
        assert p.is_simple_gas()

    def test_rejects_nonpositive(self):
        with pytest.raises(NonPositiveInput):
            rescale_to_unit(0.0, 1, 1, 1, 1, 1)


class TestRhsAndConstants:
    def test_fixed_point_by_construction(self):
        p = GasParams(Gamma=0.7, alpha=0.9, nu=1.4, u0=1.2, e0=0.8)
        c = constant_constants(p)
        assert np.allclose(profile_rhs([p.u0, p.e0], c, p), 0.0, atol=1e-14)

    def test_hand_evaluated_rhs(self):
        p = GasParams(Gamma=2 / 3, alpha=2.0, nu=3.75, u0=1.0, e0=2.0)
        out = profile_rhs([1.0, 2.0], IntegrationConstants(0.0, 0.0), p)
        assert np.allclose(out, [7 / 6, 0.4], atol=1e-15)

    def test_cstar_instance(self):
        p = GasParams(Gamma=1.0, alpha=1.0, nu=1.0, u0=1.0, e0=1.0)
        c = constant_constants(p)
        assert (c.c1, c.c2) == (-2.0, -2.5)
        assert np.allclose(
            profile_rhs([1.0, 1.0], IntegrationConstants(-2.0, -2.5), p), 0.0
        )

    def test_scan_centering_formula(self):
        # c1 = -1 - Gamma e0, c2 = -1/2 - (1+Gamma) e0 at u0 = 1
        for G, e0 in ((2 / 3, 2.0), (1.0, 0.001), (0.4, 10.0)):
            p = GasParams(Gamma=G, alpha=1.0, nu=1.0, u0=1.0, e0=e0)
            c = constant_constants(p)
            assert abs(c.c1 - (-1 - G * e0)) < 1e-14
            assert abs(c.c2 - (-0.5 - (1 + G) * e0)) < 1e-14

    def test_rhs_domain_error(self):
        p = GasParams(Gamma=1, alpha=1, nu=1)
        with pytest.raises(DomainError):
            profile_rhs([-0.1, 1.0], IntegrationConstants(0, 0), p)


class TestSlopesConstants:
    def test_zero_slopes_give_cstar(self):
        p = GasParams(Gamma=0.9, alpha=1.1, nu=2.0, u0=1.3, e0=0.6)
        c = constants_from_slopes(0.0, 0.0, p)
        cs = constant_constants(p)
        assert abs(c.c1 - cs.c1) < 1e-14
        assert abs(c.c2 - cs.c2) < 1e-14

    def test_hand_example(self):
        p = GasParams(Gamma=1, alpha=1, nu=1, u0=1, e0=1)
        c = constants_from_slopes(1.0, 0.0, p)
        assert abs(c.c1 - (-1.0)) < 1e-14
        assert abs(c.c2 - (-1.5)) < 1e-14

    @settings(max_examples=50, deadline=None)
    @given(
        du=st.floats(-20, 20),
        de=st.floats(-20, 20),
        G=st.floats(0.2, 2.0),
        al=st.floats(0.1, 3.0),
        e0=st.floats(0.05, 5.0),
    )
    def test_round_trip(self, du, de, G, al, e0):
        p = GasParams.simple_gas(Gamma=G, alpha=al, e0=e0)
        c = constants_from_slopes(du, de, p)
        du2, de2 = slopes_from_constants(c, p)
        assert abs(du2 - du) <= 1e-14 * max(1.0, abs(du))
        assert abs(de2 - de) <= 1e-14 * max(1.0, abs(de))


class TestSolveProfile:
    def test_constant_profile(self):
        p = GasParams(Gamma=1, alpha=1, nu=1)
        sol = solve_profile(constant_constants(p), p)
        assert sol.is_success
        assert sol.residual <= 1e-12
        assert np.allclose(sol.us, 1.0) and np.allclose(sol.es, 1.0)
        assert np.allclose(sol.endpoint(), (1.0, 1.0))

    def test_fixed_point_invariance_across_params(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            p = GasParams.simple_gas(
                Gamma=rng.uniform(0.3, 1.5),
                alpha=rng.uniform(0.2, 2.0),
                e0=rng.uniform(0.1, 5.0),
            )
            sol = solve_profile(constant_constants(p), p)
            assert sol.is_success and sol.residual <= 1e-12

    def test_boundary_layer_profile_exists(self):
        p = GasParams(Gamma=1, alpha=0.1, nu=0.2438, u0=1, e0=0.001)
        sol = solve_profile(IntegrationConstants(-18.35, 0.5184), p)
        assert sol.is_success
        assert sol.n_nodes >= 200
        assert sol.residual <= 1e-8
        assert np.all(sol.us > 0) and np.all(sol.es > 0)

    def test_energy_crossing_terminates(self):
        p = GasParams(Gamma=1, alpha=1, nu=1, u0=1, e0=1)
        out = solve_profile(IntegrationConstants(0.0, -2.0), p)
        assert isinstance(out, ProfileTermination)
        assert out.kind == "e_negative"
        assert 0 < out.x <= 1

    def test_slope_consistency_numerical(self):
        # numerically differentiated initial slopes recover c to 1e-6
        p = GasParams.simple_gas(Gamma=0.8, alpha=0.9, e0=1.5)
        cs = constant_constants(p)
        c = IntegrationConstants(cs.c1 - 2.0, cs.c2 + 1.0)
        sol = solve_profile(c, p)
        h = 1e-7
        du = (float(sol.u(h)) - float(sol.u(0.0))) / h
        de = (float(sol.e(h)) - float(sol.e(0.0))) / h
        c_rt = constants_from_slopes(du, de, p)
        assert abs(c_rt.c1 - c.c1) <= 1e-6 * max(1, abs(c.c1))
        assert abs(c_rt.c2 - c.c2) <= 1e-6 * max(1, abs(c.c2))

    def test_methods_agree_on_mild_profile(self):
        p = GasParams.simple_gas(Gamma=1.0, alpha=1.0, e0=1.0)
        cs = constant_constants(p)
        c = IntegrationConstants(cs.c1 - 1.0, cs.c2 + 0.5)
        s1 = solve_profile(c, p, method="rk45")
        s2 = solve_profile(c, p, method="stiff")
        assert s1.is_success and s2.is_success
        assert np.allclose(s1.endpoint(), s2.endpoint(), rtol=1e-8, atol=1e-10)

    def test_rho_reconstruction(self):
        p = GasParams.simple_gas(Gamma=0.7, alpha=1.2, e0=2.0)
        cs = constant_constants(p)
        sol = solve_profile(IntegrationConstants(cs.c1 - 1.5, cs.c2 + 1.0), p)
        x = np.linspace(0, 1, 17)
        assert np.allclose(sol.rho(x) * sol.u(x), p.u0, rtol=1e-12)

    def test_json_round_trip(self):
        p = GasParams.simple_gas(Gamma=1.0, alpha=0.5, e0=1.0)
        cs = constant_constants(p)
        sol = solve_profile(IntegrationConstants(cs.c1 - 1.0, cs.c2 + 0.5), p)
        text = sol.to_json()
        d = json.loads(text)
        assert set(d) == {"params", "c", "mesh", "u", "e", "residual"}
        sol2 = ProfileSolution.from_json(text)
        assert np.allclose(sol2.us, sol.us)
        assert sol2.residual == sol.residual
        x = np.linspace(0, 1, 7)
        assert np.allclose(sol2.u(x), sol.u(x), rtol=1e-12)


class TestFirstIntegrals:
    def test_constants_recovered_along_profile(self):
        # c1 and c2 recomputed from the interpolated state and its
        # derivative stay constant along the profile.
        p = GasParams.simple_gas(Gamma=0.9, alpha=1.1, e0=1.2)
        cs = constant_constants(p)
        c = IntegrationConstants(cs.c1 - 2.0, cs.c2 + 1.5)
        sol = solve_profile(c, p)
        xs = np.linspace(1e-4, 1 - 1e-4, 257)
        u = sol.u(xs)
        e = sol.e(xs)
        # derivatives from the ODE right-hand side evaluated on the states
        du = (p.u0 / p.alpha) * (c.c1 + u + p.Gamma * e / u)
        de = (p.u0 / p.nu) * (c.c2 - c.c1 * u - 0.5 * u * u + e)
        c1_rec = (p.alpha / p.u0) * du - u - p.Gamma * e / u
        c2_rec = (p.nu / p.u0) * de + c.c1 * u + 0.5 * u * u - e
        assert np.max(np.abs(c1_rec - c.c1)) <= 1e-8 * max(1, abs(c.c1))
        assert np.max(np.abs(c2_rec - c.c2)) <= 1e-8 * max(1, abs(c.c2))

    def test_flux_form_first_integral_via_interpolant_derivative(self):
        # Independent route: differentiate the dense interpolant by central
        # differences and verify the once-integrated momentum flux
        # (alpha/u0) u' - u - Gamma e / u stays constant to 1e-8.
        p = GasParams.simple_gas(Gamma=1.0, alpha=1.0, e0=1.0)
        cs = constant_constants(p)
        c = IntegrationConstants(cs.c1 - 1.0, cs.c2 + 0.5)
        sol = solve_profile(c, p)
        xs = np.linspace(1e-3, 1 - 1e-3, 101)
        h = 1e-6
        du = (sol.u(xs + h) - sol.u(xs - h)) / (2 * h)
        f1 = (p.alpha / p.u0) * du - sol.u(xs) - p.Gamma * sol.e(xs) / sol.u(xs)
        assert np.max(np.abs(f1 - c.c1)) <= 1e-8 * max(1.0, abs(c.c1))
