import math

import numpy as np
import pytest

from shocktube.errors import NonFiniteRHS
from shocktube.odecore import (
    EventSpec,
    IntegratorConfig,
    integrate_rk45,
    integrate_stiff,
)


def test_config_invariants():
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(h_init=1e-20, h_min=1e-10)
    with pytest.raises(ValueError):
        IntegratorConfig(max_steps=0)
    with pytest.raises(ValueError):
        IntegratorConfig(blowup_threshold=-1.0)


def test_constant_rhs_identity():
    traj = integrate_rk45(lambda x, y: np.zeros(2), (0.0, 1.0), [1.0, 1.0])
    assert traj.termination.kind == "reached_end"
    assert np.allclose(traj.y_end, [1.0, 1.0], rtol=0, atol=0)


def test_exponential_oracle():
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12)
    traj = integrate_rk45(lambda x, y: y, (0.0, 1.0), [1.0], cfg)
    assert abs(traj.y_end[0] - math.e) <= 10 * cfg.rtol * math.e


def test_linear_decay_event():
    cfg = IntegratorConfig()
    ev = EventSpec(index=0, direction=-1, terminal=True)
    traj = integrate_rk45(lambda x, y: np.array([-1.0]), (0.0, 1.0), [0.5], cfg, [ev])
    assert traj.termination.kind == "event"
    assert traj.termination.event_index == 0
    assert abs(traj.termination.x - 0.5) <= 1e-10


def test_stiff_tracking_oracle():
    # y' = -1e4 (y - cos x): solution locks onto cos x up to an O(1e-4)
    # phase lag.  Oracle: closed form, cross-checked against fixed-step RK4
    # with h = 1e-6 (agreement 7e-12).
    lam = 1e4
    y_exact = math.exp(-lam) * (1.0 - lam**2 / (lam**2 + 1)) + (
        lam**2 * math.cos(1.0) + lam * math.sin(1.0)
    ) / (lam**2 + 1)
    cfg = IntegratorConfig(rtol=1e-8, atol=1e-10)
    traj = integrate_stiff(
        lambda x, y: -lam * (y - np.array([math.cos(x)])), (0.0, 1.0), [1.0], cfg
    )
    assert traj.termination.kind == "reached_end"
    assert abs(traj.y_end[0] - y_exact) <= 1e-6
    assert abs(traj.y_end[0] - math.cos(1.0)) <= 1e-4  # asymptotic tracking
    # A stiff solver resolves this without resolving the 1e-4 time scale.
    assert traj.n_steps < 2000


def test_stiff_constant_rhs():
    traj = integrate_stiff(lambda x, y: np.zeros(2), (0.0, 1.0), [3.0, -1.0])
    assert traj.termination.kind == "reached_end"
    assert np.allclose(traj.y_end, [3.0, -1.0], atol=1e-12)


def test_stiff_matches_rk45_on_nonstiff():
    rhs = lambda x, y: np.array([y[1], -y[0]])
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12)
    t1 = integrate_rk45(rhs, (0.0, 1.0), [1.0, 0.0], cfg)
    t2 = integrate_stiff(rhs, (0.0, 1.0), [1.0, 0.0], cfg)
    assert np.allclose(t1.y_end, t2.y_end, atol=1e-8)


def test_blowup_termination():
    cfg = IntegratorConfig(blowup_threshold=1e4)
    traj = integrate_rk45(lambda x, y: y**2, (0.0, 2.0), [2.0], cfg)
    assert traj.termination.kind == "blowup"
    assert traj.termination.x < 1.0


def test_nonfinite_rhs_raises():
    with pytest.raises(NonFiniteRHS):
        integrate_rk45(lambda x, y: np.array([float("nan")]), (0.0, 1.0), [1.0])


@pytest.mark.parametrize("integrate", [integrate_rk45, integrate_stiff])
def test_embedded_convergence(integrate):
    # Halving tolerances never increases the error on closed-form problems.
    problems = [
        (lambda x, y: y, [1.0], math.e),
        (lambda x, y: np.array([-1.0]), [0.5], -0.5),
        (lambda x, y: -2.0 * y, [1.0], math.exp(-2.0)),
    ]
    for rhs, y0, exact in problems:
        errs = []
        tol = 1e-4
        while tol >= 1e-9:
            cfg = IntegratorConfig(rtol=tol, atol=tol * 1e-2)
            traj = integrate(rhs, (0.0, 1.0), y0, cfg)
            errs.append(abs(traj.y_end[0] - exact))
            tol /= 2.0
        for e_coarse, e_fine in zip(errs, errs[1:]):
            assert e_fine <= e_coarse * 1.05 + 1e-13


def test_dense_output_consistency():
    rhs = lambda x, y: np.array([y[1], -np.sin(y[0])])
    cfg = IntegratorConfig(rtol=1e-9, atol=1e-11)
    traj = integrate_rk45(rhs, (0.0, 5.0), [1.2, 0.0], cfg)
    rng = np.random.default_rng(0)
    for x in rng.uniform(0.0, 5.0, size=20):
        i = int(np.searchsorted(traj.xs, x, side="right")) - 1
        x0, y0 = traj.xs[i], traj.ys[i]
        if x - x0 < 1e-12:
            continue
        sub = integrate_rk45(rhs, (x0, x), y0, cfg)
        ynorm = float(np.max(np.abs(sub.y_end)))
        tol = 10 * (cfg.atol + cfg.rtol * ynorm)
        assert np.max(np.abs(traj.eval(x) - sub.y_end)) <= tol


def test_event_bracketing_idempotence():
    # Re-running without the event: the sign of the monitored component
    # changes inside the step that contained x*.
    rhs = lambda x, y: np.array([-y[0] - 0.3])
    ev = EventSpec(index=0, direction=-1, terminal=True)
    t_ev = integrate_rk45(rhs, (0.0, 3.0), [1.0], events=[ev])
    assert t_ev.termination.kind == "event"
    xstar = t_ev.termination.x
    t_free = integrate_rk45(rhs, (0.0, 3.0), [1.0])
    i = int(np.searchsorted(t_free.xs, xstar, side="right")) - 1
    g_left = t_free.ys[i][0]
    g_right = t_free.ys[i + 1][0]
    assert g_left > 0.0 >= g_right


def test_increasing_event_direction():
    ev = EventSpec(index=0, direction=1, terminal=True)
    traj = integrate_rk45(lambda x, y: np.array([1.0]), (0.0, 2.0), [-1.0], events=[ev])
    assert traj.termination.kind == "event"
    assert abs(traj.termination.x - 1.0) <= 1e-10


def test_nonterminal_event_recorded():
    ev = EventSpec(index=0, direction=-1, terminal=False)
    traj = integrate_rk45(lambda x, y: np.array([-1.0]), (0.0, 1.0), [0.5], events=[ev])
    assert traj.termination.kind == "reached_end"
    assert len(traj.events_hit) == 1
    j, xstar = traj.events_hit[0]
    assert j == 0 and abs(xstar - 0.5) <= 1e-10
