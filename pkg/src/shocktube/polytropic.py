"""Polytropic gas model: parameters, rescaling, the profile ODE and steady
profile integration on [0, 1].

The inflow density is normalized to 1; use :func:`rescale_to_unit` to bring
raw data into this convention.  Steady profiles are parameterized by the two
integration constants (c1, c2) of the once-integrated system; the constant
solution corresponds to :func:`constant_constants`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import models
from .errors import NonPositiveInput
from .odecore import IntegratorConfig

__all__ = [
    "GasParams",
    "IntegrationConstants",
    "ProfileSolution",
    "ProfileTermination",
    "rescale_to_unit",
    "profile_rhs",
    "constant_constants",
    "constants_from_slopes",
    "slopes_from_constants",
    "solve_profile",
]

SIMPLE_GAS_NUM = 27.0
SIMPLE_GAS_DEN = 16.0

# Mesh density floor for dense output used by the spectral module.
PROFILE_HMAX = 1.0 / 256.0
PROFILE_RTOL = 1e-12
PROFILE_ATOL = 1e-14
RESIDUAL_SAMPLES = 512
RESIDUAL_BOUND = 1e-8


@dataclass(frozen=True)
class GasParams:
    """Physical parameters with the inflow normalization rho0 = 1.

    Gamma is the Grueneisen exponent, alpha the viscosity, nu the ratio of
    heat conductivity to specific heat; u0 and e0 prescribe the inflow.
    """

    Gamma: float
    alpha: float
    nu: float
    u0: float = 1.0
    e0: float = 1.0

    def __post_init__(self):
        for name in ("Gamma", "alpha", "nu", "u0", "e0"):
            if not getattr(self, name) > 0:
                raise NonPositiveInput(f"{name} must be positive")

    @classmethod
    def simple_gas(cls, Gamma, alpha, u0=1.0, e0=1.0):
        """Viscosity ratio fixed by the statistical-mechanics prediction
        16 nu = alpha (27 Gamma + 12)."""
        nu = alpha * (SIMPLE_GAS_NUM * Gamma + 12.0) / SIMPLE_GAS_DEN
        return cls(Gamma=Gamma, alpha=alpha, nu=nu, u0=u0, e0=e0)

    def is_simple_gas(self, rel=1e-12):
        target = self.alpha * (SIMPLE_GAS_NUM * self.Gamma + 12.0) / SIMPLE_GAS_DEN
        return abs(self.nu - target) <= rel * max(1.0, abs(target))


@dataclass(frozen=True)
class IntegrationConstants:
    """The two shooting unknowns of the profile ODE."""

    c1: float
    c2: float

    def as_array(self):
        return np.array([self.c1, self.c2])


@dataclass(frozen=True)
class ProfileTermination:
    """Failed profile integration: first event and its location.

    ``kind`` is one of ``e_negative``, ``u_negative``, ``blowup``,
    ``min_step``.
    """

    kind: str
    x: float

    @property
    def is_success(self):
        return False


def rescale_to_unit(rho0, u0_raw, e0_raw, alpha_raw, nu_raw, Gamma):
    """Rescale raw data to the rho0 = u0 = 1 convention.

    The simple-gas viscosity ratio is preserved by this change of
    coordinates.
    """
    for name, v in (
        ("rho0", rho0),
        ("u0", u0_raw),
        ("e0", e0_raw),
        ("alpha", alpha_raw),
        ("nu", nu_raw),
        ("Gamma", Gamma),
    ):
        if not v > 0:
            raise NonPositiveInput(f"{name} must be positive")
    return GasParams(
        Gamma=Gamma,
        alpha=alpha_raw / (rho0 * u0_raw),
        nu=nu_raw / (rho0 * u0_raw),
        u0=1.0,
        e0=e0_raw / u0_raw**2,
    )


def profile_rhs(state, c, params):
    """Right-hand side of the profile ODE at (u, e);, requires u > 0."""
    u, e = float(state[0]), float(state[1])
    if u <= 0:
        from .errors import DomainError

        raise DomainError(f"profile rhs needs u > 0, got u={u}")
    du, de = models.poly_rhs(
        u, e, c.c1, c.c2, params.Gamma, params.alpha, params.nu, params.u0
    )
    return np.array([du, de])


def constant_constants(params):
    """Integration constants of the constant solution (u0, e0)."""
    u0, e0, G = params.u0, params.e0, params.Gamma
    return IntegrationConstants(
        c1=-u0 - G * e0 / u0,
        c2=-(1.0 + G) * e0 - 0.5 * u0 * u0,
    )


def constants_from_slopes(u_slope0, e_slope0, params):
    """Map initial slopes (u'(0), e'(0)) to integration constants."""
    u0, e0, G = params.u0, params.e0, params.Gamma
    c1 = (params.alpha / u0) * u_slope0 - u0 - G * e0 / u0
    c2 = (
        (params.nu / u0) * e_slope0
        + params.alpha * u_slope0
        - e0
        - 0.5 * u0 * u0
        - G * e0
    )
    return IntegrationConstants(c1=c1, c2=c2)


def slopes_from_constants(c, params):
    """Initial slopes of the profile: the ODE right-hand side at (u0, e0)."""
    du, de = models.poly_rhs(
        params.u0,
        params.e0,
        c.c1,
        c.c2,
        params.Gamma,
        params.alpha,
        params.nu,
        params.u0,
    )
    return du, de


class ProfileSolution:
    """A steady profile on [0, 1] with dense output and a residual
    certificate.

    Values between mesh nodes come from cubic Hermite interpolation with
    exact nodal derivatives (the ODE right-hand side), which preserves
    fourth-order value accuracy on the adaptive mesh.  ``residual`` is the
    largest midpoint defect of the integrator's dense output relative to
    1 + |rhs|.
    """

    def __init__(self, params, c, xs, us, es, residual):
        if np.any(us <= 0) or np.any(es <= 0):
            raise ValueError("profile must satisfy u > 0 and e > 0 on the mesh")
        if residual > RESIDUAL_BOUND:
            raise ValueError(
                f"residual {residual:.3e} exceeds certificate bound {RESIDUAL_BOUND}"
            )
        self.params = params
        self.c = c
        self.xs = np.asarray(xs, dtype=float)
        self.us = np.asarray(us, dtype=float)
        self.es = np.asarray(es, dtype=float)
        self.residual = float(residual)
        self._dus, self._des = models.poly_rhs(
            self.us, self.es, c.c1, c.c2, params.Gamma, params.alpha, params.nu,
            params.u0,
        )
        # Construction-time invariant: initial slopes reproduce c.
        rt = constants_from_slopes(self._dus[0], self._des[0], params)
        cn = np.array([c.c1, c.c2])
        if np.max(np.abs(rt.as_array() - cn) / np.maximum(1.0, np.abs(cn))) > 1e-10:
            raise ValueError("initial slopes do not reproduce the constants")

    @property
    def is_success(self):
        return True

    @property
    def n_nodes(self):
        return self.xs.size

    def _hermite(self, x, vals, dvals):
        xs = self.xs
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        h = xs[i + 1] - xs[i]
        th = (x - xs[i]) / h
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th * th * (3 - 2 * th)
        h11 = th * th * (th - 1)
        return (
            h00 * vals[i]
            + h10 * h * dvals[i]
            + h01 * vals[i + 1]
            + h11 * h * dvals[i + 1]
        )

    def u(self, x):
        return self._hermite(np.asarray(x, dtype=float), self.us, self._dus)

    def e(self, x):
        return self._hermite(np.asarray(x, dtype=float), self.es, self._des)

    def rho(self, x):
        return self.params.u0 / self.u(x)

    def endpoint(self):
        return float(self.us[-1]), float(self.es[-1])

    def to_json(self):
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
                "c": {"c1": self.c.c1, "c2": self.c.c2},
                "mesh": self.xs.tolist(),
                "u": self.us.tolist(),
                "e": self.es.tolist(),
                "residual": self.residual,
            }
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            GasParams(**d["params"]),
            IntegrationConstants(**d["c"]),
            np.array(d["mesh"]),
            np.array(d["u"]),
            np.array(d["e"]),
            d["residual"],
        )


_STATUS_KIND = {2: "u_negative", 3: "blowup", 4: "min_step"}


def solve_profile(c, params, cfg=None, method="rk45"):
    """Integrate the profile ODE on [0, 1].

    Returns a :class:`ProfileSolution` on success, else a
    :class:`ProfileTermination` naming the first event among e-crossing,
    u-crossing and blowup.  ``method`` is "rk45" (default: the embedded
    5(4) pair is what meets the residual certificate on steep profiles) or
    "stiff" (TR-BDF2 cross-check; classification scans default to it).
    Raises IntegratorFailure on step-budget exhaustion.
    """
    from .kernels import get_backend

    if cfg is None:
        cfg = IntegratorConfig(
            rtol=PROFILE_RTOL, atol=PROFILE_ATOL, h_max=PROFILE_HMAX
        )
    backend = get_backend()
    status, x_end, x_e, xs, us, es, resid = backend.poly_profile(
        params.u0,
        params.e0,
        params.Gamma,
        params.alpha,
        params.nu,
        c.c1,
        c.c2,
        cfg.rtol,
        cfg.atol,
        min(cfg.h_max, PROFILE_HMAX),
        cfg.blowup_threshold,
        1 if method == "stiff" else 0,
        RESIDUAL_SAMPLES,
    )
    if not math.isnan(x_e):
        return ProfileTermination(kind="e_negative", x=x_e)
    if status != 0:
        return ProfileTermination(kind=_STATUS_KIND[status], x=x_end)
    return ProfileSolution(params, c, xs, us, es, resid)
