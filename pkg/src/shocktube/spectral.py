"""Evans-function machinery: the linearized eigenvalue system about a
profile, two-sided evaluation with continuous orthogonalization, the
zero-frequency value by direct integration, and the stability index.

The Evans value is computed by integrating an orthonormal 2-frame spanning
the left boundary kernel forward and a 3-frame spanning the right boundary
kernel backward, matching at an interior point, and taking the determinant
of the concatenated frames times the exponentials of both accumulated
radial factors.  The radial factors make the value an Abel-consistent
nonvanishing multiple of the Evans function: moving the matching point
rescales it but never changes signs on the real axis or winding numbers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import models
from .errors import FrameDegeneracy, NoLimit, ZeroD0
from .odecore import IntegratorConfig

__all__ = [
    "EigenSystem",
    "FrameState",
    "EvansValue",
    "assemble_eigensystem",
    "evans",
    "d0_direct",
    "stability_index",
]

# Left boundary conditions kill (rho, u, e); right ones kill (u, e).
LEFT_KERNEL = np.eye(5, dtype=complex)[:, 3:5]
RIGHT_KERNEL = np.eye(5, dtype=complex)[:, [0, 3, 4]]

REORTH_EVERY = 20
REORTH_DRIFT = 1e-10
DRIFT_LIMIT = 1e-6


@dataclass
class EigenSystem:
    """Coefficient map x -> A(x; lambda) of the first-order eigenvalue
    system in the state (rho, u, e, u', e') about a profile."""

    profile: object
    lam: complex

    def matrix(self, x):
        p = self.profile.params
        u = float(self.profile.u(x))
        e = float(self.profile.e(x))
        return models.poly_eigs_matrix(
            u, e, self.profile.c.c1, self.profile.c.c2,
            p.Gamma, p.alpha, p.nu, p.u0, self.lam,
        )


def assemble_eigensystem(profile, lam):
    """First-order form of the eigenvalue problem about ``profile``."""
    return EigenSystem(profile=profile, lam=complex(lam))


@dataclass
class FrameState:
    """Orthonormal frame with its accumulated radial log-determinant."""

    Q: np.ndarray
    logdet: complex
    max_drift: float


@dataclass(frozen=True)
class EvansValue:
    """Evans value in mantissa / log-scale form.

    ``mantissa`` is O(1); the represented value is
    mantissa * exp(log_scale) with log_scale real, which avoids overflow
    for strongly growing modes.  ``normalization`` records the convention.
    """

    mantissa: complex
    log_scale: float
    normalization: str

    @property
    def value(self):
        try:
            return self.mantissa * math.exp(self.log_scale)
        except OverflowError:
            return self.mantissa * math.inf

    @property
    def sign_real(self):
        return int(np.sign(self.mantissa.real))

    def ratio(self, other):
        """self / other, computed in scaled form."""
        return (self.mantissa / other.mantissa) * math.exp(
            self.log_scale - other.log_scale
        )


def _spectral_cfg():
    return IntegratorConfig(rtol=1e-10, atol=1e-12)


def _evolve(profile, lam, x0, x1, Q0, cfg, hmax=None):
    from .kernels import get_backend

    p = profile.params
    pars = np.array(
        [p.Gamma, p.alpha, p.nu, p.u0, profile.c.c1, profile.c.c2]
    )
    status, Q, logdet, drift = get_backend().frame_evolve(
        0,
        profile.xs,
        profile.us,
        profile.es,
        pars,
        complex(lam),
        x0,
        x1,
        Q0,
        cfg.rtol,
        cfg.atol,
        hmax if hmax is not None else abs(x1 - x0) / 8.0,
        REORTH_EVERY,
        REORTH_DRIFT,
    )
    return status, FrameState(Q=Q, logdet=logdet, max_drift=drift)


def evans_two_sided(profile, lam, cfg=None, match_at=0.5, drop_radial=False,
                    _retry=0):
    """Two-sided Evans evaluation with Drury orthogonalization.

    Integrates the left-kernel 2-frame forward and the right-kernel 3-frame
    backward to ``match_at`` and returns det of the concatenated 5x5 frame
    times both radial factors (unless ``drop_radial``, the winding-only
    mode where the bounded determinant alone is returned).
    """
    cfg = cfg or _spectral_cfg()
    status_f, left = _evolve(profile, lam, 0.0, match_at, LEFT_KERNEL, cfg)
    status_b, right = _evolve(profile, lam, 1.0, match_at, RIGHT_KERNEL, cfg)
    for status, frame in ((status_f, left), (status_b, right)):
        if status == 5:
            if _retry < 2:
                tighter = IntegratorConfig(
                    rtol=cfg.rtol * 1e-2, atol=cfg.atol * 1e-2, h_max=cfg.h_max
                )
                return evans_two_sided(
                    profile, lam, tighter, match_at, drop_radial, _retry + 1
                )
            raise FrameDegeneracy(
                f"frame drift {frame.max_drift:.2e} exceeded {DRIFT_LIMIT}"
            )
        if status != 0:
            raise FrameDegeneracy(f"frame integration failed with status {status}")
    det = complex(np.linalg.det(np.hstack([left.Q, right.Q])))
    if drop_radial:
        return EvansValue(
            mantissa=det, log_scale=0.0, normalization=f"two-sided@{match_at},no-radial"
        )
    r = left.logdet + right.logdet
    phase = cmath.exp(1j * r.imag)
    return EvansValue(
        mantissa=det * phase,
        log_scale=r.real,
        normalization=f"two-sided@{match_at},radial",
    )


def evans(profile, lam, cfg=None, match_at=0.5, drop_radial=False):
    """Evans value at ``lam`` (see :func:`evans_two_sided`).

    For real lam the value is real up to roundoff; conjugate symmetry
    D(conj lam) = conj D(lam) holds by realness of the coefficients.
    """
    return evans_two_sided(profile, lam, cfg, match_at, drop_radial)


def d0_direct(profile, cfg=None):
    """Zero-frequency Evans value by direct integration of the
    once-integrated lambda = 0 system (exact normalization, sign
    meaningful: equals alpha*nu/u0^2 times det dPsi)."""
    from .kernels import get_backend

    cfg = cfg or _spectral_cfg()
    p = profile.params
    status, d0, _ = get_backend().poly_d0(
        p.u0,
        p.e0,
        p.Gamma,
        p.alpha,
        p.nu,
        profile.c.c1,
        profile.c.c2,
        cfg.rtol,
        cfg.atol,
        cfg.h_max,
        cfg.blowup_threshold,
    )
    if status != 0:
        raise ZeroD0(f"zero-frequency integration failed with status {status}")
    return float(d0)


LAMBDA_LARGE_START = 10.0
STABILITY_CONSECUTIVE = 3
STABILITY_MAX_DOUBLINGS = 12


def stability_index(profile, cfg=None):
    """Parity of the number of unstable real eigenvalues: the sign of D at
    the origin times the stabilized sign of D at large real frequency.

    +1 means an even count (no parity obstruction to stability), -1 an odd
    count (instability).  Raises ZeroD0 when |D(0)| is numerically zero and
    NoLimit when the large-frequency sign fails to stabilize over
    STABILITY_CONSECUTIVE consecutive doublings.
    """
    cfg = cfg or _spectral_cfg()
    d_at = evans_two_sided(profile, 0.0, cfg)
    signs = []
    scale = None
    lam = LAMBDA_LARGE_START
    for _ in range(STABILITY_MAX_DOUBLINGS + 1):
        v = evans_two_sided(profile, lam, cfg)
        scale = max(scale or 0.0, abs(v.mantissa))
        signs.append(v.sign_real)
        if len(signs) >= STABILITY_CONSECUTIVE and len(
            set(signs[-STABILITY_CONSECUTIVE:])
        ) == 1 and signs[-1] != 0:
            break
        lam *= 2.0
    else:
        raise NoLimit(
            f"sign of D did not stabilize by lambda={lam/2:.0f}"
        )
    if abs(d_at.mantissa) <= 1e-12 * max(scale, 1e-300):
        raise ZeroD0("D(0) is numerically zero; the index is undefined")
    return int(d_at.sign_real * signs[-1])
