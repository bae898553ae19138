"""Local Taylor data at the singularity and the subtracted singular terms.

With ``d = xhat - xhat0`` and ``u = n0 / |n0|`` the exact identity
``F(xhat) - x0 = J0 d + P2(d) - h u`` (F is at most quadratic) gives

    R^2 = R1^2 + h A2 + C3 + |P2|^2,   R1^2 = |J0 d|^2 + h^2,

with ``A2 = -2 u . P2`` and ``C3 = 2 (J0 d) . P2``. Expanding ``V R^-3``
in homogeneous pieces yields the (-2)- and (-1)-homogeneous terms ``T2``
and ``T1`` removed from the integrand before Gauss quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import density_eval, density_grad


@dataclass(frozen=True, eq=False)
class LocalExpansion:
    phi0: float
    n0: np.ndarray
    n0_norm: float
    J0: np.ndarray
    F11: np.ndarray
    F12: np.ndarray
    F22: np.ndarray
    dphi: np.ndarray
    dn1: np.ndarray
    dn2: np.ndarray
    a: np.ndarray
    c: np.ndarray

    @property
    def unit_normal(self):
        return self.n0 / self.n0_norm


def build_expansion(tri, density, frame):
    J0 = frame.J0
    F1, F2 = J0[:, 0], J0[:, 1]
    F11, F12, F22 = tri.hessian_vectors
    n0 = frame.n0
    n0_norm = float(np.linalg.norm(n0))
    u = n0 / n0_norm
    a = np.array([-u @ F11, -2.0 * (u @ F12), -u @ F22])
    c = np.array(
        [
            F1 @ F11,
            2.0 * (F1 @ F12) + F2 @ F11,
            F1 @ F22 + 2.0 * (F2 @ F12),
            F2 @ F22,
        ]
    )
    return LocalExpansion(
        phi0=float(density_eval(density, frame.xhat0)),
        n0=n0,
        n0_norm=n0_norm,
        J0=J0,
        F11=np.asarray(F11),
        F12=np.asarray(F12),
        F22=np.asarray(F22),
        dphi=density_grad(density, frame.xhat0),
        dn1=np.cross(F11, F2) + np.cross(F1, F12),
        dn2=np.cross(F12, F2) + np.cross(F1, F22),
        a=a,
        c=c,
    )


def p2_vector(exp, d1, d2):
    return (
        0.5 * d1[..., None] ** 2 * exp.F11
        + 0.5 * d2[..., None] ** 2 * exp.F22
        + (d1 * d2)[..., None] * exp.F12
    )


def q1_vector(exp, d1, d2):
    return (exp.dphi[0] * d1 + exp.dphi[1] * d2)[..., None] * exp.n0 + exp.phi0 * (
        d1[..., None] * exp.dn1 + d2[..., None] * exp.dn2
    )


def quadratic_form_a(exp, d1, d2):
    a = exp.a
    return a[0] * d1 * d1 + a[1] * d1 * d2 + a[2] * d2 * d2


def cubic_form_c(exp, d1, d2):
    c = exp.c
    return c[0] * d1**3 + c[1] * d1 * d1 * d2 + c[2] * d1 * d2 * d2 + c[3] * d2**3


def t_minus2(exp, dx, h):
    """The (-2)-homogeneous term; identically zero for h == 0."""
    dx = np.asarray(dx, dtype=float)
    Jd = dx @ exp.J0.T
    R1sq = np.einsum("...c,...c->...", Jd, Jd) + h * h
    if h == 0.0:
        return np.zeros(R1sq.shape)
    return -h * exp.phi0 * exp.n0_norm / R1sq**1.5


def t_minus1(exp, dx, h):
    """The (-1)-homogeneous term."""
    dx = np.asarray(dx, dtype=float)
    d1, d2 = dx[..., 0], dx[..., 1]
    Jd = dx @ exp.J0.T
    R1sq = np.einsum("...c,...c->...", Jd, Jd) + h * h
    P1 = Jd - h * exp.unit_normal
    num = np.einsum("...c,c->...", p2_vector(exp, d1, d2), exp.phi0 * exp.n0)
    num = num + np.einsum("...c,...c->...", P1, q1_vector(exp, d1, d2))
    out = num / R1sq**1.5
    if h != 0.0:
        scale = 1.5 * exp.phi0 * exp.n0_norm * h / R1sq**2.5
        out = out + scale * (h * quadratic_form_a(exp, d1, d2) + cubic_form_c(exp, d1, d2))
    return out


def regularized_integrand(tri, density, frame, exp, xhat, subtract_t1=True):
    """Mapped double-layer integrand minus T2 (and T1).

    The offset ``F(xhat) - x0`` is formed from the exact quadratic Taylor
    expansion about the foot so that small differences keep full precision.
    """
    xhat = np.asarray(xhat, dtype=float)
    dx = xhat - frame.xhat0
    d1, d2 = dx[..., 0], dx[..., 1]
    h = frame.h
    P = dx @ exp.J0.T + p2_vector(exp, d1, d2) - h * exp.unit_normal
    Rsq = np.einsum("...c,...c->...", P, P)
    nhat = tri.normal(xhat, check=False)
    phi = density_eval(density, xhat)
    with np.errstate(divide="ignore", invalid="ignore"):
        full = np.einsum("...c,...c->...", P, nhat) * phi / Rsq**1.5
        out = full - t_minus2(exp, dx, h)
        if subtract_t1:
            out = out - t_minus1(exp, dx, h)
    return np.where(Rsq > 0.0, out, 0.0)


def raw_integrand(tri, density, x0, xhat):
    """Double-layer integrand mapped to the reference triangle, no subtraction."""
    diff = tri.map(xhat) - np.asarray(x0, dtype=float)
    Rsq = np.einsum("...c,...c->...", diff, diff)
    nhat = tri.normal(xhat, check=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.einsum("...c,...c->...", diff, nhat) * density_eval(density, xhat) / Rsq**1.5
    # a node landing on x0 itself is dropped
    return np.where(Rsq > 0.0, out, 0.0)


_SERIES_TERMS = 30
_SERIES_SWITCH = 0.5
# S(r) = (ik)^3 sum_m -(m + 2) z^m / (m + 3)!,  z = ikr
_S_COEFFS = np.array([-(m + 2) / math.factorial(m + 3) for m in range(_SERIES_TERMS)])


def _s_series(r, k):
    z = 1j * k * r
    acc = np.zeros(np.shape(r), dtype=complex)
    for coeff in _S_COEFFS[::-1]:
        acc = acc * z + coeff
    return (1j * k) ** 3 * acc


def _s_direct(r, k):
    ikr = 1j * k * r
    return (-1.0 - 0.5 * (k * r) ** 2 + np.exp(ikr) * (1.0 - ikr)) / r**3


def smooth_remainder(r, k, method="auto"):
    """S(r) = (-1 - k^2 r^2 / 2 + e^{ikr} (1 - ikr)) / r^3."""
    r = np.asarray(r, dtype=float)
    if method == "series":
        return _s_series(r, k)
    if method == "direct":
        return _s_direct(r, k)
    small = np.abs(k * r) < _SERIES_SWITCH
    out = np.empty(r.shape, dtype=complex)
    out[small] = _s_series(r[small], k)
    big = ~small
    out[big] = _s_direct(r[big], k)
    return out


def helmholtz_split(r, k):
    """Three-way split of the conormal-derivative factor (1 - ikr) e^{ikr} / r^3.

    Returns ``(r^-3, (k^2/2) r^-1, S(r))``; their sum times
    ``(x - y) . n(y) / (4 pi)`` is the conormal derivative of the Green's function.
    """
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 / r**3, 0.5 * k * k / r, smooth_remainder(r, k)


def dgdn_factor(r, k):
    r = np.asarray(r, dtype=float)
    ikr = 1j * k * r
    return (1.0 - ikr) * np.exp(ikr) / r**3
