"""Reduction of the integrals of the subtracted terms to edge integrals.

A function ``f`` on the plane that is positively homogeneous in ``(x, h)``
is integrated over the shifted reference triangle ``T - xhat0`` by
continuation in ``h``: with ``r = |J0 x|`` every term of the (-1)-order
family has the form ``M(x) h^l / (r^2 + h^2)^(m/2)`` and integrates to

    sum_j s_j * int_{edge j} M(x) K_{l,m}(r, h) ds,
    K_{l,m}(r, h) = h * int_h^{sign(h) inf} u^(l-2) (r^2 + u^2)^(-m/2) du,

where ``s_j`` is the signed distance from ``xhat0`` to edge j. The kernels
below are written in forms free of cancellation for both small and large
``r / |h|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import graded_segment
from .subtraction import cubic_form_c, p2_vector, q1_vector, quadratic_form_a

# relative threshold below which |h| is treated as exactly zero
H_ZERO = 1e-14
# below this r/|h| the arcsinh kernels switch to their Maclaurin series
_SERIES_X = 0.6
_NTERMS = 44


@dataclass(frozen=True)
class Edge:
    """Oriented straight edge ``x(t) = P + t D``, t in [0, 1], of a contour around 0."""

    P: np.ndarray
    D: np.ndarray
    length: float
    s: float  # signed distance of the edge line from the origin (outward positive)


def polygon_edges(vertices):
    """Edges of a counterclockwise polygon given by its vertices (shifted coordinates)."""
    V = np.asarray(vertices, dtype=float)
    edges = []
    for k in range(len(V)):
        P, Q = V[k], V[(k + 1) % len(V)]
        D = Q - P
        L = float(np.hypot(D[0], D[1]))
        nu = np.array([D[1], -D[0]]) / L
        edges.append(Edge(P, D, L, float(P @ nu)))
    return edges


def triangle_edges(frame):
    """Edges 1, 2, 3 of the shifted reference triangle with the frame's signed distances."""
    x0 = frame.xhat0
    V = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]) - x0
    edges = polygon_edges(V)
    # use the exact signed distances rather than their recomputation
    return [Edge(e.P, e.D, e.length, float(s)) for e, s in zip(edges, frame.s)]


@dataclass(frozen=True)
class EdgeSample:
    x: np.ndarray  # shifted points, shape (k, 2)
    r: np.ndarray  # |J0 x|
    w: np.ndarray  # weights including the length element
    s: float


def _cross_norm(A, B):
    if len(A) == 2:
        return abs(float(A[0] * B[1] - A[1] * B[0]))
    return float(np.linalg.norm(np.cross(A, B)))


def edge_samples(edge, J0, h, n):
    """Graded quadrature on one edge in the metric of J0.

    The foot minimising ``|J0 x(t)|`` and the distance ``sqrt(m^2 + h^2)``
    set the grading; points are formed as ``x(c) + offset * D`` so that
    distances near the foot keep full relative precision.
    """
    A = J0 @ edge.P
    B = J0 @ edge.D
    alpha = float(B @ B)
    foot = -float(A @ B) / alpha
    m = _cross_norm(A, B) / math.sqrt(alpha)
    d = math.sqrt(m * m + h * h) / math.sqrt(alpha)
    rule = graded_segment(n, foot, max(d, 1e-300))
    c, off = rule.center, rule.offsets
    x = (edge.P + c * edge.D)[None, :] + off[:, None] * edge.D
    r = np.sqrt(alpha * (off + (c - foot)) ** 2 + m * m)
    return EdgeSample(x, r, rule.weights * edge.length, edge.s)


def _samples(frame, n, h):
    return [
        edge_samples(e, frame.J0, h, n) for e in triangle_edges(frame) if e.s != 0.0
    ]


# ---------------------------------------------------------------- series


def _binom_half(p, n):
    """Coefficients of (1 + y)^p, y = x^2, up to order n."""
    out, c = [], 1.0
    for k in range(n):
        out.append(c)
        c *= (p - k) / (k + 1)
    return np.array(out)


def _series_coeffs():
    # asinh(x) / x = sum a_k x^{2k}
    asinh_over_x = np.array(
        [(-1) ** k * math.comb(2 * k, k) / 4**k / (2 * k + 1) for k in range(_NTERMS + 2)]
    )
    sqrt1p = _binom_half(0.5, _NTERMS + 2)
    inv_sqrt = _binom_half(-0.5, _NTERMS + 2)
    inv_32 = _binom_half(-1.5, _NTERMS + 2)
    # g3 = sqrt(1+x^2) asinh(x) - x, divided by x^3
    prod = np.convolve(sqrt1p, asinh_over_x)[: _NTERMS + 2]
    prod[0] -= 1.0
    g3 = prod[1 : _NTERMS + 1]
    # g5 = 3 asinh(x) - (3x + 4x^3)(1+x^2)^{-3/2}, divided by x^5
    rat = 3.0 * inv_32.copy()
    rat[1:] += 4.0 * inv_32[:-1]
    g5 = (3.0 * asinh_over_x - rat)[2 : _NTERMS + 2]
    # e = asinh(x)/x - (1+x^2)^{-1/2}, divided by x^2
    e2 = (asinh_over_x - inv_sqrt)[1 : _NTERMS + 1]
    return g3, g5, e2


_G3, _G5, _E2 = _series_coeffs()


def _even_series(coeffs, x):
    y = x * x
    acc = np.zeros_like(x)
    for c in coeffs[::-1]:
        acc = acc * y + c
    return acc


def _split(x):
    small = x < _SERIES_X
    return small, ~small


# ---------------------------------------------------------------- kernels


def kernel_k03(r, h):
    """K_{0,3}: 1 / ((s + |h|)^2 s)."""
    a = abs(h)
    s = np.hypot(r, a)
    return 1.0 / ((s + a) ** 2 * s)


def kernel_k13(r, h):
    """K_{1,3}: h (s asinh(r/|h|) - r) / (r^3 s); zero at h = 0."""
    r = np.asarray(r, dtype=float)
    if h == 0.0:
        return np.zeros(r.shape)
    a = abs(h)
    s = np.hypot(r, a)
    x = r / a
    out = np.empty(r.shape)
    small, big = _split(x)
    out[small] = h * _even_series(_G3, x[small]) / (a**3 * np.hypot(x[small], 1.0))
    rb = r[big]
    out[big] = h * (s[big] * np.arcsinh(x[big]) - rb) / (rb**3 * s[big])
    return out


def kernel_k25(r, h):
    """K_{2,5}: |h| (2s + |h|) / (3 s^3 (s + |h|)^2)."""
    a = abs(h)
    s = np.hypot(r, a)
    return a * (2.0 * s + a) / (3.0 * s**3 * (s + a) ** 2)


def kernel_k15(r, h):
    """K_{1,5}: h (3 asinh(r/|h|) - (3 h^2 r + 4 r^3) / s^3) / (3 r^5); zero at h = 0."""
    r = np.asarray(r, dtype=float)
    if h == 0.0:
        return np.zeros(r.shape)
    a = abs(h)
    s = np.hypot(r, a)
    x = r / a
    out = np.empty(r.shape)
    small, big = _split(x)
    out[small] = h * _even_series(_G5, x[small]) / (3.0 * a**5)
    rb, sb = r[big], s[big]
    out[big] = h * (3.0 * np.arcsinh(x[big]) - (3.0 * h * h * rb + 4.0 * rb**3) / sb**3) / (
        3.0 * rb**5
    )
    return out


def kernel_i2(r, h):
    """(s - |h|) / (r^2 s) written as 1 / ((s + |h|) s)."""
    a = abs(h)
    s = np.hypot(r, a)
    return 1.0 / ((s + a) * s)


def kernel_elastic(r, h):
    """asinh(r/|h|) / r^3 - 1 / (r^2 s); at h = 0 the principal-value form log(r) / r^3."""
    r = np.asarray(r, dtype=float)
    if h == 0.0:
        return np.log(r) / r**3
    a = abs(h)
    x = r / a
    out = np.empty(r.shape)
    small, big = _split(x)
    out[small] = _even_series(_E2, x[small]) / a**3
    rb = r[big]
    out[big] = np.arcsinh(x[big]) / rb**3 - 1.0 / (rb**2 * np.hypot(rb, a))
    return out


def kernel_direct(ell, m, r, h):
    """K_{l,m} by adaptive quadrature of its defining integral; for checks only."""
    from scipy.integrate import quad

    r = np.atleast_1d(np.asarray(r, dtype=float))
    sgn = 1.0 if h > 0 else -1.0
    a = abs(h)
    out = np.empty(r.shape)
    for i, ri in enumerate(r):
        val, _ = quad(
            lambda u: u ** (ell - 2) * (ri * ri + u * u) ** (-m / 2.0), a, np.inf,
            epsabs=0.0, epsrel=1e-13, limit=400,
        )
        # int_h^{sgn inf} u^{l-2}(...) du = sgn^{l-1} int_|h|^inf
        out[i] = h * sgn ** (ell - 1) * val
    return out


# ---------------------------------------------------------------- integrals


def _is_zero_h(h, rho):
    return abs(h) < H_ZERO * rho


def i_minus2(exp, frame, n):
    """Integral of the (-2)-order term over the reference triangle."""
    h = frame.h
    if _is_zero_h(h, frame.rho):
        return 0.0
    total = 0.0
    for es in _samples(frame, n, h):
        total += es.s * np.dot(es.w, kernel_i2(es.r, h))
    return -math.copysign(1.0, h) * exp.phi0 * exp.n0_norm * total


def subtended_angle(frame):
    """Angle of the patch seen from the foot in the tangent plane: 2 pi, pi, vertex angle or 0."""
    from .solid_angle import limit_value

    return limit_value(frame.location, +1, frame.J0)


def i_minus2_limits(frame, exp):
    """One-sided limits (I(0+), I(0-)) of the (-2)-order integral."""
    ang = subtended_angle(frame) * exp.phi0
    return -ang, ang


def i_minus1(exp, frame, n):
    """Integral of the (-1)-order term over the reference triangle."""
    h = frame.h
    if _is_zero_h(h, frame.rho):
        h = 0.0
    total = 0.0
    u = exp.unit_normal
    w0 = exp.phi0 * exp.n0
    coef = 1.5 * exp.phi0 * exp.n0_norm
    for es in _samples(frame, n, h):
        x = es.x
        d1, d2 = x[:, 0], x[:, 1]
        Q1 = q1_vector(exp, d1, d2)
        N2 = p2_vector(exp, d1, d2) @ w0 + np.einsum("kc,kc->k", x @ exp.J0.T, Q1)
        f = N2 * kernel_k03(es.r, h)
        if h != 0.0:
            f = f - (Q1 @ u) * kernel_k13(es.r, h)
            f = f + coef * quadratic_form_a(exp, d1, d2) * kernel_k25(es.r, h)
            f = f + coef * cubic_form_c(exp, d1, d2) * kernel_k15(es.r, h)
        total += es.s * np.dot(es.w, f)
    return total


def elasticity_i_minus2(exp, frame, e, n):
    """Edge form of the (-2)-order term of (x - x0) . e / |x - x0|^3.

    At h = 0 the tangential part is the principal value with exclusion
    disks symmetric about the foot.
    """
    e = np.asarray(e, dtype=float)
    h = frame.h
    if _is_zero_h(h, frame.rho):
        h = 0.0
    w = exp.n0_norm * e
    first = 0.0
    second = 0.0
    for es in _samples(frame, n, h):
        first += es.s * np.dot(es.w, (es.x @ exp.J0.T @ w) * kernel_elastic(es.r, h))
        if h != 0.0:
            second += es.s * np.dot(es.w, kernel_i2(es.r, h))
    out = exp.phi0 * first
    if h != 0.0:
        out -= math.copysign(1.0, h) * exp.phi0 * float(exp.n0 @ e) * second
    return out


def residue(g, edges, n=32, J0=None):
    """Contour sum ``sum_j s_j int_j g ds`` of a (-2)-homogeneous function g.

    Equals the integral of g over the unit circle of directions (in the
    metric of J0) when the contour encloses the origin, so it does not
    depend on the contour.
    """
    J0 = np.eye(2) if J0 is None else J0
    total = 0.0
    for e in edges:
        if e.s == 0.0:
            continue
        es = edge_samples(e, J0, 0.0, n)
        total += e.s * np.dot(es.w, g(es.x))
    return total
