"""Gauss-Legendre, collapsed triangle and graded segment rules."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

# grading engages below this fraction of the interval length
GRADING_THRESHOLD = 0.1


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    # graded rules keep ``nodes - center`` exactly, for kernels that need it
    center: float | None = None
    offsets: np.ndarray | None = None

    def __len__(self):
        return len(self.weights)

    def integrate(self, f):
        return np.dot(self.weights, f(self.nodes))


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)
    return arrays


@lru_cache(maxsize=512)
def _gauss01(n):
    x, w = leggauss(n)
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    # enforce exact symmetry about 1/2
    nodes = 0.5 * (nodes + (1.0 - nodes[::-1]))
    weights = 0.5 * (weights + weights[::-1])
    return _frozen(nodes, weights)


def gauss_segment(n):
    """n-point Gauss-Legendre rule on [0, 1], exact up to degree 2n - 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    nodes, weights = _gauss01(int(n))
    return QuadratureRule(nodes, weights, "segment")


@lru_cache(maxsize=256)
def _triangle(n):
    u, wu = _gauss01(n)
    # collapse the unit square onto the triangle: x1 = u, x2 = v (1 - u)
    U, V = np.meshgrid(u, u, indexing="ij")
    W = np.outer(wu, wu) * (1.0 - U)
    nodes = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    return _frozen(nodes, W.ravel())


def triangle_rule(n):
    """Collapsed tensor-product Gauss rule on the reference triangle with n**2 nodes.

    Exact for polynomials of total degree <= 2n - 2; weights sum to 1/2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    nodes, weights = _triangle(int(n))
    return QuadratureRule(nodes, weights, "triangle")


def _panel(a, b, n):
    x, w = _gauss01(n)
    return a + (b - a) * x, (b - a) * w


def graded_segment(n, foot, d):
    """Rule on [0, 1] for integrands with a near singularity at ``foot +- i d``.

    Below ``GRADING_THRESHOLD`` the substitution ``t = c + d_eff sinh(u)``
    is applied around the nearest interval point ``c``, with plain Gauss in
    ``u`` on each side of ``c`` (``n`` nodes per side). Otherwise the result
    is plain Gauss split at the foot when it lies inside the interval.
    """
    if n < 2:
        raise ValueError("graded rule needs n >= 2")
    if not d > 0:
        raise ValueError("distance scale must be positive")
    c = min(max(foot, 0.0), 1.0)
    d_eff = float(np.hypot(d, foot - c))
    if d_eff >= GRADING_THRESHOLD:
        if 0.0 < c < 1.0:
            t1, w1 = _panel(0.0, c, n)
            t2, w2 = _panel(c, 1.0, n)
            t, w = np.r_[t1, t2], np.r_[w1, w2]
        else:
            t, w = _panel(0.0, 1.0, n)
        return QuadratureRule(t, w, "segment", c, t - c)
    parts_o, parts_w = [], []
    for lo, hi in ((0.0, c), (c, 1.0)):
        if hi - lo <= 0.0:
            continue
        ua = np.arcsinh((lo - c) / d_eff)
        ub = np.arcsinh((hi - c) / d_eff)
        u, wu = _panel(ua, ub, n)
        parts_o.append(d_eff * np.sinh(u))
        parts_w.append(wu * d_eff * np.cosh(u))
    offsets = np.concatenate(parts_o)
    return QuadratureRule(
        c + offsets, np.concatenate(parts_w), "graded-segment", c, offsets
    )
