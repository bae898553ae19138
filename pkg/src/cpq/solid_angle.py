"""Closed-form solid angle of a planar triangle and its limiting values."""
from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateTriangle, VertexCoincidence

_ACOS_GUARD = 1e-14


def _clamped_acos(x):
    return math.acos(min(1.0, max(-1.0, x)))


def solid_angle_planar(a1, a2, a3, x0):
    """Signed solid angle subtended at ``x0`` by the triangle (a1, a2, a3).

    Positive on the side of the normal (a2 - a1) x (a3 - a2). Points in the
    plane of the triangle get 0, the average of the two one-sided limits.
    """
    a = [np.asarray(v, dtype=float) for v in (a1, a2, a3)]
    x0 = np.asarray(x0, dtype=float)
    n = np.cross(a[1] - a[0], a[2] - a[1])
    n_norm = np.linalg.norm(n)
    rho = max(np.linalg.norm(a[1] - a[0]), np.linalg.norm(a[2] - a[1]), np.linalg.norm(a[0] - a[2]))
    if n_norm <= 1e-14 * rho * rho:
        raise DegenerateTriangle("triangle has zero area")
    d = [v - x0 for v in a]
    lengths = [np.linalg.norm(v) for v in d]
    if min(lengths) <= 1e-14 * rho:
        raise VertexCoincidence("x0 coincides with a vertex")
    height = float(np.dot(x0 - a[0], n))
    if abs(height) <= 1e-14 * rho * n_norm:
        return 0.0
    # c_i: cosine of the angle at x0 opposite to vertex i
    c1 = np.dot(d[1], d[2]) / (lengths[1] * lengths[2])
    c2 = np.dot(d[0], d[2]) / (lengths[0] * lengths[2])
    c3 = np.dot(d[0], d[1]) / (lengths[0] * lengths[1])
    s1, s2, s3 = (math.sqrt(max(0.0, 1.0 - c * c)) for c in (c1, c2, c3))
    phi1 = _clamped_acos((c1 - c2 * c3) / (s2 * s3))
    phi2 = _clamped_acos((c2 - c1 * c3) / (s1 * s3))
    phi3 = _clamped_acos((c3 - c1 * c2) / (s1 * s2))
    return math.copysign(1.0, height) * (-math.pi + phi1 + phi2 + phi3)


def solid_angle_atan2(a1, a2, a3, x0):
    """Same quantity via the determinant/atan2 form; better conditioned near the plane."""
    r = [np.asarray(v, dtype=float) - np.asarray(x0, dtype=float) for v in (a1, a2, a3)]
    l1, l2, l3 = (np.linalg.norm(v) for v in r)
    # (x0 - a1) . n has the opposite sign of det(r1, r2, r3)
    det = -np.dot(r[0], np.cross(r[1], r[2]))
    den = l1 * l2 * l3 + np.dot(r[0], r[1]) * l3 + np.dot(r[0], r[2]) * l2 + np.dot(r[1], r[2]) * l1
    return 2.0 * math.atan2(det, den)


def vertex_angle(J0, vertex):
    """Angle at reference vertex ``vertex`` (1, 2 or 3) measured in the metric of J0."""
    dirs = {
        1: ((1.0, 0.0), (0.0, 1.0)),
        2: ((-1.0, 0.0), (-1.0, 1.0)),
        3: ((0.0, -1.0), (1.0, -1.0)),
    }[vertex]
    u, v = (np.asarray(J0) @ np.array(d) for d in dirs)
    return math.atan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v))


def limit_value(location, side, J0=None):
    """One-sided limit of the solid angle as x0 approaches the patch.

    ``side`` is +1 for the side the normal points to, -1 otherwise;
    ``J0`` is required for vertex locations.
    """
    sign = 1.0 if side > 0 else -1.0
    kind = location.kind
    if kind == "interior":
        return sign * 2.0 * math.pi
    if kind == "edge":
        return sign * math.pi
    if kind == "vertex":
        if J0 is None:
            J0 = np.eye(3, 2)
        return sign * vertex_angle(J0, location.index)
    return 0.0
