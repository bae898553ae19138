"""Reference triangle, Lagrange shape functions and curved triangle maps.

The reference triangle is ``{(x1, x2): x1 >= 0, x2 >= 0, x1 + x2 <= 1}``
with vertices (0,0), (1,0), (0,1). Quadratic patches use the six-node
Gmsh ordering: three vertices followed by the midpoints of edges 12, 23, 31.

All functions accept a single reference point of shape ``(2,)`` or a stack
of points of shape ``(..., 2)`` and broadcast accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import DegenerateTriangle

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REFERENCE_NODES = np.array(
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]
)

# gradients of the barycentric coordinates lambda_1, lambda_2, lambda_3
_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
# (i, j) barycentric pairs of the edge-midpoint functions phi_4, phi_5, phi_6
_MID_PAIRS = ((0, 1), (1, 2), (0, 2))


def _barycentric(xhat):
    xhat = np.asarray(xhat, dtype=float)
    x1, x2 = xhat[..., 0], xhat[..., 1]
    return np.stack([1.0 - x1 - x2, x1, x2], axis=-1)


def _check_degree(degree):
    if degree not in (1, 2):
        raise ValueError(f"unsupported degree {degree}; expected 1 or 2")


def shape_values(degree, xhat):
    """Lagrange basis values, shape ``(..., 3)`` for degree 1, ``(..., 6)`` for 2."""
    _check_degree(degree)
    lam = _barycentric(xhat)
    if degree == 1:
        return lam
    out = np.empty(lam.shape[:-1] + (6,))
    out[..., :3] = lam * (2.0 * lam - 1.0)
    for k, (i, j) in enumerate(_MID_PAIRS):
        out[..., 3 + k] = 4.0 * lam[..., i] * lam[..., j]
    return out


def shape_gradients(degree, xhat):
    """Basis gradients with respect to (x1, x2), shape ``(..., k, 2)``."""
    _check_degree(degree)
    lam = _barycentric(xhat)
    if degree == 1:
        return np.broadcast_to(_DLAMBDA, lam.shape[:-1] + (3, 2)).copy()
    out = np.empty(lam.shape[:-1] + (6, 2))
    for i in range(3):
        out[..., i, :] = (4.0 * lam[..., i, None] - 1.0) * _DLAMBDA[i]
    for k, (i, j) in enumerate(_MID_PAIRS):
        out[..., 3 + k, :] = 4.0 * (
            lam[..., j, None] * _DLAMBDA[i] + lam[..., i, None] * _DLAMBDA[j]
        )
    return out


def shape_hessians(degree):
    """Constant second derivatives of the basis, shape ``(k, 2, 2)``."""
    _check_degree(degree)
    if degree == 1:
        return np.zeros((3, 2, 2))
    out = np.empty((6, 2, 2))
    for i in range(3):
        out[i] = 4.0 * np.outer(_DLAMBDA[i], _DLAMBDA[i])
    for k, (i, j) in enumerate(_MID_PAIRS):
        out[3 + k] = 4.0 * (
            np.outer(_DLAMBDA[i], _DLAMBDA[j]) + np.outer(_DLAMBDA[j], _DLAMBDA[i])
        )
    return out


@dataclass(frozen=True, eq=False)
class CurvedTriangle:
    """Planar (degree 1) or quadratic (degree 2) triangular patch in 3-space."""

    degree: int
    control_points: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_degree(self.degree)
        pts = np.array(self.control_points, dtype=float)
        expected = 3 if self.degree == 1 else 6
        if pts.shape != (expected, 3):
            raise ValueError(
                f"degree {self.degree} needs {expected} control points in 3-space, "
                f"got array of shape {pts.shape}"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "control_points", pts)

    @classmethod
    def planar(cls, a1, a2, a3):
        return cls(1, np.array([a1, a2, a3], dtype=float))

    def map(self, xhat):
        return shape_values(self.degree, xhat) @ self.control_points

    def jacobian(self, xhat):
        """Columns are the partial derivatives F_x1 and F_x2, shape ``(..., 3, 2)``."""
        # the map is at most quadratic, so its Jacobian is affine in xhat
        xhat = np.asarray(xhat, dtype=float)
        J00 = self._jacobian_origin
        F11, F12, F22 = self.hessian_vectors
        x1, x2 = xhat[..., 0, None], xhat[..., 1, None]
        J = np.empty(xhat.shape[:-1] + (3, 2))
        J[..., 0] = J00[:, 0] + x1 * F11 + x2 * F12
        J[..., 1] = J00[:, 1] + x1 * F12 + x2 * F22
        return J

    @cached_property
    def _jacobian_origin(self):
        grads = shape_gradients(self.degree, np.zeros(2))
        return self.control_points.T @ grads

    def normal(self, xhat, check=True):
        """Unnormalised normal F_x1 x F_x2; its length is the area element."""
        J = self.jacobian(xhat)
        nhat = np.cross(J[..., 0], J[..., 1])
        if check:
            tol = 1e-14 * self.diameter**2
            if np.any(np.linalg.norm(nhat, axis=-1) < tol):
                raise DegenerateTriangle("Jacobian is rank deficient")
        return nhat

    @cached_property
    def hessian_vectors(self):
        """(F_11, F_12, F_22): constant second-derivative vectors of the map."""
        H = np.einsum("kc,kij->ijc", self.control_points, shape_hessians(self.degree))
        out = (H[0, 0].copy(), H[0, 1].copy(), H[1, 1].copy())
        for v in out:
            v.setflags(write=False)
        return out

    @cached_property
    def diameter(self):
        # max pairwise distance over a 15 x 15 barycentric lattice
        pts = self.map(_lattice(15))
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))

    @property
    def vertices(self):
        return self.control_points[:3]

    def translated(self, shift):
        return CurvedTriangle(self.degree, self.control_points + np.asarray(shift, float))

    def check_nondegenerate(self, nodes):
        self.normal(nodes, check=True)

    def same_as(self, other):
        return (
            self is other
            or (
                self.degree == other.degree
                and np.array_equal(self.control_points, other.control_points)
            )
        )


@lru_cache(maxsize=None)
def _lattice(m):
    pts = [(i / (m - 1), j / (m - 1)) for i in range(m) for j in range(m - i)]
    return np.array(pts)


def bent_edge_triangle(a=0.6, b=0.7, c=0.5):
    """Quadratic test patch whose only curved node is the midpoint (a, b, c) of edge 23."""
    return CurvedTriangle(
        2,
        np.array(
            [
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.5, 0.0, 0.0],
                [a, b, c],
                [0.0, 0.5, 0.0],
            ]
        ),
    )


@dataclass(frozen=True, eq=False)
class DensityPolynomial:
    """Polynomial density on the reference triangle.

    Degree 0 stores a single constant; degrees 1 and 2 store nodal values
    on the Lagrange basis of the same degree.
    """

    degree: int
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.atleast_1d(np.array(self.coefficients, dtype=float))
        expected = {0: 1, 1: 3, 2: 6}.get(self.degree)
        if expected is None:
            raise ValueError(f"unsupported density degree {self.degree}")
        if coeffs.shape != (expected,):
            raise ValueError(f"degree {self.degree} density needs {expected} coefficients")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def constant(cls, value=1.0):
        return cls(0, [value])

    @classmethod
    def basis(cls, degree, index):
        """The single Lagrange function of the given degree (0-based index)."""
        coeffs = np.zeros(3 if degree == 1 else 6)
        coeffs[index] = 1.0
        return cls(degree, coeffs)

    @property
    def is_constant(self):
        return self.degree == 0 or bool(np.all(self.coefficients == self.coefficients[0]))

    def __call__(self, xhat):
        return density_eval(self, xhat)


def shape_values_any(degree, xhat):
    if degree == 0:
        xhat = np.asarray(xhat, dtype=float)
        return np.ones(xhat.shape[:-1] + (1,))
    return shape_values(degree, xhat)


def map_point(tri, xhat):
    return tri.map(xhat)


def jacobian(tri, xhat):
    return tri.jacobian(xhat)


def normal(tri, xhat):
    return tri.normal(xhat)


def second_derivatives(tri):
    return tri.hessian_vectors


def diameter(tri):
    return tri.diameter


def density_eval(density, xhat):
    return shape_values_any(density.degree, xhat) @ density.coefficients


def density_grad(density, xhat):
    xhat = np.asarray(xhat, dtype=float)
    if density.degree == 0:
        return np.zeros(xhat.shape)
    grads = shape_gradients(density.degree, xhat)
    return np.einsum("k,...kd->...d", density.coefficients, grads)
