"""Closest-point projection onto a patch and the resulting singularity frame."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AmbiguousProjection, DegenerateTriangle, NoConvergence

SQRT2_2 = math.sqrt(2.0) / 2.0

# cubic barycentric lattice: vertices, centroid and points along the edges
_STARTS = np.array([(i / 3, j / 3) for i in range(4) for j in range(4 - i)])


class Location(NamedTuple):
    kind: str  # interior, edge, vertex or exterior
    index: int | None = None  # 1-based edge or vertex number

    def __str__(self):
        return self.kind if self.index is None else f"{self.kind} {self.index}"


# vertex shared by each pair of edges (edge 1: a1a2, edge 2: a2a3, edge 3: a3a1)
_VERTEX_OF_EDGES = {frozenset((1, 3)): 1, frozenset((1, 2)): 2, frozenset((2, 3)): 3}


def signed_edge_distances(xhat0):
    x, y = float(xhat0[0]), float(xhat0[1])
    return np.array([y, SQRT2_2 * (1.0 - x - y), x])


@dataclass(frozen=True, eq=False)
class SingularityFrame:
    xhat0: np.ndarray
    foot: np.ndarray
    h: float
    n0: np.ndarray
    J0: np.ndarray
    s: np.ndarray
    location: Location
    rho: float

    @property
    def n0_norm(self):
        return float(np.linalg.norm(self.n0))

    @property
    def unit_normal(self):
        return self.n0 / self.n0_norm

    def summary(self):
        return {
            "xhat0": [float(v) for v in self.xhat0],
            "h": float(self.h),
            "location": str(self.location),
            "s": [float(v) for v in self.s],
        }


def classify(s, tol_geo=1e-10):
    """Location of a preimage from its signed edge distances."""
    s = np.asarray(s)
    if np.any(s < -tol_geo):
        return Location("exterior")
    on = [j + 1 for j in range(3) if abs(s[j]) <= tol_geo]
    if not on:
        return Location("interior")
    if len(on) == 1:
        return Location("edge", on[0])
    return Location("vertex", _VERTEX_OF_EDGES[frozenset(on[:2])])


def make_frame(tri, xhat0, x0=None, h=None, tol_geo=1e-10):
    """Frame at a known preimage; ``h`` is computed from ``x0`` when not given."""
    xhat0 = np.array(xhat0, dtype=float)
    foot = tri.map(xhat0)
    J0 = tri.jacobian(xhat0)
    n0 = np.cross(J0[:, 0], J0[:, 1])
    if np.linalg.norm(n0) < 1e-14 * tri.diameter**2:
        raise DegenerateTriangle(f"Jacobian is rank deficient at {xhat0.tolist()}")
    if h is None:
        h = float(np.dot(np.asarray(x0, float) - foot, n0) / np.linalg.norm(n0))
    s = signed_edge_distances(xhat0)
    return SingularityFrame(xhat0, foot, float(h), n0, J0, s, classify(s, tol_geo), tri.diameter)


def _newton(tri, x0, X, tol, max_iter):
    """Damped Newton on grad(1/2 |F - x0|^2) = J^T (F - x0) for a batch of starts."""
    F11, F12, F22 = tri.hessian_vectors
    X = X.copy()
    k = len(X)
    done = np.zeros(k, dtype=bool)
    gnorm = np.full(k, np.inf)
    for _ in range(max_iter):
        r = tri.map(X) - x0
        J = tri.jacobian(X)
        g = np.einsum("kci,kc->ki", J, r)
        gnorm = np.linalg.norm(g, axis=1)
        done |= gnorm <= tol
        if done.all():
            break
        H = np.einsum("kci,kcj->kij", J, J)
        H[:, 0, 0] += r @ F11
        H[:, 0, 1] += r @ F12
        H[:, 1, 0] += r @ F12
        H[:, 1, 1] += r @ F22
        det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
        spd = (H[:, 0, 0] > 0) & (det > 0)
        # Gauss-Newton matrix where the full Hessian is not positive definite
        GN = np.einsum("kci,kcj->kij", J, J)
        H = np.where(spd[:, None, None], H, GN)
        step = -np.linalg.solve(H, g[..., None])[..., 0]
        f_old = 0.5 * np.einsum("kc,kc->k", r, r)
        active = ~done
        lam = np.ones(k)
        for _ in range(40):
            trial = X + lam[:, None] * step
            rt = tri.map(trial) - x0
            f_new = 0.5 * np.einsum("kc,kc->k", rt, rt)
            ok = (f_new <= f_old * (1.0 + 1e-13)) | ~active
            if ok.all():
                break
            lam = np.where(ok, lam, 0.5 * lam)
        X[active] = X[active] + lam[active, None] * step[active]
        tiny = np.linalg.norm(lam[:, None] * step, axis=1) <= 1e-15 * (1.0 + np.linalg.norm(X, axis=1))
        # stalled at rounding level: accept when already near stationarity
        done |= tiny & (gnorm <= 1e3 * tol)
    return X, gnorm, done


def project(tri, x0, tol=None, max_iter=50, tol_geo=1e-10, check_ambiguity=True):
    """Preimage of the closest point of the (extended) patch to ``x0``.

    Raises NoConvergence when no start reaches stationarity and
    AmbiguousProjection when two distinct local minima are equally close.
    """
    x0 = np.asarray(x0, dtype=float)
    rho = tri.diameter
    if tol is None:
        tol = 1e-13 * rho * rho
    if tri.degree == 1:
        # the foot of a plane is found exactly by least squares
        J = tri.jacobian(np.zeros(2))
        xhat0, *_ = np.linalg.lstsq(J, x0 - tri.control_points[0], rcond=None)
        return make_frame(tri, xhat0, x0=x0, tol_geo=tol_geo)

    starts = _STARTS
    d0 = np.linalg.norm(tri.map(starts) - x0, axis=1)
    if not check_ambiguity:
        starts = starts[np.argsort(d0)[:1]]
    X, gnorm, done = _newton(tri, x0, starts, tol, max_iter)
    if not done.any():
        best = X[np.argmin(gnorm)]
        raise NoConvergence(f"projection did not converge in {max_iter} iterations", best)
    X, gnorm = X[done], gnorm[done]
    dist = np.linalg.norm(tri.map(X) - x0, axis=1)
    # equal distances up to rounding: prefer the most stationary point
    key = np.round(dist / (1e-12 * rho))
    order = np.lexsort((gnorm, key))
    X, dist = X[order], dist[order]
    best = X[0]
    if check_ambiguity:
        for xi, di in zip(X[1:], dist[1:]):
            if np.linalg.norm(xi - best) > 1e-6 and abs(di - dist[0]) <= 1e-10 * rho:
                if _is_local_min(tri, x0, xi) and _is_local_min(tri, x0, best):
                    if np.all(signed_edge_distances(xi) > -1.0):
                        raise AmbiguousProjection(
                            "two distinct closest points at equal distance", [best, xi]
                        )
    return make_frame(tri, best, x0=x0, tol_geo=tol_geo)


def _is_local_min(tri, x0, xhat):
    F11, F12, F22 = tri.hessian_vectors
    r = tri.map(xhat) - x0
    J = tri.jacobian(xhat)
    H = J.T @ J + np.array([[r @ F11, r @ F12], [r @ F12, r @ F22]])
    return bool(np.all(np.linalg.eigvalsh(H) > 0))
