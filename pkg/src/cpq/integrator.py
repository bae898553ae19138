"""Single-patch and patch-pair double-layer integrals.

The single-patch integral maps the patch to the reference triangle,
subtracts the leading singular terms at the projection foot, integrates
the remainder with a collapsed Gauss rule and adds back the edge-reduced
integrals of the subtracted terms.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .continuation import H_ZERO, i_minus1, i_minus2
from .errors import CPQError, ReferenceMissing
from .geometry import DensityPolynomial, density_eval
from .projection import make_frame, project
from .quadrature import triangle_rule
from .subtraction import build_expansion, raw_integrand, regularized_integrand, smooth_remainder

# smallest edge-rule order; edge integrals are cheap and this keeps them
# well below the 2D error even for very small n
MIN_EDGE_ORDER = 16
# enlarged reference triangle used by the automatic level choice
AUTO_MARGIN = -0.5

FOUR_PI = 4.0 * math.pi


class RegularizationLevel(str, Enum):
    NONE = "none"
    T2 = "t2"
    T2T1 = "t2t1"
    AUTO = "auto"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {
            "none": cls.NONE,
            "t2": cls.T2,
            "subtract_t2": cls.T2,
            "t2t1": cls.T2T1,
            "subtract_t2_t1": cls.T2T1,
            "auto": cls.AUTO,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown regularization level {value!r}") from None

    @property
    def subtracts_t2(self):
        return self in (RegularizationLevel.T2, RegularizationLevel.T2T1)

    @property
    def subtracts_t1(self):
        return self is RegularizationLevel.T2T1


@dataclass
class IntegralResult:
    value: float | complex
    n: int
    N: int
    regularization: str
    frame: dict | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        v = self.value
        out = {
            "n": self.n,
            "N": self.N,
            "regularization": self.regularization,
            "frame": self.frame,
            "warnings": list(self.warnings),
        }
        if isinstance(v, complex) or np.iscomplexobj(v):
            out["value"] = [float(np.real(v)), float(np.imag(v))]
        else:
            out["value"] = float(v)
        return out


def _auto_level(frame):
    if abs(frame.h) < frame.rho and np.all(frame.s > AUTO_MARGIN):
        return RegularizationLevel.T2T1
    return RegularizationLevel.NONE


def _snap_height(frame):
    """Treat rounding-level heights as exactly on the surface."""
    if frame.h != 0.0 and abs(frame.h) < H_ZERO * frame.rho:
        return make_frame_like(frame, 0.0)
    return frame


def make_frame_like(frame, h):
    from dataclasses import replace

    return replace(frame, h=float(h))


def integrate_double_layer(tri, density, x0, n, level="auto", frame=None, edge_order=None):
    """Integral of ``(x - x0) . n(x) phi / |x - x0|^3`` over the patch.

    Parameters
    ----------
    tri : CurvedTriangle
    density : DensityPolynomial
    x0 : array_like, shape (3,)
    n : int
        Gauss order per dimension; the 2D rule has ``N = n**2`` nodes.
    level : {"none", "t2", "t2t1", "auto"}
    frame : SingularityFrame, optional
        Precomputed projection of ``x0``; skips the closest-point search.
    edge_order : int, optional
        Order of the graded edge rules, ``max(n, 16)`` by default.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    level = RegularizationLevel.parse(level)
    x0 = np.asarray(x0, dtype=float)
    rule = triangle_rule(n)
    tri.check_nondegenerate(rule.nodes)
    notes = []
    if level is RegularizationLevel.AUTO or level.subtracts_t2:
        if frame is None:
            frame = project(tri, x0)
        frame = _snap_height(frame)
        if level is RegularizationLevel.AUTO:
            level = _auto_level(frame)
        elif np.any(frame.s < AUTO_MARGIN):
            notes.append("projection foot lies far outside the patch; subtraction may not help")
    summary = frame.summary() if frame is not None else None

    if not level.subtracts_t2:
        f = raw_integrand(tri, density, x0, rule.nodes)
        return IntegralResult(float(np.dot(rule.weights, f)), n, n * n, level.value, summary, notes)

    exp = build_expansion(tri, density, frame)
    f = regularized_integrand(tri, density, frame, exp, rule.nodes, subtract_t1=level.subtracts_t1)
    value = float(np.dot(rule.weights, f))
    m = max(n, MIN_EDGE_ORDER) if edge_order is None else edge_order
    value += i_minus2(exp, frame, m)
    if level.subtracts_t1:
        value += i_minus1(exp, frame, m)
    return IntegralResult(value, n, n * n, level.value, summary, notes)


# ---------------------------------------------------------------- pairs


@dataclass(frozen=True)
class StaticKernel:
    """``(x - y) . n(x) / |x - y|^3`` with x on the inner patch, y on the outer."""

    name: str = "double_layer_static"


@dataclass(frozen=True)
class HelmholtzKernel:
    """Conormal derivative of ``exp(ik|x - y|) / (4 pi |x - y|)`` at the inner point."""

    k: float
    name: str = "helmholtz_double_layer"


def _inner_frame(triX, triY, yhat, y, identical):
    if identical:
        return make_frame(triX, yhat, h=0.0)
    return project(triX, y)


def _pair_node(triX, densX, triY, yhat, y, n, level, kernel, identical, rule):
    notes = []
    try:
        frame = None
        if RegularizationLevel.parse(level) is not RegularizationLevel.NONE:
            frame = _inner_frame(triX, triY, yhat, y, identical)
        res = integrate_double_layer(triX, densX, y, n, level, frame=frame)
    except CPQError as err:
        notes.append(f"projection failed ({err}); plain Gauss used at one outer node")
        res = integrate_double_layer(triX, densX, y, n, "none")
    notes.extend(res.warnings)
    if isinstance(kernel, StaticKernel):
        return res.value, res.regularization, notes
    # the r^-3 part of the conormal derivative has the opposite sign of the
    # double-layer integrand: (y - x) . n(x) = -(x - y) . n(x)
    value = -res.value / FOUR_PI
    k = kernel.k
    if k != 0.0:
        X = triX.map(rule.nodes)
        diff = X - y
        r = np.sqrt(np.einsum("kc,kc->k", diff, diff))
        nrm = triX.normal(rule.nodes, check=False)
        weight = rule.weights * density_eval(densX, rule.nodes)
        proj = np.einsum("kc,kc->k", diff, nrm)
        with np.errstate(divide="ignore", invalid="ignore"):
            smooth = 0.5 * k * k / r + smooth_remainder(r, k)
            # kernel uses (x_outer - x_inner) . n = -proj
            terms = np.where(r > 0.0, -proj * smooth, 0.0)
        value = value + np.dot(weight, terms) / FOUR_PI
    return value, res.regularization, notes


def integrate_pair(
    triX,
    triY,
    densX=None,
    densY=None,
    n=10,
    level="auto",
    kernel=None,
    threads=1,
):
    """Four-dimensional integral over an inner patch X and an outer patch Y.

    The outer integral over Y uses the collapsed Gauss rule (``N = n**2``
    nodes, ``M = N**2`` kernel evaluations in total); at each outer node
    the inner integral over X is computed by :func:`integrate_double_layer`.
    Per-node values are summed in a fixed order, so the result does not
    depend on ``threads``.
    """
    densX = densX or DensityPolynomial.constant()
    densY = densY or DensityPolynomial.constant()
    kernel = kernel or StaticKernel()
    identical = triX.same_as(triY)
    rule = triangle_rule(n)
    Yhat = rule.nodes
    Y = triY.map(Yhat)
    outer_w = rule.weights * np.linalg.norm(triY.normal(Yhat), axis=-1) * density_eval(densY, Yhat)

    def work(i):
        return _pair_node(triX, densX, triY, Yhat[i], Y[i], n, level, kernel, identical, rule)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(Yhat))))
    else:
        results = [work(i) for i in range(len(Yhat))]
    vals = np.array([r[0] for r in results])
    value = np.dot(outer_w, vals)
    levels = sorted({r[1] for r in results})
    notes = sorted({w for r in results for w in r[2]})
    value = complex(value) if np.iscomplexobj(value) else float(value)
    return IntegralResult(value, n, n * n, "+".join(levels), None, notes)


def bem_pair_entry(tri, density, k, n, level="t2t1", threads=1):
    """Self-interaction entry ``int_T phi(x) int_T dG/dn(y) phi(y) dS(y) dS(x)``.

    The ``r^-3`` part is regularized; the ``(k^2/2) r^-1`` part and the
    smooth remainder use the plain collapsed rule.
    """
    if k < 0:
        raise ValueError("wavenumber must be non-negative")
    res = integrate_pair(tri, tri, density, density, n, level, HelmholtzKernel(float(k)), threads)
    return complex(res.value)


# ---------------------------------------------------------------- convergence


@dataclass
class SingleProblem:
    tri: object
    density: object
    x0: np.ndarray
    case_id: str | None = None

    def evaluate(self, n, level):
        return integrate_double_layer(self.tri, self.density, self.x0, n, level)

    @staticmethod
    def points(n):
        return n * n


@dataclass
class PairProblem:
    triX: object
    triY: object
    densX: object = None
    densY: object = None
    case_id: str | None = None
    threads: int = 1

    def evaluate(self, n, level):
        return integrate_pair(
            self.triX, self.triY, self.densX, self.densY, n, level, threads=self.threads
        )

    @staticmethod
    def points(n):
        return n**4


@dataclass
class ConvergenceReport:
    rows: list
    slopes: dict
    reference: float

    def errors(self, level):
        rows = [r for r in self.rows if r["level"] == level]
        return np.array([r["N"] for r in rows]), np.array([r["abs_error"] for r in rows])


def fit_slope(N, err):
    """Least-squares slope of log(err) against log(N) over the largest decade of N."""
    N = np.asarray(N, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = (N >= N.max() / 10.0) & (err > 0.0)
    if keep.sum() < 2:
        keep = err > 0.0
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(N[keep]), np.log(err[keep]), 1)
    return float(slope)


def convergence_sweep(problem, n_list, levels=("none", "t2", "t2t1"), reference=None):
    """Error-versus-N table and fitted slopes for each regularization level."""
    if reference is None:
        if getattr(problem, "case_id", None) is None:
            raise ReferenceMissing("no reference value supplied")
        from .oracle import reference_value

        reference = reference_value(problem.case_id)
    rows = []
    for level in levels:
        lv = RegularizationLevel.parse(level).value
        for n in n_list:
            res = problem.evaluate(n, lv)
            rows.append(
                {
                    "n": int(n),
                    "N": int(problem.points(n)),
                    "level": lv,
                    "abs_error": float(abs(res.value - reference)),
                    "value": res.value,
                }
            )
    slopes = {}
    for level in {r["level"] for r in rows}:
        sel = [r for r in rows if r["level"] == level]
        slopes[level] = fit_slope([r["N"] for r in sel], [r["abs_error"] for r in sel])
    return ConvergenceReport(rows, slopes, reference)
