"""Brute-force reference integrals, independent of the subtraction machinery.

Two strategies integrate a function over the reference triangle:

* ``polar``: split the triangle into three (signed) sub-triangles with apex
  at the singular point and apply a Duffy map, with geometric grading
  toward the apex and, for thin sub-triangles, toward the foot on the base;
* ``quadtree``: globally adaptive 4-way subdivision driven by the
  difference of two collapsed Gauss rules.

Pair integrals use the polar strategy inside and either a tanh-sinh rule
on the Duffy square or adaptive subdivision outside. Values are computed
offline and stored in a JSON file consumed by the tests.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import math
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import CPQError, ReferenceMissing, ToleranceNotReached
from .geometry import DensityPolynomial, density_eval
from .quadrature import _gauss01

_TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass
class OracleResult:
    value: complex | float
    est_error: float
    method: str
    evaluations: int = 0
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------- polar


def _geometric_breaks(smallest, ratio):
    """[0, r^K, ..., r, 1] with r^K <= smallest."""
    k = int(math.ceil(math.log(smallest) / math.log(ratio)))
    k = min(max(k, 1), 80)
    return np.concatenate([[0.0], ratio ** np.arange(k, -1, -1)])


def _composite(breaks, q):
    x, w = _gauss01(q)
    a, b = breaks[:-1, None], breaks[1:, None]
    return (a + (b - a) * x).ravel(), ((b - a) * w).ravel()


def _t_breaks(foot, eps, ratio):
    """Breakpoints in [0, 1] graded geometrically toward ``foot`` at scale ``eps``."""
    c = min(max(foot, 0.0), 1.0)
    pts = {0.0, 1.0, c}
    d = eps
    while d < 1.0:
        for v in (c - d, c + d):
            if 0.0 < v < 1.0:
                pts.add(v)
        d /= ratio
    return np.array(sorted(pts))


def polar_rule(p, scale=0.0, q=16, ratio=0.15, metric=None):
    """Nodes and signed weights integrating over the reference triangle.

    ``p`` is the apex; ``scale`` is the near-singularity distance in
    reference coordinates (0 for an on-surface point). ``metric`` is an
    optional 2x2 (or 3x2) matrix measuring lengths, used to convert
    ``scale`` into the Duffy radial variable.
    """
    p = np.asarray(p, dtype=float)
    nodes, weights = [], []
    for k in range(3):
        a, b = _TRI[k] - p, _TRI[(k + 1) % 3] - p
        det = a[0] * b[1] - a[1] * b[0]
        base = b - a
        Lb = math.hypot(*base)
        if abs(det) <= 1e-15 * Lb * Lb:
            continue
        va, vb = (a, b) if metric is None else (metric @ a, metric @ b)
        vmax = max(np.linalg.norm(va), np.linalg.norm(vb))
        if scale > 0:
            s_small = min(max(0.01 * scale / vmax, 1e-30), 0.2)
            s, ws = _composite(_geometric_breaks(s_small, ratio), q)
        else:
            # on-surface: the Duffy integrand is analytic in s
            s, ws = _composite(np.array([0.0, 0.3, 1.0]), q)
        eps = abs(det) / (Lb * Lb)
        if eps < 0.25:
            foot = -float(a @ base) / (Lb * Lb)
            t, wt = _composite(_t_breaks(foot, 0.05 * eps, ratio), q)
        else:
            t, wt = _composite(np.array([0.0, 0.5, 1.0]), q)
        S, T = np.meshgrid(s, t, indexing="ij")
        V = (1.0 - T)[..., None] * a + T[..., None] * b
        X = p + S[..., None] * V
        W = np.outer(ws, wt) * S * det
        nodes.append(X.reshape(-1, 2))
        weights.append(W.ravel())
    if not nodes:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


def integrate_polar(g, p, scale=0.0, tol=1e-12, q=16, metric=None, raise_on_fail=True):
    """Polar-graded integral of ``g`` with an error estimate from two orders."""
    X1, W1 = polar_rule(p, scale, q, metric=metric)
    X2, W2 = polar_rule(p, scale, q + 8, metric=metric)
    v1 = np.dot(W1, g(X1))
    v2 = np.dot(W2, g(X2))
    est = float(abs(v2 - v1))
    res = OracleResult(v2, est, "polar", len(W1) + len(W2))
    if raise_on_fail and est > tol * max(1.0, abs(v2)):
        raise ToleranceNotReached("polar rule did not reach tolerance", v2, est)
    return res


# ---------------------------------------------------------------- quadtree


def _cell_rule(q):
    x, w = _gauss01(q)
    U, V = np.meshgrid(x, x, indexing="ij")
    nodes = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    return nodes, (np.outer(w, w) * (1.0 - U)).ravel()


_MIN_AREA = 1e-26
_LOW = _cell_rule(7)
_HIGH = _cell_rule(10)


def _cell_eval(g, tri):
    a, b, c = tri
    M = np.column_stack([b - a, c - a])
    area2 = abs(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    n_lo, n_hi = len(_LOW[1]), len(_HIGH[1])
    X = np.concatenate([_LOW[0], _HIGH[0]]) @ M.T + a
    f = g(X)
    lo = np.dot(_LOW[1], f[:n_lo]) * area2
    hi = np.dot(_HIGH[1], f[n_lo:]) * area2
    err = abs(hi - lo)
    if area2 < _MIN_AREA:
        # rounding-level cells: their whole contribution is below any tolerance
        err = 0.0
    return hi, err, n_lo + n_hi


def _children(tri):
    a, b, c = tri
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]


def integrate_quadtree(g, tol=1e-12, max_cells=60_000, raise_on_fail=True, domain=None):
    """Globally adaptive subdivision until the summed estimate is below ``tol``."""
    root = tuple(np.array(v, float) for v in (_TRI if domain is None else domain))
    val, err, evals = _cell_eval(g, root)
    heap = [(-err, 0, root, val)]
    total_val, total_err = val, err
    counter = 1
    while total_err > tol * max(1.0, abs(total_val)) and counter < max_cells:
        neg_err, _, tri, v = heapq.heappop(heap)
        total_val -= v
        total_err += neg_err
        for child in _children(tri):
            cv, ce, ne = _cell_eval(g, child)
            evals += ne
            total_val += cv
            total_err += ce
            heapq.heappush(heap, (-ce, counter, child, cv))
            counter += 1
        # refresh the running sums occasionally to avoid drift
        if counter % 4096 == 0:
            total_val = sum(item[3] for item in heap)
            total_err = sum(-item[0] for item in heap)
    total_val = sum(item[3] for item in heap)
    total_err = float(sum(-item[0] for item in heap))
    res = OracleResult(total_val, total_err, "quadtree", evals, {"cells": len(heap)})
    if raise_on_fail and total_err > tol * max(1.0, abs(total_val)):
        raise ToleranceNotReached("adaptive subdivision hit the cell limit", total_val, total_err)
    return res


# ---------------------------------------------------------------- principal value


def principal_value(g, p, eps_list=(1e-3, 1e-4, 1e-5), q=20, metric=None):
    """Principal value about ``p`` with exclusion disks, extrapolated in the radius.

    Disks are measured with ``metric`` (identity by default). The value
    with radius eps behaves like ``PV + c * eps`` for smooth densities,
    so a linear Richardson step on the two smallest radii is applied.
    """
    p = np.asarray(p, dtype=float)
    Mt = np.eye(2) if metric is None else np.asarray(metric, float)
    vals = []
    for eps in eps_list:
        total = 0.0
        for k in range(3):
            a, b = _TRI[k] - p, _TRI[(k + 1) % 3] - p
            det = a[0] * b[1] - a[1] * b[0]
            if abs(det) < 1e-15:
                continue
            base = b - a
            Lb2 = float(base @ base)
            epsb = abs(det) / Lb2
            if epsb < 0.25:
                t, wt = _composite(_t_breaks(-float(a @ base) / Lb2, 0.05 * epsb, 0.15), q)
            else:
                t, wt = _composite(np.array([0.0, 0.5, 1.0]), q)
            V = (1.0 - t)[:, None] * a + t[:, None] * b
            vlen = np.linalg.norm(V @ Mt.T, axis=1)
            s0 = eps / vlen
            x, w = _gauss01(q)
            for ti, wti, s_lo, v in zip(t, wt, s0, V):
                if s_lo >= 1.0:
                    continue
                br = np.concatenate([s_lo * (1.0 / 0.15) ** np.arange(0, 60), [1.0]])
                br = np.unique(np.clip(br, s_lo, 1.0))
                s, ws = _composite(br, q)
                X = p + s[:, None] * v
                total += wti * det * np.dot(ws * s, g(X))
        vals.append(total)
    vals = np.array(vals)
    e1, e2 = eps_list[-2], eps_list[-1]
    extrap = (vals[-1] * e1 - vals[-2] * e2) / (e1 - e2)
    est = float(abs(extrap - vals[-1]))
    return OracleResult(extrap, est, "principal-value", 0, {"raw": vals.tolist()})


# ---------------------------------------------------------------- integrands


def map_difference(tri, X, p):
    """``F(X) - F(p)`` from factored differences of the shape functions.

    Barycentric differences are exact linear functions of ``X - p``, so
    the result keeps full relative precision as ``X -> p``.
    """
    X = np.asarray(X, dtype=float)
    p = np.asarray(p, dtype=float)
    d = X - p
    dlam = np.stack([-d[..., 0] - d[..., 1], d[..., 0], d[..., 1]], axis=-1)
    lam0 = np.array([1.0 - p[0] - p[1], p[0], p[1]])
    if tri.degree == 1:
        return dlam @ tri.control_points
    lam = lam0 + dlam
    dphi = np.empty(d.shape[:-1] + (6,))
    dphi[..., :3] = dlam * (2.0 * (lam + lam0) - 1.0)
    for k, (i, j) in enumerate(((0, 1), (1, 2), (0, 2))):
        dphi[..., 3 + k] = 4.0 * (dlam[..., i] * lam[..., j] + lam0[i] * dlam[..., j])
    return dphi @ tri.control_points


def double_layer_integrand(tri, density, x0, anchor=None):
    """``(F - x0) . n phi / |F - x0|^3`` on the reference triangle.

    With ``anchor`` (a reference point near the singularity) the offset is
    formed as ``(F(X) - F(anchor)) + (F(anchor) - x0)`` for accuracy near it.
    """
    x0 = np.asarray(x0, dtype=float)
    if anchor is not None:
        anchor = np.asarray(anchor, dtype=float)
        shift = tri.map(anchor) - x0

    def g(X):
        if anchor is None:
            diff = tri.map(X) - x0
        else:
            diff = map_difference(tri, X, anchor) + shift
        nrm = tri.normal(X, check=False)
        R2 = np.einsum("...c,...c->...", diff, diff)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.einsum("...c,...c->...", diff, nrm) * density_eval(density, X) / R2**1.5
        return np.where(R2 > 0.0, val, 0.0)

    return g


def _locate(tri, x0):
    """Foot, distance and Jacobian for the polar rule, plus the point to use.

    Points within 1e-14 * diameter of the surface are moved onto their foot
    so that the on-surface convention applies exactly; otherwise the
    rounding-level height would be resolved as a genuine one-sided limit.
    """
    from .continuation import H_ZERO
    from .projection import project

    try:
        frame = project(tri, x0, check_ambiguity=False)
        p, h, J0 = frame.xhat0, abs(frame.h), frame.J0
    except CPQError:
        X = np.array([(i / 20, j / 20) for i in range(21) for j in range(21 - i)])
        k = int(np.argmin(np.linalg.norm(tri.map(X) - x0, axis=1)))
        p, h, J0 = X[k], float(np.linalg.norm(tri.map(X[k]) - x0)), tri.jacobian(X[k])
    if h < H_ZERO * tri.diameter:
        return p, 0.0, J0, tri.map(p)
    return p, h, J0, np.asarray(x0, dtype=float)


def reference_single(tri, density, x0, tol=1e-12, strategies=("polar", "quadtree")):
    """Double-layer integral over one patch by independent brute-force strategies.

    Returns the polar value; with both strategies the estimate includes
    their disagreement.
    """
    p, h, J0, x0 = _locate(tri, np.asarray(x0, dtype=float))
    g = double_layer_integrand(tri, density, x0, anchor=p)
    results = []
    if "polar" in strategies:
        results.append(integrate_polar(g, p, h, tol=tol, q=20, metric=J0))
    if "quadtree" in strategies:
        results.append(integrate_quadtree(g, tol=tol))
    best = results[0]
    est = max(r.est_error for r in results)
    if len(results) > 1:
        spread = max(abs(r.value - best.value) for r in results)
        est = max(est, spread)
        if spread > 10 * tol * max(1.0, abs(best.value)):
            raise ToleranceNotReached("strategies disagree", best.value, spread)
    return OracleResult(
        best.value, est, "+".join(r.method for r in results),
        sum(r.evaluations for r in results),
    )


# ---------------------------------------------------------------- pairs


def tanh_sinh_rule(level, t_max=3.0):
    """Tanh-sinh nodes on (0, 1) with step 2^-level; returns nodes, complements, weights."""
    step = 2.0**-level
    k = np.arange(-int(t_max / step), int(t_max / step) + 1)
    t = k * step
    u = 0.5 * math.pi * np.sinh(t)
    # x = (1 + tanh u) / 2 = 1 / (1 + e^{-2u}); its complement is computed separately
    x = 1.0 / (1.0 + np.exp(-2.0 * u))
    xc = 1.0 / (1.0 + np.exp(2.0 * u))
    w = step * 0.5 * math.pi * np.cosh(t) / (2.0 * np.cosh(u) ** 2)
    keep = (x > 0.0) & (xc > 0.0) & (w > 0.0)
    return x[keep], xc[keep], w[keep]


def _duffy_tanh_sinh(level):
    u, uc, wu = tanh_sinh_rule(level)
    v, vc, wv = tanh_sinh_rule(level)
    U, V = np.meshgrid(u, v, indexing="ij")
    Uc, Vc = np.meshgrid(uc, vc, indexing="ij")
    X = np.stack([U, V * Uc], axis=-1).reshape(-1, 2)
    W = (np.outer(wu, wv) * Uc).ravel()
    return X, W


def _two_sided_breaks(smallest, ratio):
    """Breakpoints on [0, 1] graded geometrically toward both ends."""
    k = int(math.ceil(math.log(smallest) / math.log(ratio)))
    left = ratio ** np.arange(k, 0, -1) * 0.5
    return np.concatenate([[0.0], left, [0.5], 1.0 - left[::-1], [1.0]])


def _duffy_graded(q, smallest=1e-7, ratio=0.2):
    br = _two_sided_breaks(smallest, ratio)
    u, wu = _composite(br, q)
    U, V = np.meshgrid(u, u, indexing="ij")
    X = np.stack([U, V * (1.0 - U)], axis=-1).reshape(-1, 2)
    W = (np.outer(wu, wu) * (1.0 - U)).ravel()
    return X, W


def _inner_pair(triX, densX, triY, identical, tol, q):
    def inner(Yhat):
        y = triY.map(Yhat)
        if identical:
            p, h, J0 = Yhat, 0.0, triX.jacobian(Yhat)
        else:
            p, h, J0, y = _locate(triX, y)
        g = double_layer_integrand(triX, densX, y, anchor=p)
        r = integrate_polar(g, p, h, tol=tol, q=q, metric=J0, raise_on_fail=False)
        return r.value, r.est_error

    return inner


def _outer_values(inner, triY, densY, X):
    vals = np.empty(len(X))
    errs = np.empty(len(X))
    for i, yh in enumerate(X):
        vals[i], errs[i] = inner(yh)
    jac = np.linalg.norm(triY.normal(X, check=False), axis=-1) * density_eval(densY, X)
    return vals * jac, errs * jac


def reference_pair(
    triX,
    triY,
    densX=None,
    densY=None,
    tol=1e-8,
    identical=None,
    strategies=("tanh-sinh", "graded"),
    levels=(3, 4),
    inner_q=14,
    inner_tol=1e-11,
    max_cells=600,
    graded_q=8,
):
    """Four-dimensional double-layer pair integral by brute force.

    Outer strategies: tanh-sinh on the Duffy square at two step sizes,
    composite Gauss on the Duffy square graded toward its sides, and
    adaptive subdivision over the outer triangle. Returns the value of
    the first strategy with an estimate covering their disagreement.
    """
    densX = densX or DensityPolynomial.constant()
    densY = densY or DensityPolynomial.constant()
    if identical is None:
        identical = triX.same_as(triY)
    inner = _inner_pair(triX, densX, triY, identical, inner_tol, inner_q)
    results = []
    t0 = time.time()
    if "tanh-sinh" in strategies:
        prev = None
        for lev in levels:
            X, W = _duffy_tanh_sinh(lev)
            f, e = _outer_values(inner, triY, densY, X)
            val = float(np.dot(W, f))
            inner_err = float(np.dot(np.abs(W), e))
            est = inner_err if prev is None else max(abs(val - prev), inner_err)
            prev = val
        results.append(OracleResult(val, est, "duffy-tanh-sinh", len(W), {"levels": list(levels)}))
    if "graded" in strategies:
        X, W = _duffy_graded(graded_q)
        f, e = _outer_values(inner, triY, densY, X)
        val = float(np.dot(W, f))
        results.append(
            OracleResult(val, float(np.dot(np.abs(W), e)), "duffy-graded-gauss", len(W))
        )
    if "quadtree" in strategies:

        def outer_g(X):
            return _outer_values(inner, triY, densY, X)[0]

        r = integrate_quadtree(outer_g, tol=tol, max_cells=max_cells, raise_on_fail=False)
        r.method = "outer-quadtree"
        results.append(r)
    best = results[0]
    est = max(r.est_error for r in results)
    if len(results) > 1:
        est = max(est, max(abs(r.value - best.value) for r in results))
    return OracleResult(
        best.value, est, "+".join(r.method for r in results), 0,
        {"seconds": time.time() - t0, "values": [r.value for r in results]},
    )


# ---------------------------------------------------------------- reference file


def default_reference_path():
    env = os.environ.get("CPQ_REFERENCE_FILE")
    if env:
        return Path(env)
    return Path(str(resources.files("cpq") / "data" / "reference_values.json"))


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_references(path=None):
    path = Path(path) if path else default_reference_path()
    if not path.exists():
        return {}
    with open(path) as fh:
        records = json.load(fh)
    return {rec["case_id"]: rec for rec in records}


def save_references(records, path=None):
    path = Path(path) if path else default_reference_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=lambda r: r["case_id"])
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")


def reference_value(case_id, path=None, config=None):
    """Stored value for ``case_id``; checks the config hash when ``config`` is given."""
    rec = load_references(path).get(case_id)
    if rec is None:
        raise ReferenceMissing(f"no reference value for case {case_id!r}")
    if config is not None and rec["config_hash"] != config_hash(config):
        raise ReferenceMissing(f"reference for {case_id!r} was computed for a different setup")
    re, im = rec["value"]
    return complex(re, im) if im else re


def make_record(case_id, config, result):
    value = complex(result.value)
    return {
        "case_id": case_id,
        "value": [value.real, value.imag],
        "est_error": float(result.est_error),
        "method": result.method,
        "config_hash": config_hash(config),
        "config": config,
    }


# ---------------------------------------------------------------- registered cases


def _bent_edge_cases():
    from .geometry import bent_edge_triangle

    tri = bent_edge_triangle()
    x0 = tri.map(np.array([0.2, 0.4]))
    return tri, x0


def _tri_config(tri):
    return {"degree": tri.degree, "control_points": tri.control_points.tolist()}


def case_configs():
    """Configuration of every registered reference case."""
    from .mesh_io import sphere_fixture, sphere_pair_indices

    tri, x0 = _bent_edge_cases()
    shift = [0.05, 0.05, 0.0]
    cases = {
        "single_singular": {
            "kind": "single", "tri": _tri_config(tri), "density": [1.0],
            "x0": x0.tolist(), "tol": 1e-12,
        },
        "single_near": {
            "kind": "single", "tri": _tri_config(tri), "density": [1.0],
            "x0": (x0 - np.array([0.0, 0.0, 1e-4])).tolist(), "tol": 1e-12,
        },
        "pair_identical_bent_edge": {
            "kind": "pair", "triX": _tri_config(tri), "triY": _tri_config(tri),
            "strategies": ["tanh-sinh"], "levels": [3, 4],
        },
        # the outer integrand has features of width ~0.01 near the corners of
        # the shifted patch, so one more tanh-sinh level is needed
        "pair_shifted_bent_edge": {
            "kind": "pair", "triX": _tri_config(tri),
            "triY": _tri_config(tri.translated(shift)),
            "strategies": ["tanh-sinh"], "levels": [4, 5],
        },
    }
    mesh = sphere_fixture()
    for name, (i, j) in sphere_pair_indices(mesh).items():
        cases[f"sphere_{name}"] = {
            "kind": "pair", "triX": _tri_config(mesh.triangle(i)),
            "triY": _tri_config(mesh.triangle(j)), "elements": [i, j],
            "strategies": ["tanh-sinh"], "levels": [3, 4],
        }
    return cases


def _tri_from_config(cfg):
    from .geometry import CurvedTriangle

    return CurvedTriangle(cfg["degree"], np.array(cfg["control_points"]))


def compute_case(case_id, config=None):
    """Run the oracle for one registered case and return its JSON record."""
    config = config or case_configs()[case_id]
    if config["kind"] == "single":
        tri = _tri_from_config(config["tri"])
        dens = DensityPolynomial.constant(config["density"][0])
        res = reference_single(tri, dens, np.array(config["x0"]), tol=config["tol"])
    else:
        triX = _tri_from_config(config["triX"])
        triY = _tri_from_config(config["triY"])
        res = reference_pair(
            triX, triY, strategies=tuple(config["strategies"]), levels=tuple(config["levels"])
        )
    return make_record(case_id, config, res)


def build_reference_file(case_ids=None, path=None, log=None):
    """Compute the given cases (all by default) and merge them into the reference file."""
    configs = case_configs()
    case_ids = list(configs) if case_ids is None else list(case_ids)
    unknown = [c for c in case_ids if c not in configs]
    if unknown:
        raise ReferenceMissing(f"unknown case(s): {', '.join(unknown)}")
    records = load_references(path)
    for cid in case_ids:
        t0 = time.time()
        records[cid] = compute_case(cid, configs[cid])
        if log:
            log(f"{cid}: {records[cid]['value'][0]:.15g} "
                f"(est {records[cid]['est_error']:.1e}, {time.time() - t0:.0f} s)")
        save_references(records.values(), path)
    return records
