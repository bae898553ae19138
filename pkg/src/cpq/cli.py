"""Command-line driver: single and pair integrals, convergence sweeps, references.

Exit codes: 0 on success, 1 on usage errors, 2 on numerical errors.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys

import numpy as np

from .errors import CPQError, MeshFormatError
from .geometry import CurvedTriangle, DensityPolynomial, bent_edge_triangle

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text, count=None, what="value"):
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"{what} needs {count} comma-separated numbers, got {text!r}")
    return vals


def _triangle(args):
    if args.bent_edge_triangle is not None and args.triangle is not None:
        raise UsageError("give either --triangle or --bent-edge-triangle, not both")
    if args.triangle is not None:
        try:
            pts = np.array(json.loads(args.triangle), dtype=float)
        except (ValueError, TypeError):
            raise UsageError("--triangle must be a JSON list of 3 or 6 points") from None
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) not in (3, 6):
            raise UsageError("--triangle must be a JSON list of 3 or 6 points in 3-space")
        return CurvedTriangle(1 if len(pts) == 3 else 2, pts)
    abc = _floats(args.bent_edge_triangle or "0.6,0.7,0.5", 3, "--bent-edge-triangle")
    return bent_edge_triangle(*abc)


def _density(text):
    try:
        vals = json.loads(text)
    except ValueError:
        raise UsageError(f"--density must be a number or JSON list, got {text!r}") from None
    vals = np.atleast_1d(np.array(vals, dtype=float))
    degree = {1: 0, 3: 1, 6: 2}.get(len(vals))
    if degree is None:
        raise UsageError("--density needs 1, 3 or 6 values")
    return DensityPolynomial(degree, vals)


def _point(text, tri):
    """``x,y,z`` or ``F:u,v`` or ``F:u,v:dx,dy,dz``."""
    if text.startswith("F:"):
        parts = text[2:].split(":")
        if len(parts) not in (1, 2):
            raise UsageError(f"cannot parse --x0 {text!r}")
        uv = _floats(parts[0], 2, "--x0 reference point")
        x0 = tri.map(np.array(uv))
        if len(parts) == 2:
            x0 = x0 + np.array(_floats(parts[1], 3, "--x0 offset"))
        return x0
    return np.array(_floats(text, 3, "--x0"))


def _n_list(text):
    if ":" in text:
        parts = text.split(":")
        try:
            lo, hi = int(parts[0]), int(parts[1])
            step = int(parts[2]) if len(parts) > 2 else 1
        except ValueError:
            raise UsageError(f"cannot parse n range {text!r}") from None
        return list(range(lo, hi + 1, step))
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse n list {text!r}") from None


def _emit_json(obj, out):
    json.dump(obj, out, indent=2, default=_json_default)
    out.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


def _fmt(v):
    return format(float(v), ".17g")


def _write_csv(rows, header, config, out):
    for key, val in config.items():
        out.write(f"# {key}={val}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) if isinstance(r[h], float) else r[h] for h in header])


def _open_out(path):
    # stdout must stay open after the with block
    return open(path, "w", newline="") if path else contextlib.nullcontext(sys.stdout)


# ---------------------------------------------------------------- commands


def cmd_integrate(args):
    from .integrator import integrate_double_layer

    tri = _triangle(args)
    dens = _density(args.density)
    x0 = _point(args.x0, tri)
    res = integrate_double_layer(tri, dens, x0, args.n, args.reg)
    out = res.to_dict()
    out["x0"] = x0.tolist()
    _emit_json(out, sys.stdout)


def _reference_for(args, problem_oracle):
    from .oracle import reference_value

    given = [v is not None for v in (args.reference, args.case)] + [bool(args.oracle)]
    if sum(given) != 1:
        raise UsageError("give exactly one of --reference, --case or --oracle")
    if args.reference is not None:
        return args.reference, "given"
    if args.case is not None:
        return reference_value(args.case), f"case {args.case}"
    return problem_oracle(), "oracle"


def cmd_converge(args):
    from .integrator import SingleProblem, convergence_sweep
    from .oracle import reference_single

    tri = _triangle(args)
    dens = _density(args.density)
    x0 = _point(args.x0, tri)
    ref, source = _reference_for(args, lambda: reference_single(tri, dens, x0).value)
    levels = args.levels.split(",")
    report = convergence_sweep(SingleProblem(tri, dens, x0), _n_list(args.n_list), levels, ref)
    config = {
        "command": "converge", "control_points": json.dumps(tri.control_points.tolist()),
        "density": args.density, "x0": ",".join(_fmt(v) for v in x0),
        "reference": _fmt(ref), "reference_source": source,
    }
    config.update({f"slope_{k}": _fmt(v) for k, v in sorted(report.slopes.items())})
    with _open_out(args.output) as out:
        _write_csv(report.rows, ["n", "N", "level", "abs_error", "value"], config, out)


def _scenario(text):
    from .mesh_io import read_msh

    tri = bent_edge_triangle()
    if text == "identical":
        return tri, tri, "identical"
    if text.startswith("shifted"):
        rest = text[len("shifted"):].strip(" :=")
        shift = _floats(rest or "0.05,0.05,0", 3, "shift")
        return tri, tri.translated(shift), f"shifted {rest}"
    if text.startswith("mesh:"):
        try:
            path, a, b = text[5:].rsplit(":", 2)
            a, b = int(a), int(b)
        except ValueError:
            raise UsageError("mesh scenario must be mesh:PATH:IDA:IDB") from None
        mesh = read_msh(path)
        if not (0 <= a < len(mesh) and 0 <= b < len(mesh)):
            raise UsageError(f"element ids must lie in [0, {len(mesh) - 1}]")
        return mesh.triangle(a), mesh.triangle(b), text
    raise UsageError(f"unknown scenario {text!r}")


def cmd_pair(args):
    from .integrator import HelmholtzKernel, StaticKernel, integrate_pair

    triX, triY, label = _scenario(args.scenario)
    kernel = HelmholtzKernel(args.k) if args.kernel == "helmholtz" else StaticKernel()
    if args.n_list is None:
        res = integrate_pair(triX, triY, n=args.n, level=args.reg, kernel=kernel, threads=args.threads)
        out = res.to_dict()
        out.update({"scenario": label, "M": res.N**2, "kernel": kernel.name})
        _emit_json(out, sys.stdout)
        return
    if args.reference is None:
        raise UsageError("--n-list needs --reference")
    rows = []
    for n in _n_list(args.n_list):
        res = integrate_pair(triX, triY, n=n, level=args.reg, kernel=kernel, threads=args.threads)
        err = abs(res.value - args.reference)
        rows.append({"n": n, "M": n**4, "level": res.regularization,
                     "abs_error": float(err), "value": res.value})
    config = {"command": "pair", "scenario": label, "kernel": kernel.name,
              "reference": _fmt(args.reference)}
    with _open_out(args.output) as out:
        _write_csv(rows, ["n", "M", "level", "abs_error", "value"], config, out)


def cmd_solid_angle(args):
    from .integrator import integrate_double_layer
    from .solid_angle import solid_angle_planar

    verts = [_floats(v, 3, "vertex") for v in (args.a1, args.a2, args.a3)]
    x0 = np.array(_floats(args.x0, 3, "--x0"))
    closed = solid_angle_planar(*verts, x0)
    tri = CurvedTriangle.planar(*verts)
    num = -integrate_double_layer(tri, DensityPolynomial.constant(), x0, args.n, args.reg).value
    _emit_json({"closed_form": closed, "numerical": num, "difference": num - closed}, sys.stdout)


def cmd_oracle(args):
    from .oracle import build_reference_file, case_configs

    if args.list:
        for cid in case_configs():
            print(cid)
        return
    cases = None if args.cases == "all" else args.cases.split(",")
    build_reference_file(cases, args.output, log=lambda m: print(m, file=sys.stderr))


# ---------------------------------------------------------------- parser


def _add_geometry(p):
    p.add_argument("--triangle", help="JSON list of 3 or 6 control points")
    p.add_argument("--bent-edge-triangle", metavar="A,B,C",
                   help="quadratic test patch with curved node (A,B,C) (default 0.6,0.7,0.5)")
    p.add_argument("--density", default="1", help="constant or JSON list of 3/6 nodal values")
    p.add_argument("--x0", required=True, help='"x,y,z" or "F:u,v[:dx,dy,dz]"')


_LEVELS = ["none", "t2", "t2t1", "auto"]


def build_parser():
    parser = _Parser(prog="cpq", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for pair sweeps (default: available cores)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("integrate", help="single-patch double-layer integral (JSON)")
    _add_geometry(p)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--reg", choices=_LEVELS, default="auto")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("converge", help="error versus N for each regularization level (CSV)")
    _add_geometry(p)
    p.add_argument("--n-list", default="2:200", help="LO:HI[:STEP] or comma list")
    p.add_argument("--levels", default="none,t2,t2t1")
    p.add_argument("--reference", type=float)
    p.add_argument("--case", help="reference case id from the reference file")
    p.add_argument("--oracle", action="store_true", help="compute the reference by brute force")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("pair", help="two-patch four-dimensional integral")
    p.add_argument("--scenario", required=True,
                   help='"identical", "shifted DX,DY,DZ" or "mesh:PATH:IDA:IDB"')
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--n-list", help="sweep instead of a single n (CSV output)")
    p.add_argument("--reference", type=float)
    p.add_argument("--reg", choices=_LEVELS, default="auto")
    p.add_argument("--kernel", choices=["static", "helmholtz"], default="static")
    p.add_argument("--k", type=float, default=0.0, help="wavenumber for --kernel helmholtz")
    p.add_argument("--output")
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("solid-angle", help="planar closed form versus the integrator")
    for name in ("--a1", "--a2", "--a3"):
        p.add_argument(name, required=True, help="vertex x,y,z")
    p.add_argument("--x0", required=True)
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--reg", choices=_LEVELS, default="auto")
    p.set_defaults(func=cmd_solid_angle)

    p = sub.add_parser("oracle", help="compute reference values and write the JSON file")
    p.add_argument("--cases", default="all", help="comma list of case ids or 'all'")
    p.add_argument("--output", help="JSON path (default: CPQ_REFERENCE_FILE or packaged file)")
    p.add_argument("--list", action="store_true", help="list case ids and exit")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "n", None) is not None and args.n < 2:
        parser.error("--n must be >= 2")
    try:
        args.func(args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"cpq: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (MeshFormatError, FileNotFoundError) as err:
        print(f"cpq: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except CPQError as err:
        print(f"cpq: numerical error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
