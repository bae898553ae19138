"""Gmsh MSH (ASCII 2.2 and 4.1) reader/writer for tri3/tri6 surface meshes."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import MeshFormatError
from .geometry import CurvedTriangle

# Gmsh element type codes and node counts
TRI3, TRI6 = 2, 9
_KIND = {TRI3: "tri3", TRI6: "tri6"}
_NODES_PER_TYPE = {
    1: 2, 2: 3, 3: 4, 4: 4, 5: 8, 6: 6, 7: 5, 8: 3, 9: 6, 10: 9, 11: 10,
    12: 27, 13: 18, 14: 14, 15: 1, 16: 8, 17: 20, 18: 15, 19: 13,
}


@dataclass
class SurfaceMesh:
    nodes: np.ndarray  # (n, 3)
    elements: list  # 0-based node index arrays
    kinds: list  # "tri3" or "tri6" per element
    node_tags: np.ndarray | None = None
    path: str | None = None
    version: str | None = None
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.elements)

    def triangle(self, i):
        idx = self.elements[i]
        degree = 2 if self.kinds[i] == "tri6" else 1
        return CurvedTriangle(degree, self.nodes[idx])

    def corners(self, i):
        return tuple(int(v) for v in self.elements[i][:3])


class _Lines:
    """Line cursor that remembers 1-based line numbers for error messages."""

    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self):
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise MeshFormatError("unexpected end of file", self.pos)

    @property
    def lineno(self):
        return self.pos

    def numbers(self, cast=float):
        line = self.next()
        try:
            return [cast(v) for v in line.split()]
        except ValueError:
            raise MeshFormatError(f"cannot parse {line!r}", self.lineno) from None

    def expect(self, token):
        line = self.next()
        if line != token:
            raise MeshFormatError(f"expected {token}, found {line!r}", self.lineno)

    def skip_section(self, name):
        end = "$End" + name
        while self.next() != end:
            pass


def read_msh(path):
    """Read an ASCII Gmsh mesh, keeping its 3-node and 6-node triangles."""
    path = Path(path)
    cur = _Lines(path.read_text())
    version = None
    tag_to_xyz = {}
    raw_elements = []  # (type, node tags, line)
    while cur.pos < len(cur.lines):
        try:
            line = cur.next()
        except MeshFormatError:
            break
        if not line.startswith("$"):
            raise MeshFormatError(f"unexpected content {line!r}", cur.lineno)
        name = line[1:]
        if name == "MeshFormat":
            fields = cur.next().split()
            version = fields[0]
            if len(fields) > 1 and fields[1] != "0":
                raise MeshFormatError("binary MSH files are not supported", cur.lineno)
            if not (version.startswith("2") or version.startswith("4")):
                raise MeshFormatError(f"unsupported MSH version {version}", cur.lineno)
            cur.expect("$EndMeshFormat")
        elif name == "Nodes":
            if version is None:
                raise MeshFormatError("$Nodes before $MeshFormat", cur.lineno)
            if version.startswith("2"):
                _nodes_v2(cur, tag_to_xyz)
            else:
                _nodes_v4(cur, tag_to_xyz)
            cur.expect("$EndNodes")
        elif name == "Elements":
            if version is None:
                raise MeshFormatError("$Elements before $MeshFormat", cur.lineno)
            if version.startswith("2"):
                _elements_v2(cur, raw_elements)
            else:
                _elements_v4(cur, raw_elements)
            cur.expect("$EndElements")
        else:
            cur.skip_section(name)
    if version is None:
        raise MeshFormatError("missing $MeshFormat section", 1)
    return _assemble(tag_to_xyz, raw_elements, str(path), version)


def _nodes_v2(cur, out):
    (count,) = cur.numbers(int)
    for _ in range(count):
        vals = cur.numbers()
        if len(vals) < 4:
            raise MeshFormatError("node line needs a tag and three coordinates", cur.lineno)
        out[int(vals[0])] = vals[1:4]


def _nodes_v4(cur, out):
    header = cur.numbers(int)
    nblocks = header[0]
    for _ in range(nblocks):
        _, _, _, nnodes = cur.numbers(int)
        tags = []
        while len(tags) < nnodes:
            tags.extend(cur.numbers(int))
        for tag in tags:
            vals = cur.numbers()
            if len(vals) < 3:
                raise MeshFormatError("node coordinates missing", cur.lineno)
            out[tag] = vals[:3]


def _elements_v2(cur, out):
    (count,) = cur.numbers(int)
    for _ in range(count):
        vals = cur.numbers(int)
        if len(vals) < 3:
            raise MeshFormatError("element line too short", cur.lineno)
        etype, ntags = vals[1], vals[2]
        nodes = vals[3 + ntags :]
        expected = _NODES_PER_TYPE.get(etype)
        if expected is not None and len(nodes) != expected:
            raise MeshFormatError(
                f"element type {etype} needs {expected} nodes, got {len(nodes)}", cur.lineno
            )
        out.append((etype, nodes, cur.lineno))


def _elements_v4(cur, out):
    header = cur.numbers(int)
    nblocks = header[0]
    for _ in range(nblocks):
        _, _, etype, count = cur.numbers(int)
        for _ in range(count):
            vals = cur.numbers(int)
            nodes = vals[1:]
            expected = _NODES_PER_TYPE.get(etype)
            if expected is not None and len(nodes) != expected:
                raise MeshFormatError(
                    f"element type {etype} needs {expected} nodes, got {len(nodes)}", cur.lineno
                )
            out.append((etype, nodes, cur.lineno))


def _assemble(tag_to_xyz, raw_elements, path, version):
    tags = np.array(sorted(tag_to_xyz), dtype=np.int64)
    index = {int(t): i for i, t in enumerate(tags)}
    nodes = np.array([tag_to_xyz[int(t)] for t in tags], dtype=float).reshape(-1, 3)
    elements, kinds, notes = [], [], []
    skipped = {}
    for etype, ntags, line in raw_elements:
        if etype not in _KIND:
            skipped[etype] = skipped.get(etype, 0) + 1
            continue
        try:
            elements.append(np.array([index[t] for t in ntags], dtype=np.int64))
        except KeyError as err:
            raise MeshFormatError(f"element refers to unknown node {err.args[0]}", line) from None
        kinds.append(_KIND[etype])
    for etype, count in sorted(skipped.items()):
        msg = f"skipped {count} element(s) of unsupported type {etype}"
        notes.append(msg)
        warnings.warn(msg, stacklevel=3)
    if not elements:
        raise MeshFormatError("no surface elements (types 2 or 9) found")
    mesh = SurfaceMesh(nodes, elements, kinds, tags, path, version, notes)
    for msg in _midpoint_sanity(mesh):
        notes.append(msg)
        warnings.warn(msg, stacklevel=3)
    return mesh


def _midpoint_sanity(mesh):
    out = []
    for i, (idx, kind) in enumerate(zip(mesh.elements, mesh.kinds)):
        if kind != "tri6":
            continue
        P = mesh.nodes[idx]
        for k, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            edge = np.linalg.norm(P[b] - P[a])
            if np.linalg.norm(P[3 + k] - 0.5 * (P[a] + P[b])) > 0.5 * edge:
                out.append(f"element {i}: midpoint node {4 + k} far from its edge midpoint")
    return out


def write_msh(mesh, path, version="2.2"):
    """Write nodes and triangles as an ASCII Gmsh file (2.2 or 4.1)."""
    path = Path(path)
    n = len(mesh.nodes)
    types = [TRI6 if k == "tri6" else TRI3 for k in mesh.kinds]
    lines = ["$MeshFormat"]
    if version.startswith("2"):
        lines += ["2.2 0 8", "$EndMeshFormat", "$Nodes", str(n)]
        lines += [f"{i + 1} {x:.17g} {y:.17g} {z:.17g}" for i, (x, y, z) in enumerate(mesh.nodes)]
        lines += ["$EndNodes", "$Elements", str(len(mesh.elements))]
        for i, (idx, t) in enumerate(zip(mesh.elements, types)):
            lines.append(f"{i + 1} {t} 2 1 1 " + " ".join(str(int(v) + 1) for v in idx))
        lines.append("$EndElements")
    elif version.startswith("4"):
        lines += ["4.1 0 8", "$EndMeshFormat", "$Nodes", f"1 {n} 1 {n}", f"2 1 0 {n}"]
        lines += [str(i + 1) for i in range(n)]
        lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.nodes]
        lines += ["$EndNodes", "$Elements"]
        blocks = [t for t in (TRI3, TRI6) if t in types]
        lines.append(f"{len(blocks)} {len(types)} 1 {len(types)}")
        tag = 1
        for t in blocks:
            members = [idx for idx, tt in zip(mesh.elements, types) if tt == t]
            lines.append(f"2 1 {t} {len(members)}")
            for idx in members:
                lines.append(f"{tag} " + " ".join(str(int(v) + 1) for v in idx))
                tag += 1
        lines.append("$EndElements")
    else:
        raise ValueError(f"unsupported MSH version {version}")
    path.write_text("\n".join(lines) + "\n")


PAIR_CLASSES = ("identical", "shared_edge", "shared_vertex", "disjoint")


def classify_pair(mesh, i, j):
    shared = len(set(mesh.corners(i)) & set(mesh.corners(j)))
    return PAIR_CLASSES[3 - min(shared, 3)]


def classify_pairs(mesh):
    """Ordered pairs (i, j) grouped by the number of shared corner nodes."""
    out = {name: [] for name in PAIR_CLASSES}
    corners = [set(mesh.corners(i)) for i in range(len(mesh))]
    for i in range(len(mesh)):
        for j in range(len(mesh)):
            shared = len(corners[i] & corners[j])
            out[PAIR_CLASSES[3 - min(shared, 3)]].append((i, j))
    return out


def fibonacci_sphere(count):
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    theta = math.pi * (1.0 + math.sqrt(5.0)) * k
    rad = np.sqrt(1.0 - z * z)
    return np.column_stack([rad * np.cos(theta), rad * np.sin(theta), z])


def sphere_mesh(n_points=44):
    """Quadratic triangulation of the unit sphere with ``2 n_points - 4`` elements.

    Corners are Fibonacci points, faces come from their convex hull
    (oriented outward) and edge midpoints are projected onto the sphere.
    """
    from scipy.spatial import ConvexHull

    pts = fibonacci_sphere(n_points)
    faces = ConvexHull(pts).simplices.copy()
    for f in faces:
        a, b, c = pts[f]
        if np.dot(np.cross(b - a, c - a), a + b + c) < 0:
            f[1], f[2] = f[2], f[1]
    nodes = [p for p in pts]
    mid = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in mid:
            m = 0.5 * (pts[i] + pts[j])
            mid[key] = len(nodes)
            nodes.append(m / np.linalg.norm(m))
        return mid[key]

    elements = []
    for a, b, c in faces:
        elements.append(np.array([a, b, c, midpoint(a, b), midpoint(b, c), midpoint(c, a)]))
    return SurfaceMesh(np.array(nodes), elements, ["tri6"] * len(elements), version="2.2")


def fixture_path(name="sphere84.msh"):
    return Path(str(resources.files("cpq") / "data" / name))


def sphere_fixture():
    """The checked-in 84-element quadratic sphere mesh."""
    return read_msh(fixture_path())


def sphere_pair_indices(mesh):
    """Deterministic (identical, shared-edge, shared-vertex) pairs around element 0."""
    groups = {"identical": (0, 0)}
    for j in range(1, len(mesh)):
        cls = classify_pair(mesh, 0, j)
        if cls in ("shared_edge", "shared_vertex") and cls not in groups:
            groups[cls] = (0, j)
    return groups
