import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpq.errors import MeshFormatError
from cpq.mesh_io import (
    PAIR_CLASSES,
    SurfaceMesh,
    classify_pair,
    classify_pairs,
    read_msh,
    sphere_fixture,
    sphere_mesh,
    sphere_pair_indices,
    write_msh,
)

ONE_TRIANGLE_V22 = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
6
1 0 0 0
2 1 0 0
3 0 1 0
4 0.5 0 0
5 0.6 0.7 0.5
6 0 0.5 0
$EndNodes
$Elements
2
1 15 2 0 1 1
2 9 2 1 1 1 2 3 4 5 6
$EndElements
"""

TETRA_ONLY = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
1
1 4 2 0 1 1 2 3 4
$EndElements
"""

MIXED_V41 = """$MeshFormat
4.1 0 8
$EndMeshFormat
$Entities
0 0 1 0
1 0 0 0 1 1 0 0 0
$EndEntities
$Nodes
1 4 1 4
2 1 0 4
10
20
30
40
0 0 0
1 0 0
0 1 0
1 1 0.5
$EndNodes
$Elements
1 2 1 2
2 1 2 2
1 10 20 30
2 20 40 30
$EndElements
"""


def _write(tmp_path, text, name="mesh.msh"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_one_triangle_v22(tmp_path):
    with pytest.warns(UserWarning, match="unsupported type 15"):
        mesh = read_msh(_write(tmp_path, ONE_TRIANGLE_V22))
    assert len(mesh) == 1 and mesh.kinds == ["tri6"]
    assert mesh.version == "2.2"
    tri = mesh.triangle(0)
    assert np.array_equal(tri.control_points[4], [0.6, 0.7, 0.5])
    assert np.array_equal(mesh.nodes[:, 0], [0, 1, 0, 0.5, 0.6, 0])


def test_round_trip_both_versions(tmp_path):
    with pytest.warns(UserWarning):
        mesh = read_msh(_write(tmp_path, ONE_TRIANGLE_V22))
    for version in ("2.2", "4.1"):
        out = tmp_path / f"out{version}.msh"
        write_msh(mesh, out, version)
        again = read_msh(out)
        assert np.array_equal(again.nodes, mesh.nodes)
        assert all(np.array_equal(a, b) for a, b in zip(again.elements, mesh.elements))
        assert again.version == version


def test_tetra_only_rejected(tmp_path):
    with pytest.warns(UserWarning), pytest.raises(MeshFormatError, match="no surface elements"):
        read_msh(_write(tmp_path, TETRA_ONLY))


def test_v41_with_sparse_tags(tmp_path):
    mesh = read_msh(_write(tmp_path, MIXED_V41))
    assert len(mesh) == 2 and mesh.kinds == ["tri3", "tri3"]
    assert np.allclose(mesh.triangle(1).control_points, [[1, 0, 0], [1, 1, 0.5], [0, 1, 0]])
    assert classify_pair(mesh, 0, 1) == "shared_edge"


@pytest.mark.parametrize(
    "text,line",
    [
        (ONE_TRIANGLE_V22.replace("5 0.6 0.7 0.5", "5 0.6 oops 0.5"), 10),
        (ONE_TRIANGLE_V22.replace("$EndNodes", "$EndNodez"), 12),
        (ONE_TRIANGLE_V22.replace("1 2 3 4 5 6", "1 2 3 4 5 99"), 16),
    ],
)
def test_parse_errors_report_line(tmp_path, text, line):
    with pytest.raises(MeshFormatError) as info:
        read_msh(_write(tmp_path, text))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_binary_and_missing_header(tmp_path):
    with pytest.raises(MeshFormatError):
        read_msh(_write(tmp_path, "$MeshFormat\n2.2 1 8\n$EndMeshFormat\n"))
    with pytest.raises(MeshFormatError):
        read_msh(_write(tmp_path, "$Nodes\n0\n$EndNodes\n"))


def test_midpoint_sanity_warning(tmp_path):
    text = ONE_TRIANGLE_V22.replace("5 0.6 0.7 0.5", "5 3 3 3").replace("1 15 2 0 1 1\n", "")
    text = text.replace("$Elements\n2\n", "$Elements\n1\n")
    with pytest.warns(UserWarning, match="midpoint node 5"):
        mesh = read_msh(_write(tmp_path, text))
    assert any("midpoint" in w for w in mesh.warnings)


def test_sphere_fixture():
    mesh = sphere_fixture()
    assert len(mesh) == 84
    assert set(mesh.kinds) == {"tri6"}
    assert np.allclose(np.linalg.norm(mesh.nodes, axis=1), 1.0)
    groups = classify_pairs(mesh)
    counts = {k: len(v) for k, v in groups.items()}
    assert counts["identical"] == 84
    assert sum(counts.values()) == 84 * 84
    partners = np.zeros(84, int)
    for i, _ in groups["shared_edge"]:
        partners[i] += 1
    assert np.all(partners == 3)


def test_sphere_fixture_outward():
    mesh = sphere_fixture()
    for i in range(len(mesh)):
        tri = mesh.triangle(i)
        c = np.array([1 / 3, 1 / 3])
        assert np.dot(tri.normal(c), tri.map(c)) > 0


def test_fixture_matches_generator():
    mesh = sphere_fixture()
    gen = sphere_mesh(44)
    assert np.allclose(mesh.nodes, gen.nodes, atol=1e-15)


def test_sphere_pair_indices():
    mesh = sphere_fixture()
    pairs = sphere_pair_indices(mesh)
    assert set(pairs) == {"identical", "shared_edge", "shared_vertex"}
    for name, (i, j) in pairs.items():
        assert classify_pair(mesh, i, j) == name


@st.composite
def small_meshes(draw):
    n = draw(st.integers(3, 7))
    elems = draw(
        st.lists(st.permutations(range(n)).map(lambda p: p[:3]), min_size=1, max_size=6)
    )
    nodes = np.arange(3 * n, dtype=float).reshape(n, 3)
    return SurfaceMesh(nodes, [np.array(e) for e in elems], ["tri3"] * len(elems))


@given(small_meshes())
def test_classification_symmetric_partition(mesh):
    groups = classify_pairs(mesh)
    seen = {}
    for name in PAIR_CLASSES:
        for pair in groups[name]:
            assert pair not in seen
            seen[pair] = name
    m = len(mesh)
    assert len(seen) == m * m
    for (i, j), name in seen.items():
        assert seen[(j, i)] == name
    for i in range(m):
        assert seen[(i, i)] == "identical"
