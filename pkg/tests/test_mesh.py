import numpy as np
import pytest

from robin_fsi.mesh import (
    MeshError,
    build_rect_mesh,
    dump_mesh,
    extract_interface,
)

LAYOUT = {"left": "l", "right": "r", "bottom": "b", "top": "t"}


def test_counts_and_h():
    m = build_rect_mesh((0, 0), (1, 0.5), 4, 2, LAYOUT)
    assert m.num_vertices == 5 * 3
    assert m.num_triangles == 2 * 4 * 2
    assert m.h == pytest.approx(0.25)
    assert len(m.boundary_edges) == 2 * 4 + 2 * 2


def test_positive_orientation_and_total_area():
    m = build_rect_mesh((0.5, -1.0), (2.0, 0.5), 3, 5, LAYOUT)
    areas = m.triangle_areas()
    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(2.0 * 0.5)


def test_boundary_tags_partition_sides():
    m = build_rect_mesh((0, 0), (1, 1), 3, 3, LAYOUT)
    for tag, coord, value in [
        ("l", 0, 0.0), ("r", 0, 1.0), ("b", 1, 0.0), ("t", 1, 1.0),
    ]:
        for k in m.edges_with_tag(tag):
            pts = m.vertices[m.boundary_edges[k]]
            assert np.allclose(pts[:, coord], value)


def test_outward_normals():
    m = build_rect_mesh((0, 0), (2, 1), 2, 2, LAYOUT)
    normals = m.boundary_edge_normals()
    expect = {"l": (-1, 0), "r": (1, 0), "b": (0, -1), "t": (0, 1)}
    for tag, n in expect.items():
        for k in m.edges_with_tag(tag):
            assert np.allclose(normals[k], n)


def test_invalid_input_raises():
    with pytest.raises(MeshError):
        build_rect_mesh((0, 0), (1, 1), 0, 2, LAYOUT)
    with pytest.raises(MeshError):
        build_rect_mesh((0, 0), (-1, 1), 2, 2, LAYOUT)
    with pytest.raises(MeshError):
        build_rect_mesh((0, 0), (1, 1), 2, 2, {"left": "l"})


def _pair(nx):
    lf = dict(LAYOUT, top="interface")
    ls = dict(LAYOUT, bottom="interface")
    fm = build_rect_mesh((0, 0), (1, 0.5), nx, 2, lf, "fluid")
    sm = build_rect_mesh((0, 0.5), (1, 0.5), nx, 2, ls, "solid")
    return fm, sm


def test_extract_interface_matches():
    fm, sm = _pair(4)
    im = extract_interface(fm, sm)
    assert len(im.fluid_vertices) == 5
    assert np.allclose(
        fm.vertices[im.fluid_vertices], sm.vertices[im.solid_vertices]
    )
    assert len(im.fluid_edges) == 4


def test_extract_interface_mismatch_raises():
    fm, _ = _pair(4)
    _, sm = _pair(5)
    with pytest.raises(MeshError):
        extract_interface(fm, sm)


def test_dump_mesh_format(tmp_path):
    m = build_rect_mesh((0, 0), (1, 1), 1, 1, LAYOUT)
    path = tmp_path / "mesh.txt"
    dump_mesh(m, path)
    lines = path.read_text().splitlines()
    assert len(lines) == m.num_vertices + m.num_triangles + len(m.boundary_edges)
    assert lines[0].startswith("v ")
    tline = lines[m.num_vertices]
    assert tline.startswith("t ")
    assert all(tok.isdigit() for tok in tline.split()[1:])
    eline = lines[-1]
    parts = eline.split()
    assert parts[0] == "e" and parts[3] in LAYOUT.values()
