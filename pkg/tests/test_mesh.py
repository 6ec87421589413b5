import numpy as np
import pytest

from shellfem.geometry import make_chart
from shellfem.mesh import (Mesh, MeshError, generate_rect_mesh, load_mesh,
                           mesh_condition_report, refine_uniform, save_mesh)


def test_rect_mesh_counts_and_euler():
    for nx, ny in ((1, 1), (3, 2), (5, 5)):
        m = generate_rect_mesh((0, 1, 0, 2), nx, ny)
        nv = (nx + 1) * (ny + 1)
        nt = 2 * nx * ny
        assert m.n_vertices == nv
        assert m.n_triangles == nt
        ne = len(m.interior_edges) + len(m.boundary_edges)
        assert nv - ne + nt == 1                      # Euler, one hole-free patch
        assert len(m.boundary_edges) == 2 * (nx + ny)


def test_triangles_ccw_and_area():
    m = generate_rect_mesh((0, 2, 0, 1), 4, 3)
    v = m.vertices[m.triangles]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    assert (areas > 0).all()
    assert areas.sum() == pytest.approx(2.0)


def test_boundary_tags_assigned_per_side():
    m = generate_rect_mesh((0, 1, 0, 1), 2, 2, tags=("D", "S", "F", "D"))
    for e in m.boundary_edges:
        p, q = m.vertices[list(e.vertices)]
        mid = 0.5 * (p + q)
        if np.isclose(mid[0], 0):
            assert e.tag == "D"
        elif np.isclose(mid[0], 1):
            assert e.tag == "S"
        elif np.isclose(mid[1], 0):
            assert e.tag == "F"
        else:
            assert e.tag == "D"


def test_grading_example():
    m = generate_rect_mesh((0, 1, 0, 1), 3, 1,
                           grading={"ratio": 0.5, "toward": "left"})
    xs = np.unique(np.round(m.vertices[:, 0], 12))
    assert np.allclose(xs, [0.0, 1.0 / 7.0, 3.0 / 7.0, 1.0])


def test_refine_uniform():
    m = generate_rect_mesh((0, 1, 0, 1), 2, 2, tags=("D", "S", "F", "D"))
    r = refine_uniform(m)
    assert r.n_triangles == 4 * m.n_triangles
    # total area preserved
    for mesh, want in ((m, 1.0), (r, 1.0)):
        v = mesh.vertices[mesh.triangles]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        assert (0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])).sum() \
            == pytest.approx(want)
    # boundary tags survive refinement, each side split in two
    assert len(r.boundary_edges) == 2 * len(m.boundary_edges)
    assert ({e.tag for e in r.boundary_edges}
            == {e.tag for e in m.boundary_edges})
    assert max(r.h_tau) == pytest.approx(0.5 * max(m.h_tau))


def test_save_load_round_trip():
    m = generate_rect_mesh((0, 1, 0, 2), 3, 2, tags=("D", "S", "F", "D"))
    text = save_mesh(m)
    m2 = load_mesh(text)
    assert np.allclose(m.vertices, m2.vertices)
    assert np.array_equal(m.triangles, m2.triangles)
    tags1 = sorted((tuple(sorted(e.vertices)), e.tag) for e in m.boundary_edges)
    tags2 = sorted((tuple(sorted(e.vertices)), e.tag) for e in m2.boundary_edges)
    assert tags1 == tags2


def test_load_mesh_error_line_numbers():
    with pytest.raises(MeshError, match="line 1"):
        load_mesh("bogus-header\n")
    good = save_mesh(generate_rect_mesh((0, 1, 0, 1), 1, 1))
    lines = good.splitlines()
    # corrupt a vertex line
    idx = next(i for i, l in enumerate(lines)
               if l.startswith("vertices")) + 1
    lines[idx] = "0.0 not-a-number"
    with pytest.raises(MeshError, match=f"line {idx + 1}"):
        load_mesh("\n".join(lines))


def test_load_mesh_fixes_orientation():
    m = generate_rect_mesh((0, 1, 0, 1), 1, 1)
    lines = save_mesh(m).splitlines()
    idx = next(i for i, l in enumerate(lines)
               if l.startswith("triangles")) + 1
    i, j, k = lines[idx].split()
    lines[idx] = f"{k} {j} {i}"                   # flip one triangle
    mesh = load_mesh("\n".join(lines))
    v = mesh.vertices[mesh.triangles]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    assert (0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) > 0).all()


def test_shape_regularity_bounded():
    m = generate_rect_mesh((0, 1, 0, 1), 4, 4)
    assert 1.0 <= m.shape_regularity < 10.0


def test_mesh_condition_plate():
    m = generate_rect_mesh((0, 1, 0, 1), 4, 4)
    chart = make_chart("plate")
    rep = mesh_condition_report(m, chart, epsilon=0.01)
    assert rep["mixed_error_factor"] == pytest.approx(1.0)
    assert rep["geometry_resolution"] == pytest.approx(0.0, abs=1e-12)
    assert rep["geometry_resolved"]


def test_mesh_condition_sphere_scales_with_h():
    chart = make_chart("sphere")
    m = generate_rect_mesh((0.6, 1.2, 0.0, 0.6), 4, 4)
    r1 = mesh_condition_report(m, chart, epsilon=0.1)
    r2 = mesh_condition_report(refine_uniform(m), chart, epsilon=0.1)
    assert 0 < r2["geometry_resolution"] < r1["geometry_resolution"]
    assert r2["mixed_error_factor"] < r1["mixed_error_factor"]
