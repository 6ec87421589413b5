import numpy as np
import pytest

from shellfem.assembly import (AssemblyConfig, FormAssembler, LoadSpec,
                               Material, calibrate_penalty,
                               green_identity_check)
from shellfem.fe_space import build_dof_layout
from shellfem.geometry import make_chart
from shellfem.mesh import generate_rect_mesh


def make_assembler(chart_kind="cylinder", nx=2, ny=2, enrichment=True,
                   tags=("D", "D", "D", "D"), penalty_C=10.0, rect=None,
                   **chart_kw):
    chart = make_chart(chart_kind, **chart_kw)
    if rect is None:
        rect = (0.6, 1.4, 0.0, 0.8) if chart_kind == "sphere" \
            else (0.0, 1.0, 0.0, 1.0)
    mesh = generate_rect_mesh(rect, nx, ny, tags=tags)
    layout = build_dof_layout(mesh, chart, enrichment=enrichment)
    config = AssemblyConfig(penalty_C=penalty_C)
    return FormAssembler(mesh, chart, layout, Material(), config)


def sym_err(M):
    M = M.toarray()
    return np.abs(M - M.T).max() / max(np.abs(M).max(), 1e-300)


def min_eig(M):
    return np.linalg.eigvalsh(M.toarray()).min()


@pytest.mark.parametrize("kind", ["plate", "sphere"])
def test_forms_symmetric(kind):
    asm = make_assembler(kind)
    f = asm.forms()
    for key in ("R", "R_pen", "G", "G_pen", "T", "T_pen", "C"):
        assert sym_err(f[key]) < 1e-12, key


def test_penalty_blocks_positive_semidefinite():
    asm = make_assembler("cylinder")
    f = asm.forms()
    for key in ("R_pen", "G_pen", "T_pen"):
        lo = min_eig(f[key])
        scale = np.abs(f[key].toarray()).max()
        assert lo > -1e-12 * scale, key


def test_gamma_tau_blocks_positive_semidefinite():
    asm = make_assembler("cylinder")
    for M in (asm.gamma_matrix(), asm.tau_matrix()):
        scale = np.abs(M.toarray()).max()
        assert min_eig(M) > -1e-10 * scale


def test_system_positive_definite_with_clamped_boundary():
    asm = make_assembler("cylinder", penalty_C=20.0)
    K = asm.a_theta(1.0).toarray()
    assert np.linalg.eigvalsh(K).min() > 0


def test_green_identity_flat_and_curved():
    tri = [(0.1, 0.2), (0.9, 0.3), (0.4, 0.8)]
    flat = green_identity_check(tri, make_chart("plate"),
                                ("x1^2 * x2", "sin(x1) + x2^3"))
    assert flat < 1e-12
    cyl = green_identity_check(tri, make_chart("cylinder", radius=2.0),
                               ("cos(x2) * x1", "x1 * x2"))
    assert cyl < 1e-10
    sph_tri = [(0.6, 0.2), (1.2, 0.3), (0.8, 0.9)]
    sph = green_identity_check(sph_tri, make_chart("sphere"),
                               ("sin(x1) * cos(x2)", "x1 + x2^2"))
    assert sph < 1e-7


def test_flux_provider_matches_density_loads_on_plate():
    # on a flat chart with constant stresses, the flux contraction with the
    # outward normal equals constant arc-length densities on each side
    class Fluxes:
        def boundary_fluxes(self, pts):
            n = len(pts)
            m = np.tile(np.array([[0.3, 0.1], [0.1, -0.2]]), (n, 1, 1))
            nm = np.tile(np.array([[1.0, 0.4], [0.4, 0.7]]), (n, 1, 1))
            t = np.tile(np.array([0.5, -0.6]), (n, 1))
            return m, nm, t

    asm = make_assembler("plate", tags=("F", "F", "F", "F"))
    f1 = asm.load_vector(LoadSpec(flux_provider=Fluxes()))

    m = np.array([[0.3, 0.1], [0.1, -0.2]])
    nm = np.array([[1.0, 0.4], [0.4, 0.7]])
    t = np.array([0.5, -0.6])
    # express the same tractions as side-wise constant arc-length densities
    xl, xh, yl, yh = 0.0, 1.0, 0.0, 1.0

    def density(vals_by_side, comp):
        # vals_by_side[i] = vector for side i (bottom, right, top, left)
        def f(pts):
            out = np.zeros(len(pts))
            eps = 1e-12
            out[np.abs(pts[:, 1] - yl) < eps] = vals_by_side[0][comp]
            out[np.abs(pts[:, 0] - xh) < eps] = vals_by_side[1][comp]
            out[np.abs(pts[:, 1] - yh) < eps] = vals_by_side[2][comp]
            out[np.abs(pts[:, 0] - xl) < eps] = vals_by_side[3][comp]
            return out
        return f

    normals = [np.array([0.0, -1.0]), np.array([1.0, 0.0]),
               np.array([0.0, 1.0]), np.array([-1.0, 0.0])]
    rs = [m @ n for n in normals]
    qs = [nm @ n for n in normals]
    q3s = [np.array([t @ n]) for n in normals]
    f2 = asm.load_vector(LoadSpec(
        r1=density(rs, 0), r2=density(rs, 1),
        q1=density(qs, 0), q2=density(qs, 1), q3=density(q3s, 0)))
    assert np.allclose(f1, f2, atol=1e-12 * max(1.0, np.abs(f1).max()))


def test_load_vector_linear():
    asm = make_assembler("cylinder", tags=("D", "F", "F", "S"))

    def fa(pts):
        return np.sin(pts[:, 0]) + pts[:, 1]

    def fb(pts):
        return pts[:, 0] * pts[:, 1]

    la = LoadSpec(p3=fa, c1=fa, q1=fa, r2=fa)
    lb = LoadSpec(p3=fb, c1=fb, q1=fb, r2=fb)
    lc = LoadSpec(p3=lambda p: 2 * fa(p) - 3 * fb(p),
                  c1=lambda p: 2 * fa(p) - 3 * fb(p),
                  q1=lambda p: 2 * fa(p) - 3 * fb(p),
                  r2=lambda p: 2 * fa(p) - 3 * fb(p))
    va, vb, vc = (asm.load_vector(s) for s in (la, lb, lc))
    assert np.allclose(vc, 2 * va - 3 * vb, atol=1e-13)


def test_calibrate_penalty_gives_positive_definite_system():
    chart = make_chart("sphere")
    mesh = generate_rect_mesh((0.6, 1.4, 0.0, 0.8), 2, 2)
    layout = build_dof_layout(mesh, chart, enrichment=True)
    config = AssemblyConfig()
    C = calibrate_penalty(mesh, chart, layout, Material(), config)
    assert C > 0
    asm = FormAssembler(mesh, chart, layout, Material(),
                        AssemblyConfig(penalty_C=C))
    assert np.linalg.eigvalsh(asm.a_theta(1.0).toarray()).min() > 0


def test_b_and_c_shapes():
    asm = make_assembler("cylinder")
    B = asm.b_matrix()
    C = asm.c_matrix()
    n3 = asm.layout.n_block3
    assert B.shape == (n3, asm.layout.n_primal)
    assert C.shape == (n3, n3)
    assert min_eig(C) > 0  # weighted mass matrix of the stress block
