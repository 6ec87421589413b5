"""Discrete spaces: discontinuous P1 primal fields with edge/vertex bubble
enrichment on free-boundary elements, continuous P1 auxiliary stress fields,
the global DOF ordering, and weighted local projections.

Local polynomials are stored as coefficient vectors over barycentric
monomials l1^i * l2^j of total degree <= 3 (l3 = 1 - l1 - l2 substituted).
Local edge k is the edge opposite local vertex k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import interval_rule, triangle_rule_dense

MONO_EXPS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
             (3, 0), (2, 1), (1, 2), (0, 3)]
_MONO_INDEX = {e: i for i, e in enumerate(MONO_EXPS)}
N_MONO = len(MONO_EXPS)

# barycentric coordinates as coefficient vectors
LAM = np.zeros((3, N_MONO))
LAM[0, _MONO_INDEX[(1, 0)]] = 1.0
LAM[1, _MONO_INDEX[(0, 1)]] = 1.0
LAM[2, _MONO_INDEX[(0, 0)]] = 1.0
LAM[2, _MONO_INDEX[(1, 0)]] = -1.0
LAM[2, _MONO_INDEX[(0, 1)]] = -1.0

ONE = np.zeros(N_MONO)
ONE[_MONO_INDEX[(0, 0)]] = 1.0

FIELDS = ("theta1", "theta2", "u1", "u2", "w")


class SpaceError(ValueError):
    pass


def poly_mul(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    out = np.zeros(N_MONO)
    for i, (a1, b1) in enumerate(MONO_EXPS):
        if c1[i] == 0.0:
            continue
        for j, (a2, b2) in enumerate(MONO_EXPS):
            if c2[j] == 0.0:
                continue
            key = (a1 + a2, b1 + b2)
            if key not in _MONO_INDEX:
                raise SpaceError("polynomial product exceeds degree 3")
            out[_MONO_INDEX[key]] += c1[i] * c2[j]
    return out


def eval_monos(lam12: np.ndarray) -> np.ndarray:
    """Monomial values at barycentric points; lam12 is (..., 2) = (l1, l2)."""
    l1, l2 = lam12[..., 0], lam12[..., 1]
    cols = [l1 ** a * l2 ** b for (a, b) in MONO_EXPS]
    return np.stack(cols, axis=-1)


def grad_monos(lam12: np.ndarray) -> np.ndarray:
    """d(mono)/d(l1, l2) at barycentric points; shape (..., N_MONO, 2)."""
    l1, l2 = lam12[..., 0], lam12[..., 1]
    out = np.zeros(lam12.shape[:-1] + (N_MONO, 2))
    for i, (a, b) in enumerate(MONO_EXPS):
        if a > 0:
            out[..., i, 0] = a * l1 ** (a - 1) * l2 ** b
        if b > 0:
            out[..., i, 1] = b * l2 ** (b - 1) * l1 ** a
    return out


_EDGE_VERTS = ((1, 2), (2, 0), (0, 1))  # local edge k is opposite vertex k


@dataclass
class LocalBasis:
    kind: str                      # P1 | Pe | Pv | P2 | P3
    coeffs: np.ndarray             # (nf, N_MONO)
    free_edges: tuple = ()
    # moment data for projection / unisolvence (physical, sqrt(a)-weighted)
    vol_pts: np.ndarray = None     # (nq, 2) parameter coords
    vol_w: np.ndarray = None       # includes area * sqrt(a)
    vol_lam: np.ndarray = None     # (nq, 2) barycentric
    edge_data: list = field(default_factory=list)  # (pts, w, t, lam12) per free edge
    moment_matrix: np.ndarray = None

    @property
    def n_funcs(self):
        return len(self.coeffs)

    def values(self, lam12: np.ndarray) -> np.ndarray:
        return eval_monos(lam12) @ self.coeffs.T

    def grads_bary(self, lam12: np.ndarray) -> np.ndarray:
        g = grad_monos(lam12)   # (..., N_MONO, 2)
        return np.einsum("...md,fm->...fd", g, self.coeffs)


def _edge_lam12(k: int, t: np.ndarray) -> np.ndarray:
    """Barycentric (l1, l2) along local edge k parameterized by t in [0,1]."""
    s, e = _EDGE_VERTS[k]
    lam = np.zeros((len(t), 3))
    lam[:, s] = 1.0 - t
    lam[:, e] = t
    return lam[:, :2]


def _moment_rows(basis_coeffs, vol_lam, vol_w, edge_data):
    """Moment matrix: volume moments against P1 then (1, t) per free edge."""
    nf = len(basis_coeffs)
    vals = eval_monos(vol_lam) @ basis_coeffs.T           # (nq, nf)
    lamv = eval_monos(vol_lam) @ LAM.T                    # (nq, 3)
    rows = [vol_w @ (lamv[:, q, None] * vals) for q in range(3)]
    for (_, w, t, lam12) in edge_data:
        evals = eval_monos(lam12) @ basis_coeffs.T
        rows.append(w @ evals)
        rows.append(w @ (t[:, None] * evals))
    assert len(rows) == nf
    return np.array(rows)


def build_local_basis(tri_coords, chart, free_edges=(), full_poly=False) -> LocalBasis:
    """Construct the local displacement basis for one element.

    free_edges: sorted tuple of local edge indices lying on the free boundary.
    The added bubble functions are orthogonal to P1 in the sqrt(a)-weighted
    L2 product over the (curved) element.
    """
    tri_coords = np.asarray(tri_coords, dtype=float)
    free_edges = tuple(sorted(free_edges))
    if len(free_edges) > 2:
        raise SpaceError("element with 3 free edges is unsupported")
    d1 = tri_coords[1] - tri_coords[0]
    d2 = tri_coords[2] - tri_coords[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    bary, w = triangle_rule_dense()
    vol_lam = bary[:, :2]
    vol_pts = bary @ tri_coords
    sqrt_a = chart.evaluate(vol_pts).sqrt_a
    vol_w = area * w * sqrt_a

    t_e, w_e = interval_rule(8)
    edge_data = []
    for k in free_edges:
        s, e = _EDGE_VERTS[k]
        pts = np.outer(1.0 - t_e, tri_coords[s]) + np.outer(t_e, tri_coords[e])
        length = np.linalg.norm(tri_coords[e] - tri_coords[s])
        sa = chart.evaluate(pts).sqrt_a
        edge_data.append((pts, length * w_e * sa, t_e, _edge_lam12(k, t_e)))

    def p1_orthogonal(bubble, shift):
        """Solve for p in P1 with integral (bubble*p + shift) q = 0, q in P1."""
        lamv = eval_monos(vol_lam) @ LAM.T
        bub = eval_monos(vol_lam) @ bubble
        sh = eval_monos(vol_lam) @ shift
        M = np.einsum("q,qi,qj->ij", vol_w * bub, lamv, lamv)
        rhs = -np.einsum("q,qi->i", vol_w * sh, lamv)
        c = np.linalg.solve(M, rhs)
        return poly_mul(bubble, c @ LAM) + shift

    if not free_edges:
        kind, extra = "P1", []
    elif full_poly:
        if len(free_edges) == 1:
            kind = "P2"
            # quadratic span beyond P1: the three edge bubbles l_i l_j
            extra = [poly_mul(LAM[i], LAM[j]) for (i, j) in
                     ((1, 2), (2, 0), (0, 1))]
        else:
            kind = "P3"
            extra = [poly_mul(LAM[i], LAM[j]) for (i, j) in
                     ((1, 2), (2, 0), (0, 1))]
            extra += [poly_mul(poly_mul(LAM[0], LAM[1]), LAM[2])]
            extra += [poly_mul(poly_mul(LAM[i], LAM[i]), LAM[j]) for (i, j) in
                      ((0, 1), (1, 2), (2, 0))]
    elif len(free_edges) == 1:
        kind = "Pe"
        k = free_edges[0]
        lam_k = LAM[k]
        other = LAM[(k + 1) % 3]
        extra = [p1_orthogonal(lam_k, ONE), p1_orthogonal(lam_k, other)]
    else:
        kind = "Pv"
        i, j = free_edges
        # paper convention: the two free edges carry the linear/quadratic tails
        li, lj = LAM[i], LAM[j]
        bubble = poly_mul(li, lj)
        tails = [lj, poly_mul(lj, lj), li, poly_mul(li, li)]
        extra = [p1_orthogonal(bubble, s) for s in tails]

    coeffs = np.vstack([LAM] + [np.asarray(c)[None, :] for c in extra]) \
        if extra else LAM.copy()
    lb = LocalBasis(kind, coeffs, free_edges, vol_pts, vol_w, vol_lam, edge_data)
    if kind in ("P1", "Pe", "Pv"):
        M = _moment_rows(coeffs, vol_lam, vol_w, edge_data)
    else:
        vals = eval_monos(vol_lam) @ coeffs.T
        M = np.einsum("q,qi,qj->ij", vol_w, vals, vals)
    if M.shape[0] != M.shape[1]:
        raise SpaceError("moment system is not square")
    if np.linalg.cond(M) > 1e10:
        raise SpaceError("local moment matrix is ill conditioned")
    lb.moment_matrix = M
    return lb


@dataclass
class DofLayout:
    """Global DOF ordering: block1 = plain P1 primal DOFs (15 per element,
    field-major theta1,theta2,u1,u2,w with 3 vertex values each), block2 =
    enrichment DOFs for (u1,u2,w) on free-boundary elements, block3 =
    continuous P1 auxiliary DOFs (M11,M22,M12,xi1,xi2 per vertex)."""

    mesh: object
    enrichment: bool
    with_aux: bool
    bases: list                    # per-element LocalBasis for displacements
    n_block1: int
    n_block2: int
    n_block3: int
    extra_counts: np.ndarray       # per-element enrichment functions per field
    extra_offsets: np.ndarray

    @property
    def n_primal(self):
        return self.n_block1 + self.n_block2

    @property
    def n_total(self):
        return self.n_primal + self.n_block3

    def field_dofs(self, t: int, f: int) -> np.ndarray:
        """Global DOFs of field f on element t, local basis order."""
        base = 15 * t + 3 * f
        p1 = np.arange(base, base + 3)
        if f < 2:
            return p1
        ne = self.extra_counts[t]
        if ne == 0:
            return p1
        d = f - 2
        start = self.n_block1 + self.extra_offsets[t] + ne * d
        return np.concatenate([p1, np.arange(start, start + ne)])

    def element_dofs(self, t: int) -> np.ndarray:
        return np.concatenate([self.field_dofs(t, f) for f in range(5)])

    def aux_dof(self, vertex: int, comp: int) -> int:
        return self.n_primal + 5 * vertex + comp

    def n_local(self, t: int) -> int:
        return 15 + 3 * self.extra_counts[t]


def build_dof_layout(mesh, chart, enrichment: bool, with_aux: bool = None,
                     full_poly: bool = False) -> DofLayout:
    if with_aux is None:
        with_aux = enrichment
    nt = mesh.n_triangles
    bases = []
    extra_counts = np.zeros(nt, dtype=int)
    for t in range(nt):
        free = mesh.free_local_edges(t) if enrichment else ()
        lb = build_local_basis(mesh.triangle_coords(t), chart, free, full_poly)
        bases.append(lb)
        extra_counts[t] = lb.n_funcs - 3
    extra_offsets = np.zeros(nt, dtype=int)
    np.cumsum(3 * extra_counts[:-1], out=extra_offsets[1:])
    n_block1 = 15 * nt
    n_block2 = int(3 * extra_counts.sum())
    n_block3 = 5 * mesh.n_vertices if with_aux else 0
    return DofLayout(mesh, enrichment, with_aux, bases, n_block1, n_block2,
                     n_block3, extra_counts, extra_offsets)


def project_primal(fields: dict, mesh, chart, layout: DofLayout) -> np.ndarray:
    """Element-wise weighted-L2 projection of smooth fields onto the primal
    space.  Rotations always project onto P1; displacements use the element's
    local space with edge-moment matching on free edges."""
    out = np.zeros(layout.n_primal)
    for t in range(mesh.n_triangles):
        lb = layout.bases[t]
        lamv = eval_monos(lb.vol_lam) @ LAM.T
        for f, name in enumerate(FIELDS):
            fn = fields[name]
            fvals = fn(lb.vol_pts)
            if f < 2 or lb.kind == "P1":
                M = np.einsum("q,qi,qj->ij", lb.vol_w, lamv, lamv)
                rhs = np.einsum("q,qi->i", lb.vol_w * fvals, lamv)
                coeffs = np.linalg.solve(M, rhs)
                out[layout.field_dofs(t, f)[:3]] = coeffs
                continue
            if lb.kind in ("Pe", "Pv"):
                rhs = list(np.einsum("q,qi->i", lb.vol_w * fvals, lamv))
                for (pts, w, te, _lam12) in lb.edge_data:
                    fe = fn(pts)
                    rhs.append(w @ fe)
                    rhs.append(w @ (te * fe))
                coeffs = np.linalg.solve(lb.moment_matrix, np.array(rhs))
            else:  # P2/P3: plain weighted L2 projection
                vals = eval_monos(lb.vol_lam) @ lb.coeffs.T
                rhs = np.einsum("q,qi->i", lb.vol_w * fvals, vals)
                coeffs = np.linalg.solve(lb.moment_matrix, rhs)
            out[layout.field_dofs(t, f)] = coeffs
    return out
