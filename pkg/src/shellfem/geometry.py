"""Midsurface differential geometry.

Charts map parameter coordinates (x1, x2) to points of a surface in R^3.
Built-in charts (plate, cylinder, sphere, hypar) are differentiated
symbolically once and evaluated as vectorized numpy closures; user-expression
charts fall back to central finite differences.

Index conventions used throughout the package:
    a_cov[a, b]        = a_{ab}
    a_con[a, b]        = a^{ab}
    b_cov[a, b]        = b_{ab}
    b_mix[a, b]        = b^a_b = a^{ag} b_{gb}
    c_cov[a, b]        = c_{ab} = b_a^g b_{gb}
    christoffel[c,a,b] = Gamma^c_{ab}
    d_*[..., d]        = partial derivative with respect to x_d (last axis)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from . import expr as exprmod

_DEGEN_TOL = 1e-12


class GeometryError(ValueError):
    pass


class DegenerateChartError(GeometryError):
    pass


class DomainError(GeometryError):
    pass


@dataclass
class GeometryEval:
    """Geometric coefficient bundle at a batch of points (leading axes = batch)."""

    position: np.ndarray      # (..., 3)
    a1: np.ndarray            # (..., 3)
    a2: np.ndarray            # (..., 3)
    a3: np.ndarray            # (..., 3) unit normal (a1 x a2)/|a1 x a2|
    a_cov: np.ndarray         # (..., 2, 2)
    a_con: np.ndarray         # (..., 2, 2)
    sqrt_a: np.ndarray        # (...,)
    b_cov: np.ndarray         # (..., 2, 2)
    b_mix: np.ndarray         # (..., 2, 2)
    c_cov: np.ndarray         # (..., 2, 2)
    christoffel: np.ndarray   # (..., 2, 2, 2)
    d_b_cov: np.ndarray       # (..., 2, 2, 2)
    d_b_mix: np.ndarray       # (..., 2, 2, 2)
    d_christoffel: np.ndarray  # (..., 2, 2, 2, 2)


@dataclass
class ElasticTensors:
    elastic: np.ndarray      # (..., 2, 2, 2, 2) a^{abgd}
    compliance: np.ndarray   # (..., 2, 2, 2, 2) a_{abgd}
    lam: float
    mu: float
    kappa: float


def _tensors_from_frame(a1, a2, da):
    """Zeroth-order coefficient fields from tangents a_alpha (...,3) and their
    partials da[..., a, b, :] = d_b a_a."""
    a_cov = np.empty(a1.shape[:-1] + (2, 2))
    a_cov[..., 0, 0] = np.einsum("...i,...i->...", a1, a1)
    a_cov[..., 0, 1] = np.einsum("...i,...i->...", a1, a2)
    a_cov[..., 1, 0] = a_cov[..., 0, 1]
    a_cov[..., 1, 1] = np.einsum("...i,...i->...", a2, a2)
    cross = np.cross(a1, a2)
    sqrt_a = np.linalg.norm(cross, axis=-1)
    if np.any(sqrt_a < _DEGEN_TOL):
        raise DegenerateChartError("tangent vectors are (nearly) linearly dependent")
    a3 = cross / sqrt_a[..., None]
    det = a_cov[..., 0, 0] * a_cov[..., 1, 1] - a_cov[..., 0, 1] ** 2
    a_con = np.empty_like(a_cov)
    a_con[..., 0, 0] = a_cov[..., 1, 1] / det
    a_con[..., 1, 1] = a_cov[..., 0, 0] / det
    a_con[..., 0, 1] = -a_cov[..., 0, 1] / det
    a_con[..., 1, 0] = a_con[..., 0, 1]
    b_cov = np.einsum("...i,...abi->...ab", a3, da)
    b_cov = 0.5 * (b_cov + np.swapaxes(b_cov, -1, -2))
    # contravariant tangent frame a^c = a^{cd} a_d
    frame = np.stack([a1, a2], axis=-2)                        # (..., d, 3)
    con_frame = np.einsum("...cd,...di->...ci", a_con, frame)  # (..., c, 3)
    christoffel = np.einsum("...ci,...abi->...cab", con_frame, da)
    b_mix = np.einsum("...cg,...gb->...cb", a_con, b_cov)
    c_cov = np.einsum("...ga,...gb->...ab", b_mix, b_cov)
    return a_cov, a_con, sqrt_a, a3, b_cov, b_mix, c_cov, christoffel


class Chart:
    """Base chart; subclasses provide _frame/_position and derivative fields."""

    name = "chart"
    domain = None  # ((x1min, x1max), (x2min, x2max)) or None

    def check_domain(self, points: np.ndarray):
        if self.domain is None:
            return
        tol = 1e-9
        (l1, u1), (l2, u2) = self.domain
        x1, x2 = points[..., 0], points[..., 1]
        if (np.any(x1 < l1 - tol) or np.any(x1 > u1 + tol)
                or np.any(x2 < l2 - tol) or np.any(x2 > u2 + tol)):
            raise DomainError(f"point outside chart domain of {self.name}")

    def position(self, points) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, points) -> GeometryEval:
        raise NotImplementedError


_X1, _X2 = sp.symbols("x1 x2", real=True)


class SymbolicChart(Chart):
    """Chart defined by a sympy position vector; all coefficient fields and
    their first derivatives are produced by exact symbolic differentiation."""

    def __init__(self, name: str, phi, domain=None):
        self.name = name
        self.domain = domain
        phi = sp.Matrix(phi)
        a1 = phi.diff(_X1)
        a2 = phi.diff(_X2)
        frame = [a1, a2]
        a_cov = sp.Matrix(2, 2, lambda i, j: frame[i].dot(frame[j]))
        det = sp.simplify(a_cov.det())
        a_con = a_cov.inv().applyfunc(sp.simplify)
        cross = a1.cross(a2)
        sqrt_a = sp.sqrt(det)
        a3 = cross / sp.sqrt(cross.dot(cross))
        da = [[frame[a].diff(x) for x in (_X1, _X2)] for a in range(2)]
        b_cov = sp.Matrix(2, 2, lambda a, b: sp.simplify(a3.dot(da[a][b])))
        con_frame = [a_con[c, 0] * a1 + a_con[c, 1] * a2 for c in range(2)]
        gamma = [[[sp.simplify(con_frame[c].dot(da[a][b])) for b in range(2)]
                  for a in range(2)] for c in range(2)]
        b_mix = sp.simplify(a_con * b_cov)
        c_cov = sp.Matrix(2, 2, lambda a, b: sp.simplify(
            sum(b_mix[g, a] * b_cov[g, b] for g in range(2))))

        flat = []
        flat += [phi[i] for i in range(3)]
        flat += [a1[i] for i in range(3)] + [a2[i] for i in range(3)]
        flat += [a3[i] for i in range(3)]
        flat += [a_cov[i, j] for i in range(2) for j in range(2)]
        flat += [a_con[i, j] for i in range(2) for j in range(2)]
        flat += [sqrt_a]
        flat += [b_cov[i, j] for i in range(2) for j in range(2)]
        flat += [b_mix[i, j] for i in range(2) for j in range(2)]
        flat += [c_cov[i, j] for i in range(2) for j in range(2)]
        flat += [gamma[c][a][b] for c in range(2) for a in range(2) for b in range(2)]
        flat += [sp.diff(b_cov[a, b], x) for a in range(2) for b in range(2)
                 for x in (_X1, _X2)]
        flat += [sp.diff(b_mix[a, b], x) for a in range(2) for b in range(2)
                 for x in (_X1, _X2)]
        flat += [sp.diff(gamma[c][a][b], x) for c in range(2) for a in range(2)
                 for b in range(2) for x in (_X1, _X2)]
        self._n_flat = len(flat)
        self._flat_fn = sp.lambdify((_X1, _X2), flat, modules="numpy")
        self._pos_fn = sp.lambdify((_X1, _X2), [phi[i] for i in range(3)],
                                   modules="numpy")

    def _eval_flat(self, x1, x2):
        shape = np.broadcast(x1, x2).shape
        vals = self._flat_fn(x1, x2)
        out = np.empty(shape + (self._n_flat,))
        for k, v in enumerate(vals):
            out[..., k] = v
        return out

    def position(self, points):
        points = np.asarray(points, dtype=float)
        self.check_domain(points)
        shape = points.shape[:-1]
        vals = self._pos_fn(points[..., 0], points[..., 1])
        out = np.empty(shape + (3,))
        for k in range(3):
            out[..., k] = vals[k]
        return out

    def evaluate(self, points) -> GeometryEval:
        points = np.asarray(points, dtype=float)
        self.check_domain(points)
        shape = points.shape[:-1]
        f = self._eval_flat(points[..., 0], points[..., 1])
        k = 0

        def take(n, tail):
            nonlocal k
            block = f[..., k:k + n].reshape(shape + tail)
            k += n
            return block

        position = take(3, (3,))
        a1 = take(3, (3,))
        a2 = take(3, (3,))
        a3 = take(3, (3,))
        a_cov = take(4, (2, 2))
        a_con = take(4, (2, 2))
        sqrt_a = take(1, ()).reshape(shape)
        if np.any(sqrt_a < _DEGEN_TOL):
            raise DegenerateChartError("tangent vectors are (nearly) linearly dependent")
        b_cov = take(4, (2, 2))
        b_mix = take(4, (2, 2))
        c_cov = take(4, (2, 2))
        christoffel = take(8, (2, 2, 2))
        d_b_cov = take(8, (2, 2, 2))
        d_b_mix = take(8, (2, 2, 2))
        d_christoffel = take(16, (2, 2, 2, 2))
        return GeometryEval(position, a1, a2, a3, a_cov, a_con, sqrt_a, b_cov,
                            b_mix, c_cov, christoffel, d_b_cov, d_b_mix,
                            d_christoffel)


class ExpressionChart(Chart):
    """Chart given by three coordinate expressions; differentiated by central
    finite differences (step h_fd for the frame, a coarser step for the
    derivative coefficient fields)."""

    def __init__(self, name: str, components, domain=None, h_fd: float = 1e-6):
        self.name = name
        self.domain = domain
        self.h_fd = h_fd
        self._asts = [exprmod.parse(c) if isinstance(c, str) else c
                      for c in components]

    def position(self, points):
        points = np.asarray(points, dtype=float)
        self.check_domain(points)
        x1, x2 = points[..., 0], points[..., 1]
        return np.stack([exprmod.evaluate(a, x1, x2) for a in self._asts], axis=-1)

    def _position_unchecked(self, points):
        x1, x2 = points[..., 0], points[..., 1]
        return np.stack([exprmod.evaluate(a, x1, x2) for a in self._asts], axis=-1)

    def _frame(self, points):
        h = self.h_fd
        e1 = np.array([h, 0.0])
        e2 = np.array([0.0, h])
        a1 = (self._position_unchecked(points + e1)
              - self._position_unchecked(points - e1)) / (2 * h)
        a2 = (self._position_unchecked(points + e2)
              - self._position_unchecked(points - e2)) / (2 * h)
        da = np.empty(points.shape[:-1] + (2, 2, 3))
        pc = self._position_unchecked(points)
        # second differences of the position give d_b a_a; roundoff in a
        # second difference scales like eps/h^2, so use a coarser step than
        # for the first derivatives (optimal near eps^(1/4))
        h = max(self.h_fd, 1.2e-4)
        e1 = np.array([h, 0.0])
        e2 = np.array([0.0, h])
        da[..., 0, 0, :] = (self._position_unchecked(points + e1) - 2 * pc
                            + self._position_unchecked(points - e1)) / h**2
        da[..., 1, 1, :] = (self._position_unchecked(points + e2) - 2 * pc
                            + self._position_unchecked(points - e2)) / h**2
        mixed = (self._position_unchecked(points + e1 + e2)
                 - self._position_unchecked(points + e1 - e2)
                 - self._position_unchecked(points - e1 + e2)
                 + self._position_unchecked(points - e1 - e2)) / (4 * h**2)
        da[..., 0, 1, :] = mixed
        da[..., 1, 0, :] = mixed
        return a1, a2, da

    def _order0(self, points):
        a1, a2, da = self._frame(points)
        return _tensors_from_frame(a1, a2, da)

    def evaluate(self, points) -> GeometryEval:
        points = np.asarray(points, dtype=float)
        self.check_domain(points)
        (a_cov, a_con, sqrt_a, a3, b_cov, b_mix, c_cov,
         christoffel) = self._order0(points)
        # derivative fields by FD on the coefficient fields; larger step keeps
        # the inner second-difference noise from being amplified
        h2 = max(self.h_fd ** 0.5, 1e-4)
        d_b_cov = np.empty(points.shape[:-1] + (2, 2, 2))
        d_b_mix = np.empty_like(d_b_cov)
        d_christoffel = np.empty(points.shape[:-1] + (2, 2, 2, 2))
        for d in range(2):
            step = np.zeros(2)
            step[d] = h2
            plus = self._order0(points + step)
            minus = self._order0(points - step)
            d_b_cov[..., d] = (plus[4] - minus[4]) / (2 * h2)
            d_b_mix[..., d] = (plus[5] - minus[5]) / (2 * h2)
            d_christoffel[..., d] = (plus[7] - minus[7]) / (2 * h2)
        return GeometryEval(self._position_unchecked(points), *self._frame(points)[:2],
                            a3, a_cov, a_con, sqrt_a, b_cov, b_mix, c_cov,
                            christoffel, d_b_cov, d_b_mix, d_christoffel)


def make_chart(kind: str, *, radius: float = 1.0, coeff: float = 1.0,
               components=None, domain=None, h_fd: float = 1e-6) -> Chart:
    """Factory for the built-in charts and user-expression charts."""
    if kind == "plate":
        return SymbolicChart("plate", [_X1, _X2, 0], domain)
    if kind == "cylinder":
        R = sp.nsimplify(radius, rational=True)
        return SymbolicChart("cylinder",
                             [R * sp.cos(_X1 / R), R * sp.sin(_X1 / R), _X2],
                             domain)
    if kind == "sphere":
        R = sp.nsimplify(radius, rational=True)
        dom = domain
        return SymbolicChart("sphere",
                             [R * sp.sin(_X1) * sp.cos(_X2),
                              R * sp.sin(_X1) * sp.sin(_X2),
                              R * sp.cos(_X1)], dom)
    if kind == "hypar":
        c = sp.nsimplify(coeff, rational=True)
        return SymbolicChart("hypar", [_X1, _X2, c * _X1 * _X2], domain)
    if kind == "expression":
        if components is None or len(components) != 3:
            raise GeometryError("expression chart needs 3 coordinate expressions")
        return ExpressionChart("expression", components, domain, h_fd)
    raise GeometryError(f"unknown chart kind {kind!r}")


def eval_geometry(chart: Chart, point) -> GeometryEval:
    return chart.evaluate(point)


def eval_elastic(geom: GeometryEval, lam: float, mu: float,
                 kappa: float = 5.0 / 6.0) -> ElasticTensors:
    """Plane-stress-reduced elastic tensor and its inverse (compliance)."""
    if mu <= 0 or lam < 0 or kappa <= 0:
        raise ValueError("need mu > 0, lam >= 0, kappa > 0")
    ac = geom.a_con
    av = geom.a_cov
    elastic = (mu * (np.einsum("...ag,...bd->...abgd", ac, ac)
                     + np.einsum("...bg,...ad->...abgd", ac, ac))
               + (2 * mu * lam / (2 * mu + lam))
               * np.einsum("...ab,...gd->...abgd", ac, ac))
    compliance = ((1.0 / (2 * mu))
                  * (0.5 * (np.einsum("...ad,...bg->...abgd", av, av)
                            + np.einsum("...bd,...ag->...abgd", av, av))
                     - (lam / (2 * mu + 3 * lam))
                     * np.einsum("...ab,...gd->...abgd", av, av)))
    return ElasticTensors(elastic, compliance, lam, mu, kappa)


def _triangle_samples(tri_vertices: np.ndarray, n: int) -> np.ndarray:
    """Barycentric lattice with n points per edge (n>=2 includes vertices)."""
    pts = []
    for i in range(n):
        for j in range(n - i):
            l1 = i / (n - 1)
            l2 = j / (n - 1)
            pts.append((l1, l2, 1.0 - l1 - l2))
    lam = np.array(pts)
    return lam @ tri_vertices


def geometry_seminorms(chart: Chart, tri_vertices, order: int,
                       n_samples: int = 3) -> dict:
    """Sampled L^inf (semi)norms of Gamma, b_cov, b_mix over a triangle.

    order=0: per-family sum over components of max |component|.
    order=1: sum over components of max over sample points and derivative
    directions; 'sum_dirs' variants sum over the two directions instead.
    n_samples=3 gives the default 6-point rule (vertices + edge midpoints).
    """
    tri_vertices = np.asarray(tri_vertices, dtype=float)
    pts = _triangle_samples(tri_vertices, n_samples)
    g = chart.evaluate(pts)
    out = {}
    if order == 0:
        for key, arr in (("christoffel", g.christoffel), ("b_cov", g.b_cov),
                         ("b_mix", g.b_mix)):
            flat = arr.reshape(len(pts), -1)
            out[key] = float(np.abs(flat).max(axis=0).sum())
        return out
    for key, arr in (("christoffel", g.d_christoffel), ("b_cov", g.d_b_cov),
                     ("b_mix", g.d_b_mix)):
        npts = len(pts)
        flat = np.abs(arr.reshape(npts, -1, 2))        # (pts, comps, dir)
        out[key] = float(flat.max(axis=(0, 2)).sum())   # max over pts and dirs
        out[key + "_sum_dirs"] = float(flat.max(axis=0).sum())
    return out
