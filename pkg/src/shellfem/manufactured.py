"""Manufactured exact solutions and the loads that reproduce them.

Given five smooth fields (theta1, theta2, u1, u2, w) as expressions, this
module evaluates the exact strains and stress resultants

    m^{ab} = (1/3) a^{abcd} rho_cd,
    n^{ab} = theta_total * a^{abcd} gamma_cd,
    t^a    = theta_total * kappa mu a^{ab} tau_b,

and derives volume loads (forces and couples) and boundary fluxes from the
covariant divergence formulas, so that the exact fields solve the continuous
model whose energy multiplies the membrane/shear part by theta_total.

All derivatives are exact: field derivatives are symbolic, and stress
divergences use covariant derivatives of the strains (the metric contraction
commutes with covariant differentiation) together with the stored derivative
fields of the curvature tensor and Christoffel symbols.  A finite-difference
variant is kept for cross-checking.
"""

from __future__ import annotations

import numpy as np

from . import expr as exprmod
from . import strain
from .assembly import LoadSpec

FIELDS = ("theta1", "theta2", "u1", "u2", "w")


class ManufacturedSolution:
    def __init__(self, field_exprs: dict, chart, material, theta_total: float,
                 fd_step: float = 1e-5):
        self.chart = chart
        self.material = material
        self.theta_total = float(theta_total)
        self.fd_step = fd_step
        self.asts = {}
        self.dasts = {}
        self.ddasts = {}
        for name in FIELDS:
            ast = field_exprs[name]
            if isinstance(ast, str):
                ast = exprmod.parse(ast)
            self.asts[name] = ast
            d = [exprmod.differentiate(ast, "x1"),
                 exprmod.differentiate(ast, "x2")]
            self.dasts[name] = d
            self.ddasts[name] = [[exprmod.differentiate(di, v)
                                  for v in ("x1", "x2")] for di in d]

    # ------------------------------------------------------------- evaluation

    def field(self, name: str):
        ast = self.asts[name]

        def fn(pts):
            pts = np.asarray(pts, dtype=float)
            return exprmod.evaluate(ast, pts[..., 0], pts[..., 1])
        return fn

    def fields_dict(self):
        return {name: self.field(name) for name in FIELDS}

    def values(self, pts):
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        return np.stack([exprmod.evaluate(self.asts[n], x1, x2)
                         for n in FIELDS], axis=-1)

    def grads(self, pts):
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        return np.stack([
            np.stack([exprmod.evaluate(self.dasts[n][0], x1, x2),
                      exprmod.evaluate(self.dasts[n][1], x1, x2)], axis=-1)
            for n in FIELDS], axis=-2)

    def hessians(self, pts):
        """(..., 5, 2, 2) with [..., f, i, j] = d_j d_i field_f."""
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        shape = np.broadcast(x1, x2).shape
        out = np.empty(shape + (5, 2, 2))
        for f, n in enumerate(FIELDS):
            for i in range(2):
                for j in range(2):
                    out[..., f, i, j] = exprmod.evaluate(
                        self.ddasts[n][i][j], x1, x2)
        return out

    def strains_at(self, pts, geom=None):
        if geom is None:
            geom = self.chart.evaluate(np.asarray(pts, dtype=float))
        v = self.values(pts)
        g = self.grads(pts)
        th, u, w = v[..., 0:2], v[..., 2:4], v[..., 4]
        thg = g[..., 0:2, :]
        ug = g[..., 2:4, :]
        wg = g[..., 4, :]
        return strain.strains(th, thg, u, ug, w, wg, geom)

    def stresses(self, pts, geom=None):
        """Stress resultants (m, nmem, t) at parameter points."""
        pts = np.asarray(pts, dtype=float)
        if geom is None:
            geom = self.chart.evaluate(pts)
        from .geometry import eval_elastic
        mat = self.material
        el = eval_elastic(geom, mat.lam, mat.mu, mat.kappa).elastic
        rho, gam, tau = self.strains_at(pts, geom)
        m = (1.0 / 3.0) * np.einsum("...abcd,...cd->...ab", el, rho)
        nmem = self.theta_total * np.einsum("...abcd,...cd->...ab", el, gam)
        t = (self.theta_total * mat.kappa * mat.mu
             * np.einsum("...ab,...b->...a", geom.a_con, tau))
        return m, nmem, t

    # flux provider protocol used by the load assembler on S/F boundaries
    def boundary_fluxes(self, pts):
        return self.stresses(pts)

    # ------------------------------------------------------------ volume loads

    def strain_covariant_partials(self, pts, geom=None):
        """Exact covariant derivatives rho_{ab|c}, gamma_{ab|c}, tau_{a|c}
        (last axis is the differentiation index)."""
        pts = np.asarray(pts, dtype=float)
        if geom is None:
            geom = self.chart.evaluate(pts)
        v = self.values(pts)
        g = self.grads(pts)
        hh = self.hessians(pts)
        th, u, w = v[..., 0:2], v[..., 2:4], v[..., 4]
        dth, du, dw = g[..., 0:2, :], g[..., 2:4, :], g[..., 4, :]
        ddth, ddu, ddw = hh[..., 0:2, :, :], hh[..., 2:4, :, :], hh[..., 4, :, :]
        G = geom.christoffel                      # [..., g, a, b] = G^g_{ab}
        dG = geom.d_christoffel                   # [..., g, a, b, d]
        b = geom.b_cov
        db = geom.d_b_cov
        bm = geom.b_mix                           # [..., g, a] = b^g_a
        dbm = geom.d_b_mix                        # [..., g, a, d]

        rho, gam, tau = strain.strains(th, dth, u, du, w, dw, geom)

        # tau_a = d_a w + b^g_a u_g + theta_a
        dta = (ddw
               + np.einsum("...gac,...g->...ac", dbm, u)
               + np.einsum("...ga,...gc->...ac", bm, du)
               + dth)
        dtau_cov = dta - np.einsum("...lac,...l->...ac", G, tau)

        # gamma_ab = sym(d u)_ab - G^g_{ab} u_g - b_ab w
        sym_ddu = 0.5 * (ddu + np.swapaxes(ddu, -3, -2)
                         )  # [..., a, b, c] = sym in (a, b) of d_c d_b u_a
        dgam = (sym_ddu
                - np.einsum("...gabc,...g->...abc", dG, u)
                - np.einsum("...gab,...gc->...abc", G, du)
                - np.einsum("...abc,...->...abc", db, w)
                - np.einsum("...ab,...c->...abc", b, dw))
        dgam_cov = (dgam
                    - np.einsum("...lac,...lb->...abc", G, gam)
                    - np.einsum("...lbc,...al->...abc", G, gam))

        # u_{g|b} and its partials
        U = du - np.einsum("...lgb,...l->...gb", G, u)
        dU = (ddu
              - np.einsum("...lgbc,...l->...gbc", dG, u)
              - np.einsum("...lgb,...lc->...gbc", G, du))
        bU = np.einsum("...ga,...gb->...ab", bm, U)
        dbU = (np.einsum("...gac,...gb->...abc", dbm, U)
               + np.einsum("...ga,...gbc->...abc", bm, dU))
        c_part = (np.einsum("...gac,...gb->...abc", dbm, b)
                  + np.einsum("...ga,...gbc->...abc", bm, db))
        sym_ddth = 0.5 * (ddth + np.swapaxes(ddth, -3, -2))
        drho = (sym_ddth
                - np.einsum("...gabc,...g->...abc", dG, th)
                - np.einsum("...gab,...gc->...abc", G, dth)
                - 0.5 * (dbU + np.swapaxes(dbU, -3, -2))
                + np.einsum("...abc,...->...abc", c_part, w)
                + np.einsum("...ab,...c->...abc", geom.c_cov, dw))
        drho_cov = (drho
                    - np.einsum("...lac,...lb->...abc", G, rho)
                    - np.einsum("...lbc,...al->...abc", G, rho))
        return drho_cov, dgam_cov, dtau_cov

    def volume_loads(self, pts):
        """Couples c^a and forces p^1,p^2,p^3 at parameter points (exact)."""
        pts = np.asarray(pts, dtype=float)
        geom = self.chart.evaluate(pts)
        from .geometry import eval_elastic
        mat = self.material
        el = eval_elastic(geom, mat.lam, mat.mu, mat.kappa).elastic
        m, nmem, t = self.stresses(pts, geom)
        drho_cov, dgam_cov, dtau_cov = self.strain_covariant_partials(pts,
                                                                      geom)
        # metric contractions commute with covariant differentiation
        div_m = (1.0 / 3.0) * np.einsum("...abcd,...cdb->...a", el, drho_cov)
        div_n = self.theta_total * np.einsum("...abcd,...cdb->...a", el,
                                             dgam_cov)
        div_t = (self.theta_total * mat.kappa * mat.mu
                 * np.einsum("...ab,...ba->...", geom.a_con, dtau_cov))
        G = geom.christoffel
        bm = geom.b_mix
        # b^g_{a|b} = d_b b^g_a + G^g_{bl} b^l_a - G^l_{ab} b^g_l
        dbm_cov = (geom.d_b_mix
                   + np.einsum("...gbl,...la->...gab", G, bm)
                   - np.einsum("...lab,...gl->...gab", G, bm))
        div_bm = (np.einsum("...gab,...ab->...g", dbm_cov, m)
                  + np.einsum("...ga,...a->...g", bm, div_m))
        couple = -div_m + t
        force = div_bm - div_n + np.einsum("...a,...ga->...g", t, bm)
        p3 = (np.einsum("...ab,...ab->...", m, geom.c_cov)
              - np.einsum("...ab,...ab->...", nmem, geom.b_cov)
              - div_t)
        return {"c1": couple[..., 0], "c2": couple[..., 1],
                "p1": force[..., 0], "p2": force[..., 1], "p3": p3}

    def _stress_partials(self, pts):
        """Central differences d_d (m, nmem, t); cross-check only."""
        h = self.fd_step
        dm = np.empty(pts.shape[:-1] + (2, 2, 2))
        dn = np.empty_like(dm)
        dt = np.empty(pts.shape[:-1] + (2, 2))
        for d in range(2):
            step = np.zeros(2)
            step[d] = h
            mp, np_, tp = self.stresses(pts + step)
            mm, nm_, tm = self.stresses(pts - step)
            dm[..., d] = (mp - mm) / (2 * h)
            dn[..., d] = (np_ - nm_) / (2 * h)
            dt[..., d] = (tp - tm) / (2 * h)
        return dm, dn, dt

    def volume_loads_fd(self, pts):
        """Finite-difference variant of volume_loads; cross-check only."""
        pts = np.asarray(pts, dtype=float)
        geom = self.chart.evaluate(pts)
        m, nmem, t = self.stresses(pts, geom)
        dm, dn, dt = self._stress_partials(pts)
        G = geom.christoffel

        def div2(s, ds):
            # s^{ab}|_b = d_b s^{ab} + G^a_{bl} s^{lb} + G^b_{bl} s^{al}
            return (np.einsum("...abb->...a", ds)
                    + np.einsum("...abl,...lb->...a", G, s)
                    + np.einsum("...bbl,...al->...a", G, s))

        div_m = div2(m, dm)
        bmv = np.einsum("...ga,...ab->...gb", geom.b_mix, m)
        dbmv = (np.einsum("...gad,...ab->...gbd", geom.d_b_mix, m)
                + np.einsum("...ga,...abd->...gbd", geom.b_mix, dm))
        div_bm = div2(bmv, dbmv)
        div_n = div2(nmem, dn)
        div_t = (np.einsum("...aa->...", dt)
                 + np.einsum("...aal,...l->...", G, t))
        couple = -div_m + t
        force = (div_bm - div_n
                 + np.einsum("...a,...ga->...g", t, geom.b_mix))
        p3 = (np.einsum("...ab,...ab->...", m, geom.c_cov)
              - np.einsum("...ab,...ab->...", nmem, geom.b_cov)
              - div_t)
        return {"c1": couple[..., 0], "c2": couple[..., 1],
                "p1": force[..., 0], "p2": force[..., 1], "p3": p3}

    def load_spec(self) -> LoadSpec:
        def vol(name):
            def fn(pts):
                return self.volume_loads(pts)[name]
            return fn
        return LoadSpec(p1=vol("p1"), p2=vol("p2"), p3=vol("p3"),
                        c1=vol("c1"), c2=vol("c2"), flux_provider=self)

    def aux_interpolant(self, layout, multiplier: float) -> np.ndarray:
        """Continuous-P1 vertex interpolant of the auxiliary stresses
        (M^{11}, M^{22}, M^{12}, xi^1, xi^2) scaled by `multiplier` relative
        to the unit-coefficient membrane/shear stresses."""
        mesh = layout.mesh
        pts = mesh.vertices
        geom = self.chart.evaluate(pts)
        from .geometry import eval_elastic
        mat = self.material
        el = eval_elastic(geom, mat.lam, mat.mu, mat.kappa).elastic
        _, gam, tau = self.strains_at(pts, geom)
        nm = multiplier * np.einsum("...abcd,...cd->...ab", el, gam)
        xi = (multiplier * mat.kappa * mat.mu
              * np.einsum("...ab,...b->...a", geom.a_con, tau))
        out = np.zeros(layout.n_block3)
        base = 5 * np.arange(mesh.n_vertices)
        out[base + 0] = nm[:, 0, 0]
        out[base + 1] = nm[:, 1, 1]
        out[base + 2] = nm[:, 0, 1]
        out[base + 3] = xi[:, 0]
        out[base + 4] = xi[:, 1]
        return out


def div_check(sol: ManufacturedSolution, pts) -> dict:
    """Convenience for tests: loads at points (exposes the same dictionary)."""
    return sol.volume_loads(np.asarray(pts, dtype=float))
