"""Asymptotic-regime detection: solve with both discretizations at two
thickness values, Richardson-combine the thinner pair, and classify the shell
as bending-dominated or not from the norm magnitudes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .driver import ShellProblem
from .mesh import mesh_condition_report
from .solve import ShellSolution


@dataclass
class RegimeReport:
    norm_mixed_eps: float
    norm_mixed_half_eps: float
    norm_extrap: float
    norm_dg: float
    ratios: dict
    verdict: str
    thresholds: dict
    epsilon: float = None
    mesh_condition: dict = field(default_factory=dict)
    per_element_norm: np.ndarray = None

    def to_text(self) -> str:
        lines = [
            "regime detection report",
            f"  epsilon                 : {self.epsilon:.6g}",
            f"  |u_h|_H  (mixed, eps)   : {self.norm_mixed_eps:.6e}",
            f"  |u_h|_H  (mixed, eps/2) : {self.norm_mixed_half_eps:.6e}",
            f"  |u_h|_H  (extrapolated) : {self.norm_extrap:.6e}",
            f"  |u_h|_H  (one-field)    : {self.norm_dg:.6e}",
        ]
        for k, v in self.ratios.items():
            lines.append(f"  ratio {k:<18}: {v:.6e}")
        for k, v in self.thresholds.items():
            lines.append(f"  threshold {k:<14}: {v}")
        for k, v in self.mesh_condition.items():
            lines.append(f"  mesh condition {k}: {v}")
        lines.append(f"  verdict: {self.verdict}")
        return "\n".join(lines)

    def to_csv_row(self) -> dict:
        row = {"norm_mixed_eps": self.norm_mixed_eps,
               "norm_mixed_half_eps": self.norm_mixed_half_eps,
               "norm_extrap": self.norm_extrap,
               "norm_dg": self.norm_dg,
               "verdict": self.verdict}
        row.update({f"ratio_{k}": v for k, v in self.ratios.items()})
        return row


VERDICT_BENDING = "bending-dominated"
VERDICT_NON_BENDING = "non-bending (membrane/shear or intermediate)"
VERDICT_INCONCLUSIVE = "inconclusive"


def _element_H_map(engine, primal):
    """Per-element plain H1 seminorm density of the displacement part, for
    inspection alongside the global verdict."""
    asm = engine.asm
    e = asm._elem_data()
    out = np.zeros(asm.mesh.n_triangles)
    for t in range(asm.mesh.n_triangles):
        st = asm._element_strains(t)
        th, thg, u, ug, wv, wg = st.fields
        x = primal[asm.layout.element_dofs(t)]
        w = e.areas[t] * e.wq
        dth = np.einsum("qka,k->qa", th, x)
        du = np.einsum("qka,k->qa", u, x)
        dw = np.einsum("qk,k->q", wv, x)
        out[t] = float(w @ (np.sum(dth ** 2 + du ** 2, axis=-1) + dw ** 2))
    return np.sqrt(out)


def detect_regime(problem: ShellProblem, thresholds: dict = None,
                  keep_solutions: dict = None) -> RegimeReport:
    """Classify the asymptotic regime of `problem` at its thickness epsilon.

    Runs the mixed method at eps and eps/2 and the one-field method at eps,
    forms the Richardson combination (4 u^{eps/2} - u^{eps}) / 3 on the shared
    coefficient vector, and applies the magnitude-based decision rule."""
    th = {"T_big": 10.0, "T_zero": 0.1, "stabilize_rel": 0.05}
    if thresholds:
        th.update(thresholds)
    eps = problem.epsilon

    sol_eps = problem.solve("mixed", epsilon=eps)
    sol_half = problem.solve("mixed", epsilon=eps / 2)
    sol_dg = problem.solve("dg", epsilon=eps)
    extrap = (4.0 * sol_half.primal - sol_eps.primal) / 3.0

    eng_mixed = problem.norm_engine("mixed", eps)
    eng_dg = problem.norm_engine("dg", eps)
    n_eps = eng_mixed.quad_norm("H", sol_eps.primal)
    n_half = eng_mixed.quad_norm("H", sol_half.primal)
    n_ext = eng_mixed.quad_norm("H", extrap)
    n_dg = eng_dg.quad_norm("H", sol_dg.primal)

    ratios = {
        "dg_over_mixed": n_dg / n_eps if n_eps else np.inf,
        "mixed_over_dg": n_eps / n_dg if n_dg else np.inf,
        "extrap_over_eps": n_ext / n_eps if n_eps else np.inf,
        "half_over_eps": n_half / n_eps if n_eps else np.inf,
    }

    if n_dg > 0 and n_eps / n_dg >= th["T_big"]:
        verdict = VERDICT_BENDING
    elif (n_eps >= n_half >= n_ext and n_ext <= th["T_zero"] * n_eps):
        verdict = VERDICT_NON_BENDING
    elif (abs(n_ext - n_half) <= th["stabilize_rel"] * n_half
          and n_ext > th["T_zero"] * n_eps):
        verdict = VERDICT_BENDING
    else:
        verdict = VERDICT_INCONCLUSIVE

    cond = {}
    for label, e in (("eps", eps), ("half_eps", eps / 2)):
        rep = mesh_condition_report(problem.mesh, problem.chart, e)
        cond[label] = rep
        if not rep.get("geometry_resolved", True):
            cond[f"{label}_warning"] = "mesh condition violated"

    report = RegimeReport(
        norm_mixed_eps=n_eps, norm_mixed_half_eps=n_half, norm_extrap=n_ext,
        norm_dg=n_dg, ratios=ratios, verdict=verdict, thresholds=th,
        epsilon=eps, mesh_condition=cond,
        per_element_norm=_element_H_map(eng_mixed, sol_eps.primal))
    if keep_solutions is not None:
        keep_solutions.update({"mixed_eps": sol_eps, "mixed_half": sol_half,
                               "dg": sol_dg, "extrap": extrap})
    return report


def recommend_solution(report: RegimeReport, solutions: dict) -> ShellSolution:
    """Pick the discretization the verdict endorses."""
    if report.verdict == VERDICT_BENDING:
        return solutions["mixed_eps"]
    if report.verdict == VERDICT_NON_BENDING:
        return solutions["dg"]
    raise ValueError("inconclusive regime verdict: refine the mesh or adjust "
                     "the detection thresholds before choosing a method")
