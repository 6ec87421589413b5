import numpy as np
import pytest

from shellfem.assembly import LoadSpec
from shellfem.driver import ShellProblem
from shellfem.geometry import make_chart
from shellfem.mesh import generate_rect_mesh
from shellfem.regime import (VERDICT_BENDING, VERDICT_INCONCLUSIVE,
                             VERDICT_NON_BENDING, RegimeReport, detect_regime,
                             recommend_solution)


def cylinder_problem(epsilon=1e-2, scale=1.0, nx=3, ny=3,
                     tags=("D", "D", "D", "D")):
    chart = make_chart("cylinder", radius=1.0)
    mesh = generate_rect_mesh((0.0, 1.0, 0.0, 1.0), nx, ny, tags=tags)
    loads = LoadSpec(p3=lambda p: scale * np.sin(np.pi * p[:, 0])
                     * np.sin(np.pi * p[:, 1]))
    return ShellProblem(chart=chart, mesh=mesh, epsilon=epsilon, loads=loads)


def test_extrapolation_identity():
    # if u^{eps/2} == u^{eps}, the Richardson combination equals both
    prob = cylinder_problem()
    sols = {}
    rep = detect_regime(prob, keep_solutions=sols)
    a = sols["mixed_eps"].primal
    synthetic = (4.0 * a - a) / 3.0
    assert np.abs(synthetic - a).max() < 1e-14 * max(np.abs(a).max(), 1)
    # and the actual combination satisfies the defining identity exactly
    b = sols["mixed_half"].primal
    assert np.allclose(sols["extrap"], (4.0 * b - a) / 3.0, atol=0, rtol=0)
    assert rep.norm_extrap > 0


def test_partially_clamped_cylinder_is_bending_dominated():
    sols = {}
    rep = detect_regime(cylinder_problem(epsilon=1e-2,
                                         tags=("D", "F", "F", "F")),
                        keep_solutions=sols)
    assert rep.verdict == VERDICT_BENDING
    assert rep.ratios["mixed_over_dg"] >= rep.thresholds["T_big"]
    chosen = recommend_solution(rep, sols)
    assert chosen is sols["mixed_eps"]


def test_verdict_invariant_under_load_scaling():
    r1 = detect_regime(cylinder_problem(scale=1.0))
    r2 = detect_regime(cylinder_problem(scale=1e4))
    assert r1.verdict == r2.verdict
    for k in r1.ratios:
        assert r1.ratios[k] == pytest.approx(r2.ratios[k], rel=1e-6)
    assert r2.norm_mixed_eps == pytest.approx(1e4 * r1.norm_mixed_eps,
                                              rel=1e-6)


def test_recommendations_by_verdict():
    base = dict(norm_mixed_eps=1.0, norm_mixed_half_eps=1.0, norm_extrap=1.0,
                norm_dg=1.0, ratios={}, thresholds={})
    sols = {"mixed_eps": "A", "dg": "B"}
    rep = RegimeReport(verdict=VERDICT_BENDING, **base)
    assert recommend_solution(rep, sols) == "A"
    rep = RegimeReport(verdict=VERDICT_NON_BENDING, **base)
    assert recommend_solution(rep, sols) == "B"
    rep = RegimeReport(verdict=VERDICT_INCONCLUSIVE, **base)
    with pytest.raises(ValueError):
        recommend_solution(rep, sols)


def test_report_render_and_csv():
    rep = detect_regime(cylinder_problem())
    text = rep.to_text()
    assert "verdict" in text and rep.verdict in text
    row = rep.to_csv_row()
    assert row["verdict"] == rep.verdict
    assert row["norm_dg"] == rep.norm_dg
    assert rep.per_element_norm.shape == (rep_mesh_size(),)
    assert "eps" in rep.mesh_condition and "half_eps" in rep.mesh_condition


def rep_mesh_size():
    return cylinder_problem().mesh.n_triangles


def test_custom_thresholds_can_force_inconclusive():
    rep = detect_regime(cylinder_problem(),
                        thresholds={"T_big": 1e9, "T_zero": 1e-12,
                                    "stabilize_rel": 1e-12})
    assert rep.verdict == VERDICT_INCONCLUSIVE
