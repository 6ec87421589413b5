"""Batch front end: line-oriented config parsing, study drivers (solve,
convergence, locking, regime detection), and CSV/VTK emission.

Config grammar (documented in the README): `[section]` headers, `key = value`
lines, `#` comments.  Exit codes: 2 configuration error, 3 mesh/geometry
error, 4 solver error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import expr as exprmod
from .assembly import AssemblyConfig, LoadSpec, Material
from .driver import ShellProblem
from .fe_space import FIELDS
from .geometry import GeometryError, make_chart
from .manufactured import ManufacturedSolution
from .mesh import (MeshError, generate_rect_mesh, load_mesh,
                   mesh_condition_report)
from .norms import NormEngine
from .regime import detect_regime
from .solve import SolverError


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------- config parsing

def parse_config(text: str) -> dict:
    """Parse `[section]` / `key = value` text into nested dicts."""
    sections = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"line {ln}: malformed section header {raw!r}")
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {ln}: key outside any [section]")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        sections[current][key] = value.strip()
    return sections


def _get_float(sec, key, default=None):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: {sec[key]!r} is not a number")


def _get_int(sec, key, default=None):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(sec[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: {sec[key]!r} is not an integer")


def _get_floats(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return tuple(float(p) for p in sec[key].split(","))
    except ValueError:
        raise ConfigError(f"key {key!r}: expected comma-separated numbers")


@dataclass
class ProblemSpec:
    chart: object
    mesh: object
    material: Material
    epsilon: float
    loads: LoadSpec
    manufactured_fields: dict = None
    method: str = "both"
    config: AssemblyConfig = field(default_factory=AssemblyConfig)
    levels: int = 3
    epsilons: tuple = (1e-2, 1e-3, 1e-4)
    theta_override: float = None
    penalty_user: float = None


def _build_chart(sec):
    kind = sec.get("kind")
    if kind is None:
        raise ConfigError("[chart] needs kind = plate|cylinder|sphere|hypar|"
                          "expression")
    domain = _get_floats(sec, "domain")
    if domain is not None:
        if len(domain) != 4:
            raise ConfigError("[chart] domain needs 4 numbers")
        domain = ((domain[0], domain[1]), (domain[2], domain[3]))
    kwargs = {"domain": domain}
    if "radius" in sec:
        kwargs["radius"] = _get_float(sec, "radius")
    if "coeff" in sec:
        kwargs["coeff"] = _get_float(sec, "coeff")
    if kind == "expression":
        try:
            kwargs["components"] = [sec["x"], sec["y"], sec["z"]]
        except KeyError as exc:
            raise ConfigError(f"[chart] expression kind needs {exc} = ...")
    try:
        return make_chart(kind, **kwargs)
    except GeometryError as exc:
        raise ConfigError(f"[chart]: {exc}")


def _build_mesh(sec):
    if "file" in sec:
        try:
            return load_mesh(Path(sec["file"]).read_text())
        except OSError as exc:
            raise ConfigError(f"[mesh] file: {exc}")
    rect = _get_floats(sec, "rect")
    if rect is None or len(rect) != 4:
        raise ConfigError("[mesh] needs file = path or rect = a,b,c,d")
    nx = _get_int(sec, "nx", 4)
    ny = _get_int(sec, "ny", 4)
    tags = tuple(t.strip().upper() for t in sec.get("tags", "D,D,D,D").split(","))
    if len(tags) != 4:
        raise ConfigError("[mesh] tags needs 4 entries (left,right,bottom,top)")
    grading = None
    if "grading_ratio" in sec:
        grading = {"ratio": _get_float(sec, "grading_ratio"),
                   "toward": sec.get("grading_toward", "left")}
    return generate_rect_mesh(rect, nx, ny, tags=tags, grading=grading)


def _load_fn(sec, key):
    if key not in sec:
        return None
    ast = exprmod.parse(sec[key])

    def fn(pts, _ast=ast):
        pts = np.asarray(pts, dtype=float)
        out = exprmod.evaluate(_ast, pts[..., 0], pts[..., 1])
        return np.broadcast_to(out, pts.shape[:-1]).astype(float)
    return fn


def build_spec(sections: dict) -> ProblemSpec:
    chart = _build_chart(sections.get("chart", {}))
    mesh = _build_mesh(sections.get("mesh", {}))
    mat_sec = sections.get("material", {})
    material = Material(lam=_get_float(mat_sec, "lambda", 1.0),
                        mu=_get_float(mat_sec, "mu", 1.0),
                        kappa=_get_float(mat_sec, "kappa", 5.0 / 6.0))
    epsilon = _get_float(mat_sec, "epsilon", 0.1)
    if epsilon <= 0:
        raise ConfigError("[material] epsilon must be > 0")
    load_sec = sections.get("loads", {})
    try:
        loads = LoadSpec(**{k: _load_fn(load_sec, k)
                            for k in ("p1", "p2", "p3", "c1", "c2",
                                      "r1", "r2", "q1", "q2", "q3")})
    except exprmod.ExprError as exc:
        raise ConfigError(f"[loads]: {exc}")
    manufactured = None
    if "manufactured" in sections:
        msec = sections["manufactured"]
        missing = [n for n in FIELDS if n not in msec]
        if missing:
            raise ConfigError(f"[manufactured] missing fields: {missing}")
        try:
            manufactured = {n: exprmod.parse(msec[n]) for n in FIELDS}
        except exprmod.ExprError as exc:
            raise ConfigError(f"[manufactured]: {exc}")
    asm_sec = sections.get("assembly", {})
    penalty_user = (_get_float(asm_sec, "penalty_c")
                    if "penalty_c" in asm_sec else None)
    config = AssemblyConfig(
        quad_tri_degree=_get_int(asm_sec, "quad_degree", 8),
        quad_edge_points=_get_int(asm_sec, "edge_points", 5),
        epsilon=epsilon)
    study_sec = sections.get("study", {})
    method = study_sec.get("method", "both").lower()
    if method not in ("mixed", "dg", "both"):
        raise ConfigError(f"[study] method must be mixed|dg|both, got {method!r}")
    theta_override = (_get_float(asm_sec, "theta_param")
                      if "theta_param" in asm_sec else None)
    return ProblemSpec(
        chart=chart, mesh=mesh, material=material, epsilon=epsilon,
        loads=loads, manufactured_fields=manufactured, method=method,
        config=config, levels=_get_int(study_sec, "levels", 3),
        epsilons=_get_floats(study_sec, "epsilons", (1e-2, 1e-3, 1e-4)),
        theta_override=theta_override, penalty_user=penalty_user)


def _methods(spec: ProblemSpec):
    return ("mixed", "dg") if spec.method == "both" else (spec.method,)


def _make_problem(spec: ProblemSpec, mesh=None, epsilon=None,
                  loads=None) -> ShellProblem:
    return ShellProblem(chart=spec.chart, mesh=mesh or spec.mesh,
                        material=spec.material,
                        epsilon=spec.epsilon if epsilon is None else epsilon,
                        loads=loads or spec.loads, config=spec.config,
                        penalty_C=spec.penalty_user)


def _calibrate_spec(spec: ProblemSpec) -> ProblemSpec:
    """Calibrate the penalty once on the base mesh and freeze it for every
    solve of the study (explicit user values pass through)."""
    if spec.penalty_user is not None:
        return spec
    p = _make_problem(spec)
    p._config(spec.epsilon)
    return replace(spec, penalty_user=p.penalty_C)


def _manufactured_for(spec: ProblemSpec, method: str,
                      epsilon: float) -> ManufacturedSolution:
    total = epsilon ** -2 + (1.0 if method == "mixed" else 0.0)
    return ManufacturedSolution(spec.manufactured_fields, spec.chart,
                                spec.material, theta_total=total)


# ----------------------------------------------------------------- field eval

class DiscreteField:
    """Evaluate one discrete solution at arbitrary parameter points (used as
    the reference in self-convergence mode).  Point location is brute-force
    over triangles, adequate at study scale."""

    def __init__(self, problem: ShellProblem, method: str,
                 primal: np.ndarray):
        self.asm = problem.assembler(method)
        self.primal = primal
        mesh = problem.mesh
        coords = mesh.vertices[mesh.triangles]
        v0, v1, v2 = coords[:, 0], coords[:, 1], coords[:, 2]
        self._v2 = v2
        self._Jinv = np.linalg.inv(np.stack([v0 - v2, v1 - v2], axis=-1))

    def _locate(self, pts):
        lam12 = np.einsum("tij,qj->tqi", self._Jinv, pts - 0.0) \
            - np.einsum("tij,tj->ti", self._Jinv, self._v2)[:, None]
        lam3 = 1.0 - lam12.sum(axis=-1)
        inside = (lam12 >= -1e-10).all(axis=-1) & (lam3 >= -1e-10)
        owner = inside.argmax(axis=0)
        if not inside.any(axis=0).all():
            raise MeshError("reference-solution evaluation point outside mesh")
        return owner

    def _eval(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        owner = self._locate(pts)
        layout = self.asm.layout
        vals = np.zeros((len(pts), 5))
        grads = np.zeros((len(pts), 5, 2))
        for t in np.unique(owner):
            sel = np.where(owner == t)[0]
            bv, bg = self.asm._trace_at(t, pts[sel])
            th, thg, u, ug, w, wg = self.asm._field_arrays(t, bv, bg)
            x = self.primal[layout.element_dofs(t)]
            vals[sel, 0:2] = np.einsum("qka,k->qa", th, x)
            vals[sel, 2:4] = np.einsum("qka,k->qa", u, x)
            vals[sel, 4] = np.einsum("qk,k->q", w, x)
            grads[sel, 0:2] = np.einsum("qkab,k->qab", thg, x)
            grads[sel, 2:4] = np.einsum("qkab,k->qab", ug, x)
            grads[sel, 4] = np.einsum("qka,k->qa", wg, x)
        return vals, grads

    def values(self, pts):
        return self._eval(pts)[0]

    def grads(self, pts):
        return self._eval(pts)[1]


# ------------------------------------------------------------------- emission

def write_csv(path: Path, rows: list, fieldnames: list):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def write_vtk(path: Path, problem: ShellProblem, method: str,
              primal: np.ndarray):
    """Legacy ASCII unstructured grid; per-corner point duplication so the
    discontinuous fields are represented faithfully."""
    mesh = problem.mesh
    asm = problem.assembler(method)
    layout = asm.layout
    pts3d = []
    data = {name: [] for name in FIELDS}
    for t in range(mesh.n_triangles):
        corners = mesh.vertices[mesh.triangles[t]]
        geom = problem.chart.evaluate(corners)
        pts3d.append(geom.position)
        bv, bg = asm._trace_at(t, corners)
        th, _, u, _, w, _ = asm._field_arrays(t, bv, bg)
        x = primal[layout.element_dofs(t)]
        thv = np.einsum("qka,k->qa", th, x)
        uv = np.einsum("qka,k->qa", u, x)
        wv = np.einsum("qk,k->q", w, x)
        data["theta1"].append(thv[:, 0])
        data["theta2"].append(thv[:, 1])
        data["u1"].append(uv[:, 0])
        data["u2"].append(uv[:, 1])
        data["w"].append(wv)
    pts3d = np.concatenate(pts3d, axis=0)
    nt = mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", "shell midsurface fields", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {3 * nt} double"]
    for p in pts3d:
        lines.append(f"{p[0]:.9e} {p[1]:.9e} {p[2]:.9e}")
    lines.append(f"CELLS {nt} {4 * nt}")
    for t in range(nt):
        lines.append(f"3 {3 * t} {3 * t + 1} {3 * t + 2}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    lines.append(f"POINT_DATA {3 * nt}")
    for name in FIELDS:
        arr = np.concatenate(data[name])
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.9e}" for v in arr)
    path.write_text("\n".join(lines) + "\n")


def _meshcond_rows(spec: ProblemSpec, meshes):
    rows = []
    for level, mesh in enumerate(meshes):
        rep = mesh_condition_report(mesh, spec.chart, spec.epsilon)
        rows.append({"level": level, "n_triangles": mesh.n_triangles,
                     "h": max(mesh.h_tau),
                     "mixed_error_factor": rep["mixed_error_factor"],
                     "geometry_resolution": rep["geometry_resolution"],
                     "geometry_resolved": rep["geometry_resolved"]})
    return rows


# -------------------------------------------------------------------- studies

def run_solve(spec: ProblemSpec, out: Path, jobs: int = 1):
    spec = _calibrate_spec(spec)
    problem = _make_problem(spec)
    rows = []
    for method in _methods(spec):
        if spec.manufactured_fields is not None:
            mfd = _manufactured_for(spec, method, spec.epsilon)
            problem_m = _make_problem(spec, loads=mfd.load_spec())
        else:
            problem_m = problem
        sol = problem_m.solve(method)
        eng = problem_m.norm_engine(method)
        rep = eng.discrete_norms(sol.primal, aux=sol.aux)
        row = {"method": method, "epsilon": spec.epsilon,
               "rho_norm": rep.rho_norm, "gamma_norm": rep.gamma_norm,
               "tau_norm": rep.tau_norm, "a_norm": rep.a_norm,
               "H_h_norm": rep.H_h_norm, "V_h_norm": rep.V_h_norm,
               "energy_bending": rep.energies["bending"],
               "energy_membrane": rep.energies["membrane"],
               "energy_shear": rep.energies["shear"]}
        rows.append(row)
        write_vtk(out / (f"fields.vtk" if len(_methods(spec)) == 1
                         else f"fields_{method}.vtk"),
                  problem_m, method, sol.primal)
    write_csv(out / "norms.csv", rows, list(rows[0].keys()))
    write_csv(out / "meshcond.csv", _meshcond_rows(spec, [spec.mesh]),
              ["level", "n_triangles", "h", "mixed_error_factor", "geometry_resolution",
               "geometry_resolved"])


def _convergence_errors(spec, method, problems, jobs):
    """Per-level H_h errors for one method; returns rows without orders."""
    manufactured = spec.manufactured_fields is not None

    def solve_level(problem):
        if manufactured:
            mfd = _manufactured_for(spec, method, spec.epsilon)
            problem = _make_problem(spec, mesh=problem.mesh,
                                    loads=mfd.load_spec())
            sol = problem.solve(method)
            eng = problem.norm_engine(method)
            err = eng.error_norms(sol.primal, mfd)
            ref = eng.error_norms(np.zeros_like(sol.primal), mfd)
            return problem, sol, err["H_h"], err["H_h"] / ref["H_h"]
        sol = problem.solve(method)
        return problem, sol, None, None

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(jobs) as ex:
            solved = list(ex.map(solve_level, problems))
    else:
        solved = [solve_level(p) for p in problems]

    rows = []
    for level, (problem, sol, err, rel) in enumerate(solved):
        if not manufactured and level + 1 < len(solved):
            fine_problem, fine_sol = solved[level + 1][0], solved[level + 1][1]
            ref = DiscreteField(fine_problem, method, fine_sol.primal)
            eng = problem.norm_engine(method)
            err = eng.error_norms(sol.primal, ref)["H_h"]
            rel = err / max(eng.quad_norm("H", sol.primal), 1e-300)
        if err is None:
            continue
        rows.append({"method": method, "level": level,
                     "h": max(problem.mesh.h_tau),
                     "n_dofs": problem.assembler(method).layout.n_primal,
                     "err_H": err, "rel_err_H": rel,
                     "mode": ("manufactured" if manufactured
                              else "self-convergence")})
    for k in range(1, len(rows)):
        r0, r1 = rows[k - 1], rows[k]
        r1["order"] = float(np.log(r0["err_H"] / r1["err_H"])
                            / np.log(r0["h"] / r1["h"]))
    if rows:
        rows[0]["order"] = ""
    return rows


def run_convergence(spec: ProblemSpec, out: Path, jobs: int = 1):
    spec = _calibrate_spec(spec)
    problems = [_make_problem(spec)]
    extra = 0 if spec.manufactured_fields is not None else 1
    for _ in range(spec.levels - 1 + extra):
        problems.append(problems[-1].refined())
    rows = []
    for method in _methods(spec):
        rows.extend(_convergence_errors(spec, method,
                                        problems[:spec.levels + extra], jobs))
    write_csv(out / "convergence.csv", rows,
              ["method", "level", "h", "n_dofs", "err_H", "rel_err_H",
               "order", "mode"])
    write_csv(out / "meshcond.csv",
              _meshcond_rows(spec, [p.mesh for p in problems[:spec.levels]]),
              ["level", "n_triangles", "h", "mixed_error_factor", "geometry_resolution",
               "geometry_resolved"])


def run_locking(spec: ProblemSpec, out: Path, jobs: int = 1):
    spec = _calibrate_spec(spec)
    manufactured = spec.manufactured_fields is not None
    tasks = [(eps, method) for eps in spec.epsilons
             for method in _methods(spec)]

    def run_one(task):
        eps, method = task
        if manufactured:
            mfd = _manufactured_for(spec, method, eps)
            problem = _make_problem(spec, epsilon=eps, loads=mfd.load_spec())
            sol = problem.solve(method, epsilon=eps)
            eng = problem.norm_engine(method, eps)
            err = eng.error_norms(sol.primal, mfd)
            ref = eng.error_norms(np.zeros_like(sol.primal), mfd)
            rel = np.sqrt((err["rho"] ** 2 + err["gamma"] ** 2
                           + err["tau"] ** 2)
                          / (ref["rho"] ** 2 + ref["gamma"] ** 2
                             + ref["tau"] ** 2))
        else:
            problem = _make_problem(spec, epsilon=eps)
            sol = problem.solve(method, epsilon=eps)
            eng = problem.norm_engine(method, eps)
            rel = ""
        rep = eng.discrete_norms(sol.primal, aux=sol.aux, epsilon=eps)
        return {"epsilon": eps, "method": method, "H_h_norm": rep.H_h_norm,
                "a_norm": rep.a_norm, "rel_energy_err": rel}

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(jobs) as ex:
            rows = list(ex.map(run_one, tasks))
    else:
        rows = [run_one(t) for t in tasks]
    write_csv(out / "locking.csv", rows,
              ["epsilon", "method", "H_h_norm", "a_norm", "rel_energy_err"])


def run_regime(spec: ProblemSpec, out: Path, jobs: int = 1):
    spec = _calibrate_spec(spec)
    problem = _make_problem(spec)
    report = detect_regime(problem)
    (out / "regime.txt").write_text(report.to_text() + "\n")
    row = report.to_csv_row()
    write_csv(out / "regime.csv", [row], list(row.keys()))
    return report


STUDIES = {"solve": run_solve, "converge": run_convergence,
           "locking": run_locking, "regime": run_regime}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shellfem",
        description="Shell finite-element studies from a config file")
    parser.add_argument("study", choices=sorted(STUDIES))
    parser.add_argument("config", help="path to the config file")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default=".")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        spec = build_spec(parse_config(text))
        STUDIES[args.study](spec, out, jobs=max(1, args.jobs))
    except (ConfigError, exprmod.ExprError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (MeshError, GeometryError) as exc:
        print(f"mesh/geometry error: {exc}", file=sys.stderr)
        return 3
    except (SolverError, RuntimeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
