"""Problem bundle tying a chart, mesh, material, loads, and solver choices
together, with penalty calibration shared across refinements of the same
problem."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import (AssemblyConfig, FormAssembler, LoadSpec, Material,
                       calibrate_penalty)
from .fe_space import build_dof_layout
from .mesh import Mesh, refine_uniform
from .norms import NormEngine
from .solve import ShellSolution, realize_via_theta, solve_dg, solve_mixed


@dataclass
class ShellProblem:
    chart: object
    mesh: Mesh
    material: Material = field(default_factory=Material)
    epsilon: float = 0.1
    loads: LoadSpec = None
    config: AssemblyConfig = field(default_factory=AssemblyConfig)
    penalty_C: float = None       # calibrated lazily if None

    def __post_init__(self):
        self._cache = {}

    # ------------------------------------------------------------- components

    def _layout(self, method: str):
        key = ("layout", method)
        if key not in self._cache:
            enrich = method == "mixed"
            self._cache[key] = build_dof_layout(self.mesh, self.chart,
                                                enrichment=enrich)
        return self._cache[key]

    def _config(self, epsilon: float) -> AssemblyConfig:
        if self.penalty_C is None:
            layout = self._layout("mixed")
            base = replace(self.config, epsilon=self.epsilon)
            self.penalty_C = calibrate_penalty(self.mesh, self.chart, layout,
                                               self.material, base)
        return replace(self.config, penalty_C=self.penalty_C, epsilon=epsilon)

    def assembler(self, method: str, epsilon: float = None) -> FormAssembler:
        if epsilon is None:
            epsilon = self.epsilon
        key = ("asm", method, float(epsilon))
        if key not in self._cache:
            self._cache[key] = FormAssembler(self.mesh, self.chart,
                                             self._layout(method),
                                             self.material,
                                             self._config(epsilon))
        return self._cache[key]

    def rhs(self, method: str, epsilon: float = None) -> np.ndarray:
        if self.loads is None:
            raise ValueError("problem has no loads")
        asm = self.assembler(method, epsilon)
        key = ("rhs", method, float(asm.config.epsilon))
        if key not in self._cache:
            self._cache[key] = asm.load_vector(self.loads)
        return self._cache[key]

    # ----------------------------------------------------------------- solving

    def solve(self, method: str, epsilon: float = None,
              via_theta: bool = False) -> ShellSolution:
        """Solve with the mixed enriched method or the penalized one-field
        method; `via_theta` routes both through the single parameterized
        assembly."""
        if epsilon is None:
            epsilon = self.epsilon
        asm = self.assembler(method, epsilon)
        f = self.rhs(method, epsilon)
        if via_theta or method == "mixed":
            sol = realize_via_theta(asm, method, epsilon, loads_rhs=f)
        elif method == "dg":
            sol = solve_dg(asm.rho_matrix(), asm.gamma_matrix(),
                           asm.tau_matrix(), f, epsilon)
        else:
            raise ValueError(f"unknown method {method!r}")
        sol.meta.setdefault("penalty_C", asm.config.penalty_C)
        return sol

    def norm_engine(self, method: str, epsilon: float = None) -> NormEngine:
        asm = self.assembler(method, epsilon)
        key = ("norms", method, float(asm.config.epsilon))
        if key not in self._cache:
            self._cache[key] = NormEngine(asm)
        return self._cache[key]

    # --------------------------------------------------------------- refinement

    def refined(self) -> "ShellProblem":
        """Uniform refinement sharing the calibrated penalty constant."""
        self._config(self.epsilon)          # make sure calibration happened
        return ShellProblem(chart=self.chart, mesh=refine_uniform(self.mesh),
                            material=self.material, epsilon=self.epsilon,
                            loads=self.loads, config=self.config,
                            penalty_C=self.penalty_C)
