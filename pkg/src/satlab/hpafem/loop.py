"""The adaptive loop: solve, estimate, mark, enrich."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimate import doerfler_mark, enrich, estimate, oscillation, parse_q_rule
from .mesh import HpMesh
from .space import HpSolution, energy_distance, solve_hp

REFERENCE_EXTRA = 10


@dataclass
class AfemStep:
    iteration: int
    dofs: int
    estimator: float
    osc: float
    action: str  # "doerfler" or "oscillation"
    marked: list
    degrees: list
    error: float = float("nan")
    increment: float = float("nan")  # |grad(u_{k+1} - u_k)|
    ratio: float = float("nan")  # error_{k+1} / error_k
    pythagoras_defect: float = float("nan")


@dataclass
class AfemReport:
    steps: list = field(default_factory=list)
    reference_degree: int = 0
    reference_dofs: int = 0
    reference_energy: float = 0.0
    theta: float = 0.0
    q_rule: str = ""
    lambda_osc: float = 0.0
    source: str = ""

    @property
    def errors(self):
        return [s.error for s in self.steps]

    @property
    def ratios(self):
        return [s.ratio for s in self.steps[1:]]

    @property
    def non_contraction(self) -> bool:
        return any(not r < 1 for r in self.ratios)

    @property
    def max_pythagoras_defect(self) -> float:
        vals = [s.pythagoras_defect for s in self.steps[1:]]
        return max(vals) if vals else 0.0

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "steps"}
        keys = ("error", "estimator", "osc", "dofs", "marked", "ratio", "increment",
                "pythagoras_defect", "action", "degrees")
        for key in keys:
            out[key] = [_jsonable(getattr(s, key)) for s in self.steps]
        out["non_contraction"] = self.non_contraction
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, default=_numpy_default)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _numpy_default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def afem_loop(mesh0: HpMesh, f, theta: float = 0.5, q_rule="ceil:1/2", lambda_osc: float = 0.1,
              max_iter: int = 6) -> AfemReport:
    """Run ``max_iter`` enrichment steps and measure errors against a reference.

    When oscillation exceeds ``lambda_osc`` times the estimator all degrees
    go up by one instead of marking.  The reference solution uses uniform
    degree ``max p + 10`` on the final mesh, which contains every iterate's
    space, so consecutive errors obey the Pythagoras identity.
    """
    q_rule = parse_q_rule(q_rule)
    mesh = mesh0
    report = AfemReport(theta=theta, q_rule=str(q_rule), lambda_osc=lambda_osc, source=str(f))
    sols: list[HpSolution] = []
    for k in range(max_iter + 1):
        sol = solve_hp(mesh, f)
        sols.append(sol)
        etas = estimate(mesh, sol, f)
        est = float(np.sqrt(np.sum(etas ** 2)))
        osc = oscillation(mesh, f)
        step = AfemStep(k, sol.space.dim, est, osc, "", [], [int(d) for d in mesh.degrees])
        report.steps.append(step)
        if k == max_iter:
            step.action = "stop"
            break
        if osc > lambda_osc * est:
            step.action = "oscillation"
            mesh = mesh.with_degrees(mesh.degrees + 1)
        else:
            step.action = "doerfler"
            step.marked = doerfler_mark(etas, theta)
            mesh = enrich(mesh, step.marked, q_rule)
    ref_degree = int(mesh.degrees.max()) + REFERENCE_EXTRA
    ref = solve_hp(mesh.with_degrees(np.full(mesh.n_triangles, ref_degree)), f)
    report.reference_degree = ref_degree
    report.reference_dofs = ref.space.dim
    report.reference_energy = ref.energy()
    for k, sol in enumerate(sols):
        step = report.steps[k]
        step.error = energy_distance(ref, sol)
        if k > 0:
            prev = report.steps[k - 1]
            step.increment = energy_distance(sol, sols[k - 1])
            step.ratio = step.error / prev.error if prev.error > 0 else float("nan")
            lhs = step.error ** 2 + step.increment ** 2
            step.pythagoras_defect = abs(lhs - prev.error ** 2) / max(prev.error ** 2, 1e-300)
    return report
