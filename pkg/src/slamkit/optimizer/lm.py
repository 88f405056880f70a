"""Levenberg-Marquardt engine over manifold variables.

The normal equations are damped with ``lambda * diag(H)`` and solved by
Cholesky factorization; 3-vector point blocks are eliminated first through
their block-diagonal structure (the reduced camera system stays small at
desk scale).  Accepted steps never increase the robustified cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problem import GraphProblem, OptimizerError, VAR_POINT, retract

_FD_STEP = 1e-6


@dataclass
class SolveOptions:
    max_iterations: int = 50
    gradient_tolerance: float = 1e-10
    cost_tolerance: float = 1e-8
    initial_lambda: float = 1e-4
    max_lambda: float = 1e12


@dataclass
class SolveReport:
    initial_cost: float
    final_cost: float
    iterations: int
    termination: str  # converged | max_iterations | trust_region_failure
    cost_history: list[float] = field(default_factory=list)


def _numeric_jacobians(block, kinds, values, step=_FD_STEP):
    jacs = []
    for vi, (kind, value) in enumerate(zip(kinds, values)):
        dof = {"se3": 6, "sim3": 7, "point": 3}[kind]
        cols = []
        for d in range(dof):
            delta = np.zeros(dof)
            delta[d] = step
            plus = list(values)
            plus[vi] = retract(kind, value, delta)
            minus = list(values)
            minus[vi] = retract(kind, value, -delta)
            cols.append((block.residual(*plus) - block.residual(*minus)) / (2 * step))
        jacs.append(np.stack(cols, axis=1))
    return jacs


def _evaluate(problem, values, with_jacobians):
    """Robustified cost plus per-block scaled residuals/Jacobians."""
    cost = 0.0
    rows = []
    for block in problem.residuals:
        vals = [values[k] for k in block.keys]
        r = np.asarray(block.residual(*vals), dtype=float)
        if not np.all(np.isfinite(r)):
            return math.inf, None
        if block.loss is None:
            w, c = 1.0, float(r @ r)
        else:
            w, c = block.loss.weight_and_cost(float(np.linalg.norm(r)))
        cost += c
        if with_jacobians:
            jacs = block.jacobians(*vals)
            if jacs is None:
                kinds = [problem.variables[k].kind for k in block.keys]
                jacs = _numeric_jacobians(block, kinds, vals)
            sw = math.sqrt(w)
            rows.append((block, sw * r, [sw * j for j in jacs]))
    return cost, rows


class _Layout:
    """Tangent-space layout splitting eliminable point blocks from the rest.

    A point variable is eliminable only when no residual couples it to
    another point (its Hessian block must stay block-diagonal); coupled
    points are solved densely with the camera group.
    """

    def __init__(self, problem: GraphProblem):
        coupled = set()
        for block in problem.residuals:
            pts = [k for k in block.keys
                   if problem.variables[k].kind == VAR_POINT
                   and not problem.variables[k].fixed]
            if len(pts) > 1:
                coupled.update(pts)
        self.cam_keys = []
        self.point_keys = []
        for key, var in problem.variables.items():
            if var.fixed:
                continue
            if var.kind == VAR_POINT and key not in coupled:
                self.point_keys.append(key)
            else:
                self.cam_keys.append(key)
        self.cam_offset = {}
        off = 0
        for k in self.cam_keys:
            self.cam_offset[k] = off
            off += problem.variables[k].dof
        self.cam_dof = off
        self.point_index = {k: i for i, k in enumerate(self.point_keys)}

    @property
    def total_dof(self):
        return self.cam_dof + 3 * len(self.point_keys)


def _solve_normal_equations(problem, layout, rows, lam):
    """One damped solve; returns per-variable steps or None when singular."""
    nc = layout.cam_dof
    npts = len(layout.point_keys)
    hcc = np.zeros((nc, nc))
    gc = np.zeros(nc)
    hpp = np.zeros((npts, 3, 3))
    gp = np.zeros((npts, 3))
    hcp = np.zeros((nc, 3 * npts)) if npts else None

    for block, r, jacs in rows:
        entries = []
        for key, jac in zip(block.keys, jacs):
            if problem.variables[key].fixed:
                continue
            if key in layout.point_index:
                entries.append(("p", layout.point_index[key], jac))
            else:
                entries.append(("c", layout.cam_offset[key], jac))
        for tag_a, loc_a, ja in entries:
            grad = ja.T @ r
            if tag_a == "c":
                gc[loc_a:loc_a + ja.shape[1]] += grad
            else:
                gp[loc_a] += grad
            for tag_b, loc_b, jb in entries:
                h = ja.T @ jb
                if tag_a == "c" and tag_b == "c":
                    hcc[loc_a:loc_a + ja.shape[1], loc_b:loc_b + jb.shape[1]] += h
                elif tag_a == "c" and tag_b == "p":
                    hcp[loc_a:loc_a + ja.shape[1], 3 * loc_b:3 * loc_b + 3] += h
                elif tag_a == "p" and tag_b == "p" and loc_a == loc_b:
                    hpp[loc_a] += h

    # multiplicative diagonal damping
    dc = np.maximum(np.diag(hcc), 1e-12) if nc else np.zeros(0)
    hcc_d = hcc + np.diag(lam * dc) if nc else hcc
    steps = {}
    try:
        if npts:
            dp = np.maximum(np.einsum("pii->pi", hpp), 1e-12)
            hpp_d = hpp + lam * np.einsum("pi,ij->pij", dp, np.eye(3))
            hpp_inv = np.linalg.inv(hpp_d)
            if nc:
                hcp3 = hcp.reshape(nc, npts, 3)
                hcp_hppinv = np.einsum("cpi,pij->cpj", hcp3, hpp_inv)
                s = hcc_d - np.einsum("cpj,dpj->cd", hcp_hppinv, hcp3)
                rhs = -gc + np.einsum("cpj,pj->c", hcp_hppinv, gp)
                chol = np.linalg.cholesky(s)
                dx_c = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
                rhs_p = -gp - np.einsum("cpi,c->pi", hcp3, dx_c)
                dx_p = np.einsum("pij,pj->pi", hpp_inv, rhs_p)
            else:
                dx_c = np.zeros(0)
                dx_p = np.einsum("pij,pj->pi", hpp_inv, -gp)
        else:
            chol = np.linalg.cholesky(hcc_d)
            dx_c = np.linalg.solve(chol.T, np.linalg.solve(chol, -gc))
            dx_p = np.zeros((0, 3))
    except np.linalg.LinAlgError:
        return None, None
    for k, off in layout.cam_offset.items():
        steps[k] = dx_c[off:off + problem.variables[k].dof]
    for k, i in layout.point_index.items():
        steps[k] = dx_p[i]
    grad_inf = 0.0
    if nc:
        grad_inf = float(np.max(np.abs(gc)))
    if npts:
        grad_inf = max(grad_inf, float(np.max(np.abs(gp))))
    return steps, grad_inf


def optimize(problem: GraphProblem, opts: SolveOptions | None = None) -> SolveReport:
    """Minimize the robustified squared residual norm; updates variables."""
    opts = opts or SolveOptions()
    layout = _Layout(problem)
    if layout.total_dof == 0:
        raise OptimizerError("no free variables to optimize")

    values = {k: v.value for k, v in problem.variables.items()}
    cost, rows = _evaluate(problem, values, with_jacobians=True)
    if not math.isfinite(cost):
        raise OptimizerError("non-finite residual at the initial point")

    report = SolveReport(initial_cost=cost, final_cost=cost, iterations=0,
                         termination="max_iterations", cost_history=[cost])
    lam = opts.initial_lambda
    for it in range(1, opts.max_iterations + 1):
        report.iterations = it
        steps, grad_inf = _solve_normal_equations(problem, layout, rows, lam)
        while steps is None:
            lam *= 10.0
            if lam > opts.max_lambda:
                raise OptimizerError("normal equations singular at maximum damping")
            steps, grad_inf = _solve_normal_equations(problem, layout, rows, lam)
        if grad_inf < opts.gradient_tolerance:
            report.termination = "converged"
            break

        accepted = False
        while lam <= opts.max_lambda:
            if steps is not None:
                trial = dict(values)
                for k, delta in steps.items():
                    trial[k] = retract(problem.variables[k].kind, values[k], delta)
                trial_cost, trial_rows = _evaluate(problem, trial, with_jacobians=True)
                if trial_cost < cost:
                    values, rows = trial, trial_rows
                    rel_drop = (cost - trial_cost) / max(cost, 1e-300)
                    cost = trial_cost
                    report.cost_history.append(cost)
                    lam = max(lam / 3.0, 1e-12)
                    accepted = True
                    if rel_drop < opts.cost_tolerance:
                        report.termination = "converged"
                    break
            lam *= 10.0
            if lam > opts.max_lambda:
                break
            steps, _ = _solve_normal_equations(problem, layout, rows, lam)
        if not accepted:
            report.termination = "trust_region_failure"
            break
        if report.termination == "converged":
            break

    for k, v in values.items():
        problem.variables[k].value = v
    report.final_cost = cost
    return report


def numeric_jacobian_check(problem: GraphProblem, step: float = _FD_STEP) -> float:
    """Max deviation of analytic vs central-difference Jacobians.

    Relative with a unit floor: |a - n| / max(1, |a|, |n|), so zero-residual
    points degrade gracefully to an absolute comparison.
    """
    worst = 0.0
    for block in problem.residuals:
        vals = [problem.variables[k].value for k in block.keys]
        analytic = block.jacobians(*vals)
        if analytic is None:
            continue
        kinds = [problem.variables[k].kind for k in block.keys]
        numeric = _numeric_jacobians(block, kinds, vals, step=step)
        for a, n in zip(analytic, numeric):
            dev = np.abs(a - n) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
            worst = max(worst, float(np.max(dev)))
    return worst
