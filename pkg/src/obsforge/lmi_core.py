"""Affine matrix-inequality feasibility problems over matrix variables.

The problem representation is plain numpy; `solve_feasibility` adapts it to
a conic solver through cvxpy (CLARABEL by default). The solver's output is
never trusted as-is: a Feasible status is only reported after the returned
assignment passes an independent residual recheck.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .system_model import ContractViolation

NSD = "NSD"
PSD = "PSD"

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class MatrixVariable:
    id: str
    shape: tuple
    structure: str = "rectangular"  # symmetric | rectangular | diagonal | scalar
    psd_required: bool = False

    def __post_init__(self):
        r, c = self.shape
        if self.structure in ("symmetric", "diagonal") and r != c:
            raise ContractViolation(f"{self.structure} variable {self.id} must be square")
        if self.structure == "scalar" and self.shape != (1, 1):
            raise ContractViolation("scalar variable must have shape (1, 1)")
        if self.psd_required and self.structure == "rectangular":
            raise ContractViolation("psd_required needs symmetric/diagonal/scalar structure")


@dataclass(frozen=True)
class Term:
    """One affine term: left @ V @ right (V transposed when `transpose`),
    doubled with its transpose when `symmetrize`."""

    left: np.ndarray
    var: str
    right: np.ndarray
    transpose: bool = False
    symmetrize: bool = False


@dataclass(frozen=True)
class AffineMatrixExpr:
    constant: np.ndarray
    terms: tuple = ()

    @property
    def shape(self):
        return self.constant.shape


@dataclass(frozen=True)
class Constraint:
    expr: AffineMatrixExpr
    sense: str  # NSD: expr <= 0, PSD: expr >= 0
    strict: bool = False
    label: str = ""


@dataclass(frozen=True)
class LmiProblem:
    variables: tuple
    constraints: tuple
    strictness_margin: float = 1e-7

    def __post_init__(self):
        if self.strictness_margin <= 0:
            raise ContractViolation("strictness margin must be positive")
        ids = {v.id for v in self.variables}
        if len(ids) != len(self.variables):
            raise ContractViolation("duplicate variable ids")
        for con in self.constraints:
            for t in con.expr.terms:
                if t.var not in ids:
                    raise ContractViolation(f"constraint references unknown variable {t.var!r}")

    def variable(self, vid: str) -> MatrixVariable:
        for v in self.variables:
            if v.id == vid:
                return v
        raise KeyError(vid)


@dataclass
class SolverOptions:
    solver: str = "CLARABEL"
    max_iterations: int = 200
    residual_tol: float = 1e-8
    verbose: bool = False
    solver_args: dict = field(default_factory=dict)


@dataclass
class SolverStats:
    iterations: int = 0
    residual: float = float("nan")
    wall_time: float = 0.0


@dataclass
class LmiSolution:
    status: str
    assignment: Optional[dict]
    stats: SolverStats
    diagnostics: str = ""


# ---------------------------------------------------------------------------
# evaluation and residuals
# ---------------------------------------------------------------------------

def evaluate(expr: AffineMatrixExpr, assignment: dict) -> np.ndarray:
    """constant + sum of (symmetrized) terms; plain dense linear algebra."""
    out = np.array(expr.constant, dtype=float, copy=True)
    for t in expr.terms:
        if t.var not in assignment:
            raise ContractViolation(f"assignment missing variable {t.var!r}")
        V = np.atleast_2d(np.asarray(assignment[t.var], dtype=float))
        X = t.left @ (V.T if t.transpose else V) @ t.right
        if X.shape != out.shape:
            raise ContractViolation(
                f"term on {t.var!r} evaluates to {X.shape}, expected {out.shape}")
        out += X + X.T if t.symmetrize else X
    return out


def constraint_shift(problem: LmiProblem, con: Constraint) -> float:
    """Effective strictness shift: eps * (1 + ||constant||) for strict rows."""
    if not con.strict:
        return 0.0
    return problem.strictness_margin * (1.0 + np.linalg.norm(con.expr.constant, 2))


def residuals(problem: LmiProblem, assignment: dict) -> list:
    """Signed extreme eigenvalue per constraint (lambda_max for NSD,
    -lambda_min for PSD); negative means satisfied with margin."""
    out = []
    for con in problem.constraints:
        E = evaluate(con.expr, assignment)
        E = 0.5 * (E + E.T)
        ev = np.linalg.eigvalsh(E)
        out.append(float(ev[-1]) if con.sense == NSD else float(-ev[0]))
    return out


def max_violation(problem: LmiProblem, assignment: dict) -> float:
    """Worst residual after removing each constraint's strictness shift."""
    res = residuals(problem, assignment)
    shifts = [constraint_shift(problem, c) for c in problem.constraints]
    return max(r + s for r, s in zip(res, shifts))


# ---------------------------------------------------------------------------
# solver adapter
# ---------------------------------------------------------------------------

def _cvxpy_variables(problem: LmiProblem):
    import cvxpy as cp

    out = {}
    for v in problem.variables:
        r, c = v.shape
        if v.structure == "symmetric":
            out[v.id] = cp.Variable((r, c), name=v.id, PSD=True) if v.psd_required \
                else cp.Variable((r, c), name=v.id, symmetric=True)
        elif v.structure == "diagonal":
            d = cp.Variable(r, name=v.id, nonneg=v.psd_required)
            out[v.id] = cp.diag(d)
        elif v.structure == "scalar":
            s = cp.Variable(name=v.id, nonneg=v.psd_required)
            out[v.id] = cp.reshape(s, (1, 1), order="C")
        else:
            out[v.id] = cp.Variable((r, c), name=v.id)
    return out


def _cvxpy_expr(expr: AffineMatrixExpr, varmap):
    out = expr.constant
    for t in expr.terms:
        V = varmap[t.var]
        X = t.left @ (V.T if t.transpose else V) @ t.right
        out = out + (X + X.T if t.symmetrize else X)
    return out


def _extract_assignment(problem: LmiProblem, varmap) -> Optional[dict]:
    assignment = {}
    for v in problem.variables:
        val = varmap[v.id].value
        if val is None:
            return None
        val = np.atleast_2d(np.asarray(val, dtype=float))
        if v.structure in ("symmetric",) or (v.psd_required and v.structure != "diagonal"):
            val = 0.5 * (val + val.T)
        if v.structure == "diagonal":
            val = np.diag(np.diag(val))
        assignment[v.id] = val
    return assignment


def solve_feasibility(problem: LmiProblem,
                      options: Optional[SolverOptions] = None) -> LmiSolution:
    """Solve the feasibility problem through cvxpy.

    Status semantics: Feasible only when the returned assignment passes the
    residual recheck (lambda_max <= residual_tol for non-strict rows,
    <= -shift + residual_tol for strict rows). Infeasible only on a
    solver-certified infeasibility; everything else is Inconclusive.
    """
    import cvxpy as cp

    opts = options or SolverOptions()
    varmap = _cvxpy_variables(problem)
    cons = []
    for con in problem.constraints:
        E = _cvxpy_expr(con.expr, varmap)
        Es = 0.5 * (E + E.T)
        shift = constraint_shift(problem, con)
        m = con.expr.shape[0]
        if con.sense == NSD:
            cons.append(Es << -shift * np.eye(m))
        else:
            cons.append(Es >> shift * np.eye(m))
    prob = cp.Problem(cp.Minimize(0), cons)

    solver_args = dict(opts.solver_args)
    if opts.solver.upper() == "CLARABEL":
        solver_args.setdefault("max_iter", opts.max_iterations)
    t0 = time.time()
    try:
        import warnings
        with warnings.catch_warnings():
            # status handling below subsumes cvxpy's accuracy warnings
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=getattr(cp, opts.solver.upper()),
                       verbose=opts.verbose, **solver_args)
    except cp.error.SolverError as e:
        stats = SolverStats(iterations=0, residual=float("nan"),
                            wall_time=time.time() - t0)
        return LmiSolution(INCONCLUSIVE, None, stats,
                           diagnostics=f"solver breakdown: {e}")
    wall = time.time() - t0
    iters = getattr(prob.solver_stats, "num_iters", 0) or 0

    if prob.status == cp.INFEASIBLE:
        return LmiSolution(INFEASIBLE, None,
                           SolverStats(iters, float("nan"), wall),
                           diagnostics="solver produced an infeasibility certificate")
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return LmiSolution(INCONCLUSIVE, None,
                           SolverStats(iters, float("nan"), wall),
                           diagnostics=f"solver status {prob.status!r}")

    assignment = _extract_assignment(problem, varmap)
    if assignment is None:
        return LmiSolution(INCONCLUSIVE, None,
                           SolverStats(iters, float("nan"), wall),
                           diagnostics="solver returned no values")
    worst = max_violation(problem, assignment)
    stats = SolverStats(iters, worst, wall)
    if worst <= opts.residual_tol:
        return LmiSolution(FEASIBLE, assignment, stats)
    return LmiSolution(
        INCONCLUSIVE, assignment, stats,
        diagnostics=(f"solver reported {prob.status} but recheck found "
                     f"violation {worst:.3e} > residual_tol {opts.residual_tol:.1e}"))


# ---------------------------------------------------------------------------
# JSON dump (cross-solver debugging aid)
# ---------------------------------------------------------------------------

def problem_to_json_dict(problem: LmiProblem) -> dict:
    return {
        "strictness_margin": problem.strictness_margin,
        "variables": [
            {"id": v.id, "shape": list(v.shape), "structure": v.structure,
             "psd_required": v.psd_required} for v in problem.variables],
        "constraints": [
            {"sense": c.sense, "strict": c.strict, "label": c.label,
             "constant": c.expr.constant.tolist(),
             "terms": [
                 {"left": t.left.tolist(), "var": t.var, "right": t.right.tolist(),
                  "transpose": t.transpose, "symmetrize": t.symmetrize}
                 for t in c.expr.terms]}
            for c in problem.constraints],
    }


def save_problem(problem: LmiProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_json_dict(problem), fh)
        fh.write("\n")
