"""Observer-gain synthesis via LMI feasibility, plus independent certificate
verification.

Three criteria are supported: the parameterization-free design (scalar
weight rho on the unknown-nonlinearity channel), the Lipschitz design
(constant ell), and quadratic boundedness (PSD weight Qb). Builders emit
plain LmiProblem objects; `synthesize` wires build -> solve -> extract ->
verify. Verification reconstructs every condition from scratch with dense
linear algebra and never reuses solver internals.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .system_model import ContractViolation, NonlinearSystem, observer_matrices
from . import lmi_core
from .lmi_core import (AffineMatrixExpr, Constraint, LmiProblem, LmiSolution,
                       MatrixVariable, NSD, PSD, SolverOptions, Term)

ASYMPTOTIC = "asymptotic"
EXP_FIXED_ALPHA = "exp_fixed_alpha"
EXP_VARIABLE_ALPHA = "exp_variable_alpha"

EPS_LAMBDA = 1e-9    # floor on Lambda-tilde so Lambda = inv(Lambda-tilde) exists
ALPHA_FLOOR = 1e-6   # lower bound on the variable decay rate (Corollary 2)
VERIFY_TOL = 1e-8    # verification tolerance, scaled by criterion magnitude


@dataclass(frozen=True)
class Criterion:
    kind: str                      # "paramfree" | "lipschitz" | "quadratic_bound"
    rho: Optional[float] = None
    mode: Optional[str] = None     # paramfree only
    alpha: Optional[float] = None
    ell: Optional[float] = None
    qb: Optional[np.ndarray] = None

    @staticmethod
    def paramfree(rho: float, mode: str = ASYMPTOTIC,
                  alpha: Optional[float] = None) -> "Criterion":
        if rho <= 0:
            raise ContractViolation("rho must be positive (rho = 0 is not "
                                    "representable in the 1/rho LMI form)")
        if mode not in (ASYMPTOTIC, EXP_FIXED_ALPHA, EXP_VARIABLE_ALPHA):
            raise ContractViolation(f"unknown paramfree mode {mode!r}")
        if mode == EXP_FIXED_ALPHA and (alpha is None or alpha <= 0):
            raise ContractViolation("exp_fixed_alpha needs alpha > 0")
        return Criterion(kind="paramfree", rho=rho, mode=mode, alpha=alpha)

    @staticmethod
    def lipschitz(ell: float, alpha: Optional[float] = None) -> "Criterion":
        if ell < 0:
            raise ContractViolation("ell must be nonnegative")
        if alpha is not None and alpha <= 0:
            raise ContractViolation("alpha must be positive when given")
        return Criterion(kind="lipschitz", ell=ell, alpha=alpha)

    @staticmethod
    def quadratic_bound(qb: np.ndarray) -> "Criterion":
        return Criterion(kind="quadratic_bound", qb=np.asarray(qb, dtype=float))

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.rho is not None:
            d["rho"] = self.rho
        if self.mode is not None:
            d["mode"] = self.mode
        if self.alpha is not None:
            d["alpha"] = self.alpha
        if self.ell is not None:
            d["ell"] = self.ell
        if self.qb is not None:
            d["qb"] = self.qb.tolist()
        return d


@dataclass(frozen=True)
class Certificate:
    P: np.ndarray
    criterion: Criterion
    Q: Optional[np.ndarray] = None
    lambda_tilde: Optional[np.ndarray] = None
    T: Optional[np.ndarray] = None
    rho: Optional[float] = None
    alpha: Optional[float] = None
    residual_report: tuple = ()


@dataclass(frozen=True)
class ObserverGains:
    J: np.ndarray
    K: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    certificate: Certificate


@dataclass(frozen=True)
class Condition:
    name: str
    value: float
    threshold: float
    passed: bool

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "passed", bool(self.passed))


@dataclass(frozen=True)
class VerificationReport:
    conditions: tuple
    passed: bool
    scale: float

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json_dict(self) -> dict:
        return {"passed": self.passed, "scale": self.scale,
                "conditions": [{"name": c.name, "value": c.value,
                                "threshold": c.threshold, "passed": c.passed}
                               for c in self.conditions]}


def _sel(total: int, offset: int, width: int) -> np.ndarray:
    S = np.zeros((total, width))
    S[offset:offset + width, :] = np.eye(width)
    return S


def moderation_constraints(n_x: int, n_y: int, p_floor: float, p_cap: float,
                           r_cap: Optional[float] = None,
                           s_cap: Optional[float] = None) -> tuple:
    """Extra LMI rows bounding the certificate scale and the gain factors:
    p_floor I <= P <= p_cap I plus spectral-norm caps on R and S. Useful to
    keep solutions simulatable; they shrink the feasible set, so any gains
    found under them still certify the original criterion."""
    cons = [
        Constraint(AffineMatrixExpr(-p_floor * np.eye(n_x),
                                    (Term(np.eye(n_x), "P", np.eye(n_x)),)),
                   PSD, strict=False, label="P_floor"),
        Constraint(AffineMatrixExpr(-p_cap * np.eye(n_x),
                                    (Term(np.eye(n_x), "P", np.eye(n_x)),)),
                   NSD, strict=False, label="P_cap"),
    ]
    for name, cap in (("R", r_cap), ("S", s_cap)):
        if cap is None:
            continue
        m = n_x + n_y
        W1 = _sel(m, 0, n_x)
        W2 = _sel(m, n_x, n_y)
        cons.append(Constraint(
            AffineMatrixExpr(cap * np.eye(m),
                             (Term(W1, name, W2.T, symmetrize=True),)),
            PSD, strict=False, label=f"{name}_norm_cap"))
    return tuple(cons)


# ---------------------------------------------------------------------------
# problem builders
# ---------------------------------------------------------------------------

def build_paramfree(sys: NonlinearSystem, rho: float, mode: str = ASYMPTOTIC,
                    alpha: Optional[float] = None,
                    extra_constraints: tuple = (),
                    pin_lambda: bool = False) -> LmiProblem:
    """Parameterization-free design as one LMI feasibility problem.

    Variables P, Q (sym n_x), R, S (n_x x n_y), K (n_h x n_y),
    Lambda-tilde (sym n_h+n_f), plus a scalar alpha for the variable-rate
    mode. Emits P >= eps I, the mode's Q-constraint, the Schur-embedded
    block [[Phi, Gamma^T], [Gamma, -Lambda-tilde]] <= 0 and
    Lambda-tilde <= (1/rho) I (both non-strict: the block inequality is
    tight at feasibility and an eps-shift would empty it), and
    Lambda-tilde >= EPS_LAMBDA I so the inverse exists for verification.

    pin_lambda=True replaces Lambda-tilde by the constant (1/rho) I (its
    least restrictive admissible value: the block is monotone in
    Lambda-tilde, so feasibility is unchanged); used as a solver presolve.
    """
    crit = Criterion.paramfree(rho, mode, alpha)
    nx, nf, nh, ny = sys.n_x, sys.n_f, sys.n_h, sys.n_y
    A, G, H, C = sys.A, sys.G, sys.H, sys.C
    m = nx + nf + nh + nf
    U1 = _sel(m, 0, nx)
    U2 = _sel(m, nx, nf)
    U3 = _sel(m, nx + nf, nh)
    U4 = _sel(m, nx + nf + nh, nf)
    U34 = _sel(m, nx + nf, nh + nf)

    variables = [
        MatrixVariable("P", (nx, nx), "symmetric"),
        MatrixVariable("Q", (nx, nx), "symmetric"),
        MatrixVariable("R", (nx, ny), "rectangular"),
        MatrixVariable("S", (nx, ny), "rectangular"),
        MatrixVariable("K", (nh, ny), "rectangular"),
    ]
    if not pin_lambda:
        variables.append(MatrixVariable("lambda_tilde", (nh + nf, nh + nf), "symmetric"))
    if mode == EXP_VARIABLE_ALPHA:
        variables.append(MatrixVariable("alpha", (1, 1), "scalar"))

    const = np.zeros((m, m))
    const -= rho * (U2 @ U2.T)                       # Phi block (2,2)
    const += U3 @ H @ U1.T + U1 @ H.T @ U3.T         # Gamma / Gamma^T, H part
    const += U4 @ U2.T + U2 @ U4.T                   # Gamma / Gamma^T, I_nf part
    terms = [
        Term(U1, "P", A @ U1.T, symmetrize=True),
        Term(-U1, "R", C @ A @ U1.T, symmetrize=True),
        Term(-U1, "S", C @ U1.T, symmetrize=True),
        Term(U1, "Q", U1.T),
        Term(U1, "P", G @ U2.T, symmetrize=True),
        Term(-U1, "R", C @ G @ U2.T, symmetrize=True),
        Term(-U3, "K", C @ U1.T, symmetrize=True),
    ]
    if pin_lambda:
        const -= (1.0 / rho) * (U34 @ U34.T)
    else:
        terms.append(Term(-U34, "lambda_tilde", U34.T))
    constraints = [
        Constraint(AffineMatrixExpr(const, tuple(terms)), NSD, strict=False,
                   label="schur_block"),
        Constraint(AffineMatrixExpr(np.zeros((nx, nx)),
                                    (Term(np.eye(nx), "P", np.eye(nx)),)),
                   PSD, strict=True, label="P_pd"),
    ]
    if mode == ASYMPTOTIC:
        constraints.append(Constraint(
            AffineMatrixExpr(np.zeros((nx, nx)),
                             (Term(np.eye(nx), "Q", np.eye(nx)),)),
            PSD, strict=True, label="Q_pd"))
    elif mode == EXP_FIXED_ALPHA:
        constraints.append(Constraint(
            AffineMatrixExpr(np.zeros((nx, nx)),
                             (Term(np.eye(nx), "Q", np.eye(nx)),
                              Term(-alpha * np.eye(nx), "P", np.eye(nx)))),
            PSD, strict=True, label="Q_ge_alphaP"))
    else:  # EXP_VARIABLE_ALPHA, Corollary 2: Q >= alpha I, P <= I, alpha > 0
        alpha_terms = [Term(np.eye(nx)[:, i:i + 1] * -1.0, "alpha",
                            np.eye(nx)[i:i + 1, :]) for i in range(nx)]
        constraints.append(Constraint(
            AffineMatrixExpr(np.zeros((nx, nx)),
                             tuple([Term(np.eye(nx), "Q", np.eye(nx))] + alpha_terms)),
            PSD, strict=False, label="Q_ge_alphaI"))
        constraints.append(Constraint(
            AffineMatrixExpr(-np.eye(nx), (Term(np.eye(nx), "P", np.eye(nx)),)),
            NSD, strict=False, label="P_le_I"))
        constraints.append(Constraint(
            AffineMatrixExpr(np.array([[-ALPHA_FLOOR]]),
                             (Term(np.eye(1), "alpha", np.eye(1)),)),
            PSD, strict=False, label="alpha_floor"))
    if not pin_lambda:
        d = nh + nf
        constraints.append(Constraint(
            AffineMatrixExpr(-(1.0 / rho) * np.eye(d),
                             (Term(np.eye(d), "lambda_tilde", np.eye(d)),)),
            NSD, strict=False, label="lambda_tilde_ub"))
        constraints.append(Constraint(
            AffineMatrixExpr(-EPS_LAMBDA * np.eye(d),
                             (Term(np.eye(d), "lambda_tilde", np.eye(d)),)),
            PSD, strict=False, label="lambda_tilde_lb"))
    constraints.extend(extra_constraints)
    return LmiProblem(tuple(variables), tuple(constraints))


def _build_slack_pair(sys: NonlinearSystem, bottom_right: np.ndarray,
                      alpha: Optional[float], with_K: bool,
                      extra_constraints: tuple = ()) -> LmiProblem:
    """Two-LMI slack form shared by the Lipschitz and QB criteria:
    [[sym(PA - RCA - SC) (+ sym(alpha P)) + T, (P - RC)G], [*, -I]] <= -eps I
    [[-T, (H - KC)^T], [*, -bottom_right]] <= 0
    """
    nx, nf, nh, ny = sys.n_x, sys.n_f, sys.n_h, sys.n_y
    A, G, H, C = sys.A, sys.G, sys.H, sys.C

    variables = [
        MatrixVariable("P", (nx, nx), "symmetric"),
        MatrixVariable("R", (nx, ny), "rectangular"),
        MatrixVariable("S", (nx, ny), "rectangular"),
        MatrixVariable("T", (nx, nx), "symmetric"),
    ]
    if with_K:
        variables.insert(3, MatrixVariable("K", (nh, ny), "rectangular"))

    m1 = nx + nf
    V1 = _sel(m1, 0, nx)
    V2 = _sel(m1, nx, nf)
    const1 = -(V2 @ V2.T)
    terms1 = [
        Term(V1, "P", A @ V1.T, symmetrize=True),
        Term(-V1, "R", C @ A @ V1.T, symmetrize=True),
        Term(-V1, "S", C @ V1.T, symmetrize=True),
        Term(V1, "T", V1.T),
        Term(V1, "P", G @ V2.T, symmetrize=True),
        Term(-V1, "R", C @ G @ V2.T, symmetrize=True),
    ]
    if alpha is not None:
        terms1.append(Term(alpha * V1, "P", V1.T, symmetrize=True))
    constraints = [
        Constraint(AffineMatrixExpr(const1, tuple(terms1)), NSD, strict=True,
                   label="riccati_block"),
        Constraint(AffineMatrixExpr(np.zeros((nx, nx)),
                                    (Term(np.eye(nx), "P", np.eye(nx)),)),
                   PSD, strict=True, label="P_pd"),
    ]
    if with_K:
        m2 = nx + nh
        W1 = _sel(m2, 0, nx)
        W2 = _sel(m2, nx, nh)
        const2 = W1 @ H.T @ W2.T + W2 @ H @ W1.T - W2 @ bottom_right @ W2.T
        terms2 = (
            Term(-W1, "T", W1.T),
            Term(-W1 @ C.T, "K", W2.T, transpose=True, symmetrize=True),
        )
        constraints.append(Constraint(AffineMatrixExpr(const2, terms2), NSD,
                                      strict=False, label="slack_bound"))
    else:
        # ell = 0: the nonlinearity term vanishes and the slack only needs T >= 0
        constraints.append(Constraint(
            AffineMatrixExpr(np.zeros((nx, nx)),
                             (Term(np.eye(nx), "T", np.eye(nx)),)),
            PSD, strict=False, label="slack_psd"))
    constraints.extend(extra_constraints)
    return LmiProblem(tuple(variables), tuple(constraints))


def build_lipschitz(sys: NonlinearSystem, ell: float,
                    alpha: Optional[float] = None,
                    extra_constraints: tuple = ()) -> LmiProblem:
    """Lipschitz design (slack form with Qb := ell^2 I); ell = 0 degenerates
    to a pure Luenberger design with no constraint on K."""
    Criterion.lipschitz(ell, alpha)
    if ell == 0.0:
        return _build_slack_pair(sys, np.zeros((0, 0)), alpha, with_K=False,
                                 extra_constraints=extra_constraints)
    bottom = np.linalg.inv(ell ** 2 * np.eye(sys.n_h))
    return _build_slack_pair(sys, bottom, alpha, with_K=True,
                             extra_constraints=extra_constraints)


def build_quadratic_bound(sys: NonlinearSystem, qb: np.ndarray,
                          extra_constraints: tuple = ()) -> LmiProblem:
    """Quadratic-boundedness design; qb must be invertible with condition
    number below 1e12 (its inverse appears in the slack bound)."""
    qb = np.atleast_2d(np.asarray(qb, dtype=float))
    if qb.shape != (sys.n_h, sys.n_h):
        raise ContractViolation("qb must be n_h by n_h")
    if not np.allclose(qb, qb.T, atol=1e-12):
        raise ContractViolation("qb must be symmetric")
    ev = np.linalg.eigvalsh(qb)
    if ev[0] <= 0:
        raise ContractViolation("qb must be positive definite (its inverse is required)")
    if ev[-1] / ev[0] > 1e12:
        raise ContractViolation("qb condition number exceeds 1e12")
    return _build_slack_pair(sys, np.linalg.inv(qb), None, with_K=True,
                             extra_constraints=extra_constraints)


def build_criterion_problem(sys: NonlinearSystem, criterion: Criterion,
                            **kw) -> LmiProblem:
    if criterion.kind == "paramfree":
        return build_paramfree(sys, criterion.rho, criterion.mode,
                               criterion.alpha, **kw)
    if criterion.kind == "lipschitz":
        return build_lipschitz(sys, criterion.ell, criterion.alpha, **kw)
    return build_quadratic_bound(sys, criterion.qb, **kw)


# ---------------------------------------------------------------------------
# gain extraction
# ---------------------------------------------------------------------------

def extract_gains(sys: NonlinearSystem, solution: LmiSolution,
                  criterion: Criterion,
                  problem: Optional[LmiProblem] = None) -> ObserverGains:
    """L = P^-1 R, J = P^-1 S, K read directly; M, N regenerated."""
    if solution.status != lmi_core.FEASIBLE:
        raise ContractViolation("extract_gains needs a Feasible solution")
    a = solution.assignment
    P = a["P"]
    L = np.linalg.solve(P, a["R"])
    J = np.linalg.solve(P, a["S"])
    K = a.get("K", np.zeros((sys.n_h, sys.n_y)))
    M, N = observer_matrices(sys.A, sys.C, J, L)
    alpha = criterion.alpha
    if "alpha" in a:
        alpha = float(a["alpha"][0, 0])
    report = tuple(lmi_core.residuals(problem, a)) if problem is not None \
        else (solution.stats.residual,)
    cert = Certificate(P=P, criterion=criterion, Q=a.get("Q"),
                       lambda_tilde=a.get("lambda_tilde"), T=a.get("T"),
                       rho=criterion.rho, alpha=alpha, residual_report=report)
    return ObserverGains(J=J, K=K, L=L, M=M, N=N, certificate=cert)


# ---------------------------------------------------------------------------
# verification (independent of the solver path)
# ---------------------------------------------------------------------------

def _lam_max(X: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (X + X.T))[-1])


def _lam_min(X: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (X + X.T))[0])


def verify_certificate(sys: NonlinearSystem, gains: ObserverGains
                       ) -> VerificationReport:
    """Recheck the design criterion with the solved numbers from scratch.

    Reports per-condition extreme eigenvalues and pass/fail at tolerance
    VERIFY_TOL * scale, where scale = 1 + the spectral norms of the
    reconstructed criterion blocks.
    """
    cert = gains.certificate
    crit = cert.criterion
    A, G, H, C = sys.A, sys.G, sys.H, sys.C
    nx, nf, nh = sys.n_x, sys.n_f, sys.n_h
    P, M, N, K = cert.P, gains.M, gains.N, gains.K
    conditions = []

    M_regen, N_regen = observer_matrices(A, C, gains.J, gains.L)
    regen = max(np.abs(M_regen - M).max(), np.abs(N_regen - N).max())
    conditions.append(Condition("gain_consistency", regen, 1e-12, regen <= 1e-12))

    max_re = float(np.linalg.eigvals(M).real.max())
    conditions.append(Condition("M_hurwitz", max_re, 0.0, max_re < 0.0))
    lmin_P = _lam_min(P)
    conditions.append(Condition("P_pd", lmin_P, 0.0, lmin_P > 0.0))

    if crit.kind == "paramfree":
        rho = crit.rho
        Lam = np.linalg.inv(cert.lambda_tilde)
        Lam = 0.5 * (Lam + Lam.T)
        PM = P @ M
        PNG = P @ N @ G
        Phi = np.block([[PM + PM.T + cert.Q, PNG],
                        [PNG.T, -rho * np.eye(nf)]])
        Gam = np.block([[H - K @ C, np.zeros((nh, nf))],
                        [np.zeros((nf, nx)), np.eye(nf)]])
        GLG = Gam.T @ Lam @ Gam
        matrix = Phi + GLG
        scale = 1.0 + np.linalg.norm(Phi, 2) + np.linalg.norm(GLG, 2)
        tol = VERIFY_TOL * scale
        v = _lam_max(matrix)
        conditions.append(Condition("criterion_nsd", v, tol, v <= tol))
        lam_minus_rho = _lam_min(Lam) - rho
        conditions.append(Condition("lambda_ge_rhoI", lam_minus_rho, -VERIFY_TOL,
                                    lam_minus_rho >= -VERIFY_TOL))
        # the proof only needs Lambda >= rho * blkdiag(0, I_nf)
        iota = np.zeros((nh + nf, nh + nf))
        iota[nh:, nh:] = rho * np.eye(nf)
        v_iota = _lam_max(iota - Lam)
        conditions.append(Condition("lambda_ge_rho_iota", v_iota, VERIFY_TOL,
                                    v_iota <= VERIFY_TOL))
        lmin_Q = _lam_min(cert.Q)
        conditions.append(Condition("Q_pd", lmin_Q, 0.0, lmin_Q > 0.0))
        if crit.mode == EXP_FIXED_ALPHA:
            v_qp = _lam_min(cert.Q - crit.alpha * P)
            conditions.append(Condition("Q_ge_alphaP", v_qp, -tol, v_qp >= -tol))
        if crit.mode == EXP_VARIABLE_ALPHA:
            v_qa = _lam_min(cert.Q) - cert.alpha
            conditions.append(Condition("Q_ge_alphaI", v_qa, -tol, v_qa >= -tol))
            v_pi = _lam_max(P - np.eye(nx))
            conditions.append(Condition("P_le_I", v_pi, tol, v_pi <= tol))
    else:
        if crit.kind == "lipschitz":
            weight = crit.ell ** 2 * np.eye(nh)
        else:
            weight = crit.qb
        Meff = M + crit.alpha * np.eye(nx) if crit.alpha else M
        HKC = H - K @ C
        quad = P @ N @ G @ G.T @ N.T @ P
        matrix = Meff.T @ P + P @ Meff + quad + HKC.T @ weight @ HKC
        scale = 1.0 + np.linalg.norm(matrix, 2) + np.linalg.norm(quad, 2)
        tol = VERIFY_TOL * scale
        v = _lam_max(matrix)
        conditions.append(Condition("criterion_nsd", v, tol, v <= tol))

    # linear plants admit a direct Lyapunov-equation check of Lemma-1 decay
    if sys.f.name == "zero" or not np.any(sys.G):
        if max_re < 0:
            P_lyap = scipy.linalg.solve_continuous_lyapunov(M.T, -np.eye(nx))
            v_l = _lam_min(P_lyap)
            conditions.append(Condition("lyapunov_pd", v_l, 0.0, v_l > 0.0))
        else:
            conditions.append(Condition("lyapunov_pd", float("-inf"), 0.0, False))

    passed = all(c.passed for c in conditions)
    return VerificationReport(tuple(conditions), passed, float(scale))


# ---------------------------------------------------------------------------
# one-stop synthesis
# ---------------------------------------------------------------------------

@dataclass
class SynthesisResult:
    problem: LmiProblem
    solution: LmiSolution
    gains: Optional[ObserverGains] = None
    report: Optional[VerificationReport] = None

    @property
    def feasible_and_verified(self) -> bool:
        return (self.solution.status == lmi_core.FEASIBLE
                and self.report is not None and self.report.passed)


def synthesize(sys: NonlinearSystem, criterion: Criterion,
               options: Optional[SolverOptions] = None,
               extra_constraints: tuple = (),
               pin_lambda: bool = True) -> SynthesisResult:
    """Build, solve, extract, and verify one criterion.

    For the paramfree criterion the solver path replaces Lambda-tilde by its
    least restrictive admissible constant (1/rho) I; the block inequality is
    monotone in Lambda-tilde, so feasibility is exactly preserved. The lifted
    assignment is then residual-checked against the full emitted problem, and
    the reported status comes from that recheck.
    """
    opts = options or SolverOptions()
    problem = build_criterion_problem(sys, criterion,
                                      extra_constraints=extra_constraints)
    if criterion.kind == "paramfree" and pin_lambda:
        pinned = build_paramfree(sys, criterion.rho, criterion.mode,
                                 criterion.alpha, extra_constraints,
                                 pin_lambda=True)
        sol = lmi_core.solve_feasibility(pinned, opts)
        if sol.status == lmi_core.FEASIBLE:
            lifted = dict(sol.assignment)
            d = sys.n_h + sys.n_f
            lifted["lambda_tilde"] = (1.0 / criterion.rho) * np.eye(d)
            worst = lmi_core.max_violation(problem, lifted)
            stats = lmi_core.SolverStats(sol.stats.iterations, worst,
                                         sol.stats.wall_time)
            if worst <= opts.residual_tol:
                sol = LmiSolution(lmi_core.FEASIBLE, lifted, stats)
            else:
                sol = LmiSolution(lmi_core.INCONCLUSIVE, lifted, stats,
                                  diagnostics="pinned solution failed full-problem recheck")
        # pinned infeasibility == full-problem infeasibility (monotonicity)
    else:
        sol = lmi_core.solve_feasibility(problem, opts)

    result = SynthesisResult(problem=problem, solution=sol)
    if sol.status == lmi_core.FEASIBLE:
        result.gains = extract_gains(sys, sol, criterion, problem=problem)
        result.report = verify_certificate(sys, result.gains)
    return result


def rho_sweep(sys: NonlinearSystem, rhos=(0.1, 1.0, 10.0),
              mode: str = ASYMPTOTIC, alpha: Optional[float] = None,
              options: Optional[SolverOptions] = None) -> dict:
    """Log-spaced sweep helper; the paper gives no rule for choosing rho."""
    return {rho: synthesize(sys, Criterion.paramfree(rho, mode, alpha), options)
            for rho in rhos}


# ---------------------------------------------------------------------------
# gains file format
# ---------------------------------------------------------------------------

def _opt(x):
    return None if x is None else np.asarray(x).tolist()


def gains_to_json_dict(gains: ObserverGains,
                       report: Optional[VerificationReport] = None) -> dict:
    cert = gains.certificate
    return {
        "J": gains.J.tolist(), "K": gains.K.tolist(), "L": gains.L.tolist(),
        "M": gains.M.tolist(), "N": gains.N.tolist(),
        "P": cert.P.tolist(), "Q": _opt(cert.Q),
        "lambda_tilde": _opt(cert.lambda_tilde), "T": _opt(cert.T),
        "rho": cert.rho, "alpha": cert.alpha,
        "criterion": cert.criterion.describe(),
        "residual_report": list(cert.residual_report),
        "verification": report.to_json_dict() if report else None,
    }


def _criterion_from_dict(d: dict) -> Criterion:
    if d["kind"] == "paramfree":
        return Criterion.paramfree(d["rho"], d.get("mode", ASYMPTOTIC),
                                   d.get("alpha"))
    if d["kind"] == "lipschitz":
        return Criterion.lipschitz(d["ell"], d.get("alpha"))
    return Criterion.quadratic_bound(np.array(d["qb"]))


def gains_from_json_dict(d: dict) -> ObserverGains:
    crit = _criterion_from_dict(d["criterion"])

    def arr(key):
        return None if d.get(key) is None else np.array(d[key], dtype=float)

    cert = Certificate(P=arr("P"), criterion=crit, Q=arr("Q"),
                       lambda_tilde=arr("lambda_tilde"), T=arr("T"),
                       rho=d.get("rho"), alpha=d.get("alpha"),
                       residual_report=tuple(d.get("residual_report", ())))
    return ObserverGains(J=arr("J"), K=arr("K"), L=arr("L"),
                         M=arr("M"), N=arr("N"), certificate=cert)


def save_gains(gains: ObserverGains, path,
               report: Optional[VerificationReport] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(gains_to_json_dict(gains, report), fh, indent=2)
        fh.write("\n")


def load_gains(path) -> ObserverGains:
    with open(path, "r", encoding="utf-8") as fh:
        return gains_from_json_dict(json.load(fh))
