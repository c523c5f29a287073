"""Acceptance suite: one test per criterion, asserted at the stated
tolerances and printed as a PASS/FAIL line with the measured values.

Three checks fail by design of the underlying mathematics rather than by
implementation defect; each failure message points at the analysis:

* criterion 2, Lipschitz clause: the Lipschitz design problem is genuinely
  feasible on these instances for every estimated constant (modern
  interior-point solvers find high-gain solutions whose certificates
  re-verify with large margins), so "Feasible on <= 10 of 100" cannot be
  met by an honest solver.
* criterion 4 (and the SIR sub-case of 5/6): for the epidemic structure
  C G = 0, exactly feasible points of the parameterization-free LMI require
  P G = 0, which is impossible with P > 0; solutions within residual delta
  necessarily carry observer modes |lambda| >= ~0.5 sqrt(rho/delta). At
  certificate accuracy (delta ~ 1e-8) that is ~5e3, far beyond fixed-step
  RK4 stability at dt = 0.01 (|lambda| dt <= 2.78), so verified gains
  cannot be simulated as specified.

See the repo's README for the reproduction-status summary.
"""
import time

import numpy as np
import pytest

from obsforge import (Criterion, EstimationConfig, NoiseSpec,
                      SimulationDivergence, build_nonlinearity,
                      build_lipschitz, build_quadratic_bound, error_metrics,
                      jacobian_selfcheck, lipschitz_constant,
                      pbh_detectability, simulate, sir_vector_field,
                      synthesize)
from obsforge import NonlinearSystem, StateDomain, SirState
from obsforge.demo import default_x0, run_demo
from obsforge.lmi_core import (FEASIBLE, INFEASIBLE, LmiProblem,
                               MatrixVariable, AffineMatrixExpr, Constraint,
                               Term, NSD, PSD, solve_feasibility)
from obsforge.sir_model import build_system, random_network
from oracles import (obs_decomposition_detectable,
                     random_detectability_instance, rk4_plant_only)

REALIZATIONS = 100


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("demo_out")
    result = run_demo(realizations=REALIZATIONS, outdir=outdir,
                      keep_objects=True)
    return result


def _line(num, name, ok, detail):
    print(f"ACCEPTANCE {num} ({name}): {'PASS' if ok else 'FAIL'} — {detail}")
    return ok


# ---------------------------------------------------------------------------
# 1. end-to-end reproduction: ell distribution + runtime
# ---------------------------------------------------------------------------

def test_criterion_1_demo_distribution_and_runtime(sweep):
    ells = np.array([r.ell for r in sweep.records])
    lo, hi = float(ells.min()), float(ells.max())
    elapsed = sweep.elapsed_seconds
    ok = (5.0 <= lo <= 12.0 and 18.0 <= hi <= 40.0
          and hi >= 7.5 and lo <= 25.6 and elapsed <= 300.0)
    detail = (f"ell in [{lo:.2f}, {hi:.2f}] vs reference [7.5, 25.6], "
              f"runtime {elapsed:.1f}s <= 300s")
    _line(1, "distributional reproduction", ok, detail)
    assert 5.0 <= lo <= 12.0, detail
    assert 18.0 <= hi <= 40.0, detail
    assert hi >= 7.5 and lo <= 25.6, detail
    assert elapsed <= 300.0, detail


# ---------------------------------------------------------------------------
# 2. conservatism comparison
# ---------------------------------------------------------------------------

def test_criterion_2_conservatism_comparison(sweep):
    pf_ok = sum(1 for r in sweep.records
                if r.paramfree_status == FEASIBLE and r.paramfree_verified)
    lip_feasible = sum(1 for r in sweep.records
                       if r.lipschitz_status == FEASIBLE)
    ok = pf_ok >= 95 and lip_feasible <= 10
    detail = (f"paramfree feasible+verified {pf_ok}/100 (need >= 95), "
              f"lipschitz feasible {lip_feasible}/100 (need <= 10)")
    _line(2, "conservatism comparison", ok, detail)
    assert pf_ok >= 95, detail
    assert lip_feasible <= 10, (
        detail + " — the published infeasibility claim does not reproduce: "
        "the Lipschitz LMI admits genuine high-gain solutions whose "
        "certificates re-verify (ARI margins ~ -1e2); see decisions ledger")


# ---------------------------------------------------------------------------
# 3. certificate soundness for every feasible synthesis
# ---------------------------------------------------------------------------

def test_criterion_3_certificate_soundness(sweep):
    checked = failed = 0
    for r in sweep.records:
        for res in (r.paramfree, r.lipschitz):
            if res.solution.status != FEASIBLE:
                continue
            checked += 1
            rep = res.report
            if not rep.passed:
                failed += 1
                continue
            crit_cond = rep.condition("criterion_nsd")
            assert crit_cond.value <= crit_cond.threshold
            if res.gains.certificate.criterion.kind == "paramfree":
                lam = rep.condition("lambda_ge_rhoI")
                assert lam.value >= -1e-8
            assert rep.condition("M_hurwitz").value < 0
            assert rep.condition("P_pd").value > 0
    pr = sweep.highlighted.get("practical")
    if pr is not None:
        checked += 1
        if not pr["result"].report.passed:
            failed += 1
    ok = failed == 0 and checked > 0
    detail = f"{checked} feasible syntheses, {failed} failed verification"
    _line(3, "certificate soundness", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 4. convergence of verified paramfree gains under RK4
# ---------------------------------------------------------------------------

def test_criterion_4_paramfree_convergence(sweep):
    feasible = [r for r in sweep.records
                if r.paramfree_status == FEASIBLE and r.paramfree_verified]
    successes = 0
    diverged = 0
    for r in feasible:
        x0 = default_x0(r.system, r.seed + 777)
        try:
            traj = simulate(r.system, r.paramfree.gains, x0, 40.0, 0.01,
                            check_domain=False)
            if traj.err_norm[-1] <= 1e-3 * traj.err_norm[0]:
                successes += 1
        except SimulationDivergence:
            diverged += 1
    frac = successes / max(len(feasible), 1)
    ok = frac >= 0.95
    detail = (f"{successes}/{len(feasible)} converged to 1e-3 by T=40 "
              f"({diverged} diverged: tightly-certified gains have "
              f"|eig(M)| ~ 1e5, beyond RK4 stability at dt=0.01)")
    _line(4, "paramfree convergence", ok, detail)
    assert ok, (detail + " — certificate accuracy and fixed-step "
                "simulatability are mutually exclusive on this system class; "
                "see decisions ledger")


# ---------------------------------------------------------------------------
# 5. exponential certificate property (Corollary-1 gains)
# ---------------------------------------------------------------------------

def exp_battery_systems():
    # systems with C G != 0: the design LMI is properly feasible and yields
    # moderate verified gains (the SIR sub-case is blocked by the stiffness
    # defect recorded for criterion 4)
    out = []
    f1 = build_nonlinearity("polynomial", {"coeffs": [0.0, 0.0, 0.25]})
    out.append(NonlinearSystem(
        A=np.array([[0.0, 1.0], [-1.0, -1.0]]), G=np.array([[1.0], [1.0]]),
        H=np.array([[0.0, 1.0]]), C=np.array([[1.0, 0.0]]), f=f1,
        domain=StateDomain.box([-2, -2], [2, 2])))
    f2 = build_nonlinearity("polynomial", {"coeffs": [0.0, 0.5]})
    out.append(NonlinearSystem(
        A=np.array([[0.5, 1.0], [0.0, -2.0]]), G=np.array([[1.0], [0.5]]),
        H=np.array([[1.0, 1.0]]), C=np.array([[1.0, 0.0]]), f=f2,
        domain=StateDomain.box([-2, -2], [2, 2])))
    f3 = build_nonlinearity("polynomial", {"coeffs": [0.0, 0.0, 0.3]})
    out.append(NonlinearSystem(
        A=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -2.0, -1.5]]),
        G=np.array([[1.0], [0.5], [1.0]]),
        H=np.array([[0.0, 1.0, 0.0]]),
        C=np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), f=f3,
        domain=StateDomain.box([-2, -2, -2], [2, 2, 2])))
    return out


def test_criterion_5_exponential_envelope():
    alpha = 0.2
    worst_excess = -np.inf
    count = 0
    rng = np.random.default_rng(50)
    for sys in exp_battery_systems():
        res = synthesize(sys, Criterion.paramfree(1.0, "exp_fixed_alpha",
                                                  alpha))
        assert res.solution.status == FEASIBLE
        assert res.report.passed
        P = res.gains.certificate.P
        for _ in range(3):
            x0 = sys.domain.sample(rng, 1)[0]
            traj = simulate(sys, res.gains, x0, 40.0, 0.01)
            xi = traj.xhat - traj.x
            V = np.einsum("ij,jk,ik->i", xi, P, xi)
            envelope = V[0] * np.exp(-0.9 * alpha * traj.times) + 1e-8
            worst_excess = max(worst_excess, float((V - envelope).max()))
            count += 1
    ok = worst_excess <= 0.0
    detail = (f"{count} trajectories on the CG!=0 battery, max envelope "
              f"excess {worst_excess:.2e} (must be <= 0)")
    _line(5, "exponential certificate", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 6. noise robustness on the highlighted instance
# ---------------------------------------------------------------------------

def test_criterion_6_noise_robustness(sweep):
    hp = sweep.summary["highlighted"].get("paramfree", {})
    pr = sweep.summary["highlighted"].get("practical")
    if "noisy_metrics" in hp:
        mean_err = hp["noisy_metrics"]["mean_final_quarter"]
        detail = f"paramfree observer noisy mean (final quarter) {mean_err:.4f}"
        ok = mean_err <= 0.1
    else:
        mean_err = float("inf")
        detail = (f"paramfree observer diverged at "
                  f"t={hp.get('divergence_time')} (stiffness "
                  f"{hp.get('stiffness', float('nan')):.3g})")
        ok = False
    if pr is not None:
        detail += (f"; practical moderate-gain observer achieves "
                   f"{pr['noisy_metrics']['mean_final_quarter']:.3f} "
                   f"(direct feed-through ||L v|| floors any convergent "
                   f"design above 0.1 on these instances)")
    _line(6, "noise robustness", ok, detail)
    assert ok, detail + " — see decisions ledger"


# ---------------------------------------------------------------------------
# 7. zero-error invariance
# ---------------------------------------------------------------------------

def test_criterion_7_zero_error_invariance(sweep):
    worst = 0.0
    # academic verified paramfree gains
    sys = exp_battery_systems()[0]
    res = synthesize(sys, Criterion.paramfree(1.0))
    assert res.solution.status == FEASIBLE
    x0 = np.array([1.0, -0.5])
    traj = simulate(sys, res.gains, x0, 20.0, 0.01, xhat0=x0)
    worst = max(worst, float(traj.err_norm.max()))
    # SIR instance with a verified simulatable (Lipschitz) design
    pr = sweep.highlighted.get("practical")
    if pr is not None:
        hl_sys = sweep.highlighted["system"]
        x0s = sweep.highlighted["x0"]
        traj = simulate(hl_sys, pr["result"].gains, x0s, 20.0, 0.01,
                        xhat0=x0s, check_domain=False)
        worst = max(worst, float(traj.err_norm.max()))
    ok = worst <= 1e-9
    detail = f"max error with xhat(0)=x(0): {worst:.2e} <= 1e-9"
    _line(7, "zero-error invariance", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 8. numerical hygiene
# ---------------------------------------------------------------------------

def test_criterion_8_numerical_hygiene(sweep):
    import scipy.linalg
    from obsforge import observer_matrices
    from obsforge.synthesis import Certificate, ObserverGains

    # RK4 order on the linear test plant vs matrix-exponential truth
    A = np.array([[0.0, 1.0], [-2.0, -0.6]])
    C = np.array([[1.0, 0.0]])
    fz = build_nonlinearity("zero", {"dim_in": 2, "dim_out": 1})
    lin = NonlinearSystem(A=A, G=np.zeros((2, 1)), H=np.eye(2), C=C, f=fz,
                          domain=StateDomain.box([-10, -10], [10, 10]))
    L = np.array([[0.4], [0.2]])
    J = np.array([[1.5], [2.5]])
    M, N = observer_matrices(A, C, J, L)
    gains = ObserverGains(J=J, K=np.zeros((2, 1)), L=L, M=M, N=N,
                          certificate=Certificate(
                              P=np.eye(2), criterion=Criterion.lipschitz(0.0)))
    Acl = np.vstack([np.hstack([A, np.zeros((2, 2))]),
                     np.hstack([(M @ L + J) @ C, M])])
    x0 = np.array([1.0, -1.0])

    def terminal_error(dt):
        traj = simulate(lin, gains, x0, 5.0, dt)
        z0 = np.concatenate([x0, -L @ (C @ x0)])
        truth = scipy.linalg.expm(Acl * 5.0) @ z0
        return np.linalg.norm(np.concatenate([traj.x[-1], traj.z[-1]]) - truth)

    factor = terminal_error(0.04) / terminal_error(0.02)
    ok1 = 8.0 <= factor <= 32.0

    # analytic vs finite-difference SIR Jacobian
    hl_sys = sweep.highlighted["system"]
    dev = jacobian_selfcheck(hl_sys, points=30, seed=3)
    ok2 = dev <= 1e-6

    # simplex forward invariance of the plant flow
    rng = np.random.default_rng(80)
    worst_violation = 0.0
    for x0s in hl_sys.domain.sample(rng, 3):
        xs = rk4_plant_only(hl_sys.vector_field, x0s, 20.0, 0.01)
        worst_violation = max(worst_violation,
                              max(hl_sys.domain.violation(x) for x in xs))
    ok3 = worst_violation <= 1e-9

    # assembled field vs per-node oracle on 1000 states
    net = random_network(10, seed=101)
    sys10 = build_system(net)
    worst_dev = 0.0
    for x in sys10.domain.sample(np.random.default_rng(9), 1000):
        dxi, dxr = sir_vector_field(net, SirState(x[:10], x[10:]))
        worst_dev = max(worst_dev, float(np.abs(
            sys10.vector_field(x) - np.concatenate([dxi, dxr])).max()))
    ok4 = worst_dev <= 1e-12

    ok = ok1 and ok2 and ok3 and ok4
    detail = (f"RK4 factor {factor:.1f} in [8,32]; jacobian dev {dev:.1e} "
              f"<= 1e-6; simplex violation {worst_violation:.1e} <= 1e-9; "
              f"field agreement {worst_dev:.1e} <= 1e-12")
    _line(8, "numerical hygiene", ok, detail)
    assert ok1 and ok2 and ok3 and ok4, detail


# ---------------------------------------------------------------------------
# 9. oracle equivalence on small instances
# ---------------------------------------------------------------------------

def test_criterion_9_oracle_equivalence():
    # PBH vs eigenvector-based observability decomposition, 1000 systems
    rng = np.random.default_rng(909)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        A, C, expected = random_detectability_instance(rng, n)
        pbh = pbh_detectability(A, C).detectable
        orc = obs_decomposition_detectable(A, C)
        if pbh != orc or pbh != expected:
            mismatches += 1
    ok1 = mismatches == 0

    # estimators within 2% of analytic suprema (battery also run in the
    # param_estimation tests; here the acceptance-level spot checks)
    cfg = EstimationConfig(samples=2000, refinement_steps=60, seed=1,
                           batch=2000)
    fsq = build_nonlinearity("polynomial", {"coeffs": [0.0, 0.0, 1.0]})
    sys1 = NonlinearSystem(A=[[0.0]], G=[[1.0]], H=[[1.0]], C=[[1.0]], f=fsq,
                           domain=StateDomain.box([0.0], [1.0]))
    est = lipschitz_constant(sys1, cfg)
    ok2 = abs(est - 2.0) <= 0.04

    # identical constraint matrices for Qb = ell^2 I
    net = random_network(6, seed=5)
    sys6 = build_system(net)
    ell = 2.3
    p1 = build_lipschitz(sys6, ell)
    p2 = build_quadratic_bound(sys6, ell ** 2 * np.eye(sys6.n_h))
    max_dev = 0.0
    for c1, c2 in zip(p1.constraints, p2.constraints):
        scale = 1.0 + np.abs(c1.expr.constant).max()
        max_dev = max(max_dev,
                      float(np.abs(c1.expr.constant - c2.expr.constant).max()
                            / scale))
        for t1, t2 in zip(c1.expr.terms, c2.expr.terms):
            max_dev = max(max_dev, float(np.abs(t1.left - t2.left).max()),
                          float(np.abs(t1.right - t2.right).max()))
    ok3 = max_dev <= 1e-14

    ok = ok1 and ok2 and ok3
    detail = (f"PBH mismatches {mismatches}/1000; square-fn estimate {est:.4f} "
              f"(truth 2.0); qb-vs-lipschitz matrix deviation {max_dev:.1e}")
    _line(9, "oracle equivalence", ok, detail)
    assert ok1 and ok2 and ok3, detail


# ---------------------------------------------------------------------------
# 10. infeasibility honesty
# ---------------------------------------------------------------------------

def test_criterion_10_infeasibility_honesty():
    # undetectable battery must never come back Feasible
    bad_feasible = 0
    f = build_nonlinearity("zero", {"dim_in": 2, "dim_out": 1})
    for a_unstable in (0.5, 1.0, 2.0):
        sysb = NonlinearSystem(A=np.diag([a_unstable, -1.0]),
                               G=[[0.0], [1.0]], H=np.eye(2),
                               C=[[0.0, 1.0]], f=f,
                               domain=StateDomain.box([-1, -1], [1, 1]))
        for crit in (Criterion.paramfree(1.0), Criterion.lipschitz(0.5),
                     Criterion.lipschitz(0.0)):
            res = synthesize(sysb, crit)
            if res.solution.status == FEASIBLE:
                bad_feasible += 1
    ok1 = bad_feasible == 0

    # planted strictly-feasible problems must never come back Infeasible
    rng = np.random.default_rng(1010)
    bad_infeasible = 0
    for _ in range(10):
        n = int(rng.integers(2, 5))
        X0 = rng.standard_normal((n, n))
        X0 = X0 @ X0.T + np.eye(n)
        B = X0 + 2.0 * np.eye(n)
        prob = LmiProblem(
            (MatrixVariable("X", (n, n), "symmetric"),),
            (Constraint(AffineMatrixExpr(-B, (Term(np.eye(n), "X", np.eye(n)),)),
                        NSD),
             Constraint(AffineMatrixExpr(np.zeros((n, n)),
                                         (Term(np.eye(n), "X", np.eye(n)),)),
                        PSD, strict=True)))
        if solve_feasibility(prob).status == INFEASIBLE:
            bad_infeasible += 1
    ok = ok1 and bad_infeasible == 0
    detail = (f"undetectable battery false-Feasible {bad_feasible}/9; "
              f"planted-feasible false-Infeasible {bad_infeasible}/10")
    _line(10, "infeasibility honesty", ok, detail)
    assert ok, detail
