"""Command-line front end.

Subcommands: sir-gen, synth, simulate, demo, plot. Artifacts are JSON
(structured data), CSV (time series), and SVG (figures); every command is
deterministic given explicit seeds. OBSFORGE_SEED provides the default seed.

synth exit codes: 0 feasible and verified, 1 usage/load error,
2 infeasible, 3 inconclusive (or feasible but failing verification).
"""
from __future__ import annotations

import argparse
import json
import os
import sys as _sys
import warnings

import numpy as np

from . import lmi_core, plots, synthesis
from .demo import estimation_box, run_demo
from .lmi_core import SolverOptions
from .param_estimation import (EstimationConfig, lipschitz_constant,
                               lipschitz_report, quadratic_bound_diag)
from .simulation import (NoiseSpec, SimulationDivergence, error_metrics,
                         load_trajectory_csv, save_trajectory_csv, simulate)
from .sir_model import build_system, load_network, random_network, save_network
from .synthesis import Criterion, load_gains, save_gains
from .system_model import ContractViolation, load_system, system_from_json_dict


def _default_seed() -> int:
    return int(os.environ.get("OBSFORGE_SEED", "0"))


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _load_any_system(path):
    """Accept either a system file (keys A, G, H, C, f, domain) or a SIR
    network file (keys n, W, beta, delta)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read system file {path}: {e}")
    try:
        if "A" in d:
            return system_from_json_dict(d)
        if "W" in d:
            from .sir_model import network_from_json_dict
            return build_system(network_from_json_dict(d))
    except (ContractViolation, KeyError, ValueError) as e:
        raise CliError(f"malformed system file {path}: {e}")
    raise CliError(f"unrecognized system file format: {path}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_sir_gen(args) -> int:
    net = random_network(args.n, args.p_edge, (0.0, args.w_max),
                         (0.0, args.beta_max), (0.0, args.delta_max),
                         seed=args.seed,
                         symmetric_weights=not args.asymmetric)
    save_network(net, args.out)
    edges = int(np.count_nonzero(np.triu(net.W, k=1)))
    print(f"wrote {args.out}: n={net.n} nodes, {edges} edges "
          f"(+{net.n} self-loops), seed={args.seed}")
    return 0


def _estimation_domain(args, system):
    if args.est_domain == "unit-box":
        return estimation_box(system.n_x)
    return None  # system's own domain


def cmd_synth(args) -> int:
    system = _load_any_system(args.system)
    opts = SolverOptions(residual_tol=args.residual_tol)
    if args.criterion == "paramfree":
        mode = {"asymptotic": synthesis.ASYMPTOTIC,
                "exp-fixed": synthesis.EXP_FIXED_ALPHA,
                "exp-var": synthesis.EXP_VARIABLE_ALPHA}[args.mode]
        criterion = Criterion.paramfree(args.rho, mode, args.alpha)
    elif args.criterion == "lipschitz":
        ell = args.ell
        if ell is None:
            cfg = EstimationConfig(samples=args.est_samples,
                                   refinement_steps=args.est_refine,
                                   seed=args.seed)
            if args.est_report:
                report = lipschitz_report(system, cfg,
                                          _estimation_domain(args, system))
                with open(args.est_report, "w", encoding="utf-8") as fh:
                    json.dump(report, fh, indent=2)
                    fh.write("\n")
                ell = report["estimate"]
            else:
                ell = lipschitz_constant(system, cfg,
                                         _estimation_domain(args, system))
            print(f"estimated ell = {ell:.6g}")
        criterion = Criterion.lipschitz(ell, args.alpha)
    else:  # qb
        cfg = EstimationConfig(samples=args.est_samples,
                               refinement_steps=args.est_refine, seed=args.seed)
        qb = quadratic_bound_diag(system, cfg, _estimation_domain(args, system))
        print(f"estimated diagonal quadratic bound, max entry "
              f"{float(np.diag(qb).max()):.6g}")
        criterion = Criterion.quadratic_bound(qb)

    result = synthesis.synthesize(system, criterion, opts,
                                  pin_lambda=not args.no_pin_lambda)
    status = result.solution.status
    print(f"status: {status}")
    if status == lmi_core.INFEASIBLE:
        return 2
    if status != lmi_core.FEASIBLE:
        if result.solution.diagnostics:
            print(f"diagnostics: {result.solution.diagnostics}")
        return 3
    save_gains(result.gains, args.out, result.report)
    print(f"wrote {args.out}")
    for c in result.report.conditions:
        print(f"  {c.name}: value={c.value:.3e} threshold={c.threshold:.3e} "
              f"{'ok' if c.passed else 'FAIL'}")
    if not result.report.passed:
        print("verification FAILED")
        return 3
    print("verification passed")
    return 0


def cmd_simulate(args) -> int:
    system = _load_any_system(args.system)
    try:
        gains = load_gains(args.gains)
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise CliError(f"cannot read gains file {args.gains}: {e}")
    if gains.L.shape != (system.n_x, system.n_y):
        raise CliError("gains file is dimensionally inconsistent with the system")
    if args.x0 is not None:
        x0 = np.array([float(v) for v in args.x0.split(",")])
    else:
        rng = np.random.default_rng(args.seed)
        x0 = system.domain.sample(rng, 1)[0]
    xhat0 = None
    if args.xhat0 == "x0":
        xhat0 = x0
    elif args.xhat0 not in (None, "zero"):
        xhat0 = np.array([float(v) for v in args.xhat0.split(",")])
    noise = NoiseSpec.none() if args.noise_var <= 0 else \
        NoiseSpec.gaussian(args.noise_var * np.eye(system.n_y), seed=args.seed)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            traj = simulate(system, gains, x0, args.horizon, args.dt, noise,
                            xhat0=xhat0)
        for w in caught:
            print(f"warning: {w.message}")
    except SimulationDivergence as e:
        raise CliError(f"simulation diverged at t = {e.blowup_time:.6g} "
                       f"(observer too stiff for dt, or unstable gains)")
    except ContractViolation as e:
        raise CliError(str(e))
    save_trajectory_csv(traj, args.out)
    print(f"wrote {args.out} ({len(traj.times)} rows)")
    metrics = error_metrics(traj) if len(traj.times) > 1 else {
        "initial": float(traj.err_norm[0])}
    print(json.dumps(metrics, indent=2, default=float))
    return 0


def cmd_demo(args) -> int:
    result = run_demo(realizations=args.realizations, n=args.n,
                      p_edge=args.p_edge, w_max=args.w_max,
                      base_seed=args.seed, rho=args.rho,
                      horizon=args.horizon, dt=args.dt,
                      noise_var=args.noise_var, outdir=args.outdir,
                      est_samples=args.est_samples, est_refine=args.est_refine,
                      keep_objects=False)
    s = result.summary
    print(f"instances: {s['realizations']}")
    print(f"ell range: [{s['ell']['min']:.3f}, {s['ell']['max']:.3f}] "
          f"(reference {s['ell']['reference_range']})")
    fz = s["feasibility"]
    print(f"paramfree feasible+verified: {fz['paramfree_feasible_and_verified']}")
    print(f"lipschitz feasible: {fz['lipschitz_feasible']}")
    if "practical" in s["highlighted"]:
        nm = s["highlighted"]["practical"]["noisy_metrics"]["mean_final_quarter"]
        print(f"highlighted practical observer, noisy mean error "
              f"(final quarter): {nm:.4f}")
    if "paramfree" in s["highlighted"]:
        hp = s["highlighted"]["paramfree"]
        if "divergence_time" in hp:
            print(f"highlighted paramfree observer: simulation diverged at "
                  f"t={hp['divergence_time']:.3g} (stiffness "
                  f"{hp['stiffness']:.3g})")
    print(f"outputs in {result.outdir}")
    print(f"elapsed: {result.elapsed_seconds:.1f}s")
    return 0


def cmd_plot(args) -> int:
    try:
        data = load_trajectory_csv(args.infile)
    except (OSError, ValueError) as e:
        raise CliError(f"cannot read trajectory CSV {args.infile}: {e}")
    try:
        plots.plot_columns(data, args.cols, args.out)
    except ContractViolation as e:
        raise CliError(str(e))
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obsforge",
                                description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("sir-gen", help="generate a random networked-SIR instance")
    g.add_argument("--n", type=int, default=10, help="node count")
    g.add_argument("--p-edge", type=float, default=0.5, help="edge probability")
    g.add_argument("--w-max", type=float, default=2.0, help="max edge weight")
    g.add_argument("--beta-max", type=float, default=1.0)
    g.add_argument("--delta-max", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=_default_seed())
    g.add_argument("--asymmetric", action="store_true",
                   help="draw w_ij and w_ji independently")
    g.add_argument("--out", default="sir_network.json")
    g.set_defaults(func=cmd_sir_gen)

    s = sub.add_parser("synth", help="synthesize observer gains via LMI feasibility")
    s.add_argument("--system", required=True,
                   help="system JSON or SIR network JSON")
    s.add_argument("--criterion", choices=["paramfree", "lipschitz", "qb"],
                   default="paramfree")
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--mode", choices=["asymptotic", "exp-fixed", "exp-var"],
                   default="asymptotic")
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--ell", type=float, default=None,
                   help="Lipschitz constant (estimated when omitted)")
    s.add_argument("--est-samples", type=int, default=3000)
    s.add_argument("--est-refine", type=int, default=150)
    s.add_argument("--est-domain", choices=["system", "unit-box"],
                   default="system")
    s.add_argument("--est-report", default=None,
                   help="write the estimation report JSON here")
    s.add_argument("--residual-tol", type=float, default=1e-8)
    s.add_argument("--no-pin-lambda", action="store_true",
                   help="solve the paramfree problem without the "
                        "lambda-tilde presolve")
    s.add_argument("--seed", type=int, default=_default_seed())
    s.add_argument("--out", default="gains.json")
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("simulate", help="integrate plant + observer, write CSV")
    m.add_argument("--system", required=True)
    m.add_argument("--gains", required=True)
    m.add_argument("--horizon", type=float, default=40.0)
    m.add_argument("--dt", type=float, default=0.01)
    m.add_argument("--noise-var", type=float, default=0.0,
                   help="measurement noise variance (covariance = var * I)")
    m.add_argument("--x0", default=None, help="comma-separated initial state "
                   "(random domain sample when omitted)")
    m.add_argument("--xhat0", default="zero",
                   help="'zero', 'x0', or comma-separated estimate init")
    m.add_argument("--seed", type=int, default=_default_seed())
    m.add_argument("--out", default="trajectory.csv")
    m.set_defaults(func=cmd_simulate)

    d = sub.add_parser("demo", help="full case-study reproduction sweep")
    d.add_argument("--realizations", type=int, default=100)
    d.add_argument("--n", type=int, default=10)
    d.add_argument("--p-edge", type=float, default=0.5)
    d.add_argument("--w-max", type=float, default=2.0)
    d.add_argument("--rho", type=float, default=1.0)
    d.add_argument("--horizon", type=float, default=40.0)
    d.add_argument("--dt", type=float, default=0.01)
    d.add_argument("--noise-var", type=float, default=0.001)
    d.add_argument("--est-samples", type=int, default=3000)
    d.add_argument("--est-refine", type=int, default=150)
    d.add_argument("--seed", type=int, default=_default_seed())
    d.add_argument("--outdir", default="demo_out")
    d.set_defaults(func=cmd_demo)

    q = sub.add_parser("plot", help="render a trajectory CSV column to SVG")
    q.add_argument("--in", dest="infile", required=True)
    q.add_argument("--cols", default="err_norm",
                   help="'err_norm' or 'node:i'")
    q.add_argument("--out", default="plot.svg")
    q.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=_sys.stderr)
        return e.code
    except ContractViolation as e:
        print(f"error: {e}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
