"""Sampling-based estimation of the Lipschitz constant and the diagonal
quadratic-boundedness parameters.

Both quantities are suprema of Jacobian functionals over the state domain.
The estimator draws uniform samples, evaluates the Jacobian on each (batched
when the nonlinearity provides a vectorized path), then refines the best
candidates by coordinate-wise hill climbing with a shrinking step. Estimates
are lower bounds by construction; fixed seeds give bit-identical output.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .system_model import (ContractViolation, NonlinearSystem, StateDomain,
                           finite_difference_jacobian)


@dataclass(frozen=True)
class EstimationConfig:
    samples: int = 100_000
    refinement_steps: int = 200
    seed: int = 0
    jacobian_mode: str = "analytic"       # "analytic" | "finite_difference"
    fd_step: float = 1e-6
    restarts: int = 3
    batch: int = 10_000

    def __post_init__(self):
        if self.samples < 1:
            raise ContractViolation("samples must be >= 1")
        if self.fd_step <= 0:
            raise ContractViolation("finite-difference step must be positive")


def _jacobian_fn(sys: NonlinearSystem, cfg: EstimationConfig
                 ) -> Callable[[np.ndarray], np.ndarray]:
    if cfg.jacobian_mode == "analytic" and sys.f.jac is not None:
        return sys.f.jac
    return lambda s: finite_difference_jacobian(sys.f.fn, s, sys.n_f, cfg.fd_step)


def _jacobians_batched(sys: NonlinearSystem, cfg: EstimationConfig,
                       points_hx: np.ndarray) -> np.ndarray:
    if cfg.jacobian_mode == "analytic" and sys.f.jac_batch is not None:
        return sys.f.jac_batch(points_hx)
    jac = _jacobian_fn(sys, cfg)
    return np.stack([jac(p) for p in points_hx])


def _hill_climb(objective: Callable[[np.ndarray], float], start: np.ndarray,
                domain: StateDomain, steps: int) -> tuple:
    """Coordinate-wise ascent with step halving; stays inside the domain."""
    x = domain.project(np.asarray(start, dtype=float))
    best = objective(x)
    if domain.kind == "box":
        span = np.maximum(domain.upper - domain.lower, 1e-12)
    else:
        span = np.ones(domain.dim)
    h = 0.5
    for _ in range(steps):
        improved = False
        for i in range(x.size):
            for sign in (1.0, -1.0):
                cand = x.copy()
                cand[i] += sign * h * span[i]
                cand = domain.project(cand)
                v = objective(cand)
                if v > best + 1e-15:
                    x, best = cand, v
                    improved = True
        if not improved:
            h *= 0.5
            if h < 1e-7:
                break
    return best, x


def _maximize(sys: NonlinearSystem, cfg: EstimationConfig,
              domain: StateDomain,
              sample_objective: Callable[[np.ndarray], np.ndarray],
              point_objective: Callable[[np.ndarray], float]) -> tuple:
    """Sample-then-refine maximization; returns (value, argmax)."""
    rng = np.random.default_rng(cfg.seed)
    best_val = -np.inf
    best_pts = []
    remaining = cfg.samples
    while remaining > 0:
        count = min(cfg.batch, remaining)
        remaining -= count
        X = domain.sample(rng, count)
        vals = sample_objective(X)
        order = np.argsort(vals)[::-1][:cfg.restarts]
        for k in order:
            best_pts.append((float(vals[k]), X[k].copy()))
        best_val = max(best_val, float(vals.max()))
    best_pts.sort(key=lambda t: -t[0])
    best_pts = best_pts[:max(cfg.restarts, 1)]
    best_x = best_pts[0][1]
    if cfg.refinement_steps > 0:
        for _, start in best_pts:
            v, x = _hill_climb(point_objective, start, domain,
                               cfg.refinement_steps)
            if v > best_val:
                best_val, best_x = v, x
    return best_val, best_x


def _require_sampleable(sys: NonlinearSystem,
                        domain: Optional[StateDomain]) -> StateDomain:
    dom = domain if domain is not None else sys.domain
    if dom.dim != sys.n_x:
        raise ContractViolation("estimation domain must match the state dimension")
    return dom


def lipschitz_constant(sys: NonlinearSystem, cfg: EstimationConfig,
                       domain: Optional[StateDomain] = None) -> float:
    """Lower-biased estimate of sup over X of ||d f / d s at s = Hx||_2."""
    dom = _require_sampleable(sys, domain)

    def sample_obj(X):
        J = _jacobians_batched(sys, cfg, X @ sys.H.T)
        return np.linalg.svd(J, compute_uv=False)[:, 0]

    jac = _jacobian_fn(sys, cfg)

    def point_obj(x):
        return float(np.linalg.norm(jac(sys.H @ x), 2))

    val, _ = _maximize(sys, cfg, dom, sample_obj, point_obj)
    return val


def lipschitz_report(sys: NonlinearSystem, cfg: EstimationConfig,
                     domain: Optional[StateDomain] = None) -> dict:
    """CLI-facing record: estimate, budget, argmax point, seed."""
    dom = _require_sampleable(sys, domain)

    def sample_obj(X):
        J = _jacobians_batched(sys, cfg, X @ sys.H.T)
        return np.linalg.svd(J, compute_uv=False)[:, 0]

    jac = _jacobian_fn(sys, cfg)

    def point_obj(x):
        return float(np.linalg.norm(jac(sys.H @ x), 2))

    val, argmax = _maximize(sys, cfg, dom, sample_obj, point_obj)
    return {"estimate": val, "samples": cfg.samples,
            "refinement_steps": cfg.refinement_steps, "seed": cfg.seed,
            "argmax": argmax.tolist(),
            "note": "sampling-based lower bound; not a certified supremum"}


def quadratic_bound_diag(sys: NonlinearSystem, cfg: EstimationConfig,
                         domain: Optional[StateDomain] = None) -> np.ndarray:
    """diag(q_1..q_nx) with q_i = estimated sup of n_x * sum_j
    (d f_j / d x_i)^2; requires H = I so the partials are unambiguous."""
    if sys.n_h != sys.n_x or not np.allclose(sys.H, np.eye(sys.n_x)):
        raise ContractViolation("quadratic_bound_diag requires H = I")
    dom = _require_sampleable(sys, domain)
    nx = sys.n_x
    jac = _jacobian_fn(sys, cfg)

    def col_objs(X):
        J = _jacobians_batched(sys, cfg, X)
        return nx * np.sum(J ** 2, axis=1)  # (N, n_x)

    # one sampling pass shared across coordinates, then refine each
    rng = np.random.default_rng(cfg.seed)
    best_vals = np.full(nx, -np.inf)
    best_pts = [None] * nx
    remaining = cfg.samples
    while remaining > 0:
        count = min(cfg.batch, remaining)
        remaining -= count
        X = dom.sample(rng, count)
        vals = col_objs(X)
        for i in range(nx):
            k = int(np.argmax(vals[:, i]))
            if vals[k, i] > best_vals[i]:
                best_vals[i] = float(vals[k, i])
                best_pts[i] = X[k].copy()
    if cfg.refinement_steps > 0:
        for i in range(nx):
            def obj_i(x, i=i):
                Ji = jac(x)
                return float(nx * np.sum(Ji[:, i] ** 2))
            v, _ = _hill_climb(obj_i, best_pts[i], dom, cfg.refinement_steps)
            best_vals[i] = max(best_vals[i], v)
    return np.diag(best_vals)


def jacobian_selfcheck(sys: NonlinearSystem, points: int = 20,
                       seed: int = 0) -> float:
    """Max relative deviation between the registered analytic Jacobian and
    central finite differences over sampled domain points."""
    if sys.f.jac is None:
        raise ContractViolation("no analytic Jacobian registered")
    rng = np.random.default_rng(seed)
    X = sys.domain.sample(rng, points)
    worst = 0.0
    for x in X:
        s = sys.H @ x
        Ja = sys.f.jac(s)
        Jfd = finite_difference_jacobian(sys.f.fn, s, sys.n_f)
        dev = np.linalg.norm(Ja - Jfd, 2) / (1.0 + np.linalg.norm(Jfd, 2))
        worst = max(worst, float(dev))
    return worst
