"""Networked SIR epidemic instances and their state-space assembly.

Per node i: x_I' = (1 - x_I - x_R) * sum_j beta_i w_ij x_I^j - delta_i x_I,
x_R' = delta_i x_I, with x_S = 1 - x_I - x_R implied. Stacking
x = (x_I, x_R) gives x' = A x + G f(x) with the mass-action term factored
out as the nonlinearity; x_R is measured.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .system_model import (ContractViolation, NonlinearSystem, StateDomain,
                           build_nonlinearity)


@dataclass(frozen=True)
class SirNetwork:
    n: int
    W: np.ndarray          # weighted adjacency, nonneg, self-loops allowed
    beta: np.ndarray       # per-node infection susceptibility, > 0
    delta: np.ndarray      # per-node recovery rate, > 0, pairwise distinct
    seed: Optional[int] = None
    generator_params: dict = field(default_factory=dict)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        beta = np.asarray(self.beta, dtype=float)
        delta = np.asarray(self.delta, dtype=float)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "delta", delta)
        if W.shape != (self.n, self.n):
            raise ContractViolation("W must be n by n")
        if np.any(W < 0):
            raise ContractViolation("W must be elementwise nonnegative")
        if beta.shape != (self.n,) or np.any(beta <= 0):
            raise ContractViolation("beta must be a positive n-vector")
        if delta.shape != (self.n,) or np.any(delta <= 0):
            raise ContractViolation("delta must be a positive n-vector")


@dataclass(frozen=True)
class SirState:
    x_I: np.ndarray
    x_R: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.x_I, dtype=float)
        xr = np.asarray(self.x_R, dtype=float)
        object.__setattr__(self, "x_I", xi)
        object.__setattr__(self, "x_R", xr)
        if xi.shape != xr.shape or xi.ndim != 1:
            raise ContractViolation("x_I and x_R must be equal-length vectors")
        if np.any(xi < 0) or np.any(xr < 0) or np.any(xi + xr > 1 + 1e-12):
            raise ContractViolation("state must satisfy x_I, x_R >= 0, x_I + x_R <= 1")

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x_I, self.x_R])


DELTA_MIN_GAP = 1e-6  # distinct recovery rates keep (A, C) observable


def random_network(n: int, p_edge: float = 0.5, w_range=(0.0, 2.0),
                   beta_range=(0.0, 1.0), delta_range=(0.0, 1.0),
                   seed: int = 0, symmetric_weights: bool = True) -> SirNetwork:
    """Random bidirected graph: each unordered pair carries an edge with
    probability p_edge (weights drawn from w_range, symmetric unless asked
    otherwise), every node gets a self-loop, and delta is re-sampled until
    pairwise distinct."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    if not (0.0 <= p_edge <= 1.0):
        raise ContractViolation("p_edge must be a probability")
    for lo, hi in (w_range, beta_range, delta_range):
        if not (hi > lo >= 0.0):
            raise ContractViolation("ranges must be nondegenerate and nonnegative")
    rng = np.random.default_rng(seed)
    W = np.zeros((n, n))
    for i in range(n):
        W[i, i] = rng.uniform(*w_range)
        for j in range(i + 1, n):
            if rng.random() < p_edge:
                W[i, j] = rng.uniform(*w_range)
                W[j, i] = W[i, j] if symmetric_weights else rng.uniform(*w_range)
    beta = _positive_uniform(rng, n, beta_range)
    delta = _positive_uniform(rng, n, delta_range)
    for _ in range(1000):
        gaps = np.abs(delta[:, None] - delta[None, :]) + np.eye(n)
        if gaps.min() >= DELTA_MIN_GAP:
            break
        delta = _positive_uniform(rng, n, delta_range)
    return SirNetwork(n=n, W=W, beta=beta, delta=delta, seed=seed,
                      generator_params={"p_edge": p_edge,
                                        "w_range": list(w_range),
                                        "beta_range": list(beta_range),
                                        "delta_range": list(delta_range),
                                        "symmetric_weights": symmetric_weights})


def _positive_uniform(rng, n, rng_pair):
    # open lower endpoint: beta_i, delta_i must be strictly positive
    lo, hi = rng_pair
    out = rng.uniform(lo, hi, n)
    while np.any(out <= lo):
        out[out <= lo] = rng.uniform(lo, hi, int(np.sum(out <= lo)))
    return out


def build_system(net: SirNetwork) -> NonlinearSystem:
    """Assemble x' = A x + G f(x), y = x_R:
    A = [[BW - D, 0], [D, 0]], G = [-I; 0], H = I, C = [0 I],
    f(x) = diag(x_I + x_R) B W x_I, with its analytic Jacobian registered.
    """
    n = net.n
    B = np.diag(net.beta)
    D = np.diag(net.delta)
    A = np.block([[B @ net.W - D, np.zeros((n, n))],
                  [D, np.zeros((n, n))]])
    G = np.vstack([-np.eye(n), np.zeros((n, n))])
    H = np.eye(2 * n)
    C = np.hstack([np.zeros((n, n)), np.eye(n)])
    f = build_nonlinearity("sir_mass_action",
                           {"W": net.W.tolist(), "beta": net.beta.tolist()})
    domain = StateDomain.simplex(n, description="per-node (x_I, x_R) triangles")
    return NonlinearSystem(A=A, G=G, H=H, C=C, f=f, domain=domain)


def sir_vector_field(net: SirNetwork, state: SirState) -> tuple:
    """Direct per-node evaluation of the SIR equations; kept deliberately
    naive as the independent oracle against build_system."""
    n = net.n
    dxi = np.zeros(n)
    dxr = np.zeros(n)
    for i in range(n):
        force = 0.0
        for j in range(n):
            force += net.beta[i] * net.W[i, j] * state.x_I[j]
        dxi[i] = (1.0 - state.x_I[i] - state.x_R[i]) * force \
            - net.delta[i] * state.x_I[i]
        dxr[i] = net.delta[i] * state.x_I[i]
    return dxi, dxr


# ---------------------------------------------------------------------------
# network file format
# ---------------------------------------------------------------------------

def network_to_json_dict(net: SirNetwork) -> dict:
    return {"n": net.n, "W": net.W.tolist(), "beta": net.beta.tolist(),
            "delta": net.delta.tolist(), "seed": net.seed,
            "generator_params": net.generator_params}


def network_from_json_dict(d: dict) -> SirNetwork:
    return SirNetwork(n=int(d["n"]), W=np.array(d["W"], dtype=float),
                      beta=np.array(d["beta"], dtype=float),
                      delta=np.array(d["delta"], dtype=float),
                      seed=d.get("seed"),
                      generator_params=d.get("generator_params", {}))


def save_network(net: SirNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_json_dict(net), fh, indent=2)
        fh.write("\n")


def load_network(path) -> SirNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_json_dict(json.load(fh))
