"""Coupled plant/observer integration and estimation-error metrics.

Fixed-step classical RK4 on the stacked (x, z) system. Measurement noise is
sampled once per step and held constant inside it (the observer equations
see y = Cx + v_k at every stage). The estimate is x_hat = z + L y; the
observer state integrates
    z' = M z + (M L + J) y + N G f(eta),  eta = H x_hat + K (y - C x_hat).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .system_model import ContractViolation, NonlinearSystem
from .synthesis import ObserverGains


class SimulationDivergence(RuntimeError):
    def __init__(self, time: float):
        super().__init__(f"state became non-finite at t = {time:.6g}")
        self.blowup_time = time


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"                 # "none" | "gaussian"
    covariance: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ContractViolation(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian":
            cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
            if cov.shape[0] != cov.shape[1] or np.any(np.linalg.eigvalsh(cov) < -1e-12):
                raise ContractViolation("covariance must be square PSD")
            object.__setattr__(self, "covariance", cov)

    @staticmethod
    def none() -> "NoiseSpec":
        return NoiseSpec(kind="none")

    @staticmethod
    def gaussian(covariance, seed: int = 0) -> "NoiseSpec":
        return NoiseSpec(kind="gaussian", covariance=np.asarray(covariance, float),
                         seed=seed)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    x: np.ndarray        # (N+1, n_x) plant states
    z: np.ndarray        # (N+1, n_x) observer states
    xhat: np.ndarray     # (N+1, n_x) estimates, xhat = z + L y
    y: np.ndarray        # (N+1, n_y) noisy outputs
    err_norm: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        for name in ("x", "z", "xhat", "y", "err_norm"):
            if len(getattr(self, name)) != n:
                raise ContractViolation("trajectory series must share the time grid")


def simulate(sys: NonlinearSystem, gains: ObserverGains, x0: np.ndarray,
             horizon: float, dt: float = 0.01,
             noise: Optional[NoiseSpec] = None,
             xhat0: Optional[np.ndarray] = None,
             check_domain: bool = True) -> Trajectory:
    """Integrate plant and observer over [0, horizon].

    z(0) = -L y(0) so that x_hat(0) = 0, unless `xhat0` overrides it.
    Raises SimulationDivergence when any state goes non-finite. A plant
    state leaving a simplex domain by more than 1e-6 emits a diagnostic
    (dt too large) without aborting.
    """
    if dt <= 0:
        raise ContractViolation("dt must be positive")
    noise = noise or NoiseSpec.none()
    nx, ny = sys.n_x, sys.n_y
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (nx,):
        raise ContractViolation("x0 has wrong dimension")
    M, N, L, J, K = gains.M, gains.N, gains.L, gains.J, gains.K
    if L.shape != (nx, ny) or M.shape != (nx, nx):
        raise ContractViolation("gains are dimensionally inconsistent with the system")
    A, G, H, C = sys.A, sys.G, sys.H, sys.C
    f = sys.f
    MLJ = M @ L + J
    NG = N @ G

    nsteps = int(round(horizon / dt)) if horizon > 0 else 0
    if noise.kind == "gaussian":
        rng = np.random.default_rng(noise.seed)
        chol = np.linalg.cholesky(noise.covariance
                                  + 1e-18 * np.eye(ny))
        vs = rng.standard_normal((nsteps + 1, ny)) @ chol.T
    else:
        vs = np.zeros((nsteps + 1, ny))

    x = x0.copy()
    y0 = C @ x + vs[0]
    z = (-L @ y0) if xhat0 is None else (np.asarray(xhat0, float) - L @ y0)

    times = np.empty(nsteps + 1)
    xs = np.empty((nsteps + 1, nx))
    zs = np.empty((nsteps + 1, nx))
    xhats = np.empty((nsteps + 1, nx))
    ys = np.empty((nsteps + 1, ny))
    errs = np.empty(nsteps + 1)
    domain_warned = False

    def rhs(xc, zc, v):
        y = C @ xc + v
        xh = zc + L @ y
        eta = H @ xh + K @ (y - C @ xh)
        dx = A @ xc + G @ f(H @ xc)
        dz = M @ zc + MLJ @ y + NG @ f(eta)
        return dx, dz

    for k in range(nsteps + 1):
        v = vs[k]
        y = C @ x + v
        xh = z + L @ y
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xh))):
            raise SimulationDivergence(k * dt)
        times[k] = k * dt
        xs[k] = x
        zs[k] = z
        xhats[k] = xh
        ys[k] = y
        errs[k] = np.linalg.norm(xh - x)
        if (check_domain and sys.domain.kind == "simplex" and not domain_warned
                and sys.domain.violation(x) > 1e-6):
            import warnings
            warnings.warn(f"plant state left the simplex by "
                          f"{sys.domain.violation(x):.2e} at t={k * dt:.3g}; "
                          f"dt may be too large", RuntimeWarning)
            domain_warned = True
        if k == nsteps:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            k1x, k1z = rhs(x, z, v)
            k2x, k2z = rhs(x + 0.5 * dt * k1x, z + 0.5 * dt * k1z, v)
            k3x, k3z = rhs(x + 0.5 * dt * k2x, z + 0.5 * dt * k2z, v)
            k4x, k4z = rhs(x + dt * k3x, z + dt * k3z, v)
            x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            z = z + (dt / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise SimulationDivergence((k + 1) * dt)

    return Trajectory(times=times, x=xs, z=zs, xhat=xhats, y=ys, err_norm=errs)


def error_metrics(traj: Trajectory, fit_window=(0.1, 0.9)) -> dict:
    """Summary metrics of the estimation-error history.

    rate is the log-linear decay fit over the given fractional window of the
    horizon (None when the error is identically zero there).
    """
    e = traj.err_norm
    t = traj.times
    if len(e) == 0:
        raise ContractViolation("empty trajectory")
    initial, final, peak = float(e[0]), float(e[-1]), float(e.max())
    thresh = 0.01 * initial
    below = np.nonzero(e <= thresh)[0]
    time_to_1pct = float(t[below[0]]) if initial > 0 and below.size else None

    rate = None
    if len(e) > 2:
        lo = int(np.floor(fit_window[0] * (len(e) - 1)))
        hi = max(int(np.ceil(fit_window[1] * (len(e) - 1))), lo + 2)
        seg_t, seg_e = t[lo:hi + 1], e[lo:hi + 1]
        mask = seg_e > 0
        if mask.sum() >= 2 and np.ptp(seg_t[mask]) > 0:
            slope = np.polyfit(seg_t[mask], np.log(seg_e[mask]), 1)[0]
            rate = float(-slope)

    q = max(len(e) // 4, 1)
    return {"initial": initial, "final": final, "peak": peak,
            "final_over_initial": final / initial if initial > 0 else None,
            "time_to_1pct": time_to_1pct, "rate": rate,
            "mean_final_quarter": float(e[-q:].mean())}


# ---------------------------------------------------------------------------
# trajectory CSV: t, x_1.., xhat_1.., y_1.., err_norm (17 significant digits)
# ---------------------------------------------------------------------------

def trajectory_header(n_x: int, n_y: int) -> list:
    return (["t"] + [f"x_{i}" for i in range(1, n_x + 1)]
            + [f"xhat_{i}" for i in range(1, n_x + 1)]
            + [f"y_{i}" for i in range(1, n_y + 1)] + ["err_norm"])


def save_trajectory_csv(traj: Trajectory, path) -> None:
    n_x = traj.x.shape[1]
    n_y = traj.y.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(trajectory_header(n_x, n_y)) + "\n")
        for k in range(len(traj.times)):
            row = np.concatenate([[traj.times[k]], traj.x[k], traj.xhat[k],
                                  traj.y[k], [traj.err_norm[k]]])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_trajectory_csv(path) -> dict:
    """Columns by name; the z series is not part of the file format."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, r)) for r in reader if r]
    data = np.array(rows) if rows else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}
