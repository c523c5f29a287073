"""System class x' = Ax + G f(Hx), y = Cx: containers, detectability, shifts.

Nonlinearities are registered in a catalog by name + JSON-able parameter
block so systems round-trip through files and the evaluator contract stays
total (no expression parsing).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np


class ContractViolation(ValueError):
    """Raised when an operation's preconditions are not met."""


# ---------------------------------------------------------------------------
# state domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateDomain:
    """Region X the state lives in; used for sampling-based estimation.

    kind="box": axis-aligned box [lower, upper].
    kind="simplex": product of per-node triangles
        {x_I^i >= 0, x_R^i >= 0, x_I^i + x_R^i <= 1}, state dim 2*nodes
        ordered (x_I_1..x_I_n, x_R_1..x_R_n).
    """

    kind: str
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    nodes: Optional[int] = None
    description: str = ""

    def __post_init__(self):
        if self.kind == "box":
            lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
            hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
            if lo.shape != hi.shape or lo.ndim != 1:
                raise ContractViolation("box bounds must be equal-length vectors")
            if np.any(lo > hi):
                raise ContractViolation("box bounds must satisfy lower <= upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "simplex":
            if not self.nodes or self.nodes < 1:
                raise ContractViolation("simplex domain needs a positive node count")
        else:
            raise ContractViolation(f"unknown domain kind {self.kind!r}")

    @staticmethod
    def box(lower, upper, description: str = "") -> "StateDomain":
        return StateDomain(kind="box", lower=np.asarray(lower, float),
                           upper=np.asarray(upper, float), description=description)

    @staticmethod
    def simplex(nodes: int, description: str = "") -> "StateDomain":
        return StateDomain(kind="simplex", nodes=nodes, description=description)

    @property
    def dim(self) -> int:
        if self.kind == "box":
            return self.lower.size
        return 2 * self.nodes

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform samples, shape (count, dim)."""
        if self.kind == "box":
            return rng.uniform(self.lower, self.upper, size=(count, self.dim))
        n = self.nodes
        # uniform on the triangle {a,b >= 0, a+b <= 1} via square folding
        u = rng.random((count, n, 2))
        fold = u.sum(axis=2) > 1.0
        u[fold] = 1.0 - u[fold]
        return np.concatenate([u[:, :, 0], u[:, :, 1]], axis=1)

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return np.clip(x, self.lower, self.upper)
        n = self.nodes
        xi = np.clip(x[:n], 0.0, 1.0)
        xr = np.clip(x[n:], 0.0, 1.0)
        s = xi + xr
        over = s > 1.0
        if np.any(over):
            # Euclidean projection onto a+b=1 for offending nodes, then clip
            shift = (s[over] - 1.0) / 2.0
            xi = xi.copy()
            xr = xr.copy()
            xi[over] = np.clip(xi[over] - shift, 0.0, 1.0)
            xr[over] = np.clip(xr[over] - shift, 0.0, 1.0)
            s2 = xi[over] + xr[over]
            bad = s2 > 1.0
            if np.any(bad):
                idx = np.where(over)[0][bad]
                scale = (xi[idx] + xr[idx])
                xi[idx] /= scale
                xr[idx] /= scale
        return np.concatenate([xi, xr])

    def violation(self, x: np.ndarray) -> float:
        """Max distance outside the domain (0 when inside)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return float(np.maximum(np.maximum(self.lower - x, x - self.upper), 0.0).max())
        n = self.nodes
        xi, xr = x[:n], x[n:]
        v = np.maximum(-xi, 0.0).max(initial=0.0)
        v = max(v, np.maximum(-xr, 0.0).max(initial=0.0))
        v = max(v, np.maximum(xi + xr - 1.0, 0.0).max(initial=0.0))
        return float(v)

    def to_json_dict(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lower": self.lower.tolist(),
                    "upper": self.upper.tolist(), "description": self.description}
        return {"kind": "simplex", "nodes": self.nodes, "description": self.description}

    @staticmethod
    def from_json_dict(d: dict) -> "StateDomain":
        if d["kind"] == "box":
            return StateDomain.box(d["lower"], d["upper"], d.get("description", ""))
        return StateDomain.simplex(int(d["nodes"]), d.get("description", ""))


# ---------------------------------------------------------------------------
# nonlinearity catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Nonlinearity:
    """Named evaluator R^{dim_in} -> R^{dim_out} with optional Jacobians.

    jac(point) -> (dim_out, dim_in); jac_batch(points (N, dim_in)) ->
    (N, dim_out, dim_in) is a vectorized fast path used by the estimators.
    """

    name: str
    params: dict
    dim_in: int
    dim_out: int
    fn: Callable[[np.ndarray], np.ndarray]
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jac_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, s: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(s, dtype=float))


_CATALOG: dict[str, Callable[[dict], Nonlinearity]] = {}


def register_nonlinearity(name: str):
    def deco(builder):
        _CATALOG[name] = builder
        return builder
    return deco


def build_nonlinearity(name: str, params: dict) -> Nonlinearity:
    if name not in _CATALOG:
        raise ContractViolation(f"unknown nonlinearity {name!r}; "
                                f"known: {sorted(_CATALOG)}")
    return _CATALOG[name](params)


@register_nonlinearity("zero")
def _build_zero(params: dict) -> Nonlinearity:
    n_in = int(params["dim_in"])
    n_out = int(params["dim_out"])
    z = np.zeros(n_out)
    jz = np.zeros((n_out, n_in))
    return Nonlinearity("zero", params, n_in, n_out,
                        fn=lambda s: z.copy(),
                        jac=lambda s: jz.copy(),
                        jac_batch=lambda pts: np.zeros((len(pts), n_out, n_in)))


@register_nonlinearity("linear")
def _build_linear(params: dict) -> Nonlinearity:
    F = np.asarray(params["F"], dtype=float)
    return Nonlinearity("linear", params, F.shape[1], F.shape[0],
                        fn=lambda s: F @ s,
                        jac=lambda s: F.copy(),
                        jac_batch=lambda pts: np.broadcast_to(
                            F, (len(pts),) + F.shape).copy())


@register_nonlinearity("polynomial")
def _build_polynomial(params: dict) -> Nonlinearity:
    # scalar -> scalar, coeffs low order first: f(s) = sum c_k s^k
    c = np.asarray(params["coeffs"], dtype=float)
    dc = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)

    def fn(s):
        return np.atleast_1d(np.polynomial.polynomial.polyval(s[0], c))

    def jac(s):
        return np.array([[np.polynomial.polynomial.polyval(s[0], dc)]])

    def jac_batch(pts):
        vals = np.polynomial.polynomial.polyval(pts[:, 0], dc)
        return vals.reshape(-1, 1, 1)

    return Nonlinearity("polynomial", params, 1, 1, fn, jac, jac_batch)


@register_nonlinearity("componentwise_poly")
def _build_componentwise(params: dict) -> Nonlinearity:
    # f_i(s) = poly_i(s_i), one coefficient list per coordinate
    coeffs = [np.asarray(c, dtype=float) for c in params["coeffs"]]
    ders = [np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)
            for c in coeffs]
    d = len(coeffs)

    def fn(s):
        return np.array([np.polynomial.polynomial.polyval(s[i], coeffs[i])
                         for i in range(d)])

    def jac(s):
        return np.diag([np.polynomial.polynomial.polyval(s[i], ders[i])
                        for i in range(d)])

    def jac_batch(pts):
        out = np.zeros((len(pts), d, d))
        for i in range(d):
            out[:, i, i] = np.polynomial.polynomial.polyval(pts[:, i], ders[i])
        return out

    return Nonlinearity("componentwise_poly", params, d, d, fn, jac, jac_batch)


@register_nonlinearity("sir_mass_action")
def _build_sir_mass_action(params: dict) -> Nonlinearity:
    # f(x) = diag(x_I + x_R) B W x_I on the stacked state (x_I, x_R)
    W = np.asarray(params["W"], dtype=float)
    beta = np.asarray(params["beta"], dtype=float)
    BW = np.diag(beta) @ W
    n = W.shape[0]

    def fn(x):
        xi, xr = x[:n], x[n:]
        return (xi + xr) * (BW @ xi)

    def jac(x):
        xi, xr = x[:n], x[n:]
        bwx = BW @ xi
        J = np.zeros((n, 2 * n))
        J[:, :n] = (xi + xr)[:, None] * BW
        J[np.arange(n), np.arange(n)] += bwx
        J[np.arange(n), n + np.arange(n)] = bwx
        return J

    def jac_batch(pts):
        xi, xr = pts[:, :n], pts[:, n:]
        s = xi + xr
        bwx = xi @ BW.T
        J = np.zeros((len(pts), n, 2 * n))
        J[:, :, :n] = s[:, :, None] * BW[None, :, :]
        idx = np.arange(n)
        J[:, idx, idx] += bwx
        J[:, idx, n + idx] = bwx
        return J

    return Nonlinearity("sir_mass_action", params, 2 * n, n, fn, jac, jac_batch)


@register_nonlinearity("shift_augmented")
def _build_shift_augmented(params: dict) -> Nonlinearity:
    # f_bar(x) = [f_base(H x); x]
    base = build_nonlinearity(params["base"]["name"], params["base"]["params"])
    Hmat = np.asarray(params["H"], dtype=float)
    n_x = Hmat.shape[1]

    def fn(x):
        return np.concatenate([base(Hmat @ x), x])

    def jac(x):
        Jb = _jac_or_fd(base, Hmat @ x)
        return np.vstack([Jb @ Hmat, np.eye(n_x)])

    return Nonlinearity("shift_augmented", params, n_x, base.dim_out + n_x, fn, jac)


@register_nonlinearity("shift_absorbed")
def _build_shift_absorbed(params: dict) -> Nonlinearity:
    # f_bar(x) = G f_base(H x) - Delta x
    base = build_nonlinearity(params["base"]["name"], params["base"]["params"])
    Gmat = np.asarray(params["G"], dtype=float)
    Hmat = np.asarray(params["H"], dtype=float)
    Delta = np.asarray(params["Delta"], dtype=float)
    n_x = Hmat.shape[1]

    def fn(x):
        return Gmat @ base(Hmat @ x) - Delta @ x

    def jac(x):
        Jb = _jac_or_fd(base, Hmat @ x)
        return Gmat @ Jb @ Hmat - Delta

    return Nonlinearity("shift_absorbed", params, n_x, n_x, fn, jac)


def finite_difference_jacobian(fn, point: np.ndarray, dim_out: int,
                               h: Optional[float] = None) -> np.ndarray:
    """Central differences with step h = 1e-6*(1+||point||)."""
    point = np.asarray(point, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + float(np.linalg.norm(point)))
    J = np.zeros((dim_out, point.size))
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = h
        J[:, i] = (fn(point + e) - fn(point - e)) / (2.0 * h)
    return J


def _jac_or_fd(nl: Nonlinearity, point: np.ndarray) -> np.ndarray:
    if nl.jac is not None:
        return nl.jac(np.asarray(point, dtype=float))
    return finite_difference_jacobian(nl.fn, point, nl.dim_out)


# ---------------------------------------------------------------------------
# the system container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearSystem:
    """x' = A x + G f(H x), y = C x with x constrained to `domain`."""

    A: np.ndarray
    G: np.ndarray
    H: np.ndarray
    C: np.ndarray
    f: Nonlinearity
    domain: StateDomain

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "C", C)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ContractViolation("A must be square")
        if G.shape[0] != n:
            raise ContractViolation("G must have n_x rows")
        if H.shape[1] != n or C.shape[1] != n:
            raise ContractViolation("H and C must have n_x columns")
        if self.f.dim_in != H.shape[0] or self.f.dim_out != G.shape[1]:
            raise ContractViolation(
                f"f maps R^{self.f.dim_in}->R^{self.f.dim_out}; "
                f"need R^{H.shape[0]}->R^{G.shape[1]}")
        if self.domain.dim != n:
            raise ContractViolation("domain dimension must match n_x")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_f(self) -> int:
        return self.G.shape[1]

    @property
    def n_h(self) -> int:
        return self.H.shape[0]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    def vector_field(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A @ x + self.G @ self.f(self.H @ x)

    def jac_f(self, s: np.ndarray) -> np.ndarray:
        """Jacobian of f at s (analytic if registered, else central FD)."""
        return _jac_or_fd(self.f, s)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectabilityReport:
    detectable: bool
    offending_eigenvalues: tuple
    min_singular_values: tuple
    tested_eigenvalues: tuple


def pbh_detectability(A: np.ndarray, C: np.ndarray, tol: float = 1e-9
                      ) -> DetectabilityReport:
    """PBH rank test: (A, C) detectable iff [sI-A; C] has full column rank
    for every eigenvalue s of A with Re(s) >= -tol.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or C.shape[1] != n:
        raise ContractViolation("A must be square and C must have n columns")
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    thresh = tol * (1.0 + np.linalg.norm(A, 2))
    eigs = np.linalg.eigvals(A)
    offending, svals, tested = [], [], []
    for s in eigs:
        if s.real < -tol:
            continue
        stacked = np.vstack([s * np.eye(n) - A, C.astype(complex)])
        smin = np.linalg.svd(stacked, compute_uv=False)[-1]
        tested.append(complex(s))
        svals.append(float(smin))
        if smin < thresh:
            offending.append(complex(s))
    return DetectabilityReport(detectable=not offending,
                               offending_eigenvalues=tuple(offending),
                               min_singular_values=tuple(svals),
                               tested_eigenvalues=tuple(tested))


def shift_stabilize(sys: NonlinearSystem, Delta: np.ndarray, mode: str
                    ) -> NonlinearSystem:
    """Add/subtract Delta so (A+Delta, C) can be made detectable while the
    vector field is preserved exactly.

    mode="augment": A_bar = A+Delta, G_bar = [G, -Delta],
                    f_bar(x) = [f(Hx); x], H_bar = I.
    mode="absorb":  A_bar = A+Delta, G_bar = I,
                    f_bar(x) = G f(Hx) - Delta x, H_bar = I.
    """
    Delta = np.atleast_2d(np.asarray(Delta, dtype=float))
    n = sys.n_x
    if Delta.shape != (n, n):
        raise ContractViolation("Delta must be n_x by n_x")
    A_bar = sys.A + Delta
    base = {"name": sys.f.name, "params": sys.f.params}
    if mode == "augment":
        G_bar = np.hstack([sys.G, -Delta])
        f_bar = build_nonlinearity("shift_augmented",
                                   {"base": base, "H": sys.H.tolist()})
    elif mode == "absorb":
        G_bar = np.eye(n)
        f_bar = build_nonlinearity(
            "shift_absorbed",
            {"base": base, "G": sys.G.tolist(), "H": sys.H.tolist(),
             "Delta": Delta.tolist()})
    else:
        raise ContractViolation(f"unknown shift mode {mode!r}")
    return NonlinearSystem(A=A_bar, G=G_bar, H=np.eye(n), C=sys.C,
                           f=f_bar, domain=sys.domain)


def observer_matrices(A: np.ndarray, C: np.ndarray, J: np.ndarray,
                      L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """M = A - L C A - J C and N = I - L C."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    J = np.atleast_2d(np.asarray(J, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    n, ny = A.shape[0], C.shape[0]
    if J.shape != (n, ny) or L.shape != (n, ny):
        raise ContractViolation("J and L must be n_x by n_y")
    M = A - L @ C @ A - J @ C
    N = np.eye(n) - L @ C
    return M, N


# ---------------------------------------------------------------------------
# system file format
# ---------------------------------------------------------------------------

def system_to_json_dict(sys: NonlinearSystem) -> dict:
    return {
        "A": sys.A.tolist(),
        "G": sys.G.tolist(),
        "H": sys.H.tolist(),
        "C": sys.C.tolist(),
        "f": {"name": sys.f.name, "params": sys.f.params},
        "domain": sys.domain.to_json_dict(),
    }


def system_from_json_dict(d: dict) -> NonlinearSystem:
    f = build_nonlinearity(d["f"]["name"], d["f"]["params"])
    return NonlinearSystem(A=np.array(d["A"], dtype=float),
                           G=np.array(d["G"], dtype=float),
                           H=np.array(d["H"], dtype=float),
                           C=np.array(d["C"], dtype=float),
                           f=f, domain=StateDomain.from_json_dict(d["domain"]))


def save_system(sys: NonlinearSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_json_dict(sys), fh, indent=2)
        fh.write("\n")


def load_system(path) -> NonlinearSystem:
    with open(path, "r", encoding="utf-8") as fh:
        return system_from_json_dict(json.load(fh))
