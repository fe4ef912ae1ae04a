"""Zone MPC for the impulse-sampled model, posed as sparse convex QPs.

Two formulations are provided:

``tracking``
    artificial equilibrium ``(x_s, u_s)`` plus an auxiliary point ``x*`` in
    the admissible target approximation; the offset ``||x_s - x*||^2_{Q_O}``
    stands in for the distance from the equilibrium to the target.
``setbased``
    per-step auxiliary pairs ``(x*_j, u*_j)`` in the lifted invariant set
    ``{(x, u) : x in T_inv, u in U, Ad x + Bd u in T_inv}``, penalized by the
    squared distance of the predicted pair to them.

The decision vector is sparse (predicted states are kept as variables).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleProblem, SolverFailure
from .geometry import Polytope
from .solvers import INFEASIBLE, OPTIMAL, solve_qp

VARIANTS = ("tracking", "setbased")


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, weights and sets shared by both controllers.

    ``state_set`` is the inner admissible approximation of X, ``target_set``
    the inner admissible approximation of the target and ``invariant_set``
    the controlled invariant set inside it.
    """

    Ad: np.ndarray
    Bd: np.ndarray
    horizon: int
    Q: np.ndarray
    R: np.ndarray
    Q_O: np.ndarray
    state_set: Polytope
    input_set: Polytope
    target_set: Polytope
    invariant_set: Polytope
    variant: str = "tracking"

    def __post_init__(self):
        n, m = np.atleast_2d(self.Bd).shape
        for name, size in (("Q", n), ("R", m), ("Q_O", n)):
            W = np.asarray(getattr(self, name), dtype=float)
            if W.ndim == 0:
                W = W * np.eye(size)
            if W.shape != (size, size) or not np.allclose(W, W.T):
                raise ValueError(f"{name} must be a symmetric {size}x{size} matrix")
            if np.linalg.eigvalsh(W).min() < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, W)
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @property
    def n(self):
        return self.Ad.shape[0]

    @property
    def m(self):
        return np.atleast_2d(self.Bd).shape[1]


@dataclass
class QpProblem:
    """``min 1/2 z'Pz + q'z + const  s.t.  G z <= h,  E z = f``."""

    P: np.ndarray
    q: np.ndarray
    G: np.ndarray
    h: np.ndarray
    E: np.ndarray
    f: np.ndarray
    const: float
    layout: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.q.size

    def unpack(self, z):
        return {k: z[a:b].reshape(shape) for k, (a, b, shape) in self.layout.items()}

    def cost(self, z):
        return float(0.5 * z @ self.P @ z + self.q @ z + self.const)

    def to_dict(self):
        return {
            "P": self.P.tolist(),
            "q": self.q.tolist(),
            "G": self.G.tolist(),
            "h": self.h.tolist(),
            "E": self.E.tolist(),
            "f": self.f.tolist(),
            "const": self.const,
            "layout": {k: [a, b, list(s)] for k, (a, b, s) in self.layout.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict())


class _Builder:
    """Accumulates variables, quadratic terms and constraints."""

    def __init__(self):
        self.layout = {}
        self.size = 0
        self._quad = []
        self._eq = []
        self._ineq = []

    def var(self, name, shape):
        k = int(np.prod(shape))
        self.layout[name] = (self.size, self.size + k, tuple(shape))
        self.size += k

    def sel(self, name, j=None):
        """Selection matrix of variable ``name`` (row ``j`` for stacked ones)."""
        a, b, shape = self.layout[name]
        width = shape[-1]
        S = np.zeros((width, self.size))
        start = a if j is None else a + j * width
        S[:, start : start + width] = np.eye(width)
        return S

    def square(self, L, c, W):
        """Add ``(L z + c)' W (L z + c)``."""
        self._quad.append((L, np.asarray(c, dtype=float), W))

    def eq(self, L, rhs):
        self._eq.append((L, np.atleast_1d(rhs)))

    def member(self, L, P, offset=None):
        """Constrain ``L z + offset`` to polytope ``P``."""
        off = np.zeros(L.shape[0]) if offset is None else offset
        self._ineq.append((P.H @ L, P.v - P.H @ off))

    def build(self):
        P = np.zeros((self.size, self.size))
        q = np.zeros(self.size)
        const = 0.0
        for L, c, W in self._quad:
            P += 2 * L.T @ W @ L
            q += 2 * L.T @ W @ c
            const += float(c @ W @ c)
        E = np.vstack([L for L, _ in self._eq]) if self._eq else np.zeros((0, self.size))
        f = np.concatenate([r for _, r in self._eq]) if self._eq else np.zeros(0)
        G = np.vstack([L for L, _ in self._ineq]) if self._ineq else np.zeros((0, self.size))
        h = np.concatenate([r for _, r in self._ineq]) if self._ineq else np.zeros(0)
        return QpProblem(P, q, G, h, E, f, const, self.layout)


def _dynamics(b, x, cfg):
    N, n = cfg.horizon, cfg.n
    Ad, Bd = cfg.Ad, np.atleast_2d(cfg.Bd)
    for j in range(N):
        L = b.sel("x", j) - Bd @ b.sel("u", j)
        if j == 0:
            b.eq(L, Ad @ x)
        else:
            b.eq(L - Ad @ b.sel("x", j - 1), np.zeros(n))
        b.member(b.sel("x", j), cfg.state_set)
        b.member(b.sel("u", j), cfg.input_set)


def build_tracking_qp(x, cfg):
    """Artificial-equilibrium zone MPC at state ``x``.

    Variables: inputs ``u`` (N, m), predicted states ``x`` (N, n) for steps
    1..N, equilibrium ``xs``, ``us`` and the auxiliary target point ``xstar``.
    """
    x = np.asarray(x, dtype=float)
    N, n, m = cfg.horizon, cfg.n, cfg.m
    b = _Builder()
    b.var("u", (N, m))
    b.var("x", (N, n))
    b.var("xs", (n,))
    b.var("us", (m,))
    b.var("xstar", (n,))
    _dynamics(b, x, cfg)
    Xs, Us = b.sel("xs"), b.sel("us")
    b.square(-Xs, x, cfg.Q)
    for j in range(N):
        if j > 0:
            b.square(b.sel("x", j - 1) - Xs, np.zeros(n), cfg.Q)
        b.square(b.sel("u", j) - Us, np.zeros(m), cfg.R)
    b.square(Xs - b.sel("xstar"), np.zeros(n), cfg.Q_O)
    b.eq((cfg.Ad - np.eye(n)) @ Xs + np.atleast_2d(cfg.Bd) @ Us, np.zeros(n))
    b.member(Xs, cfg.state_set)
    b.member(Us, cfg.input_set)
    b.eq(b.sel("x", N - 1) - Xs, np.zeros(n))
    b.member(b.sel("xstar"), cfg.target_set)
    return b.build()


def build_setbased_qp(x, cfg):
    """Set-based zone MPC at state ``x``.

    Variables: inputs ``u`` (N, m), predicted states ``x`` (N, n) for steps
    1..N, auxiliary states ``xstar`` (N+1, n) and inputs ``ustar`` (N, m).
    """
    x = np.asarray(x, dtype=float)
    N, n, m = cfg.horizon, cfg.n, cfg.m
    Ad, Bd = cfg.Ad, np.atleast_2d(cfg.Bd)
    Tinv = cfg.invariant_set
    b = _Builder()
    b.var("u", (N, m))
    b.var("x", (N, n))
    b.var("xstar", (N + 1, n))
    b.var("ustar", (N, m))
    _dynamics(b, x, cfg)
    I_n, I_m = np.eye(n), np.eye(m)
    for j in range(N):
        Xj = np.zeros((n, b.size)) if j == 0 else b.sel("x", j - 1)
        c = x if j == 0 else np.zeros(n)
        b.square(Xj - b.sel("xstar", j), c, I_n)
        b.square(b.sel("u", j) - b.sel("ustar", j), np.zeros(m), I_m)
        b.member(b.sel("xstar", j), Tinv)
        b.member(b.sel("ustar", j), cfg.input_set)
        b.member(Ad @ b.sel("xstar", j) + Bd @ b.sel("ustar", j), Tinv)
    b.eq(b.sel("x", N - 1) - b.sel("xstar", N), np.zeros(n))
    b.member(b.sel("xstar", N), Tinv)
    return b.build()


def build_qp(x, cfg):
    if cfg.variant == "tracking":
        return build_tracking_qp(x, cfg)
    return build_setbased_qp(x, cfg)


def control_step(x, cfg, solver=solve_qp):
    """Solve the zone MPC at ``x`` and return the first input and diagnostics.

    Raises
    ------
    InfeasibleProblem
        The state is outside the feasible region of the horizon-N problem.
    SolverFailure
        The QP backend returned neither a solution nor a certificate.
    """
    qp = build_qp(x, cfg)
    res = solver(qp.P, qp.q, qp.G, qp.h, qp.E, qp.f)
    if res.status == INFEASIBLE:
        raise InfeasibleProblem(f"zone MPC infeasible at x = {np.asarray(x).tolist()}")
    if res.status != OPTIMAL:
        raise SolverFailure(f"QP solver returned {res.raw_status or res.status}", res.status)
    parts = qp.unpack(res.x)
    diag = {"objective": qp.cost(res.x), "variant": cfg.variant}
    diag.update({k: v.copy() for k, v in parts.items()})
    return parts["u"][0].copy(), diag


class ZoneMpc:
    """Receding-horizon feedback ``x -> u``; keeps per-call diagnostics."""

    def __init__(self, cfg, solver=solve_qp):
        self.cfg = cfg
        self.solver = solver
        self.history = []

    def __call__(self, x):
        u, diag = control_step(x, self.cfg, self.solver)
        self.history.append(diag)
        return u

    @property
    def costs(self):
        return [d["objective"] for d in self.history]
