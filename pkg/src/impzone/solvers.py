"""Thin solver contracts for LP, QP and SDP problems.

Every routine in the package talks to the numerical backends only through the
three functions defined here, so swapping a backend is a local change.  LPs go
to HiGHS (through :func:`scipy.optimize.linprog`); QPs and SDPs go to Clarabel.

All results carry ``status`` in ``{"optimal", "infeasible", "unbounded",
"unknown"}``.  Callers decide how to react; nothing here coerces an unknown
status into a verdict.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse
from scipy.optimize import linprog

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
UNKNOWN = "unknown"

_SQRT2 = np.sqrt(2.0)

_CLARABEL_STATUS = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    fun: float | None = None


@dataclass
class QpResult:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    raw_status: str = ""


@dataclass
class SdpResult:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    blocks: list = field(default_factory=list)
    raw_status: str = ""


def _as_2d(M, ncols):
    if M is None:
        return np.zeros((0, ncols))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((0, ncols))
    return M


def _as_1d(v):
    if v is None:
        return np.zeros(0)
    return np.atleast_1d(np.asarray(v, dtype=float)).ravel()


def solve_lp(c, G=None, h=None, E=None, f=None):
    """Solve ``min c'z  s.t.  G z <= h,  E z = f`` with free variables."""
    c = _as_1d(c)
    nz = c.size
    G, h = _as_2d(G, nz), _as_1d(h)
    E, f = _as_2d(E, nz), _as_1d(f)
    res = linprog(
        c,
        A_ub=G if G.shape[0] else None,
        b_ub=h if G.shape[0] else None,
        A_eq=E if E.shape[0] else None,
        b_eq=f if E.shape[0] else None,
        bounds=[(None, None)] * nz,
        method="highs",
    )
    if res.status == 0:
        return LpResult(OPTIMAL, np.asarray(res.x), float(res.fun))
    if res.status == 2:
        return LpResult(INFEASIBLE)
    if res.status == 3:
        return LpResult(UNBOUNDED)
    return LpResult(UNKNOWN)


def _settings(tol):
    st = clarabel.DefaultSettings()
    st.verbose = False
    st.tol_gap_abs = tol
    st.tol_gap_rel = tol
    st.tol_feas = tol
    st.tol_infeas_abs = tol
    st.tol_infeas_rel = tol
    st.tol_ktratio = 1e-7
    st.max_iter = 200
    return st


def solve_qp(P, q, G=None, h=None, E=None, f=None, tol=1e-9):
    """Solve ``min 1/2 z'Pz + q'z  s.t.  G z <= h,  E z = f``."""
    q = _as_1d(q)
    nz = q.size
    P = np.asarray(P, dtype=float).reshape(nz, nz)
    G, h = _as_2d(G, nz), _as_1d(h)
    E, f = _as_2d(E, nz), _as_1d(f)
    A = sparse.csc_matrix(np.vstack([E, G]))
    b = np.concatenate([f, h])
    cones = []
    if E.shape[0]:
        cones.append(clarabel.ZeroConeT(E.shape[0]))
    if G.shape[0]:
        cones.append(clarabel.NonnegativeConeT(G.shape[0]))
    Pu = sparse.triu(sparse.csc_matrix(0.5 * (P + P.T)), format="csc")
    sol = clarabel.DefaultSolver(Pu, q, A, b, cones, _settings(tol)).solve()
    raw = str(sol.status)
    status = _CLARABEL_STATUS.get(raw, UNKNOWN)
    if status != OPTIMAL:
        return QpResult(status, raw_status=raw)
    x = np.asarray(sol.x)
    return QpResult(status, x, float(0.5 * x @ P @ x + q @ x), raw)


def svec_indices(k):
    """Upper-triangle index pairs in the column-major order Clarabel expects."""
    return [(i, j) for j in range(k) for i in range(j + 1)]


def svec(S):
    k = S.shape[0]
    return np.array([S[i, j] * (1.0 if i == j else _SQRT2) for i, j in svec_indices(k)])


def solve_sdp(c, lmis, E=None, f=None, G=None, h=None, tol=1e-9):
    """Solve an SDP in linear-matrix-inequality form.

    ``min c'z  s.t.  E z = f,  G z <= h,  F0_k + sum_j z_j F_kj >= 0`` for
    each ``(F0_k, F_k)`` in ``lmis`` where ``F_k`` has shape ``(len(z), k, k)``.
    The returned ``blocks`` hold the evaluated matrices ``F0_k + sum z_j F_kj``.
    """
    c = _as_1d(c)
    nz = c.size
    E, f = _as_2d(E, nz), _as_1d(f)
    G, h = _as_2d(G, nz), _as_1d(h)
    rows, rhs, cones = [], [], []
    if E.shape[0]:
        rows.append(sparse.csc_matrix(E))
        rhs.append(f)
        cones.append(clarabel.ZeroConeT(E.shape[0]))
    if G.shape[0]:
        rows.append(sparse.csc_matrix(G))
        rhs.append(h)
        cones.append(clarabel.NonnegativeConeT(G.shape[0]))
    for F0, F in lmis:
        k = F0.shape[0]
        if k == 0:
            continue
        idx = svec_indices(k)
        scale = np.array([1.0 if i == j else _SQRT2 for i, j in idx])
        ii = np.array([i for i, _ in idx])
        jj = np.array([j for _, j in idx])
        # s = svec(F0 + sum z_j F_j) = b - A z
        A_blk = -(np.asarray(F)[:, ii, jj] * scale).T
        rows.append(sparse.csc_matrix(A_blk))
        rhs.append(F0[ii, jj] * scale)
        cones.append(clarabel.PSDTriangleConeT(k))
    A = sparse.vstack(rows, format="csc") if rows else sparse.csc_matrix((0, nz))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    P = sparse.csc_matrix((nz, nz))
    sol = clarabel.DefaultSolver(P, c, A, b, cones, _settings(tol)).solve()
    raw = str(sol.status)
    status = _CLARABEL_STATUS.get(raw, UNKNOWN)
    if status != OPTIMAL:
        return SdpResult(status, raw_status=raw)
    z = np.asarray(sol.x)
    blocks = [F0 + np.tensordot(z, np.asarray(F), axes=1) for F0, F in lmis]
    return SdpResult(status, z, float(c @ z), blocks, raw)
