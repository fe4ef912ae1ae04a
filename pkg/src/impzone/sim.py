"""Hybrid closed-loop simulation: exact flow between impulses, jumps at k T.

The input computed from ``x(k T)`` is applied at the end of the interval,
``x((k+1) T) = exp(A T) x(k T) + B u(k T)``, matching the sampled model.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InfeasibleProblem

CSV_COLUMNS = ("t", "segment", "kind")


@dataclass
class Trajectory:
    """Record of a closed-loop run.

    ``post[k]`` is ``x(k T)`` (after the jump), ``pre[k]`` is the state just
    before the jump at ``(k+1) T``, ``inputs[k]`` the input computed at
    ``k T``.  ``dense_t[k]`` / ``dense_x[k]`` sample segment ``k``, endpoints
    included.
    """

    period: float
    post: np.ndarray
    pre: np.ndarray
    inputs: np.ndarray
    dense_t: np.ndarray
    dense_x: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def steps(self):
        return len(self.inputs)

    def rows(self):
        """Flat records: dense samples (last one tagged ``pre``) then ``post`` states."""
        n = self.post.shape[1]
        m = self.inputs.shape[1] if self.inputs.ndim == 2 and self.inputs.size else 0
        out = []
        for k in range(self.steps + 1):
            u = self.inputs[k] if k < self.steps else [None] * m
            out.append((k * self.period, k, "post", *self.post[k], *u))
            if k == self.steps:
                break
            M = len(self.dense_t[k])
            for i in range(M):
                kind = "pre" if i == M - 1 else "flow"
                out.append((self.dense_t[k][i], k, kind, *self.dense_x[k][i], *([None] * m)))
        return out, n, m

    def to_csv(self):
        rows, n, m = self.rows()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(CSV_COLUMNS) + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)])
        for r in rows:
            w.writerow(["" if v is None else (f"{v:.12g}" if isinstance(v, float) else v) for v in r])
        return buf.getvalue()

    def to_dict(self):
        return {
            "period": self.period,
            "post": self.post.tolist(),
            "pre": self.pre.tolist(),
            "inputs": self.inputs.tolist(),
            "dense_t": self.dense_t.tolist(),
            "dense_x": self.dense_x.tolist(),
            "metadata": self.metadata,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _trajectory(sys, post, pre, inputs, dense_t, dense_x, meta):
    n, m = sys.n, sys.m
    return Trajectory(
        sys.period,
        np.array(post).reshape(-1, n),
        np.array(pre).reshape(-1, n),
        np.array(inputs).reshape(-1, m),
        np.array(dense_t, dtype=float).reshape(len(dense_t), -1 if dense_t else 0),
        np.array(dense_x, dtype=float).reshape(len(dense_x), -1 if dense_x else 0, n),
        meta,
    )


def run_closed_loop(sys, controller, x0, steps, M=101, metadata=None):
    """Simulate ``steps`` impulse periods under ``controller(x) -> u``.

    Raises :class:`InfeasibleProblem` with ``exc.trajectory`` holding the
    partial run when the controller fails.
    """
    if steps < 1 or M < 2:
        raise ValueError("need steps >= 1 and M >= 2")
    md = sys.modal
    T = sys.period
    taus = np.linspace(0.0, T, M)
    Phi = md.transition(taus)
    x = np.asarray(x0, dtype=float)
    post, pre, inputs, dense_t, dense_x = [x], [], [], [], []
    meta = dict(metadata or {})
    for k in range(steps):
        try:
            u = np.atleast_1d(controller(x))
        except InfeasibleProblem as exc:
            exc.trajectory = _trajectory(sys, post, pre, inputs, dense_t, dense_x, meta)
            raise
        seg = Phi @ x
        dense_t.append(k * T + taus)
        dense_x.append(seg)
        x_minus = seg[-1]
        x = x_minus + sys.B @ u
        pre.append(x_minus)
        inputs.append(u)
        post.append(x)
    return _trajectory(sys, post, pre, inputs, dense_t, dense_x, meta)


@dataclass
class ViolationReport:
    in_state: np.ndarray
    in_target: np.ndarray
    max_state_violation: float
    max_target_violation: float
    first_state_violation: tuple | None
    settling_index: int | None

    @property
    def n_state_violations(self):
        return int(np.sum(~self.in_state))

    def to_dict(self):
        return {
            "n_state_violations": self.n_state_violations,
            "max_state_violation": self.max_state_violation,
            "max_target_violation": self.max_target_violation,
            "first_state_violation": self.first_state_violation,
            "settling_index": self.settling_index,
        }


def _refine(md, P, x0, t_lo, t_hi, i):
    f = lambda t: -(P.H[i] @ md.free_response(x0, t) - P.v[i])  # noqa: E731
    r = minimize_scalar(f, bounds=(t_lo, t_hi), method="bounded", options={"xatol": 1e-10})
    return -float(r.fun)


def _excess(traj, P, md, refine_band):
    """Per-sample max facet excess and the refined overall maximum."""
    if P.n_facets == 0:
        return np.full(traj.dense_t.shape, -np.inf), -np.inf
    vals = traj.dense_x @ P.H.T - P.v
    per = vals.max(axis=-1)
    worst = float(per.max())
    if md is not None:
        K, M = traj.dense_t.shape
        dt = traj.dense_t[0, 1] - traj.dense_t[0, 0]
        for k in range(K):
            for i in range(P.n_facets):
                j = int(np.argmax(vals[k, :, i]))
                if vals[k, j, i] > -refine_band:
                    lo = max(0.0, (traj.dense_t[k, j] - k * traj.period) - dt)
                    hi = min(traj.period, (traj.dense_t[k, j] - k * traj.period) + dt)
                    worst = max(worst, _refine(md, P, traj.post[k], lo, hi, i))
    return per, worst


def check_violations(traj, X, T_box, tol=1e-9, md=None, refine_band=1e-3):
    """Flag dense samples outside ``X`` / ``T_box`` and find the settling segment.

    With ``md`` given, facet maxima within ``refine_band`` of a facet are
    refined between samples using the exact flow.  ``settling_index`` is the
    first segment from which every later dense sample and post-jump state lies
    in ``T_box``.
    """
    sx, wx = _excess(traj, X, md, refine_band)
    st, wt = _excess(traj, T_box, md, refine_band)
    in_x = sx <= tol
    in_t = st <= tol
    first = None
    bad = np.argwhere(~in_x)
    if len(bad):
        first = (int(bad[0][0]), int(bad[0][1]))
    post_in_t = np.array([T_box.contains(p, tol) for p in traj.post])
    settling = None
    seg_ok = np.all(in_t, axis=1) & post_in_t[:-1]
    if post_in_t[-1]:
        settling = len(seg_ok)
        for k in range(len(seg_ok) - 1, -1, -1):
            if not seg_ok[k]:
                break
            settling = k
    return ViolationReport(in_x, in_t, max(wx, 0.0), max(wt, 0.0), first, settling)
