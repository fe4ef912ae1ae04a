"""Polytope algebra in H-representation.

A :class:`Polytope` is ``{x : H x <= v}`` with unit-norm rows.  Everything that
needs an optimizer (emptiness, redundancy removal, containment, centering)
goes through :func:`impzone.solvers.solve_lp`.  Vertex enumeration is only
provided up to three dimensions.
"""
from __future__ import annotations

import itertools
import json

import numpy as np
from scipy.spatial import ConvexHull

from .errors import (
    EmptyPolytope,
    EmptyResult,
    NoConvergence,
    SingularMap,
    SolverFailure,
    UnboundedPolytope,
    UnsupportedDimension,
)
from .solvers import INFEASIBLE, OPTIMAL, UNBOUNDED, solve_lp

ROW_TOL = 1e-12
REDUNDANCY_TOL = 1e-9
EMPTY_TOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _normalize(H, v):
    norms = np.linalg.norm(H, axis=1)
    zero = norms <= ROW_TOL
    infeasible = bool(np.any(v[zero] < -EMPTY_TOL))
    H, v, norms = H[~zero], v[~zero], norms[~zero]
    return H / norms[:, None], v / norms, infeasible


class Polytope:
    """Convex polyhedron ``{x : H x <= v}``.

    Rows are normalized to unit length on construction; rows with a zero
    normal are dropped (or flag the set empty when their offset is negative).
    An empty ``H`` describes the whole space.
    """

    def __init__(self, H, v, vertices=None, empty=False):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
        if H.shape[0] != v.size:
            raise ValueError(f"H has {H.shape[0]} rows but v has {v.size} entries")
        H, v, infeasible = _normalize(H, v)
        self._H = _frozen(H)
        self._v = _frozen(v)
        self._flag_empty = bool(empty or infeasible)
        self._vertices = None if vertices is None else _frozen(np.atleast_2d(vertices))
        self._empty_cache = True if self._flag_empty else None

    # -- constructors -----------------------------------------------------
    @classmethod
    def box(cls, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        n = lower.size
        I = np.eye(n)
        return cls(np.vstack([I, -I]), np.concatenate([upper, -lower]))

    @classmethod
    def point(cls, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls.box(x, x)

    @classmethod
    def universe(cls, n):
        return cls(np.zeros((0, n)), np.zeros(0))

    @classmethod
    def empty_set(cls, n):
        return cls(np.zeros((0, n)), np.zeros(0), empty=True)

    @classmethod
    def from_vertices(cls, points, tol=1e-9):
        """Convex hull of a point cloud, including lower-dimensional hulls."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = pts.shape[1]
        c = pts.mean(axis=0)
        X = pts - c
        scale = max(1.0, float(np.abs(pts).max()))
        _, s, Vt = np.linalg.svd(X, full_matrices=True)
        r = int(np.sum(s > tol * scale * max(1, len(pts))))
        U, N = Vt[:r].T, Vt[r:].T
        rows, rhs = [], []
        # affine hull as equality pairs
        for k in range(N.shape[1]):
            a = N[:, k]
            rows += [a, -a]
            rhs += [a @ c, -(a @ c)]
        Y = X @ U
        if r == 1:
            rows += [U[:, 0], -U[:, 0]]
            rhs += [Y[:, 0].max() + U[:, 0] @ c, -Y[:, 0].min() - U[:, 0] @ c]
        elif r >= 2:
            hull = ConvexHull(Y)
            for eq in hull.equations:
                a, b = eq[:-1], eq[-1]
                row = U @ a
                rows.append(row)
                rhs.append(-b + row @ c)
        return cls(np.array(rows).reshape(-1, n), np.array(rhs)).minimal()

    # -- basic attributes -------------------------------------------------
    @property
    def H(self):
        return self._H

    @property
    def v(self):
        return self._v

    @property
    def dim(self):
        return self._H.shape[1]

    @property
    def n_facets(self):
        return self._H.shape[0]

    @property
    def is_empty(self):
        if self._empty_cache is None:
            if self.n_facets == 0:
                self._empty_cache = False
            else:
                res = solve_lp(np.zeros(self.dim), self._H, self._v + EMPTY_TOL)
                if res.status == INFEASIBLE:
                    self._empty_cache = True
                elif res.status in (OPTIMAL, UNBOUNDED):
                    self._empty_cache = False
                else:
                    raise SolverFailure("emptiness LP failed", res.status)
        return self._empty_cache

    def contains(self, x, tol=1e-9):
        if self.is_empty:
            return False
        x = np.asarray(x, dtype=float)
        if self.n_facets == 0:
            return True
        return bool(np.all(self._H @ x <= self._v + tol))

    def slack(self, x):
        """``v - H x``; negative entries are violated facets."""
        return self._v - self._H @ np.asarray(x, dtype=float)

    def support(self, direction):
        """Maximum of ``direction' x`` over the set, or ``inf`` when unbounded."""
        d = np.asarray(direction, dtype=float)
        res = solve_lp(-d, self._H, self._v)
        if res.status == OPTIMAL:
            return -res.fun, res.x
        if res.status == UNBOUNDED:
            return np.inf, None
        if res.status == INFEASIBLE:
            raise EmptyPolytope("support of an empty polytope")
        raise SolverFailure("support LP failed", res.status)

    def bounding_box(self):
        lo, hi = np.empty(self.dim), np.empty(self.dim)
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = 1.0
            hi[k] = self.support(e)[0]
            lo[k] = -self.support(-e)[0]
        return lo, hi

    @property
    def is_bounded(self):
        lo, hi = self.bounding_box()
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    @property
    def vertices(self):
        if self._vertices is None:
            self._vertices = _frozen(enumerate_vertices(self))
        return self._vertices

    def minimal(self, tol=REDUNDANCY_TOL):
        """Equivalent polytope with duplicate and redundant rows removed."""
        if self._flag_empty:
            return self
        H, v = remove_redundant(self._H, self._v, tol)
        if H is None:
            return Polytope.empty_set(self.dim)
        return Polytope(H, v, vertices=self._vertices)

    # -- serialization ----------------------------------------------------
    def to_dict(self, with_vertices=True):
        d = {"dim": self.dim, "H": self._H.tolist(), "v": self._v.tolist()}
        if self._flag_empty or self.is_empty:
            d["empty"] = True
        elif with_vertices and self.dim <= 3 and self.is_bounded:
            d["vertices"] = self.vertices.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        if "lower" in d and "upper" in d:
            return cls.box(d["lower"], d["upper"])
        H = np.asarray(d["H"], dtype=float)
        if H.ndim == 1:
            H = H.reshape(0, int(d.get("dim", 0))) if H.size == 0 else H.reshape(1, -1)
        return cls(H, d["v"], vertices=d.get("vertices"), empty=d.get("empty", False))

    def to_json(self):
        return json.dumps(self.to_dict())

    def __repr__(self):
        state = "empty, " if self._flag_empty else ""
        return f"Polytope({state}dim={self.dim}, facets={self.n_facets})"


def remove_redundant(H, v, tol=REDUNDANCY_TOL):
    """Drop duplicate and LP-redundant rows.  Returns ``(None, None)`` if empty."""
    H = np.asarray(H, dtype=float)
    v = np.asarray(v, dtype=float)
    if H.shape[0] == 0:
        return H, v
    # merge rows with (numerically) identical normals, keeping the tightest
    keep_rows, keep_v = [], []
    order = np.lexsort(np.round(H, 9).T[::-1])
    for i in order:
        for k, row in enumerate(keep_rows):
            if np.max(np.abs(row - H[i])) < 1e-9:
                keep_v[k] = min(keep_v[k], v[i])
                break
        else:
            keep_rows.append(H[i].copy())
            keep_v.append(v[i])
    H = np.array(keep_rows)
    v = np.array(keep_v)
    if solve_lp(np.zeros(H.shape[1]), H, v + EMPTY_TOL).status == INFEASIBLE:
        return None, None
    active = np.ones(H.shape[0], dtype=bool)
    for i in range(H.shape[0]):
        active[i] = False
        Hs = np.vstack([H[active], H[i]])
        vs = np.concatenate([v[active], [v[i] + 1.0]])
        res = solve_lp(-H[i], Hs, vs)
        if res.status == OPTIMAL and -res.fun <= v[i] + tol:
            continue
        if res.status not in (OPTIMAL, UNBOUNDED):
            raise SolverFailure("redundancy LP failed", res.status)
        active[i] = True
    return H[active], v[active]


def enumerate_vertices(P):
    n = P.dim
    if n > 3:
        raise UnsupportedDimension(f"vertex enumeration supports n <= 3, got {n}")
    if P.is_empty:
        return np.zeros((0, n))
    if not P.is_bounded:
        raise UnboundedPolytope("cannot enumerate vertices of an unbounded set")
    H, v = P.H, P.v
    pts = []
    for rows in itertools.combinations(range(H.shape[0]), n):
        Hr = H[list(rows)]
        if abs(np.linalg.det(Hr)) < 1e-10:
            continue
        x = np.linalg.solve(Hr, v[list(rows)])
        if np.all(H @ x <= v + 1e-8):
            if not any(np.max(np.abs(x - p)) < 1e-8 for p in pts):
                pts.append(x)
    if not pts:
        # bounded, nonempty, no vertex from facet pairs: only possible for n = 0
        raise EmptyPolytope("no vertices found")
    pts = np.array(pts)
    if n == 2 and len(pts) > 2:
        c = pts.mean(axis=0)
        ang = np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0])
        pts = pts[np.argsort(ang)]
    return pts


def intersect(P, Q):
    if P.dim != Q.dim:
        raise ValueError("dimension mismatch")
    if P.is_empty or Q.is_empty:
        return Polytope.empty_set(P.dim)
    return Polytope(np.vstack([P.H, Q.H]), np.concatenate([P.v, Q.v])).minimal()


def linear_preimage(P, M):
    """``{z : M z in P}`` for any matrix ``M`` with ``P.dim`` rows."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if P.is_empty:
        return Polytope.empty_set(M.shape[1])
    return Polytope(P.H @ M, P.v).minimal()


def affine_preimage(P, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (P.dim, P.dim) or np.linalg.cond(M) > 1e12:
        raise SingularMap("affine_preimage needs an invertible square map")
    return linear_preimage(P, M)


def contains_polytope(outer, inner, tol=1e-7):
    """True when ``inner`` is a subset of ``outer`` (facet slack ``tol``)."""
    if inner.is_empty:
        return True
    if outer.is_empty:
        return False
    for h, v in zip(outer.H, outer.v):
        val, _ = inner.support(h)
        if val > v + tol:
            return False
    return True


def _eliminate(H, v, j, tol=1e-12):
    """One Fourier-Motzkin step removing column ``j``."""
    col = H[:, j]
    pos = np.where(col > tol)[0]
    neg = np.where(col < -tol)[0]
    zero = np.where(np.abs(col) <= tol)[0]
    rows = [H[zero]]
    rhs = [v[zero]]
    if len(pos) and len(neg):
        a_p, a_n = col[pos], -col[neg]
        # a_n * row_p + a_p * row_n cancels column j
        comb = a_n[None, :, None] * H[pos][:, None, :] + a_p[:, None, None] * H[neg][None, :, :]
        rows.append(comb.reshape(-1, H.shape[1]))
        rhs.append((a_n[None, :] * v[pos][:, None] + a_p[:, None] * v[neg][None, :]).ravel())
    Hn = np.delete(np.vstack(rows), j, axis=1)
    vn = np.concatenate(rhs)
    return Hn, vn


def project(P, keep):
    """Orthogonal projection of ``P`` onto its first ``keep`` coordinates."""
    if keep > P.dim or keep < 1:
        raise ValueError(f"cannot project a {P.dim}-dimensional set onto {keep} coordinates")
    if P.is_empty:
        return Polytope.empty_set(keep)
    H, v = np.array(P.H), np.array(P.v)
    for j in range(P.dim - 1, keep - 1, -1):
        H, v = _eliminate(H, v, j)
        H, v, infeasible = _normalize(H, v)
        if infeasible:
            return Polytope.empty_set(keep)
        H, v = remove_redundant(H, v)
        if H is None:
            return Polytope.empty_set(keep)
    return Polytope(H.reshape(-1, keep), v)


def pre_set(P, d, U):
    """States that some ``u in U`` maps into ``P`` in one step of ``d``."""
    Ad, Bd = np.atleast_2d(d.Ad), np.atleast_2d(d.Bd)
    n, m = Bd.shape
    if P.is_empty or U.is_empty:
        return Polytope.empty_set(n)
    H = np.block([[P.H @ Ad, P.H @ Bd], [np.zeros((U.n_facets, n)), U.H]])
    v = np.concatenate([P.v, U.v])
    return project(Polytope(H, v), n)


def linear_image(P, M):
    """``{M z : z in P}`` via Fourier-Motzkin on the graph of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n, m = M.shape
    if P.is_empty:
        return Polytope.empty_set(n)
    I = np.eye(n)
    H = np.block([[I, -M], [-I, M], [np.zeros((P.n_facets, n)), P.H]])
    v = np.concatenate([np.zeros(2 * n), P.v])
    return project(Polytope(H, v), n)


def equilibrium_polytope(d, U, S0):
    """Controlled equilibria ``x = Ad x + Bd u`` with ``u in U`` and ``x in S0``.

    Returns ``None`` when ``Ad - I`` is singular (the equilibria then form an
    affine family that is not parametrized by ``u`` alone).
    """
    Ad, Bd = np.atleast_2d(d.Ad), np.atleast_2d(d.Bd)
    n = Ad.shape[0]
    if np.linalg.cond(Ad - np.eye(n)) > 1e12:
        return None
    gain = -np.linalg.solve(Ad - np.eye(n), Bd)
    return intersect(linear_image(U, gain), S0)


def cis_iterates(S0, d, U, max_iter=50):
    """Yield ``S_1, S_2, ...`` of ``S_{k+1} = pre_set(S_k) & S0``."""
    S = S0
    for _ in range(max_iter):
        S = intersect(pre_set(S, d, U), S0)
        yield S
        if S.is_empty:
            return


def max_cis_with_count(S0, d, U, max_iter=50, tol=1e-7, seed="equilibria"):
    if S0.is_empty:
        raise EmptyResult("initial set is empty", iterations=0)
    if isinstance(seed, str) and seed == "equilibria":
        seed = equilibrium_polytope(d, U, S0) if S0.is_bounded else None
        if seed is not None and seed.is_empty:
            # a compact convex CIS always holds an equilibrium
            raise EmptyResult("no controlled equilibrium inside the initial set", iterations=0)
    inner = seed
    outer = S0
    for k in range(1, max_iter + 1):
        nxt = intersect(pre_set(outer, d, U), S0)
        if nxt.is_empty:
            raise EmptyResult(f"recursion emptied at iteration {k}", iterations=k)
        if contains_polytope(nxt, outer, tol):
            return nxt, k
        outer = nxt
        if inner is not None:
            grown = intersect(pre_set(inner, d, U), S0)
            if contains_polytope(inner, grown, tol) or contains_polytope(grown, outer, tol):
                return grown, k
            inner = grown
    last = inner if inner is not None else outer
    raise NoConvergence(f"no fixed point after {max_iter} iterations", last=last, iterations=max_iter)


def max_cis(S0, d, U, max_iter=50, tol=1e-7, seed="equilibria"):
    """Maximal controlled invariant subset of ``S0`` for ``x+ = Ad x + Bd u``.

    The outer recursion ``S_{k+1} = pre_set(S_k) & S0`` shrinks towards the
    maximal CIS but may only converge asymptotically.  In lockstep, a
    controlled invariant ``seed`` inside ``S0`` (by default the controlled
    equilibria in ``S0``) is grown by ``K_{i+1} = pre_set(K_i) & S0``; every
    ``K_i`` is itself controlled invariant.  The routine stops when the outer
    sequence reaches a fixed point, when the inner one does, or when the outer
    iterate fits inside the inner one within ``tol``.  Whatever is returned is
    controlled invariant; when the inner sequence stalls first it may be a
    strict subset of the maximal one.

    Raises
    ------
    EmptyResult
        If an outer iterate is empty, or ``S0`` is bounded and holds no
        controlled equilibrium.
    NoConvergence
        After ``max_iter`` iterations; ``exc.last`` is the inner iterate when a
        seed exists (still invariant), otherwise the last outer iterate.
    """
    return max_cis_with_count(S0, d, U, max_iter, tol, seed)[0]


def chebyshev_center(P):
    """Center and radius of the largest ball inscribed in ``P``."""
    if P.is_empty:
        raise EmptyPolytope("Chebyshev center of an empty polytope")
    n = P.dim
    norms = np.linalg.norm(P.H, axis=1)
    G = np.hstack([P.H, norms[:, None]])
    G = np.vstack([G, np.r_[np.zeros(n), -1.0]])
    h = np.r_[P.v, 0.0]
    c = np.r_[np.zeros(n), -1.0]
    res = solve_lp(c, G, h)
    if res.status == UNBOUNDED:
        raise UnboundedPolytope("inscribed ball radius is unbounded")
    if res.status == INFEASIBLE:
        raise EmptyPolytope("Chebyshev LP infeasible")
    if res.status != OPTIMAL:
        raise SolverFailure("Chebyshev LP failed", res.status)
    return res.x[:n], float(res.x[n])


def contains(P, x, tol=1e-9):
    return P.contains(x, tol)


def vertices(P):
    return np.array(P.vertices)


def sample_points(P, k, rng, max_draws=1_000_000):
    """Uniform samples from a bounded polytope by rejection from its bounding box."""
    lo, hi = P.bounding_box()
    out = []
    drawn = 0
    while len(out) < k and drawn < max_draws:
        batch = rng.uniform(lo, hi, size=(max(4 * k, 64), P.dim))
        drawn += len(batch)
        inside = np.all(batch @ P.H.T <= P.v, axis=1)
        out.extend(batch[inside])
    if len(out) < k:
        raise EmptyPolytope("rejection sampling failed; set may be flat")
    return np.array(out[:k])
