"""Admissible sets of the free response as spectrahedra.

A state ``x`` is admissible for a polytope ``Y = {y : H y <= v}`` when the
uncontrolled flow ``exp(A t) x`` stays in ``Y`` for all ``t`` in ``[0, T]``.
With ``w = exp(-t / rho)`` each facet condition becomes nonnegativity of a
univariate polynomial ``P_i(w)`` on ``[exp(-T / rho), 1]`` whose coefficients
are affine in ``x``.  Nonnegativity on an interval is certified by the
Markov-Lukasz form ``sigma_1(w) + (w - a)(b - w) sigma_2(w)`` with both
``sigma`` sums of squares, i.e. by two PSD Gram matrices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateHull, InfeasibleProblem, SolverFailure
from .geometry import Polytope, chebyshev_center
from .solvers import INFEASIBLE, OPTIMAL, UNBOUNDED, solve_sdp

FEAS_TOL = 1e-7
MARGINAL_TOL = 1e-5


@dataclass(frozen=True)
class PolynomialLift:
    """Per-facet coefficient maps ``pi_i(x) = M[i] @ x + c[i]``.

    ``pi_i(x)[d]`` is the coefficient of ``w**d`` in ``P_i``.  ``degree`` is the
    true degree bound, ``even_degree`` the padded one used for certificates.
    """

    M: np.ndarray
    c: np.ndarray
    shift: int
    exponents: tuple
    a: float
    b: float = 1.0

    @property
    def degree(self):
        return self.c.shape[1] - 1

    @property
    def even_degree(self):
        return self.degree + (self.degree % 2)

    @property
    def n_facets(self):
        return self.c.shape[0]

    def coefficients(self, x):
        """Shape ``(n_facets, degree + 1)``."""
        return self.M @ np.asarray(x, dtype=float) + self.c

    def padded_coefficients(self, x):
        pi = self.coefficients(x)
        if self.even_degree > self.degree:
            pi = np.hstack([pi, np.zeros((pi.shape[0], 1))])
        return pi

    def evaluate(self, x, w):
        """``P_i(w)`` for every facet; ``w`` may be an array (facets first)."""
        pi = self.coefficients(x)
        w = np.asarray(w, dtype=float)
        powers = np.power.outer(w, np.arange(self.degree + 1))
        return np.tensordot(pi, powers, axes=([1], [-1]))


def build_lift(md, Y, T):
    """Coefficient maps of the facet polynomials of ``Y`` over one period ``T``."""
    etas = np.array(md.etas)
    shift = max(0, int(etas[-1]))
    exponents = tuple(int(shift - e) for e in etas)
    degree = shift - min(int(etas[0]), 0)
    n = md.n
    ell = len(Y.v)
    M = np.zeros((ell, degree + 1, n))
    c = np.zeros((ell, degree + 1))
    for r, d in enumerate(exponents):
        # beta_r^i = h_i phi_r enters with a minus sign
        M[:, d, :] -= Y.H @ md.modal_matrices[r]
    c[:, shift] = Y.v
    M.setflags(write=False)
    c.setflags(write=False)
    return PolynomialLift(M, c, shift, exponents, float(np.exp(-T / md.rho)), 1.0)


@dataclass(frozen=True)
class MarkovLukasz:
    """Adjoint maps sending Gram matrices to polynomial coefficients.

    ``L1[d]`` and ``L2[d]`` are the matrices whose inner product with ``Y1``
    (size ``m+1``) and ``Y2`` (size ``m``) gives coefficient ``d``.
    """

    L1: np.ndarray
    L2: np.ndarray

    def apply1(self, Y1):
        return np.einsum("dij,ij->d", self.L1, Y1)

    def apply2(self, Y2):
        if self.L2.shape[1] == 0:
            return np.zeros(self.L1.shape[0])
        return np.einsum("dij,ij->d", self.L2, Y2)

    def apply(self, Y1, Y2):
        return self.apply1(Y1) + self.apply2(Y2)


def ml_adjoints(D, a, b):
    if D % 2:
        raise ValueError("Markov-Lukasz adjoints need an even degree; pad first")
    m = D // 2
    i1 = np.add.outer(np.arange(m + 1), np.arange(m + 1))
    i2 = np.add.outer(np.arange(m), np.arange(m))
    L1 = np.zeros((D + 1, m + 1, m + 1))
    L2 = np.zeros((D + 1, m, m))
    for d in range(D + 1):
        L1[d] = i1 == d
        if m:
            L2[d] = (a + b) * (i2 == d - 1) - (i2 == d - 2) - a * b * (i2 == d)
    return MarkovLukasz(L1, L2)


def _sym_basis(k):
    """Symmetric unit matrices for the upper-triangular entries of a ``k x k`` matrix."""
    out = []
    for i in range(k):
        for j in range(i, k):
            E = np.zeros((k, k))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return np.array(out).reshape(-1, k, k)


def _sym_from_entries(y, k):
    Y = np.zeros((k, k))
    iu = np.triu_indices(k)
    Y[iu] = y
    Y.T[iu] = y
    return Y


@dataclass
class AdmissibilityResult:
    admissible: bool
    marginal: bool = False
    margin: float | None = None
    facet_margins: list = field(default_factory=list)
    certificates: list | None = None

    def to_dict(self):
        d = {
            "admissible": self.admissible,
            "marginal": self.marginal,
            "margin": self.margin,
            "facet_margins": list(self.facet_margins),
        }
        if self.certificates is not None:
            d["certificates"] = [
                {"Y1": Y1.tolist(), "Y2": Y2.tolist()} for Y1, Y2 in self.certificates
            ]
        return d

    def to_json(self):
        return json.dumps(self.to_dict())

    def __bool__(self):
        return self.admissible


class SpectrahedronSet:
    """Exact admissible subset of ``ambient`` over one impulse period."""

    def __init__(self, md, ambient, period, feas_tol=FEAS_TOL, marginal_tol=MARGINAL_TOL):
        self.md = md
        self.ambient = ambient
        self.period = float(period)
        self.lift = build_lift(md, ambient, period)
        self.adjoints = ml_adjoints(self.lift.even_degree, self.lift.a, self.lift.b)
        self.feas_tol = feas_tol
        self.marginal_tol = marginal_tol
        self._facet_problem = self._membership_template()

    @property
    def dim(self):
        return self.md.n

    def _membership_template(self):
        ml = self.adjoints
        k1, k2 = ml.L1.shape[1], ml.L2.shape[1]
        B1, B2 = _sym_basis(k1), _sym_basis(k2)
        p1, p2 = len(B1), len(B2)
        nz = 1 + p1 + p2
        # equality: sum_j y_j <L, B_j> = pi
        E = np.zeros((ml.L1.shape[0], nz))
        E[:, 1 : 1 + p1] = np.einsum("dij,pij->dp", ml.L1, B1)
        if p2:
            E[:, 1 + p1 :] = np.einsum("dij,pij->dp", ml.L2, B2)
        F1 = np.zeros((nz, k1, k1))
        F1[0] = -np.eye(k1)
        F1[1 : 1 + p1] = B1
        lmis = [(np.zeros((k1, k1)), F1)]
        if k2:
            F2 = np.zeros((nz, k2, k2))
            F2[0] = -np.eye(k2)
            F2[1 + p1 :] = B2
            lmis.append((np.zeros((k2, k2)), F2))
        c = np.zeros(nz)
        c[0] = -1.0
        G = np.zeros((1, nz))
        G[0, 0] = 1.0
        return dict(c=c, E=E, G=G, h=np.array([1.0]), lmis=lmis, k1=k1, k2=k2, p1=p1)

    def facet_certificate(self, pi):
        """Largest ``lam`` with ``pi = L1*(Y1) + L2*(Y2)``, ``Y1, Y2 >= lam I``.

        ``lam >= 0`` exactly when the facet polynomial is nonnegative on the
        interval.  The value is capped at 1 to keep the problem bounded.
        """
        t = self._facet_problem
        res = solve_sdp(t["c"], t["lmis"], E=t["E"], f=pi, G=t["G"], h=t["h"])
        if res.status != OPTIMAL:
            raise SolverFailure(f"facet certificate SDP returned {res.raw_status}", res.status)
        z = res.x
        Y1 = _sym_from_entries(z[1 : 1 + t["p1"]], t["k1"])
        Y2 = _sym_from_entries(z[1 + t["p1"] :], t["k2"])
        return float(z[0]), Y1, Y2

    def is_admissible(self, x, certificates=True):
        return is_admissible(self, x, certificates)

    def __contains__(self, x):
        return is_admissible(self, x, certificates=False).admissible


def is_admissible(S, x, certificates=True):
    """Exact membership test for the admissible set via per-facet SDPs.

    Returns an :class:`AdmissibilityResult`; ``margin`` is the smallest
    certified Gram eigenvalue over the facets.  Raises :class:`SolverFailure`
    if any facet problem ends without a verdict.
    """
    x = np.asarray(x, dtype=float)
    if not S.ambient.contains(x, S.feas_tol):
        return AdmissibilityResult(False, margin=None)
    pis = S.lift.padded_coefficients(x)
    lams, certs = [], []
    for pi in pis:
        lam, Y1, Y2 = S.facet_certificate(pi)
        lams.append(lam)
        certs.append((Y1, Y2))
    margin = min(lams)
    ok = margin >= -S.feas_tol
    return AdmissibilityResult(
        admissible=bool(ok),
        marginal=bool(ok and margin < S.marginal_tol),
        margin=margin,
        facet_margins=lams,
        certificates=certs if (certificates and ok) else None,
    )


def grid_oracle(md, Y, x, T, samples=1001, tol=1e-9):
    """Check ``exp(A t) x in Y`` on a uniform grid of ``[0, T]``, endpoints included."""
    if samples < 2:
        raise ValueError("need at least two samples")
    ts = np.linspace(0.0, T, samples)
    traj = md.free_response(np.asarray(x, dtype=float), ts)
    if Y.n_facets == 0:
        return True
    return bool(np.all(traj @ Y.H.T <= Y.v + tol))


def max_facet_excursion(md, Y, x, T, samples=2001):
    """``max_{t, i} h_i exp(A t) x - v_i`` over ``[0, T]`` with local refinement.

    Positive values mean the free response leaves ``Y``.
    """
    x = np.asarray(x, dtype=float)
    ts = np.linspace(0.0, T, samples)
    vals = md.free_response(x, ts) @ Y.H.T - Y.v
    best = float(vals.max())
    dt = ts[1] - ts[0]
    for i in range(Y.n_facets):
        k = int(np.argmax(vals[:, i]))
        lo, hi = max(0.0, ts[k] - dt), min(T, ts[k] + dt)
        f = lambda t: -(Y.H[i] @ md.free_response(x, t) - Y.v[i])  # noqa: E731
        r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(r.fun))
    return best


def _support_problem(S):
    lift, ml = S.lift, S.adjoints
    n = S.dim
    k1, k2 = ml.L1.shape[1], ml.L2.shape[1]
    B1, B2 = _sym_basis(k1), _sym_basis(k2)
    p1, p2 = len(B1), len(B2)
    per = p1 + p2
    ell = lift.n_facets
    nz = n + ell * per
    Dp = lift.even_degree + 1
    E = np.zeros((ell * Dp, nz))
    f = np.zeros(ell * Dp)
    A1 = np.einsum("dij,pij->dp", ml.L1, B1)
    A2 = np.einsum("dij,pij->dp", ml.L2, B2) if p2 else np.zeros((Dp, 0))
    M = np.zeros((ell, Dp, n))
    M[:, : lift.degree + 1] = lift.M
    c = np.zeros((ell, Dp))
    c[:, : lift.degree + 1] = lift.c
    lmis = []
    for i in range(ell):
        rows = slice(i * Dp, (i + 1) * Dp)
        off = n + i * per
        E[rows, :n] = -M[i]
        E[rows, off : off + p1] = A1
        E[rows, off + p1 : off + per] = A2
        f[rows] = c[i]
        F1 = np.zeros((nz, k1, k1))
        F1[off : off + p1] = B1
        lmis.append((np.zeros((k1, k1)), F1))
        if k2:
            F2 = np.zeros((nz, k2, k2))
            F2[off + p1 : off + per] = B2
            lmis.append((np.zeros((k2, k2)), F2))
    G = np.zeros((S.ambient.n_facets, nz))
    G[:, :n] = S.ambient.H
    return dict(E=E, f=f, lmis=lmis, G=G, h=np.array(S.ambient.v), nz=nz)


def support_point(S, direction):
    """Maximizer of ``direction' x`` over the admissible set.

    A zero direction returns the Chebyshev center of the ambient polytope when
    it is admissible, and otherwise any feasible point.
    """
    d = np.asarray(direction, dtype=float)
    n = S.dim
    if not np.any(d):
        center, _ = chebyshev_center(S.ambient)
        if is_admissible(S, center, certificates=False).admissible:
            return center
    prob = getattr(S, "_support_cache", None)
    if prob is None:
        prob = _support_problem(S)
        S._support_cache = prob
    c = np.zeros(prob["nz"])
    c[:n] = -d
    res = solve_sdp(c, prob["lmis"], E=prob["E"], f=prob["f"], G=prob["G"], h=prob["h"])
    if res.status == INFEASIBLE:
        raise InfeasibleProblem("admissible set is empty")
    if res.status == UNBOUNDED:
        raise SolverFailure("support problem unbounded; ambient set must be compact", res.status)
    if res.status != OPTIMAL:
        raise SolverFailure(f"support SDP returned {res.raw_status}", res.status)
    return res.x[:n]


def direction_set(n, K, seed=0):
    """Evenly spread unit directions: angular grid (n = 2), Fibonacci sphere (n = 3)."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        ang = 2 * np.pi * np.arange(K) / K
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if n == 3:
        k = np.arange(K) + 0.5
        z = 1 - 2 * k / K
        r = np.sqrt(1 - z**2)
        phi = np.pi * (1 + 5**0.5) * k
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((K, n))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


def inner_polytope(S, K=16, directions=None, shrink=1e-6, seed=0):
    """Polytopic inner approximation: hull of support points in ``K`` directions.

    Support points lie on the boundary; they are pulled towards their centroid
    by the relative factor ``shrink`` so that every vertex is strictly
    admissible, and each vertex is then re-certified.
    """
    n = S.dim
    if directions is None:
        if K < n + 1:
            raise ValueError(f"need at least {n + 1} directions")
        directions = direction_set(n, K, seed)
    pts = []
    for d in directions:
        p = support_point(S, d)
        if not any(np.max(np.abs(p - q)) < 1e-6 for q in pts):
            pts.append(p)
    pts = np.array(pts)
    center = pts.mean(axis=0)
    spread = float(np.max(np.linalg.norm(pts - center, axis=1)))
    if spread <= 1e-9 * max(1.0, float(np.abs(center).max())):
        return Polytope.point(center)
    for factor in (1.0, 10.0, 100.0, 1000.0):
        shrunk = center + (1.0 - shrink * factor) * (pts - center)
        P = Polytope.from_vertices(shrunk)
        if P.n_facets < n + 1 or not P.is_bounded:
            raise DegenerateHull("support points span a lower-dimensional set")
        if all(is_admissible(S, vtx, certificates=False).admissible for vtx in P.vertices):
            return P
    raise SolverFailure("inner polytope vertices failed re-certification")
