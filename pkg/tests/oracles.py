"""Independent reference computations used only by the tests."""
import itertools
from fractions import Fraction

import numpy as np
import sympy as sp
from scipy.spatial import ConvexHull


def expm_taylor(A, terms=30):
    """Matrix exponential by scaling and squaring with a truncated Taylor series."""
    A = np.asarray(A, dtype=float)
    nrm = np.linalg.norm(A, 1)
    s = max(0, int(np.ceil(np.log2(nrm))) + 1) if nrm > 0 else 0
    X = A / 2.0**s
    E = np.eye(len(A))
    term = np.eye(len(A))
    for k in range(1, terms):
        term = term @ X / k
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def rationalize_brute(x, q_max=1000, tol=1e-6):
    """Smallest denominator q <= q_max with |p/q - x| < tol, by exhaustive search."""
    for q in range(1, q_max + 1):
        p = round(x * q)
        if abs(p / q - x) < tol:
            return Fraction(p, q)
    return None


def ml_poly_coefficients(Y1, Y2, a, b):
    """Coefficients (ascending) of u1'Y1u1 + (w-a)(b-w) u2'Y2u2 by symbolic expansion."""
    w = sp.symbols("w")
    k1, k2 = len(Y1), len(Y2)
    u1 = sp.Matrix([w**i for i in range(k1)])
    expr = (u1.T * sp.Matrix(Y1) * u1)[0]
    if k2:
        u2 = sp.Matrix([w**i for i in range(k2)])
        expr += (w - sp.Float(a, 30)) * (sp.Float(b, 30) - w) * (u2.T * sp.Matrix(Y2) * u2)[0]
    poly = sp.Poly(sp.expand(expr), w)
    D = 2 * (k1 - 1)
    out = np.zeros(D + 1)
    for (deg,), coef in poly.terms():
        out[deg] = float(coef)
    return out


def polytope_vertices_brute(H, v, tol=1e-9):
    """All vertices of {x : Hx <= v} by solving every n-subset of facets."""
    H, v = np.asarray(H, float), np.asarray(v, float)
    n = H.shape[1]
    pts = []
    for idx in itertools.combinations(range(len(H)), n):
        Hs = H[list(idx)]
        if abs(np.linalg.det(Hs)) < 1e-12:
            continue
        x = np.linalg.solve(Hs, v[list(idx)])
        if np.all(H @ x <= v + tol) and not any(np.allclose(x, p, atol=1e-9) for p in pts):
            pts.append(x)
    return np.array(pts)


def project_vrep(H, v, keep):
    """Projection of a bounded polytope onto its first ``keep`` coordinates via vertices."""
    V = polytope_vertices_brute(H, v)[:, :keep]
    if keep == 1:
        return V.min(axis=0), V.max(axis=0)
    return V[ConvexHull(V).vertices]


def hausdorff(P, Q):
    """Hausdorff distance between two finite point sets (vertex lists)."""
    P, Q = np.asarray(P), np.asarray(Q)
    d = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=-1)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def polygon_area(V):
    return ConvexHull(np.asarray(V)).volume
