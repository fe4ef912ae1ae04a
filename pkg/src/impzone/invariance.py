"""Equilibria, impulsive equilibrium slices and target-zone validity."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .admissible import SpectrahedronSet, inner_polytope, is_admissible
from .errors import EmptyResult, InfeasibleProblem, NoConvergence, SingularEquilibriumMap
from .geometry import Polytope, intersect, linear_image, linear_preimage, max_cis_with_count
from .lti import discretize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EquilibriumSet:
    """Equilibria ``x_s = gain @ u_s`` of the sampled system, ``u_s`` in ``input_set``."""

    gain: np.ndarray
    input_set: Polytope
    restriction: Polytope | None = None

    def state(self, u):
        return self.gain @ np.atleast_1d(np.asarray(u, dtype=float))

    def polytope(self):
        P = linear_image(self.input_set, self.gain)
        if self.restriction is not None:
            P = intersect(P, self.restriction)
        return P

    def segment(self):
        """End points of the equilibrium segment (single-input systems)."""
        if self.gain.shape[1] != 1:
            raise ValueError("segment() is defined for single-input systems")
        lo, hi = self.input_set.bounding_box()
        return self.state(lo), self.state(hi)


def equilibrium_line(d, U):
    """``x_s = -(Ad - I)^-1 Bd u_s`` for all admissible inputs."""
    Ad, Bd = np.atleast_2d(d.Ad), np.atleast_2d(d.Bd)
    n = Ad.shape[0]
    M = Ad - np.eye(n)
    if np.linalg.cond(M) > 1e12:
        raise SingularEquilibriumMap("Ad - I is singular: A has a zero eigenvalue")
    return EquilibriumSet(-np.linalg.solve(M, Bd), U)


def _bisect(S, gain, good, bad, tol):
    """Shrink ``[good, bad]`` (scalars) keeping ``good`` admissible."""
    while abs(bad - good) > tol:
        mid = 0.5 * (good + bad)
        if is_admissible(S, gain @ [mid], certificates=False).admissible:
            good = mid
        else:
            bad = mid
    return good


def ices(eq, S, tol=1e-6, grid=41, inner=None):
    """Inputs ``u_s`` whose equilibrium ``gain @ u_s`` is admissible.

    Single-input systems get an exact interval by bisection on the
    spectrahedron, with both end points certified admissible.  Multi-input
    systems use the polytopic inner approximation ``inner`` of ``S``.
    Returns a polytope in input space (possibly empty).
    """
    m = eq.gain.shape[1]
    if m > 1:
        if inner is None:
            inner = inner_polytope(S)
        return intersect(eq.input_set, linear_preimage(inner, eq.gain))
    cand = intersect(eq.input_set, linear_preimage(S.ambient, eq.gain))
    if cand.is_empty:
        return Polytope.empty_set(1)
    (lo,), (hi,) = cand.bounding_box()
    us = np.linspace(lo, hi, grid) if hi > lo else np.array([lo])
    ok = [is_admissible(S, eq.gain @ [u], certificates=False).admissible for u in us]
    if not any(ok):
        return Polytope.empty_set(1)
    first = ok.index(True)
    last = len(ok) - 1 - ok[::-1].index(True)
    u_lo = us[first] if first == 0 else _bisect(S, eq.gain, us[first], us[first - 1], tol)
    u_hi = us[last] if last == len(us) - 1 else _bisect(S, eq.gain, us[last], us[last + 1], tol)
    return Polytope.box([u_lo], [u_hi])


@dataclass
class TargetValidityReport:
    target: Polytope
    admissible_inner: Polytope | None
    icis: Polytope | None
    ices: Polytope | None
    ices_nonempty: bool
    valid: bool | None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        def dump(P):
            return None if P is None else P.to_dict()

        return {
            "valid": self.valid,
            "ices_nonempty": self.ices_nonempty,
            "target": dump(self.target),
            "admissible_inner": dump(self.admissible_inner),
            "icis": dump(self.icis),
            "ices_inputs": dump(self.ices),
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def validate_target(target, sys, K=16, max_iter=50, tol=1e-7, seed=0):
    """Decide whether ``target`` holds an impulsive controlled invariant set.

    Pipeline: restrict the target to the state set, build its admissible set,
    take an inner polytope with ``K`` support directions, and run the maximal
    CIS recursion from it.  ``valid`` is ``True`` when that set is nonempty,
    ``False`` when the recursion (or an earlier stage) comes back empty, and
    ``None`` when the recursion does not settle within ``max_iter``.  Because
    the inner approximation is used, ``True`` is sound and ``False`` may be
    conservative.
    """
    diag = {"directions": K, "max_iter": max_iter, "tol": tol, "seed": seed}
    T = intersect(target, sys.state_set)
    if T.is_empty:
        diag["reason"] = "target does not meet the state set"
        return TargetValidityReport(T, None, None, None, False, False, diag)
    md = sys.modal
    d = discretize(sys)
    S = SpectrahedronSet(md, T, sys.period)
    try:
        eq = equilibrium_line(d, sys.input_set)
    except SingularEquilibriumMap:
        eq = None
        diag["equilibria"] = "singular equilibrium map"
    ices_set = ices(eq, S) if eq is not None else None
    ices_nonempty = bool(ices_set is not None and not ices_set.is_empty)
    try:
        inner = inner_polytope(S, K, seed=seed)
    except InfeasibleProblem:
        diag["reason"] = "admissible set of the target is empty"
        return TargetValidityReport(T, None, None, ices_set, ices_nonempty, False, diag)
    try:
        icis, iters = max_cis_with_count(inner, d, sys.input_set, max_iter, tol)
        diag["iterations"] = iters
        valid = True
    except EmptyResult as exc:
        icis = Polytope.empty_set(sys.n)
        diag["iterations"] = exc.iterations
        diag["reason"] = str(exc)
        valid = False
    except NoConvergence as exc:
        icis = exc.last
        diag["iterations"] = exc.iterations
        diag["reason"] = str(exc)
        valid = None
    log.info("target validity: %s (%s iterations)", valid, diag.get("iterations"))
    return TargetValidityReport(T, inner, icis, ices_set, ices_nonempty, valid, diag)
