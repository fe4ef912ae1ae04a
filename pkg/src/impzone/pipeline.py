"""Set computations and controller assembly shared by the CLI and the tests."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .admissible import SpectrahedronSet, inner_polytope
from .errors import EmptyResult, InfeasibleProblem, SingularEquilibriumMap
from .geometry import Polytope, max_cis_with_count
from .invariance import equilibrium_line, ices, validate_target
from .lti import discretize
from .mpc import MpcConfig, ZoneMpc

log = logging.getLogger(__name__)


@dataclass
class SetBundle:
    """All sets of one problem.

    ``state_inner`` is the inner polytope of the admissible set of X,
    ``state_inv`` the invariant set computed inside it; ``report`` holds the
    target validity verdict with the target-side sets.
    """

    system: object
    discrete: object
    state_admissible: SpectrahedronSet
    state_inner: Polytope
    state_inv: Polytope | None
    equilibria: object | None
    ces_segment: tuple | None
    ices_state: Polytope | None
    report: object

    @property
    def target_inner(self):
        return self.report.admissible_inner

    @property
    def target_inv(self):
        return self.report.icis

    def to_dict(self):
        def dump(P):
            return None if P is None else P.to_dict()

        seg = None if self.ces_segment is None else [np.asarray(p).tolist() for p in self.ces_segment]
        return {
            "state_inner": dump(self.state_inner),
            "state_inv": dump(self.state_inv),
            "ces_segment": seg,
            "ices_inputs": dump(self.report.ices),
            "ices_state": dump(self.ices_state),
            "target_inner": dump(self.target_inner),
            "target_inv": dump(self.target_inv),
            "validity": self.report.to_dict(),
        }


def compute_sets(cfg):
    """Run the full set pipeline for a :class:`ProblemConfig`."""
    sys = cfg.system()
    d = discretize(sys)
    SX = SpectrahedronSet(sys.modal, sys.state_set, sys.period, cfg.feas_tol, cfg.marginal_tol)
    X_inner = inner_polytope(SX, cfg.K, seed=cfg.seed)
    try:
        X_inv, _ = max_cis_with_count(X_inner, d, sys.input_set, cfg.max_iter, cfg.cis_tol)
    except EmptyResult:
        X_inv = Polytope.empty_set(sys.n)
    report = validate_target(cfg.target, sys, cfg.K, cfg.max_iter, cfg.cis_tol, cfg.seed)
    try:
        eq = equilibrium_line(d, sys.input_set)
    except SingularEquilibriumMap:
        eq = None
    seg, ices_state = None, None
    if eq is not None:
        if sys.m == 1:
            seg = eq.segment()
        U_s = report.ices
        if U_s is not None and not U_s.is_empty and sys.m == 1:
            (lo,), (hi,) = U_s.bounding_box()
            ices_state = Polytope.from_vertices(np.array([eq.state(lo), eq.state(hi)]))
    return SetBundle(sys, d, SX, X_inner, X_inv, eq, seg, ices_state, report)


def controller_config(cfg, sets, variant="tracking"):
    """MPC configuration from a problem config and its computed sets."""
    if sets.report.valid is not True:
        raise InfeasibleProblem("target zone is not valid; no invariant set to steer to")
    d = sets.discrete
    return MpcConfig(
        d.Ad, d.Bd, cfg.horizon, cfg.Q, cfg.R, cfg.Q_O,
        sets.state_inner, cfg.input_set, sets.target_inner, sets.target_inv, variant,
    )


def make_controller(cfg, sets, variant="tracking"):
    return ZoneMpc(controller_config(cfg, sets, variant))
