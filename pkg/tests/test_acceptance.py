"""Acceptance criteria 1-8 on the two-state example.

Each test prints one ``[PASS]`` / ``[FAIL]`` line per criterion (or
sub-criterion) to the terminal, then asserts.  Run with
``pytest tests/test_acceptance.py -v``.
"""
import time

import numpy as np
import pytest
from oracles import expm_taylor

from impzone.admissible import build_lift, grid_oracle, is_admissible, max_facet_excursion
from impzone.errors import InfeasibleProblem, RepeatedEigenvalue
from impzone.geometry import Polytope, sample_points
from impzone.invariance import equilibrium_line, ices, validate_target
from impzone.lti import ImpulsiveSystem, modal_decompose, rationalize_spectrum
from impzone.pipeline import make_controller
from impzone.sim import check_violations, run_closed_loop
from impzone.solvers import OPTIMAL, solve_lp

from conftest import A_EX, B_EX, T_EX, U_EX, X_EX

W_EX = np.exp(-0.2)


class Verdict:
    """Print PASS/FAIL lines straight to the terminal and collect the outcomes."""

    def __init__(self, capsys):
        self.capsys = capsys
        self.results = []

    def __call__(self, label, ok, detail=""):
        with self.capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else ""), end="")
        self.results.append((label, bool(ok)))
        return ok

    def finish(self):
        with self.capsys.disabled():
            print()
        failed = [label for label, ok in self.results if not ok]
        assert not failed, f"failed: {failed}"


@pytest.fixture
def verdict(capsys):
    return Verdict(capsys)


def inputs_keeping(S, Ad, Bd, x, U):
    """LP: some u in U with Ad x + Bd u in S."""
    G = np.vstack([S.H @ Bd, U.H])
    h = np.concatenate([S.v - S.H @ Ad @ x, U.v])
    return solve_lp(np.zeros(Bd.shape[1]), G, h)


def test_c1_spectrum_and_lift_constants(verdict):
    start = time.perf_counter()
    for _ in range(100):
        etas, rho = rationalize_spectrum(np.linalg.eigvals(A_EX).real)
    per_call = (time.perf_counter() - start) / 100
    md = modal_decompose(A_EX)
    lift = build_lift(md, T_EX, 1.0)
    ok = (rho == 5 and list(etas) == [-5, 1] and lift.shift == 1 and lift.degree == 6
          and abs(lift.a - 0.8187308) < 1e-7 and abs(lift.a - W_EX) < 1e-9)
    verdict("1 spectrum/lift constants", ok,
            f"rho={rho} eta={list(etas)} shift={lift.shift} D={lift.degree} W={lift.a:.10f}")
    verdict("1 rationalization runtime < 1 ms", per_call < 1e-3, f"{per_call * 1e3:.3f} ms")
    verdict.finish()


@pytest.fixture(scope="module")
def oracle_run(md, state_spec):
    rng = np.random.default_rng(2024)
    pts = rng.uniform([0.5, 0.0], [4.5, 4.0], (200, 2))
    start = time.perf_counter()
    rows = []
    for x in pts:
        res = is_admissible(state_spec, x, certificates=True)
        grid = grid_oracle(md, X_EX, x, 1.0, 2001)
        rows.append((x, res, grid, max_facet_excursion(md, X_EX, x, 1.0, 2001)))
    return rows, time.perf_counter() - start


def test_c2_oracle_equivalence(verdict, oracle_run):
    rows, elapsed = oracle_run
    decisive = [r for r in rows if abs(r[3]) > 1e-4]
    hard = [r[0].tolist() for r in decisive if bool(r[1].admissible) != r[2]]
    accepted = sum(bool(r[1].admissible) for r in rows)
    verdict("2 SDP vs grid agreement", not hard and len(decisive) > 150,
            f"{len(decisive)} decisive points, {accepted} admissible, {len(hard)} disagreements")
    verdict("2 runtime < 30 s", elapsed < 30.0, f"{elapsed:.1f} s")
    verdict.finish()


def test_c3_certificate_soundness(verdict, oracle_run, state_spec):
    rows, _ = oracle_run
    S = state_spec
    ws = np.linspace(0.81873, 1.0, 1000)
    worst_coef, worst_poly, n = 0.0, np.inf, 0
    for x, res, _, _ in rows:
        if not res.admissible:
            continue
        n += 1
        for pi, (Y1, Y2) in zip(S.lift.padded_coefficients(x), res.certificates):
            worst_coef = max(worst_coef, np.abs(S.adjoints.apply(Y1, Y2) - pi).max())
        worst_poly = min(worst_poly, S.lift.evaluate(x, ws).min())
    verdict("3 certificate reconstruction <= 1e-6", n > 0 and worst_coef <= 1e-6,
            f"{n} accepted points, max coefficient error {worst_coef:.2e}")
    verdict("3 facet polynomials >= -1e-6 on [0.81873, 1]", worst_poly >= -1e-6, f"min {worst_poly:.3e}")
    verdict.finish()


def test_c4_equilibrium_geometry(verdict, disc, target_spec):
    eq = equilibrium_line(disc, U_EX)
    ref = np.linalg.solve(expm_taylor(A_EX) - np.eye(2), -B_EX)
    G = eq.gain[:, 0]
    verdict("4 equilibrium gain", np.allclose(G, ref, atol=1e-9) and np.allclose(G, [16.9432, 9.0330], atol=1e-3),
            f"G={np.round(G, 5).tolist()}")
    lo, hi = eq.segment()
    verdict("4 equilibrium segment endpoints", np.allclose(hi, [3.3886, 1.8066], atol=1e-3) and np.allclose(lo, -hi),
            f"+-{np.round(hi, 5).tolist()}")
    I = ices(eq, target_spec)
    ok = not I.is_empty
    u_lo = I.bounding_box()[0][0] if ok else float("nan")
    verdict("4 ICES input slice in target", ok and u_lo >= 1.5 / 9.0330 - 1e-3, f"lower endpoint {u_lo:.5f}")
    verdict.finish()


def test_c5_target_validity(verdict, system, disc):
    start = time.perf_counter()
    r = validate_target(T_EX, system, K=16, max_iter=50)
    elapsed = time.perf_counter() - start
    Tinv = r.icis
    nonempty = Tinv is not None and not Tinv.is_empty
    verdict("5 target valid with nonempty invariant set", r.valid is True and nonempty,
            f"iterations {r.diagnostics.get('iterations')}")
    meets = False
    if nonempty:
        gain = equilibrium_line(disc, U_EX).gain
        G = np.vstack([Tinv.H @ gain, U_EX.H])
        h = np.concatenate([Tinv.v, U_EX.v])
        meets = solve_lp(np.zeros(1), G, h).status == OPTIMAL
    verdict("5 invariant set meets equilibrium segment", meets)
    verdict("5 runtime < 2 min", elapsed < 120, f"{elapsed:.1f} s")
    verdict.finish()


@pytest.mark.parametrize("variant", ["tracking", "setbased"])
@pytest.mark.parametrize("x0", [(3.0, 0.15), (4.45, 1.75)], ids=["x0=(3.0,0.15)", "x0=(4.45,1.75)"])
def test_c6_closed_loop(verdict, variant, x0, config, sets, system, md):
    tag = f"6 {variant} from {x0}"
    ctrl = make_controller(config, sets, variant)
    traj, err = None, None
    try:
        traj = run_closed_loop(system, ctrl, x0, 30, M=101)
    except InfeasibleProblem as exc:
        traj, err = exc.trajectory, str(exc)
    done = traj.steps
    verdict(f"{tag} (a) every QP feasible", err is None and done == 30,
            f"{done} of 30 steps solved" + (f"; {err}" if err else ""))
    if done == 0:
        for part in ("(b) state box never violated", "(c) in invariant set by step 10 through 30"):
            verdict(f"{tag} {part}", False, "no steps to evaluate")
        if variant == "tracking":
            verdict(f"{tag} (d) cost non-increasing", False, "no steps to evaluate")
        verdict.finish()
        return
    rep = check_violations(traj, X_EX, T_EX, md=md)
    verdict(f"{tag} (b) state box never violated", rep.max_state_violation <= 1e-6,
            f"max violation {rep.max_state_violation:.2e}")
    Tinv = sets.target_inv
    inside = [Tinv.contains(p, 1e-9) for p in traj.post]
    dist = max(0.0, float(np.max(Tinv.H @ traj.post[min(10, done)] - Tinv.v)))
    ok = done == 30 and all(inside[10:31])
    first = inside.index(True) if any(inside) else None
    verdict(f"{tag} (c) in invariant set by step 10 through 30", ok,
            f"first inside at step {first}; facet excess at step 10 {dist:.3e}")
    if variant == "tracking":
        inc = float(np.max(np.diff(ctrl.costs))) if len(ctrl.costs) > 1 else 0.0
        verdict(f"{tag} (d) cost non-increasing", inc <= 1e-6, f"max increase {inc:.2e}")
    verdict.finish()


def test_c7_invariance_property(verdict, sets, md, disc):
    S = sets.target_inv
    pts = sample_points(S, 100, np.random.default_rng(7))
    lp_ok = sum(inputs_keeping(S, disc.Ad, disc.Bd, x, U_EX).status == OPTIMAL for x in pts)
    flow_ok = sum(grid_oracle(md, T_EX, x, 1.0, 2001) for x in pts)
    verdict("7 one-step input keeps state in invariant set", lp_ok == len(pts) == 100, f"{lp_ok}/100")
    verdict("7 free response stays in target over [0, T]", flow_ok == 100, f"{flow_ok}/100")
    verdict.finish()


def test_c8_degenerate_cases(verdict, system, disc):
    r = validate_target(Polytope.box([10.0, 1.5], [11.0, 3.5]), system)
    verdict("8 shifted target rejected", r.valid is False, r.diagnostics.get("reason", ""))
    try:
        modal_decompose(np.array([[0.2, 1.0], [0.0, 0.2]]))
        rejected = False
    except RepeatedEigenvalue:
        rejected = True
    verdict("8 repeated eigenvalue rejected", rejected)
    us = 0.19
    xs = equilibrium_line(disc, U_EX).state(us)
    tr = run_closed_loop(system, lambda x: np.array([us]), xs, 20)
    drift = float(np.abs(tr.post - xs).max())
    verdict("8 hold at equilibrium is T-periodic", drift <= 1e-9, f"max drift {drift:.2e}")
    verdict.finish()


def test_c8_repeated_eigenvalue_system():
    with pytest.raises(RepeatedEigenvalue):
        ImpulsiveSystem(np.eye(2), B_EX, 1.0, X_EX, U_EX).modal

