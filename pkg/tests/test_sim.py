import csv
import io

import numpy as np
import pytest
from oracles import expm_taylor
from scipy.integrate import solve_ivp

from impzone.errors import InfeasibleProblem
from impzone.geometry import Polytope
from impzone.pipeline import make_controller
from impzone.sim import Trajectory, check_violations, run_closed_loop
from impzone.solvers import OPTIMAL, solve_lp

from conftest import A_EX, B_EX, T_EX, U_EX, X_EX


def hold(u):
    return lambda x: np.array([u])


@pytest.fixture(scope="module")
def traj(system):
    rng = np.random.default_rng(0)
    us = iter(rng.uniform(-0.2, 0.2, 10))
    return run_closed_loop(system, lambda x: np.array([next(us)]), [3.0, 1.6], 10)


class TestIntegration:
    def test_hold_at_equilibrium_is_periodic(self, system, sets):
        us = 0.19
        xs = sets.equilibria.state(us)
        tr = run_closed_loop(system, hold(us), xs, 20)
        assert np.abs(tr.post - xs).max() <= 1e-9
        # every segment is the same arc
        assert np.abs(tr.dense_x - tr.dense_x[0]).max() <= 1e-9

    def test_dense_matches_ode_solver(self, traj):
        for k in range(traj.steps):
            t0 = traj.dense_t[k, 0]
            sol = solve_ivp(lambda t, x: A_EX @ x, (t0, t0 + 1.0), traj.post[k], t_eval=traj.dense_t[k],
                            method="DOP853", rtol=1e-12, atol=1e-12)
            assert np.abs(sol.y.T - traj.dense_x[k]).max() <= 1e-7

    def test_jump_ordering(self, traj):
        Ad = expm_taylor(A_EX)
        for k in range(traj.steps):
            assert np.allclose(traj.pre[k], Ad @ traj.post[k], atol=1e-12)
            assert np.allclose(traj.post[k + 1], traj.pre[k] + B_EX * traj.inputs[k][0], atol=1e-12)
            assert np.allclose(traj.dense_x[k, -1], traj.pre[k])
            assert np.allclose(traj.dense_x[k, 0], traj.post[k])

    def test_time_grid(self, traj):
        assert traj.dense_t.shape == (10, 101)
        assert np.allclose(traj.dense_t[3, [0, -1]], [3.0, 4.0])

    def test_argument_checks(self, system):
        with pytest.raises(ValueError):
            run_closed_loop(system, hold(0.0), [3, 1], 0)
        with pytest.raises(ValueError):
            run_closed_loop(system, hold(0.0), [3, 1], 2, M=1)


class TestCsv:
    def test_rows_and_columns(self, traj):
        rows = list(csv.reader(io.StringIO(traj.to_csv())))
        assert rows[0] == ["t", "segment", "kind", "x1", "x2", "u1"]
        body = rows[1:]
        assert len(body) == 10 * 101 + 10 + 1
        kinds = [r[2] for r in body]
        assert kinds.count("post") == 11 and kinds.count("pre") == 10
        for r in body:
            assert (r[5] != "") == (r[2] == "post" and int(r[1]) < 10)

    def test_values(self, traj):
        rows = list(csv.DictReader(io.StringIO(traj.to_csv())))
        posts = [r for r in rows if r["kind"] == "post"]
        assert float(posts[4]["t"]) == 4.0
        assert np.allclose([float(posts[4]["x1"]), float(posts[4]["x2"])], traj.post[4], atol=1e-10)
        assert float(posts[4]["u1"]) == pytest.approx(traj.inputs[4][0], abs=1e-11)

    def test_json_round_trip(self, traj):
        d = traj.to_dict()
        back = Trajectory(d["period"], *(np.array(d[k]) for k in ("post", "pre", "inputs", "dense_t", "dense_x")))
        assert np.array_equal(back.post, traj.post) and back.to_csv() == traj.to_csv()


class TestViolations:
    def test_clean_run(self, traj, md):
        rep = check_violations(traj, Polytope.box([-1e3, -1e3], [1e3, 1e3]), T_EX, md=md)
        assert rep.n_state_violations == 0 and rep.first_state_violation is None
        assert rep.max_state_violation == 0.0

    def test_injected_fault(self, system, md):
        tr = run_closed_loop(system, hold(0.0), [3.0, 1.0], 3)
        tr.dense_x[1, 40, 0] = 5.0
        rep = check_violations(tr, X_EX, Polytope.box([-10, -10], [10, 10]))
        assert rep.first_state_violation == (1, 40)
        assert rep.n_state_violations == 1
        assert rep.max_state_violation == pytest.approx(0.5)

    def test_refinement_catches_interior_dip(self, system, md):
        # x1 = a e^{-t} + b e^{0.2 t} with a, b > 0 dips inside the interval; coarse samples miss it
        x0 = np.array([2.73, 2.0])
        tr = run_closed_loop(system, hold(0.0), x0, 1, M=4)
        true_min = min(md.free_response(x0, t)[0] for t in np.linspace(0, 1, 20001))
        sampled = tr.dense_x[0, :, 0].min()
        assert sampled - true_min > 1e-3
        X = Polytope.box([sampled - 1e-4, 0.0], [10.0, 10.0])
        coarse = check_violations(tr, X, X)
        fine = check_violations(tr, X, X, md=md)
        assert coarse.max_state_violation == 0.0
        assert fine.max_state_violation == pytest.approx(sampled - 1e-4 - true_min, abs=1e-7)

    def test_settling_index(self, system, sets):
        xs = sets.equilibria.state(0.19)
        tr = run_closed_loop(system, hold(0.19), xs, 5)
        rep = check_violations(tr, X_EX, T_EX)
        assert rep.settling_index == 0


class TestClosedLoop:
    def test_example_start_has_no_violations(self, system, config, sets, md):
        ctrl = make_controller(config, sets, "setbased")
        tr = run_closed_loop(system, ctrl, [0.55, 0.55], 10)
        rep = check_violations(tr, X_EX, T_EX, md=md)
        assert rep.n_state_violations == 0 and rep.max_state_violation <= 1e-6

    def test_infeasible_keeps_partial_run(self, system):
        calls = []

        def ctrl(x):
            if len(calls) == 2:
                raise InfeasibleProblem("no")
            calls.append(x)
            return np.array([0.0])

        with pytest.raises(InfeasibleProblem) as info:
            run_closed_loop(system, ctrl, [3.0, 1.0], 5)
        tr = info.value.trajectory
        assert tr.steps == 2 and tr.post.shape == (3, 2) and tr.dense_x.shape == (2, 101, 2)

    def test_infeasible_at_first_step(self, system):
        def ctrl(x):
            raise InfeasibleProblem("no")

        with pytest.raises(InfeasibleProblem) as info:
            run_closed_loop(system, ctrl, [3.0, 1.0], 5)
        tr = info.value.trajectory
        assert tr.steps == 0 and tr.post.shape == (1, 2)
        assert len(tr.to_csv().splitlines()) == 2

    def test_invariant_set_closed_loop(self, system, sets, md):
        # steer with an LP-chosen input that keeps the next state in the invariant set
        S = sets.target_inv
        Ad = sets.discrete.Ad

        def ctrl(x):
            G = np.vstack([S.H @ system.B, U_EX.H])
            h = np.concatenate([S.v - S.H @ Ad @ x, U_EX.v])
            res = solve_lp(np.zeros(1), G, h)
            assert res.status == OPTIMAL
            return res.x

        x0 = S.vertices.mean(axis=0)
        tr = run_closed_loop(system, ctrl, x0, 15)
        rep = check_violations(tr, T_EX, T_EX, tol=1e-7, md=md)
        assert rep.n_state_violations == 0 and rep.settling_index == 0
        assert all(S.contains(p, 1e-7) for p in tr.post)
