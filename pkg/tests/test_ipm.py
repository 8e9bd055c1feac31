import math

import numpy as np
import pytest

from hvdcopf.builder import OpfOptions, build_opf
from hvdcopf.ipm import SolverOptions, check_kkt, solve, solve_multistart
from hvdcopf.nlp import ProblemBuilder, lin_row, quad_row


def box_qp():
    """min (x-2)^2 over 0 <= x <= 1, as an epigraph with bilinear rows."""
    pb = ProblemBuilder("box-qp")
    pb.add_var("x", 0.0, 1.0, start=0.5)
    pb.add_var("s", start=-1.5)
    pb.add_var("q", cost=1.0, start=2.0)
    pb.add_eq(lin_row("shift", {"s": 1.0, "x": -1.0}, 2.0))  # s = x - 2
    pb.add_eq(quad_row("square", {"q": 1.0}, [("s", "s", -1.0)]))  # q = s^2
    return pb.build()


def two_node_opf(r=0.02, p_load=0.5):
    """One source feeding a fixed load through a resistance, sending end pinned.

    Closed form: i solves i - r i^2 = p_load, dispatch = load + i^2 r.
    """
    pb = ProblemBuilder("two-node")
    pb.add_var("u1", 1.0, 1.0, start=1.0)
    pb.add_var("u2", 0.5, 1.5, start=1.0)
    pb.add_var("i", start=0.0)
    pb.add_var("pg", 0.0, 2.0, cost=1.0, start=0.5)
    pb.add_eq(lin_row("ohm", {"u1": 1.0, "u2": -1.0, "i": -r}))
    pb.add_eq(quad_row("send", {"pg": 1.0}, [("u1", "i", -1.0)]))
    pb.add_eq(quad_row("load", {}, [("u2", "i", 1.0)], -p_load))
    return pb.build()


class TestToyProblems:
    def test_box_qp_hits_bound_with_multiplier(self):
        p = box_qp()
        sol = solve(p)
        assert sol.status == "optimal"
        assert sol.x[p.var_index("x")] == pytest.approx(1.0, abs=1e-6)
        assert sol.objective == pytest.approx(1.0, abs=1e-6)
        # gradient of (x-2)^2 at x=1 is -2: the upper bound holds it with z_u = 2
        assert sol.z_upper[p.var_index("x")] == pytest.approx(2.0, abs=1e-4)

    def test_two_node_dispatch_covers_load_plus_losses(self):
        r, p_load = 0.02, 0.5
        p = two_node_opf(r, p_load)
        sol = solve(p)
        assert sol.status == "optimal"
        i = (1.0 - math.sqrt(1.0 - 4.0 * r * p_load)) / (2.0 * r)
        assert sol.x[p.var_index("i")] == pytest.approx(i, rel=1e-6)
        assert sol.x[p.var_index("pg")] == pytest.approx(p_load + i * i * r, rel=1e-6)

    def test_contradictory_equalities_detected(self):
        pb = ProblemBuilder("bad")
        pb.add_var("x", start=0.5)
        pb.add_eq(lin_row("is0", {"x": 1.0}))
        pb.add_eq(lin_row("is1", {"x": 1.0}, -1.0))
        sol = solve(pb.build())
        assert sol.status == "infeasible"

    def test_nan_data_raises(self):
        pb = ProblemBuilder("nan")
        pb.add_var("x", cost=float("nan"))
        with pytest.raises(ValueError):
            solve(pb.build())

    def test_all_fixed_feasibility_path(self):
        pb = ProblemBuilder("fixed")
        pb.add_var("x", 2.0, 2.0)
        pb.add_eq(lin_row("match", {"x": 1.0}, -2.0))
        sol = solve(pb.build())
        assert sol.status == "optimal" and sol.x[0] == 2.0


class TestOptions:
    def test_invalid_options_rejected(self):
        with pytest.raises(ValueError):
            SolverOptions(tau=1.5)
        with pytest.raises(ValueError):
            SolverOptions(tol_kkt=-1.0)
        with pytest.raises(ValueError):
            SolverOptions(mu_reduction=1.0)

    def test_iteration_limit_status(self):
        p = two_node_opf()
        sol = solve(p, SolverOptions(max_iter=2))
        assert sol.status == "iteration-limit"


class TestDeterminism:
    def test_bit_identical_repeat_solves(self, builtin_grid):
        p, _ = build_opf(builtin_grid, OpfOptions(n_b=4))
        a = solve(p)
        b = solve(p)
        assert a.iterations == b.iterations
        assert a.objective == b.objective
        assert np.array_equal(a.x, b.x)

    def test_multistart_deterministic(self):
        p = two_node_opf()
        a = solve_multistart(p, seed=7)
        b = solve_multistart(p, seed=7)
        assert a.objective == b.objective


class TestCheckKkt:
    def test_optimal_point_passes(self):
        sol = solve(box_qp())
        report = check_kkt(box_qp(), sol)
        assert report.max_residual <= 1e-6

    def test_agrees_with_solver_claim(self, builtin_grid):
        p, _ = build_opf(builtin_grid, OpfOptions(n_b=4))
        sol = solve(p)
        report = check_kkt(p, sol)
        assert sol.status == "optimal"
        assert report.max_residual <= 10 * SolverOptions().tol_kkt

    def test_perturbed_primal_shows_feasibility_residual(self):
        p = two_node_opf()
        sol = solve(p)
        sol.x[p.var_index("u2")] += 1e-3
        report = check_kkt(p, sol)
        assert report.primal_eq == pytest.approx(1e-3, rel=0.2)

    def test_sign_flipped_multiplier_flagged(self):
        p = box_qp()
        sol = solve(p)
        sol.lam_eq = -sol.lam_eq
        report = check_kkt(p, sol)
        assert report.stationarity > 1e-2


class TestSolveDetails:
    def test_log_is_line_oriented(self):
        sol = solve(two_node_opf())
        assert sol.iterations >= 1
        assert all(line.startswith("iter") for line in sol.log)

    def test_primal_feasibility_tight_after_refinement(self, builtin_grid):
        p, _ = build_opf(builtin_grid, OpfOptions(n_b=4))
        sol = solve(p)
        assert sol.kkt_residuals["feasibility_eq"] <= 1e-10

    def test_wrong_start_dimension_rejected(self):
        p = two_node_opf()
        with pytest.raises(ValueError):
            solve(p, start=np.zeros(2))
