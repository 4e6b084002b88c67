import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from riccatint.evolution import (OperatorFunction, TimeGrid,
                                 adjoint_backward_family, build_forward_family)
from riccatint.lyapunov import LinearIntegralProblem, solve_both_perturbed
from riccatint.riccati import (ContractionParams, ConvergenceError,
                               HypothesisViolation, RiccatiProblem,
                               check_hypotheses, compute_delta,
                               flow_consistency, monotone_step,
                               representation_check_one_sided,
                               representation_check_two_sided,
                               riccati_residual, solve_monotone,
                               solve_picard_stepped)
from riccatint.testing import (inverse_linear_problem, random_symmetric_problem,
                               tanh_problem)


def _exact_tanh(problem):
    values = np.tanh(problem.grid.horizon - problem.grid.nodes())[:, None, None]
    return OperatorFunction(problem.grid, values)


# ---------------------------------------------------------------- closed forms

def test_monotone_tanh_closed_form():
    problem, _ = tanh_problem(2000)
    sol = solve_monotone(problem)
    assert abs(sol.P.values[0, 0, 0] - math.tanh(1.0)) <= 1e-6
    assert np.array_equal(sol.P.values[-1], problem.G)  # P(T) = G exactly


def test_monotone_inverse_linear_closed_form():
    problem, _ = inverse_linear_problem(2000)
    sol = solve_monotone(problem)
    assert abs(sol.P.values[0, 0, 0] - 0.5) <= 1e-6


def test_trivial_zero_problem():
    grid = TimeGrid(1.0, 50)
    fwd = build_forward_family(OperatorFunction.zero(grid, 1))
    problem = RiccatiProblem.symmetric(fwd, OperatorFunction.zero(grid, 1),
                                       OperatorFunction.constant(grid, [[1.0]]),
                                       np.zeros((1, 1)))
    sol = solve_monotone(problem)
    assert sol.iterations == 1
    assert np.abs(sol.P.values).max() == 0.0


# ---------------------------------------------------------------- monotone step

def test_monotone_step_zero_data():
    grid = TimeGrid(1.0, 30)
    fwd = build_forward_family(OperatorFunction.zero(grid, 2))
    problem = RiccatiProblem.symmetric(fwd, OperatorFunction.zero(grid, 2),
                                       OperatorFunction.constant(grid, np.eye(2)),
                                       np.zeros((2, 2)))
    p0 = OperatorFunction.zero(grid, 2, midpoints=False)
    p1 = monotone_step(p0, problem)
    assert np.abs(p1.values).max() == 0.0


def test_first_step_equals_linear_solver():
    """With P_0 = 0 the linearized equation is the plain linear one."""
    problem, _ = random_symmetric_problem(seed=5, n=3, steps=120)
    p0 = OperatorFunction.zero(problem.grid, 3, midpoints=False)
    p1 = monotone_step(p0, problem)
    zero_q = OperatorFunction.zero(problem.grid, 3)
    linear = solve_both_perturbed(LinearIntegralProblem(
        problem.U_forward, problem.U_backward, problem.C, problem.G,
        Q1=zero_q, Q2=zero_q))
    assert np.abs(p1.values - linear.values).max() <= 1e-14


def test_first_step_transports_terminal_unchanged():
    # A = 0, C = 0: with P_0 = 0 the perturbations vanish and G rides along
    problem, _ = inverse_linear_problem(100)
    p0 = OperatorFunction.zero(problem.grid, 1, midpoints=False)
    p1 = monotone_step(p0, problem)
    assert_allclose(p1.values[:, 0, 0], np.ones(101), atol=1e-14)


def test_monotone_step_rejects_asymmetric_iterate():
    problem, _ = random_symmetric_problem(seed=1, n=2, steps=20)
    bad = np.zeros((21, 2, 2))
    bad[7] = [[0.0, 1.0], [0.0, 0.0]]
    with pytest.raises(HypothesisViolation) as err:
        monotone_step(OperatorFunction(problem.grid, bad), problem)
    assert err.value.kind == "P-symmetry"
    assert err.value.node == 7


def test_monotone_requires_symmetric_mode():
    problem, _ = tanh_problem(20)
    general = RiccatiProblem(problem.U_forward, problem.U_backward, problem.C,
                             problem.B, problem.G, symmetric_mode=False)
    with pytest.raises(HypothesisViolation):
        solve_monotone(general)


# ---------------------------------------------------------------- residuals

def test_residual_of_exact_solution_is_second_order():
    for n_steps in (250, 500):
        problem, _ = tanh_problem(n_steps)
        res = riccati_residual(_exact_tanh(problem), problem)
        assert res <= 5.0 * problem.grid.h ** 2


def test_residual_trivial_cases():
    grid = TimeGrid(1.0, 40)
    fwd = build_forward_family(OperatorFunction.zero(grid, 2))
    zero = OperatorFunction.zero(grid, 2)
    one = OperatorFunction.constant(grid, np.eye(2))
    problem = RiccatiProblem.symmetric(fwd, zero, one, np.zeros((2, 2)))
    p_zero = OperatorFunction.zero(grid, 2, midpoints=False)
    assert riccati_residual(p_zero, problem) == 0.0
    problem_g = RiccatiProblem.symmetric(fwd, zero, one, np.eye(2))
    assert riccati_residual(p_zero, problem_g) >= 1.0  # missing terminal transport


def test_residual_of_converged_solution_is_roundoff():
    problem, _ = random_symmetric_problem(seed=3, n=4, steps=400)
    sol = solve_monotone(problem)
    assert sol.residual <= 1e-12


# ---------------------------------------------------------------- flow identity

def test_flow_consistency_degenerate_pairs():
    problem, _ = tanh_problem(100)
    sol = solve_monotone(problem)
    assert flow_consistency(sol.P, problem, 40, 40) == 0.0
    # tau = T reduces to the equation residual at t
    res_via_flow = flow_consistency(sol.P, problem, 0, 100)
    assert abs(res_via_flow - riccati_residual(sol.P, problem)) <= 1e-12


def test_flow_consistency_exact_samples():
    problem, _ = tanh_problem(400)
    p_exact = _exact_tanh(problem)
    h2 = problem.grid.h ** 2
    rng = np.random.default_rng(11)
    for _ in range(25):
        a, b = sorted(int(v) for v in rng.integers(0, 401, 2))
        assert flow_consistency(p_exact, problem, a, b) <= 5.0 * h2


def test_flow_consistency_index_validation():
    problem, _ = tanh_problem(10)
    sol = solve_monotone(problem)
    with pytest.raises(ValueError):
        flow_consistency(sol.P, problem, 5, 3)


# ---------------------------------------------------------------- representations

def test_representation_checks_on_solution():
    problem, _ = tanh_problem(500)
    sol = solve_monotone(problem)
    h2 = problem.grid.h ** 2
    assert representation_check_one_sided(sol.P, problem) <= 5.0 * h2
    assert representation_check_two_sided(sol.P, problem) <= 5.0 * h2


def test_representation_checks_degenerate_b():
    # B = 0: the representation collapses to the linear transport formula
    grid = TimeGrid(1.0, 200)
    fwd = build_forward_family(
        OperatorFunction.from_callable(grid, lambda t: [[0.3 * np.sin(t)]]))
    problem = RiccatiProblem.symmetric(fwd,
                                       OperatorFunction.constant(grid, [[0.5]]),
                                       OperatorFunction.zero(grid, 1),
                                       np.array([[0.4]]))
    sol = solve_monotone(problem)
    assert representation_check_one_sided(sol.P, problem) <= 5.0 * grid.h ** 2
    assert representation_check_two_sided(sol.P, problem) <= 5.0 * grid.h ** 2


def test_representation_check_detects_wrong_solution():
    # an offset solution keeps a residual bounded away from zero as h -> 0
    values = []
    for n_steps in (100, 200):
        problem, _ = tanh_problem(n_steps)
        wrong = OperatorFunction(problem.grid,
                                 _exact_tanh(problem).values + 1.0)
        values.append(representation_check_one_sided(wrong, problem))
    assert min(values) > 0.05
    assert abs(values[0] - values[1]) < 0.5 * values[0]  # not vanishing with h


# ---------------------------------------------------------------- hypotheses

def test_check_hypotheses_passes_canonical():
    problem, _ = random_symmetric_problem(seed=2, n=3, steps=50)
    report = check_hypotheses(problem)
    assert report.passed
    assert report.duality_defect == 0.0
    assert report.first_violation is None


def test_check_hypotheses_flags_asymmetric_node():
    problem, _ = random_symmetric_problem(seed=2, n=2, steps=30)
    c_vals = problem.C.values.copy()
    c_vals[17] = [[0.0, 1.0], [-1.0, 0.0]]
    tampered = RiccatiProblem(problem.U_forward, problem.U_backward,
                              OperatorFunction(problem.grid, c_vals),
                              problem.B, problem.G, symmetric_mode=True)
    report = check_hypotheses(tampered)
    assert not report.passed
    assert report.first_violation == ("C-symmetry", 17)


def test_check_hypotheses_flags_independent_backward_family():
    problem, _ = random_symmetric_problem(seed=2, n=2, steps=30)
    other = build_forward_family(OperatorFunction.constant(
        problem.grid, 0.3 * np.array([[0.0, 1.0], [1.0, 0.0]])))
    mismatched = RiccatiProblem(problem.U_forward, adjoint_backward_family(other),
                                problem.C, problem.B, problem.G)
    report = check_hypotheses(mismatched)
    assert not report.passed
    assert report.first_violation[0] == "duality"
    assert report.duality_defect > 1e-3


# ---------------------------------------------------------------- contraction

def test_compute_delta_examples():
    assert_allclose(compute_delta(1.0, 1.0, 1.0, 0.0, 1.0, safety=0.5), 0.125)
    assert compute_delta(1.0, 1.0, 1.0, 1.0, 0.0, horizon=2.0) == 2.0
    assert compute_delta(1.0, 1.0, 1.0, 1.0, 0.0) == math.inf
    # doubling r_G halves delta when r_C = 0
    d1 = compute_delta(1.2, 1.1, 1.0, 0.0, 0.8)
    d2 = compute_delta(1.2, 1.1, 2.0, 0.0, 0.8)
    assert_allclose(d1, 2.0 * d2, rtol=1e-12)


def test_compute_delta_satisfies_strict_inequality():
    for args in [(1.5, 1.2, 0.8, 0.6, 0.9), (1.0, 1.0, 2.0, 1.0, 0.5)]:
        delta = compute_delta(*args, safety=0.5)
        m1, m2, r_g, r_c, r_b = args
        lhs = 4 * delta * m1 ** 2 * m2 ** 2 * (r_g + delta * r_c) * r_b
        assert_allclose(lhs, 0.5, rtol=1e-12)


def test_compute_delta_rejects_bad_inputs():
    with pytest.raises(ValueError):
        compute_delta(0.5, 1.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        compute_delta(1.0, 1.0, -1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        compute_delta(1.0, 1.0, 1.0, 0.0, 1.0, safety=1.5)


def test_contraction_params_validation():
    params = ContractionParams.build(1.0, 1.0, 1.0, 0.0, 1.0, delta=0.1)
    assert params.contraction_lhs < 1.0
    with pytest.raises(ValueError):
        ContractionParams.build(1.0, 1.0, 1.0, 0.0, 1.0, delta=0.3)  # lhs >= 1
    with pytest.raises(ValueError):
        ContractionParams(1.0, 1.0, 1.0, 0.0, 1.0, delta=0.1, rho=5.0)


# ---------------------------------------------------------------- picard solver

def test_picard_zero_b_single_window():
    grid = TimeGrid(1.0, 100)
    fwd = build_forward_family(OperatorFunction.zero(grid, 1))
    problem = RiccatiProblem.symmetric(fwd,
                                       OperatorFunction.constant(grid, [[0.4]]),
                                       OperatorFunction.zero(grid, 1),
                                       np.array([[0.3]]))
    sol = solve_picard_stepped(problem)
    assert len(sol.intervals) == 1
    assert sol.iterations == 1
    assert_allclose(sol.P.values[:, 0, 0], 0.3 + 0.4 * (1.0 - grid.nodes()),
                    atol=1e-14)


def test_picard_matches_monotone_on_closed_forms():
    for factory in (tanh_problem, inverse_linear_problem):
        problem, _ = factory(800)
        mono = solve_monotone(problem)
        pic = solve_picard_stepped(problem)
        assert np.abs(mono.P.values - pic.P.values).max() <= 1e-7
        assert abs(pic.P.values[0, 0, 0] - mono.P.values[0, 0, 0]) <= 1e-7


def test_picard_certificates():
    problem, _ = random_symmetric_problem(seed=8, n=4, steps=500)
    sol = solve_picard_stepped(problem)
    assert sol.intervals, "expected at least one window"
    covered = sorted((c.start_index, c.end_index) for c in sol.intervals)
    assert covered[0][0] == 0 and covered[-1][1] == 500
    for lo, hi in zip(covered, covered[1:]):
        assert lo[1] == hi[0]
    for cert in sol.intervals:
        assert cert.params.contraction_lhs < 1.0
        assert cert.in_ball
        assert cert.sup_iterate_norm <= cert.params.rho + 1e-6


def test_picard_general_nonsymmetric_problem():
    """Distinct generators on each side; reference is a fourth-order ODE run."""
    a1, a2, b, c, g, horizon = 0.3, -0.2, 0.8, 0.5, 0.4, 1.0
    n_steps = 800
    grid = TimeGrid(horizon, n_steps)
    fwd = build_forward_family(OperatorFunction.constant(grid, [[a1]]))
    other = build_forward_family(OperatorFunction.constant(grid, [[a2]]))
    problem = RiccatiProblem(fwd, adjoint_backward_family(other),
                             OperatorFunction.constant(grid, [[c]]),
                             OperatorFunction.constant(grid, [[b]]),
                             np.array([[g]]))
    sol = solve_picard_stepped(problem)

    # p' = -c - (a1 + a2) p + b p^2 integrated backward from p(T) = g
    def rhs(p):
        return -c - (a1 + a2) * p + b * p * p

    p_ref = g
    h = -horizon / n_steps
    for _ in range(n_steps):
        k1 = rhs(p_ref)
        k2 = rhs(p_ref + 0.5 * h * k1)
        k3 = rhs(p_ref + 0.5 * h * k2)
        k4 = rhs(p_ref + h * k3)
        p_ref += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    assert abs(sol.P.values[0, 0, 0] - p_ref) <= 1e-4


def test_picard_window_ball_escape_and_retry(monkeypatch):
    """An underestimated norm cap triggers one retry with an inflated cap."""
    import riccatint.riccati as rmod

    problem, _ = random_symmetric_problem(seed=30, n=2, steps=200)
    reference = solve_picard_stepped(problem)

    # the window solver itself must flag an escape for a tiny ball
    with pytest.raises(rmod._BallEscape):
        rmod._picard_window(problem, problem.G, 200, r_G=1e-8, r_C=0.0,
                            r_B=1e-6, safety=0.5, tol_abs=1e-10, tol_rel=1e-8,
                            max_inner=50)

    # the solver-level retry recovers when the first attempt escapes
    original = rmod._picard_window
    calls = {"count": 0}

    def flaky(problem_, terminal, idx, r_G, *args, **kwargs):
        calls["count"] += 1
        if calls["count"] == 1:
            raise rmod._BallEscape(observed=10.0 * r_G)
        return original(problem_, terminal, idx, r_G, *args, **kwargs)

    monkeypatch.setattr(rmod, "_picard_window", flaky)
    sol = rmod.solve_picard_stepped(problem)
    assert calls["count"] >= 2
    assert np.abs(sol.P.values - reference.P.values).max() <= 1e-8


def test_picard_refuses_too_coarse_grid():
    # huge B makes the certified window shorter than one step
    grid = TimeGrid(1.0, 5)
    fwd = build_forward_family(OperatorFunction.zero(grid, 1))
    problem = RiccatiProblem.symmetric(fwd,
                                       OperatorFunction.constant(grid, [[1.0]]),
                                       OperatorFunction.constant(grid, [[50.0]]),
                                       np.array([[1.0]]))
    with pytest.raises(ConvergenceError, match="refine the grid"):
        solve_picard_stepped(problem)


# ---------------------------------------------------------------- invariants

def test_monotone_invariant_records():
    problem, _ = random_symmetric_problem(seed=12, n=4, steps=300)
    sol = solve_monotone(problem)
    assert sol.iterations >= 3
    records = sol.invariant_report
    assert [r.index for r in records] == list(range(1, sol.iterations + 1))
    max_norm = max(r.max_norm for r in records)
    for rec in records:
        assert rec.presymmetrization_defect <= 1e-12 * (1.0 + max_norm)
        assert rec.min_eigenvalue >= -1e-10
        if rec.index >= 2:
            assert rec.chain_min_eigenvalue >= -1e-10
            assert rec.norm_decrease_margin >= -1e-10
    # updates shrink (quadratic-type convergence shows at least monotone decay)
    assert all(d2 < d1 for d1, d2 in zip(sol.sup_differences, sol.sup_differences[1:]))


def test_monotone_solution_symmetry_is_structural():
    problem, _ = random_symmetric_problem(seed=13, n=3, steps=200)
    sol = solve_monotone(problem)
    assert sol.P.symmetry_defect() <= 1e-10
    assert np.array_equal(sol.P.values[-1], problem.G)


def test_cross_solver_agreement_random():
    problem, _ = random_symmetric_problem(seed=21, n=4, steps=400)
    mono = solve_monotone(problem)
    pic = solve_picard_stepped(problem)
    gap = float(np.linalg.svd(mono.P.values - pic.P.values,
                              compute_uv=False).max())
    assert gap <= 1e-7


def test_non_convergence_diagnostic():
    problem, _ = tanh_problem(100)
    with pytest.raises(ConvergenceError) as err:
        solve_monotone(problem, max_iter=1)
    assert len(err.value.history) == 1


def test_zero_horizon_returns_terminal():
    grid = TimeGrid(0.0, 0)
    fwd = build_forward_family(OperatorFunction.zero(grid, 2))
    g = np.array([[1.0, 0.2], [0.2, 2.0]])
    problem = RiccatiProblem.symmetric(fwd, OperatorFunction.zero(grid, 2),
                                       OperatorFunction.zero(grid, 2), g)
    for solver in (solve_monotone, solve_picard_stepped):
        sol = solver(problem)
        assert np.array_equal(sol.P.values[0], g)
        assert sol.iterations == 0
