import math

import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from riccatint.evolution import (OperatorFunction, TimeGrid,
                                 adjoint_backward_family, build_forward_family)
from riccatint.volterra import (GronwallBound, PerturbationSpec,
                                continuous_dependence_gap, cross_form_check,
                                perturb_backward, perturb_forward)


def _identity_base(n_steps, dim=1, horizon=1.0):
    grid = TimeGrid(horizon, n_steps)
    return build_forward_family(OperatorFunction.zero(grid, dim))


def test_zero_perturbation_returns_base():
    base = _identity_base(20, dim=2)
    q = OperatorFunction.zero(base.grid, 2)
    for form in ("first", "second"):
        fam = perturb_forward(PerturbationSpec(base, q, 1, form))
        assert np.array_equal(fam.steps, base.steps)
    bwd = adjoint_backward_family(base)
    fam_b = perturb_backward(PerturbationSpec(bwd, q, -1, "first"))
    assert np.array_equal(fam_b.steps, bwd.steps)


def test_scalar_exponential():
    # identity base, Q = 1: Psi_{T,0} = e within O(h^2)
    def err(n):
        base = _identity_base(n)
        q = OperatorFunction.constant(base.grid, [[1.0]])
        fam = perturb_forward(PerturbationSpec(base, q, 1, "first"))
        return abs(fam.value(n, 0)[0, 0] - math.e)

    assert err(200) < 1e-4
    assert math.log2(err(200) / err(400)) >= 1.8


def test_constant_coefficients_match_matrix_exponential(rng):
    a = rng.standard_normal((3, 3))
    a /= 2.0 * np.linalg.norm(a, 2)
    q = rng.standard_normal((3, 3))
    q /= np.linalg.norm(q, 2)
    grid = TimeGrid(1.0, 400)
    base = build_forward_family(OperatorFunction.constant(grid, a))
    fam = perturb_forward(PerturbationSpec(base, OperatorFunction.constant(grid, q), 1, "first"))
    for i, j in [(400, 0), (200, 0), (400, 100)]:
        dt = (i - j) * grid.h
        assert_allclose(fam.value(i, j), scipy.linalg.expm((a + q) * dt), atol=5e-6)


def test_backward_scalar_mirrors_forward():
    grid = TimeGrid(1.0, 150)
    base = _identity_base(150)
    bwd = adjoint_backward_family(base)
    q = OperatorFunction.constant(grid, [[0.9]])
    fwd_fam = perturb_forward(PerturbationSpec(base, q, 1, "first"))
    bwd_fam = perturb_backward(PerturbationSpec(bwd, q, 1, "first"))
    # scalar time-invariant case: both give e^{0.9 |t-s|}
    assert_allclose(bwd_fam.value(0, 150)[0, 0], fwd_fam.value(150, 0)[0, 0], rtol=1e-12)


def test_adjoint_duality_of_perturbed_families(rng):
    """Transposing the first-form equation yields the second-form backward one."""
    a = 0.5 * rng.standard_normal((2, 2))
    q = 0.8 * rng.standard_normal((2, 2))
    grid = TimeGrid(1.0, 60)
    base = build_forward_family(OperatorFunction.constant(grid, a))
    fam = perturb_forward(PerturbationSpec(base, OperatorFunction.constant(grid, q), -1, "first"))
    dual = perturb_backward(PerturbationSpec(
        adjoint_backward_family(base), OperatorFunction.constant(grid, q.T), -1, "second"))
    for i, j in [(0, 60), (10, 45), (30, 31)]:
        assert_allclose(dual.value(i, j), fam.value(j, i).T, atol=1e-13)


def _global_trapezoid_march(base, q_fun, sign, s_index):
    """Independent reference: solve the composite-trapezoid Volterra equation
    for Psi_{., s} by marching upward in t (unknown on the right of Q)."""
    grid = base.grid
    h = grid.h
    n = base.dim
    q = q_fun.values
    psi = [np.eye(n)]
    for m in range(s_index + 1, grid.num_nodes):
        rhs = base.value(m, s_index).astype(float)
        rhs = rhs + sign * h * 0.5 * (base.value(m, s_index) @ q[s_index] @ psi[0])
        for r in range(s_index + 1, m):
            rhs = rhs + sign * h * (base.value(m, r) @ q[r] @ psi[r - s_index])
        lhs = np.eye(n) - sign * 0.5 * h * q[m]
        psi.append(np.linalg.solve(lhs, rhs))
    return psi


def test_per_step_family_solves_global_equation(rng):
    """The product family satisfies the composite discrete equation exactly,
    so an independent marching order reproduces it to roundoff."""
    a = 0.6 * rng.standard_normal((2, 2))
    qm = 0.9 * rng.standard_normal((2, 2))
    grid = TimeGrid(1.0, 40)
    base = build_forward_family(OperatorFunction.constant(grid, a))
    q = OperatorFunction.from_callable(grid, lambda t: qm * (1.0 + 0.3 * np.sin(t)))
    fam = perturb_forward(PerturbationSpec(base, q, 1, "first"))
    for s in (0, 7):
        reference = _global_trapezoid_march(base, q, 1, s)
        for m in range(s, 41):
            assert_allclose(fam.value(m, s), reference[m - s], atol=1e-10)


def test_cross_form_check():
    grid = TimeGrid(1.0, 200)
    base = _identity_base(200)
    q = OperatorFunction.constant(grid, [[0.8]])
    spec = PerturbationSpec(base, q, 1, "first")
    assert cross_form_check(PerturbationSpec(base, OperatorFunction.zero(grid, 1), 1, "first")) == 0.0
    res = cross_form_check(spec)
    assert res <= 1e-4


def test_cross_form_refinement(rng):
    a = 0.5 * rng.standard_normal((2, 2))
    qm = rng.standard_normal((2, 2))
    qm /= np.linalg.norm(qm, 2)

    def residual(n):
        grid = TimeGrid(1.0, n)
        base = build_forward_family(OperatorFunction.constant(grid, a))
        q = OperatorFunction.from_callable(grid, lambda t: qm * (1.0 + 0.5 * t))
        return cross_form_check(PerturbationSpec(base, q, 1, "first"))

    ratio = residual(100) / residual(200)
    assert 2.5 <= ratio <= 6.0


def test_cross_form_tol_enforced():
    grid = TimeGrid(1.0, 50)
    base = _identity_base(50)
    q = OperatorFunction.from_callable(grid, lambda t: [[1.0 + t]])
    with pytest.raises(ValueError):
        cross_form_check(PerturbationSpec(base, q, 1, "first"), tol=1e-18)


def test_spec_validation():
    base = _identity_base(10, dim=2)
    q_ok = OperatorFunction.zero(base.grid, 2)
    with pytest.raises(ValueError):
        PerturbationSpec(base, q_ok, 2, "first")
    with pytest.raises(ValueError):
        PerturbationSpec(base, q_ok, 1, "third")
    with pytest.raises(ValueError):
        PerturbationSpec(base, OperatorFunction.zero(base.grid, 3), 1, "first")
    with pytest.raises(ValueError):
        q_other = OperatorFunction.zero(TimeGrid(1.0, 11), 2)
        PerturbationSpec(base, q_other, 1, "first")
    with pytest.raises(ValueError):
        perturb_backward(PerturbationSpec(base, q_ok, 1, "first"))


def test_gronwall_bound_shape():
    bound = GronwallBound(M_U=2.0, M_Q=1.5)
    assert bound.majorant(0.0, 3.0) == 6.0
    # monotone nondecreasing in the elapsed time
    values = [bound.majorant(dt, 1.0) for dt in np.linspace(0, 2, 20)]
    assert np.all(np.diff(values) >= 0)
    with pytest.raises(ValueError):
        GronwallBound(M_U=0.5, M_Q=1.0)
    with pytest.raises(ValueError):
        bound.majorant(-1.0, 1.0)


def test_continuous_dependence_identical_sequence():
    base = _identity_base(100)
    q = OperatorFunction.constant(base.grid, [[0.7]])
    res = continuous_dependence_gap(base, [q, q], q, [1.0], 0)
    assert res.all_dominated
    assert all(r.sup_gap <= 1e-14 for r in res.records)


def test_continuous_dependence_scalar_sequence():
    base = _identity_base(200)
    grid = base.grid
    q = OperatorFunction.constant(grid, [[0.8]])
    seq = [OperatorFunction.constant(grid, [[0.8 + 1.0 / k]]) for k in (1, 2, 4, 8, 16)]
    res = continuous_dependence_gap(base, seq, q, [1.0], 0)
    assert res.all_dominated
    gaps = [r.sup_gap for r in res.records]
    assert np.all(np.diff(gaps) < 0)  # decreasing along the sequence
    # scalar closed form: gap at T is e^{q + 1/k} - e^{q}
    expected = math.exp(0.8 + 1.0) - math.exp(0.8)
    assert_allclose(gaps[0], expected, rtol=1e-3)
    for rec in res.records:
        assert rec.sup_gap <= rec.sup_majorant


def test_continuous_dependence_dimension_mismatch():
    base = _identity_base(10, dim=2)
    q = OperatorFunction.zero(base.grid, 2)
    with pytest.raises(ValueError):
        continuous_dependence_gap(base, [q], q, [1.0, 0.0, 0.0], 0)
