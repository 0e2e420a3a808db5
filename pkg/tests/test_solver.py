import math
import warnings

import numpy as np
import pytest
from scipy.optimize import bisect

from conftest import LAPLACE_D
from maxentsd.basis import MomentBasis
from maxentsd.exceptions import ConditioningError, InfeasibleError, NonConvergenceError
from maxentsd.quadrature import SupportSpec, build_rule
from maxentsd.solver import (
    DualProblem,
    SolverOptions,
    dual_gradient,
    dual_hessian,
    dual_objective,
    duality_gap,
    entropy_primal,
    fit,
    model_from_lambda,
    partition_function,
)

E = math.e


def uniform_mean(lam):
    """Mean of exp(-lam x) / Z on [0, 1]."""
    if abs(lam) < 1e-8:
        return 0.5 - lam / 12
    return 1 / lam - 1 / math.expm1(lam)


def bisection_lambda(d):
    return bisect(lambda t: uniform_mean(t) - d, -50.0, 50.0, xtol=1e-14, rtol=1e-15, maxiter=500)


def finite_difference_gradient(problem, lam, d, step=1e-6):
    out = np.empty_like(lam)
    for k in range(lam.size):
        e = np.zeros_like(lam)
        e[k] = step
        out[k] = (problem.objective(lam + e, d) - problem.objective(lam - e, d)) / (2 * step)
    return out


def finite_difference_hessian(problem, lam, step=1e-5):
    M = lam.size
    out = np.empty((M, M))
    d0 = np.zeros(M)
    for k in range(M):
        e = np.zeros(M)
        e[k] = step
        # gradient of log Z is -E[h] = gradient(lam, 0)
        out[:, k] = (problem.gradient(lam + e, d0) - problem.gradient(lam - e, d0)) / (2 * step)
    return out


def families():
    unit = SupportSpec.finite(0, 1)
    lap = SupportSpec.half_line(0.0, 1.0, "exponential")
    tab = MomentBasis.tabulated(np.linspace(0, 1, 5), [[0.0, 0.3, 1.0, 0.2, 0.5], [1.0, 0.0, 0.4, 0.9, 0.1]])
    return [
        ("powers", MomentBasis.powers([1, 2]), unit, 4.0),
        ("exponentials", MomentBasis.exponentials([0.5, 1.0, 2.0]), lap, 2.0),
        ("tabulated", tab, unit, 3.0),
    ]


def random_instances(basis, support, scale, count, seed):
    rng = np.random.default_rng(seed)
    problem = DualProblem(basis, build_rule(support))
    for _ in range(count):
        yield problem, rng.uniform(-scale, scale, basis.M), rng.uniform(0.05, 0.95, basis.M)


def test_partition_function_examples(unit, linear):
    assert partition_function(MomentBasis.powers([1]), unit, None, [0.0]) == pytest.approx((1.0, 0.0), abs=1e-15)
    z, log_z = partition_function(linear, unit, None, [1.0])
    assert z == pytest.approx(1 - 1 / E, rel=1e-14)
    assert log_z == pytest.approx(math.log(1 - 1 / E), rel=1e-14)
    assert partition_function(linear, unit, None, [-1.0])[0] == pytest.approx(E - 1, rel=1e-14)


def test_log_partition_is_overflow_safe(unit, linear):
    z, log_z = partition_function(linear, unit, None, [-2000.0])
    assert z == math.inf
    # log of (exp(2000) - 1) / 2000
    assert log_z == pytest.approx(2000 - math.log(2000), rel=1e-12)


def test_dual_objective_examples(unit_rule, linear):
    problem = DualProblem(linear, unit_rule)
    assert dual_objective(problem, [0.0], [0.7]) == pytest.approx(0.0, abs=1e-15)
    assert dual_objective(problem, [1.0], [0.5]) == pytest.approx(math.log(1 - 1 / E) + 0.5, rel=1e-13)
    assert dual_objective(problem, [1.0], [0.3]) == pytest.approx(math.log(1 - 1 / E) + 0.3, rel=1e-13)


def test_dual_gradient_examples(unit_rule, linear):
    problem = DualProblem(linear, unit_rule)
    assert dual_gradient(problem, [0.0], [0.5]) == pytest.approx([0.0], abs=1e-15)
    assert dual_gradient(problem, [0.0], [0.3]) == pytest.approx([-0.2], abs=1e-15)


def test_dual_hessian_examples(unit_rule, linear):
    np.testing.assert_allclose(dual_hessian(DualProblem(linear, unit_rule), [0.0]), [[1 / 12]], rtol=1e-13)
    two = dual_hessian(DualProblem(MomentBasis.powers([1, 2]), unit_rule), [0.0, 0.0])
    np.testing.assert_allclose(two, [[1 / 12, 1 / 12], [1 / 12, 4 / 45]], rtol=1e-13)


@pytest.mark.parametrize("name, basis, support, scale", families(), ids=lambda v: v if isinstance(v, str) else "")
def test_gradient_matches_finite_differences(name, basis, support, scale):
    for problem, lam, d in random_instances(basis, support, scale, 50, seed=1):
        fd = finite_difference_gradient(problem, lam, d)
        np.testing.assert_allclose(problem.gradient(lam, d), fd, atol=1e-6, rtol=0)


@pytest.mark.parametrize("name, basis, support, scale", families(), ids=lambda v: v if isinstance(v, str) else "")
def test_hessian_matches_finite_differences_and_is_psd(name, basis, support, scale):
    for problem, lam, _ in random_instances(basis, support, scale, 50, seed=2):
        hess = problem.hessian(lam)
        np.testing.assert_allclose(hess, finite_difference_hessian(problem, lam), atol=1e-5, rtol=0)
        np.testing.assert_array_equal(hess, hess.T)
        assert np.linalg.eigvalsh(hess).min() >= -1e-12


@pytest.mark.parametrize("name, basis, support, scale", families(), ids=lambda v: v if isinstance(v, str) else "")
def test_dual_is_midpoint_convex(name, basis, support, scale):
    rng = np.random.default_rng(3)
    problem = DualProblem(basis, build_rule(support))
    for _ in range(20):
        a, b = rng.uniform(-scale, scale, (2, basis.M))
        d = rng.uniform(0.05, 0.95, basis.M)
        mid = problem.objective(0.5 * (a + b), d)
        assert mid <= 0.5 * (problem.objective(a, d) + problem.objective(b, d)) + 1e-10


def test_fit_uniform(uniform_model):
    assert uniform_model.lam == pytest.approx([0.0], abs=1e-12)
    assert uniform_model.log_z == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(uniform_model.density(np.linspace(0, 1, 11)), 1.0, atol=1e-12)


def test_fit_matches_bisection_oracle(d03_model):
    assert d03_model.converged
    assert d03_model.lam[0] == pytest.approx(bisection_lambda(0.3), abs=1e-6)
    assert d03_model.lam[0] == pytest.approx(2.6721, abs=1e-4)


def test_fit_laplace_reproduces_transform(laplace_model):
    assert laplace_model.converged
    np.testing.assert_allclose(laplace_model.reproduced_moments(), LAPLACE_D, atol=1e-8, rtol=0)


@pytest.mark.parametrize("d", [[0.05], [0.3], [0.5], [0.8], [0.97]])
def test_moment_reproduction(unit, linear, d):
    opts = SolverOptions(tol_grad=1e-10)
    model = fit(d, linear, unit, opts)
    assert np.max(np.abs(model.reproduced_moments() - d)) <= 10 * opts.tol_grad
    assert model.lam[0] == pytest.approx(bisection_lambda(d[0]), abs=1e-6)


def test_model_normalizes(d03_model, laplace_model):
    for model in (d03_model, laplace_model):
        assert model.rule.weights @ model.node_values() == pytest.approx(1.0, abs=1e-8)


def test_density_eval_examples(unit, linear, uniform_model):
    model = model_from_lambda(linear, unit, [1.0])
    z = 1 - 1 / E
    assert model.density(0.0) == pytest.approx(1 / z, rel=1e-13)
    assert model.density(1.0) == pytest.approx(math.exp(-1) / z, rel=1e-13)
    assert model.density(0.0) == pytest.approx(1.5819767068693265, rel=1e-12)
    assert model.density(1.0) == pytest.approx(0.5819767068693265, rel=1e-12)
    assert uniform_model.density(0.37) == pytest.approx(1.0, abs=1e-12)


def test_entropy_and_duality(uniform_model, d03_model, laplace_model):
    assert entropy_primal(uniform_model) == pytest.approx(0.0, abs=1e-14)
    assert duality_gap(uniform_model) <= 1e-14
    assert duality_gap(d03_model) <= 1e-8
    assert duality_gap(laplace_model) <= 1e-7


def _projected_perturbation(model, rng):
    """A density on the grid with exactly the moments of ``model``."""
    H = model.problem.H
    f = model.node_values()
    w = model.rule.weights * f
    basis = np.column_stack([np.ones(H.shape[0]), H])
    u = rng.normal(size=H.shape[0])
    # remove the f*-weighted projection onto span{1, h_1, ..., h_M}
    coef = np.linalg.solve(basis.T @ (w[:, None] * basis), basis.T @ (w * u))
    u = u - basis @ coef
    eps = 0.5 / np.max(np.abs(u))
    return f * (1 + eps * u)


@pytest.mark.parametrize("which", ["d03_model", "laplace_model"])
def test_dual_bound_on_competing_densities(which, request, rng):
    model = request.getfixturevalue(which)
    bound = model.log_z + model.lam @ model.d
    for _ in range(20):
        g = _projected_perturbation(model, rng)
        np.testing.assert_allclose(model.rule.weights * g @ model.problem.H, model.d, atol=1e-12)
        entropy = -model.rule.weights @ (g * np.log(g))
        assert entropy <= bound + 1e-12
        # any multiplier gives an upper bound through the competitor's own moments
        lam = rng.normal(size=model.M)
        assert entropy <= model.problem.objective(lam, model.d) + 1e-12


def test_infeasible_moments(unit, linear):
    with pytest.raises(InfeasibleError):
        fit([1.5], linear, unit)
    with pytest.raises(InfeasibleError):
        fit([1.5], linear, unit, screen=False)


def test_non_convergence_reports_gradient(unit, linear):
    with pytest.raises(NonConvergenceError) as info:
        fit([0.3], linear, unit, SolverOptions(max_iter=1))
    assert info.value.grad_norm > 1e-10
    assert info.value.iterations == 1


def test_singular_covariance_needs_ridge(unit):
    twin = MomentBasis.tabulated([0.0, 1.0], [[0.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ConditioningError) as info:
        fit([0.3, 0.3], twin, unit)
    assert info.value.eigenvalues is not None
    model = fit([0.3, 0.3], twin, unit, SolverOptions(ridge=1e-8))
    assert model.reproduced_moments() == pytest.approx([0.3, 0.3], abs=1e-9)


def test_warm_start_gives_same_answer(unit, linear, d03_model):
    model = fit([0.3], linear, unit, SolverOptions(initial_lambda=(2.0,)))
    assert model.lam == pytest.approx(d03_model.lam, abs=1e-10)


def test_lebesgue_half_line_laplace_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit(LAPLACE_D, MomentBasis.exponentials([0.5, 1.0, 2.0]), SupportSpec.half_line(0.0))
    assert any("quadrature truncation" in str(w.message) for w in caught)


def test_options_validation():
    from maxentsd.exceptions import ConfigurationError

    with pytest.raises(ConfigurationError):
        SolverOptions(tol_grad=0)
    with pytest.raises(ConfigurationError):
        SolverOptions(ridge=-1)
