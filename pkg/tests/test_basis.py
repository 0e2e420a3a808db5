import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from maxentsd.basis import (
    MomentBasis,
    MomentVector,
    SampleSet,
    check_feasible,
    estimate_moments,
    eval_basis,
    sample_covariance,
)
from maxentsd.exceptions import ConfigurationError, InfeasibleError, InputError
from maxentsd.quadrature import SupportSpec

LAPLACE = MomentBasis.exponentials([0.5, 1.0, 2.0])
unit_values = arrays(np.float64, st.integers(1, 40), elements=st.floats(0.0, 1.0))


def test_eval_basis_examples():
    assert eval_basis(MomentBasis.powers([1]), 0.3) == pytest.approx([0.3])
    assert eval_basis(LAPLACE, 0.0) == pytest.approx([1.0, 1.0, 1.0])
    assert eval_basis(MomentBasis.exponentials([1.0]), 1.0) == pytest.approx([0.3678794411714423])


def test_eval_basis_shapes():
    assert eval_basis(LAPLACE, 0.5).shape == (3,)
    assert eval_basis(LAPLACE, np.linspace(0, 1, 7)).shape == (7, 3)


def test_tabulated_interpolates():
    basis = MomentBasis.tabulated([0.0, 1.0], [[0.0, 2.0], [1.0, 1.0]])
    assert eval_basis(basis, 0.25) == pytest.approx([0.5, 1.0])


@pytest.mark.parametrize(
    "build",
    [
        lambda: MomentBasis.powers([]),
        lambda: MomentBasis.powers([1, 1]),
        lambda: MomentBasis.powers([0]),
        lambda: MomentBasis.powers([1.5]),
        lambda: MomentBasis.exponentials([1.0, 0.5]),
        lambda: MomentBasis.exponentials([1.0, 1.0]),
        lambda: MomentBasis.exponentials([-1.0]),
        lambda: MomentBasis.tabulated([0.0, 0.0], [[1.0, 2.0]]),
        lambda: MomentBasis("chebyshev"),
    ],
)
def test_invalid_basis(build):
    with pytest.raises(ConfigurationError):
        build()


def test_estimate_moments_examples():
    assert estimate_moments(MomentBasis.powers([1]), [0.2, 0.4]).d == pytest.approx([0.3])
    assert estimate_moments(MomentBasis.exponentials([1.0]), [0.0, 0.0, 0.0]).d == pytest.approx([1.0])
    with pytest.raises(InputError):
        estimate_moments(MomentBasis.powers([1]), [])


def test_uniform_moments_within_three_standard_errors():
    x = np.random.default_rng(7).random(100_000)
    d = estimate_moments(MomentBasis.powers([1, 2]), x).d
    # Var(X) = 1/12, Var(X^2) = 1/5 - 1/9
    se = np.sqrt(np.array([1 / 12, 1 / 5 - 1 / 9]) / x.size)
    assert np.all(np.abs(d - [0.5, 1 / 3]) <= 3 * se)


def test_sample_covariance_examples():
    tab = MomentBasis.tabulated([0.0, 1.0], [[2.5, 2.5]])
    np.testing.assert_array_equal(sample_covariance(tab, [0.1, 0.7, 0.3]), np.zeros((1, 1)))
    np.testing.assert_allclose(sample_covariance(MomentBasis.powers([1]), [0.0, 1.0]), [[0.5]])
    with pytest.raises(InputError):
        sample_covariance(MomentBasis.powers([1]), [0.4])


def test_uniform_variance_within_three_standard_errors():
    x = np.random.default_rng(8).random(100_000)
    var = sample_covariance(MomentBasis.powers([1]), x)[0, 0]
    # Var((X - 1/2)^2) = 1/80 - 1/144
    se = math.sqrt((1 / 80 - 1 / 144) / x.size)
    assert abs(var - 1 / 12) <= 3 * se


@settings(max_examples=60, deadline=None)
@given(a=unit_values, b=unit_values)
def test_moments_of_concatenation_are_weighted_average(a, b):
    basis = MomentBasis.powers([1, 3])
    whole = estimate_moments(basis, np.concatenate([a, b])).d
    parts = (a.size * estimate_moments(basis, a).d + b.size * estimate_moments(basis, b).d) / (a.size + b.size)
    np.testing.assert_allclose(whole, parts, rtol=1e-12, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(x=arrays(np.float64, st.integers(2, 50), elements=st.floats(0.0, 3.0)), seed=st.integers(0, 2**32 - 1))
def test_covariance_is_permutation_invariant_and_psd(x, seed):
    basis = MomentBasis.powers([1, 2, 3])
    cov = sample_covariance(basis, x)
    perm = np.random.default_rng(seed).permutation(x)
    np.testing.assert_allclose(sample_covariance(basis, perm), cov, rtol=1e-9, atol=1e-12)
    np.testing.assert_array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= -1e-10


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0.0, 50.0), dx=st.floats(1e-3, 5.0))
def test_laplace_kernels_decrease_in_x(x, dx):
    assert np.all(eval_basis(LAPLACE, x + dx) < eval_basis(LAPLACE, x))


@settings(max_examples=60, deadline=None)
@given(x=arrays(np.float64, st.integers(1, 30), elements=st.floats(1e-3, 30.0)))
def test_laplace_sample_moments_pass_feasibility_screen(x):
    # a sample made only of zeros gives d = (1, ..., 1), on the boundary;
    # any positive value moves it strictly inside
    check_feasible(LAPLACE, SupportSpec.half_line(0.0), estimate_moments(LAPLACE, x).d)


def test_feasibility_screen_rejects():
    half = SupportSpec.half_line(0.0)
    with pytest.raises(InfeasibleError):
        check_feasible(LAPLACE, half, [0.3, 0.5, 0.2])
    with pytest.raises(InfeasibleError):
        check_feasible(LAPLACE, half, [1.0, 0.5, 0.2])
    with pytest.raises(InfeasibleError):
        check_feasible(MomentBasis.powers([1]), SupportSpec.finite(0, 1), [1.5])
    check_feasible(MomentBasis.powers([1, 2]), SupportSpec.finite(-1, 1), [0.0, 0.3])


def test_moment_vector_validation():
    with pytest.raises(InputError):
        MomentVector([np.nan])
    with pytest.raises(InputError):
        MomentVector([])
    assert len(MomentVector([0.1, 0.2])) == 2


def test_sample_set_rejects_values_outside_support():
    with pytest.raises(InputError) as info:
        SampleSet([0.2, 1.5, -0.1], SupportSpec.finite(0, 1))
    assert info.value.rows == [1, 2]


def test_sample_csv_round_trip(tmp_path):
    s = SampleSet(np.random.default_rng(1).random(20), SupportSpec.finite(0, 1))
    s.to_csv(tmp_path / "s.csv")
    back = SampleSet.from_csv(tmp_path / "s.csv", SupportSpec.finite(0, 1))
    np.testing.assert_array_equal(back.values, s.values)


def test_sample_csv_header_is_checked(tmp_path):
    (tmp_path / "bad.csv").write_text("value\n0.1\n")
    with pytest.raises(InputError):
        SampleSet.from_csv(tmp_path / "bad.csv")


@pytest.mark.parametrize(
    "basis",
    [MomentBasis.powers([1, 2]), LAPLACE, MomentBasis.tabulated([0.0, 1.0, 2.0], [[0.0, 1.0, 0.5]])],
)
def test_basis_round_trip(basis):
    assert MomentBasis.from_dict(basis.to_dict()) == basis
