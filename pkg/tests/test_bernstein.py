import numpy as np
import pytest
from scipy.integrate import quad

from iv_sensa.bernstein import (
    basis_cdf, basis_mean, bernstein_approx, bernstein_basis, constraint_grid, riemann_nodes,
)
from iv_sensa.errors import InvalidInputError


def test_small_examples():
    np.testing.assert_allclose(bernstein_basis(0, 0.3), [1.0])
    np.testing.assert_allclose(bernstein_basis(2, 0.5), [0.75, 1.5, 0.75])
    np.testing.assert_allclose(bernstein_basis(3, 0.0), [4, 0, 0, 0])
    np.testing.assert_allclose(bernstein_basis(3, 1.0), [0, 0, 0, 4])


@pytest.mark.parametrize("M", [1, 5, 30, 80])
def test_partition_of_unity(M):
    y = np.linspace(0, 1, 101)
    np.testing.assert_allclose(bernstein_basis(M, y).sum(axis=1) / (M + 1), 1.0, atol=1e-12)


@pytest.mark.parametrize("M", [1, 4, 17])
def test_reproduces_linear_functions(M):
    y = np.linspace(0, 1, 57)
    grid = np.arange(M + 1) / M
    np.testing.assert_allclose(bernstein_approx(3 - 2 * grid, y), 3 - 2 * y, atol=1e-12)


def test_quadratic_error_decreases():
    # B_M(y^2)(y) = y^2 + y(1 - y)/M, so the error at 1/2 is exactly 1/(4M)
    errs = []
    for M in (2, 4, 8, 16, 32):
        grid = np.arange(M + 1) / M
        err = bernstein_approx(grid ** 2, 0.5) - 0.25
        assert err == pytest.approx(1 / (4 * M), abs=1e-12)
        errs.append(err)
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_out_of_range_rejected():
    for bad in (-0.01, 1.01, np.nan):
        with pytest.raises(InvalidInputError):
            bernstein_basis(3, bad)
    with pytest.raises(InvalidInputError):
        bernstein_basis(-1, 0.5)


@pytest.mark.parametrize("M", [0, 3, 12])
def test_each_function_is_a_density(M):
    for m in range(M + 1):
        mass, _ = quad(lambda t: bernstein_basis(M, t)[m], 0, 1)
        assert mass == pytest.approx(1.0, abs=1e-10)


def test_closed_forms_match_quadrature():
    M = 9
    for m in range(M + 1):
        mean, _ = quad(lambda t: t * bernstein_basis(M, t)[m], 0, 1)
        assert basis_mean(M)[m] == pytest.approx(mean, abs=1e-10)
        for a in (0.0, 0.13, 0.5, 0.91, 1.0):
            cdf, _ = quad(lambda t: bernstein_basis(M, t)[m], 0, a)
            assert basis_cdf(M, a)[m] == pytest.approx(cdf, abs=1e-10)


def test_mixture_density_integrates_to_one():
    rng = np.random.default_rng(0)
    M = 15
    w = rng.dirichlet(np.ones(M + 1))
    mass, _ = quad(lambda t: bernstein_basis(M, t) @ w, 0, 1)
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_grids():
    np.testing.assert_allclose(constraint_grid(3), [0.25, 0.5, 0.75])
    np.testing.assert_allclose(constraint_grid(1, include_endpoints=True), [0, 0.5, 1])
    np.testing.assert_allclose(riemann_nodes(4), [0, 0.25, 0.5, 0.75])
    with pytest.raises(InvalidInputError):
        riemann_nodes(1)
    with pytest.raises(InvalidInputError):
        constraint_grid(0)
