import numpy as np
import pytest

from iv_sensa.bernstein import basis_mean
from iv_sensa.continuous import (
    EXACT, RIEMANN, SieveConfig, WeightMatrices, arm_program, ate_bounds_continuous, ate_functional,
    build_sieve_lp, cdf_bounds, custom_functional, falsification_point_continuous, functional_bounds,
    functional_bounds_unit, mean_functional, objective_coefficients, qte_bounds, refutation_check,
    sensitivity_curve_continuous, sieve_feasible,
)
from iv_sensa.distributions import Dataset, estimate_cond_density, rescale_outcome
from iv_sensa.errors import BuildError, InvalidParameterError
from iv_sensa.lp import MAXIMIZE, MINIMIZE, solve_lp
from iv_sensa.models import CDEP, KS, MSM, ModelKind

from conftest import refuted_table, synthetic_table, true_ate

SMALL = SieveConfig(M=6, N=24, L=128)


@pytest.fixture(scope="module")
def synth():
    return synthetic_table(SMALL.M, seed=3)


def test_full_lp_shape():
    table, _ = synthetic_table(3, seed=0)
    cfg = SieveConfig(M=3, N=5, L=64)
    prog = build_sieve_lp(table, ModelKind(MSM, 0.2), cfg, ate_functional(table.pz))
    assert prog.n_vars == 4 * table.s_z * (cfg.M + 1)
    # two MSM rows per grid point and arm
    assert prog.ineq_lhs.shape[0] == 2 * 2 * cfg.N
    arm, _ = arm_program(table, ModelKind(MSM, 0.2), cfg, 1)
    assert arm.ineq_lhs.shape[0] == 10
    free, _ = arm_program(table, ModelKind(KS, 1.0), cfg, 1)
    assert free.ineq_lhs.shape[0] == 0


@pytest.mark.parametrize("kind", [ModelKind(MSM, 0.3), ModelKind(CDEP, 0.05), ModelKind(KS, 0.2)])
def test_full_lp_matches_per_arm_split(kind):
    M = 4
    table, _ = synthetic_table(M, seed=1)
    cfg = SieveConfig(M=M, N=12, L=64)
    spec = ate_functional(table.pz)
    split = functional_bounds_unit(table, kind, cfg, spec)
    for sense, expected in ((MINIMIZE, split.lower), (MAXIMIZE, split.upper)):
        sol = solve_lp(build_sieve_lp(table, kind, cfg, spec, sense))
        assert sol.value == pytest.approx(expected, abs=1e-8)
        W = WeightMatrices.from_vector(sol.argument, table.s_z, M)
        assert W.max_simplex_violation() < 1e-8
        np.testing.assert_allclose(WeightMatrices.from_vector(W.vector(), table.s_z, M).W10, W.W10)


def test_truth_is_contained(synth):
    table, u = synth
    truth = true_ate(u, SMALL.M)
    exact = SieveConfig(M=SMALL.M, N=SMALL.N, L=SMALL.L, quadrature=EXACT)
    for tag in (MSM, CDEP, KS):
        iv = ate_bounds_continuous(table, ModelKind(tag, 0.0), exact)
        assert iv.contains(truth, tol=1e-9)
        riemann = ate_bounds_continuous(table, ModelKind(tag, 0.0), SMALL)
        assert riemann.contains(truth, tol=2.0 / SMALL.L)


def test_bounds_nest_and_stay_in_range(synth):
    table, _ = synth
    thetas = [0.0, 0.05, 0.2, 0.5, 1.0]
    for tag in (MSM, CDEP, KS):
        curve = sensitivity_curve_continuous(table, tag, SMALL, thetas)
        assert curve.nesting_violations(tol=1e-9) == 0
        for r in curve.rows:
            assert -1 - 1e-9 <= r.lower <= r.upper <= 1 + 1e-9


def test_mean_bounds_at_independence_bracket_truth(synth):
    table, u = synth
    exact = SieveConfig(M=SMALL.M, N=SMALL.N, L=SMALL.L, quadrature=EXACT)
    for arm in (0, 1):
        iv = functional_bounds(table, ModelKind(CDEP, 0.0), exact, mean_functional(table.pz, arm))
        assert iv.contains(float(u[arm] @ basis_mean(SMALL.M)), tol=1e-9)


def test_cdf_band_endpoints_and_monotone(synth):
    table, _ = synth
    band = cdf_bounds(table, ModelKind(CDEP, 0.1), SMALL, 1, np.linspace(0, 1, 41))
    assert band.feasible
    assert band.lower[-1] == pytest.approx(1.0, abs=1e-9) and band.upper[-1] == pytest.approx(1.0, abs=1e-9)
    assert band.lower[0] == pytest.approx(0.0, abs=1e-9)
    assert np.all(np.diff(band.lower) >= 0) and np.all(np.diff(band.upper) >= 0)
    assert np.all(band.lower <= band.upper + 1e-12)


def test_qte_nests(synth):
    table, _ = synth
    grid = np.linspace(0, 1, 65)
    ivs = [qte_bounds(table, ModelKind(CDEP, c), SMALL, 0.25, grid) for c in (0.0, 0.02, 0.1)]
    assert all(iv.feasible for iv in ivs)
    assert ivs[0].within(ivs[1]) and ivs[1].within(ivs[2])
    with pytest.raises(InvalidParameterError):
        qte_bounds(table, ModelKind(CDEP, 0.0), SMALL, 1.0)


def test_refutation_examples(synth):
    table, _ = synth
    assert not refutation_check(table).refuted
    bad = refuted_table(10)
    res = refutation_check(bad)
    assert res.refuted
    # 2 * pi * int_0^1/2 b_0 = 2 * pi * (1 - 2^-(M+1))
    assert res.integrals[1] == pytest.approx(1.2 * (1 - 0.5 ** 11), abs=0.01)
    assert res.integrals[0] == pytest.approx(0.8 * (1 - 0.5 ** 11), abs=0.01)


def test_refuted_table_needs_positive_theta():
    table = refuted_table(6)
    cfg = SieveConfig(M=6, N=24, L=128)
    assert not sieve_feasible(table, ModelKind(CDEP, 0.0), cfg)
    fp = falsification_point_continuous(table, CDEP, cfg, tol=1e-5)
    assert fp > 0
    assert sieve_feasible(table, ModelKind(CDEP, fp), cfg)
    assert not sieve_feasible(table, ModelKind(CDEP, max(fp - 1e-4, 0.0)), cfg)
    assert not ate_bounds_continuous(table, ModelKind(CDEP, 0.0), cfg).feasible


def test_riemann_converges_to_exact(synth):
    table, _ = synth
    spec = ate_functional(table.pz)
    fine = objective_coefficients(table, SieveConfig(M=SMALL.M, L=10_000), spec)
    exact = objective_coefficients(table, SieveConfig(M=SMALL.M, quadrature=EXACT), spec)
    rng = np.random.default_rng(0)
    for _ in range(50):
        W = [rng.dirichlet(np.ones(SMALL.M + 1), size=table.s_z) for _ in range(2)]
        gap = sum(np.sum((g - e) * w) for g, e, w in zip(fine, exact, W))
        assert abs(gap) < 1e-4


def test_custom_functional_needs_quadrature(synth):
    table, _ = synth
    spec = custom_functional(None, lambda y: np.outer(y ** 2, table.pz))
    iv = functional_bounds(table, ModelKind(KS, 1.0), SMALL, spec)
    assert 0 <= iv.lower <= iv.upper <= 1
    with pytest.raises(InvalidParameterError):
        functional_bounds(table, ModelKind(KS, 1.0), SieveConfig(M=SMALL.M, quadrature=EXACT), spec)


def test_degree_mismatch(synth):
    table, _ = synth
    with pytest.raises(BuildError):
        ate_bounds_continuous(table, ModelKind(KS, 0.1), SieveConfig(M=SMALL.M + 1))


def _smooth_sample(n, rng):
    z = rng.integers(0, 2, n)
    x = (rng.uniform(size=n) < 0.3 + 0.4 * z).astype(int)
    y = rng.beta(2 + x, 3, size=n)
    return Dataset(2 + 4 * y, x, z)


def test_sieve_refinement_is_stable():
    # heuristic check: doubling every sieve size moves the bounds little
    rng = np.random.default_rng(7)
    data, amap = rescale_outcome(_smooth_sample(4000, rng))
    out = []
    for M, N, L in ((8, 32, 256), (16, 64, 512)):
        table = estimate_cond_density(data, M, affine_map=amap)
        out.append(ate_bounds_continuous(table, ModelKind(CDEP, 0.1), SieveConfig(M=M, N=N, L=L)))
    scale = amap.scale
    assert abs(out[0].lower - out[1].lower) < 0.05 * scale
    assert abs(out[0].upper - out[1].upper) < 0.05 * scale


def test_data_pipeline_in_original_units():
    rng = np.random.default_rng(8)
    data, amap = rescale_outcome(_smooth_sample(3000, rng))
    table = estimate_cond_density(data, 8, affine_map=amap)
    cfg = SieveConfig(M=8, N=32, L=256)
    wide = ate_bounds_continuous(table, ModelKind(KS, 1.0), cfg)
    assert -amap.scale <= wide.lower < wide.upper <= amap.scale
    band = cdf_bounds(table, ModelKind(KS, 0.3), cfg, 1, np.linspace(0, 1, 17))
    np.testing.assert_allclose(band.levels(table)[[0, -1]], [amap.shift, amap.shift + amap.scale])
    assert cfg.quadrature == RIEMANN
