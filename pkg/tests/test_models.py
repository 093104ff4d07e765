import numpy as np
import pytest

from iv_sensa.distributions import JointDiscreteDist
from iv_sensa.errors import FormMismatchError, InvalidParameterError
from iv_sensa.lp import MAXIMIZE, MINIMIZE, LinearProgram, solve_lp
from iv_sensa.models import (
    CDEP, DISCRETE_BINARY, DISCRETE_GENERAL, KS, MODEL_TAGS, MSM, ModelKind,
    build_density_constraints, build_discrete_constraints, cdep_density_minmax_rows, kz,
)

from conftest import make_d1, random_binary_dist


def test_kz_examples():
    assert kz(0.0, 0.5) == (1.0, 1.0)
    assert kz(1.0, 0.5) == (0.0, 0.0)
    np.testing.assert_allclose(kz(0.1, 0.5), (2 / 3, 2 / 3))
    with pytest.raises(InvalidParameterError):
        kz(1.5, 0.5)


def test_model_kind_validation():
    with pytest.raises(InvalidParameterError):
        ModelKind("tobit", 0.1)
    with pytest.raises(InvalidParameterError):
        ModelKind(MSM, -0.1)
    assert ModelKind(KS, 0.2).at(0.4) == ModelKind(KS, 0.4)


def test_binary_rows_examples(d1):
    msm = build_discrete_constraints(ModelKind(MSM, 0.0), d1)
    np.testing.assert_array_equal(msm.lhs, [[1, -1], [-1, 1], [-1, 1], [1, -1]])
    np.testing.assert_array_equal(msm.rhs, 0)
    ks = build_discrete_constraints(ModelKind(KS, 0.3), d1)
    np.testing.assert_array_equal(ks.lhs, [[1, -1], [-1, 1]])
    np.testing.assert_allclose(ks.rhs, 0.3)
    cd = build_discrete_constraints(ModelKind(CDEP, 0.1), d1)
    k = 2 / 3
    np.testing.assert_allclose(cd.lhs, [[k, -1], [-1, k], [-k, 1], [1, -k]])
    np.testing.assert_allclose(cd.rhs, [0, 0, 1 / 3, 1 / 3])


def test_density_rows_examples():
    ks = build_density_constraints(ModelKind(KS, 0.5), 0.5)
    np.testing.assert_allclose(ks.rhs, [1.0, 1.0])
    assert build_density_constraints(ModelKind(KS, 1.0), 0.5).n_rows == 0
    msm = build_density_constraints(ModelKind(MSM, 0.25), 0.5)
    np.testing.assert_allclose(msm.lhs, [[-1, 0.75], [0.75, -1]])


def _unit_square(rng, n=4000):
    return rng.uniform(0, 1, size=(n, 2))


@pytest.mark.parametrize("tag", MODEL_TAGS)
def test_endpoints_of_parameter_range(tag, d1):
    rng = np.random.default_rng(0)
    free = build_discrete_constraints(ModelKind(tag, 1.0), d1)
    assert all(free.satisfied(v) for v in _unit_square(rng))
    tight = build_discrete_constraints(ModelKind(tag, 0.0), d1)
    assert tight.satisfied([0.3, 0.3])
    assert not tight.satisfied([0.3, 0.31])


@pytest.mark.parametrize("tag", MODEL_TAGS)
def test_constraint_sets_nest(tag):
    rng = np.random.default_rng(1)
    for _ in range(20):
        dist = random_binary_dist(rng)
        t1, t2 = np.sort(rng.uniform(0, 1, 2))
        inner = build_discrete_constraints(ModelKind(tag, t1), dist)
        outer = build_discrete_constraints(ModelKind(tag, t2), dist)
        for v in _unit_square(rng, 500):
            if inner.satisfied(v):
                assert outer.satisfied(v, tol=1e-12)


def test_cdep_rows_depend_only_on_instrument_law():
    rng = np.random.default_rng(2)
    a, b = random_binary_dist(rng), random_binary_dist(rng)
    b = JointDiscreteDist.binary(float(a.pz[1]), b.pi[1], b.cells[1])
    for form in (DISCRETE_BINARY, DISCRETE_GENERAL):
        ra = build_discrete_constraints(ModelKind(CDEP, 0.2), a, form=form)
        rb = build_discrete_constraints(ModelKind(CDEP, 0.2), b, form=form)
        np.testing.assert_array_equal(ra.lhs, rb.lhs)
        np.testing.assert_array_equal(ra.rhs, rb.rhs)


def test_msm_rows_match_ratio_bounds(d1):
    rng = np.random.default_rng(3)
    for lam in (0.0, 0.2, 0.5, 0.9):
        big = 1 / (1 - lam)
        rows = build_discrete_constraints(ModelKind(MSM, lam), d1)
        for a0, a1 in _unit_square(rng, 2000):
            ratios = (a1 / a0, (1 - a1) / (1 - a0))
            expected = all(1 / big <= r <= big for r in ratios)
            assert rows.satisfied([a0, a1], tol=0) == expected


def _optimum(rows, eq_lhs, eq_rhs, c, sense):
    n = rows.lhs.shape[1]
    return solve_lp(LinearProgram(c, sense, rows.lhs, rows.rhs, eq_lhs, eq_rhs, np.zeros(n), np.ones(n))).value


@pytest.mark.parametrize("tag", MODEL_TAGS)
def test_general_form_matches_binary_form(tag):
    rng = np.random.default_rng(4)
    for _ in range(25):
        dist = random_binary_dist(rng)
        kind = ModelKind(tag, float(rng.uniform(0, 1)))
        c = rng.normal(size=2)
        binary = build_discrete_constraints(kind, dist, form=DISCRETE_BINARY)
        general = build_discrete_constraints(kind, dist, form=DISCRETE_GENERAL)
        # general coordinates: index j*2+i is P(Y(x)=y_i | z_j); probability of y=1 at 1 and 3
        cg = np.array([0.0, c[0], 0.0, c[1]])
        E = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
        for sense in (MINIMIZE, MAXIMIZE):
            assert _optimum(binary, None, None, c, sense) == pytest.approx(
                _optimum(general, E, np.ones(2), cg, sense), abs=1e-9)


def test_cdep_density_forms_agree():
    rng = np.random.default_rng(5)
    for _ in range(30):
        p1, c = rng.uniform(0.1, 0.9), rng.uniform(0, 1)
        kzform = build_density_constraints(ModelKind(CDEP, c), p1)
        minmax = cdep_density_minmax_rows(c, p1)
        # the k_z rows carry -1 on the diagonal
        ratio = np.diag(minmax.lhs) / np.diag(kzform.lhs)
        assert np.all(ratio > 0)
        np.testing.assert_allclose(minmax.lhs, kzform.lhs * ratio[:, None], atol=1e-12)
        for f in rng.uniform(0, 5, size=(200, 2)):
            assert kzform.satisfied(f) == minmax.satisfied(f)


def test_density_cdep_general_instrument_matches_binary():
    rng = np.random.default_rng(6)
    for _ in range(30):
        p1, c = rng.uniform(0.1, 0.9), rng.uniform(0, 1)
        binary = build_density_constraints(ModelKind(CDEP, c), p1)
        # the multi-valued branch with two instrument values
        p = np.array([1 - p1, p1])
        rows = []
        for j in range(2):
            own = np.zeros(2)
            own[j] = p[j]
            rows += [own - (p[j] + c) * p, -own + (p[j] - c) * p]
        for f in rng.uniform(0, 5, size=(200, 2)):
            assert binary.satisfied(f) == bool(np.all(np.array(rows) @ f <= 1e-12))


def test_three_valued_instrument_rows():
    pz = np.array([0.2, 0.3, 0.5])
    assert build_density_constraints(ModelKind(MSM, 0.3), pz).n_rows == 6
    assert build_density_constraints(ModelKind(CDEP, 0.3), pz).n_rows == 6
    assert build_density_constraints(ModelKind(KS, 0.3), pz).n_rows == 6
    with pytest.raises(FormMismatchError):
        kz(0.1, pz)


def test_binary_form_rejects_larger_supports():
    cells = np.zeros((3, 2, 2))
    cells[:, 0, :] = 0.5 / 3
    cells[:, 1, :] = 0.5 / 3
    dist = JointDiscreteDist((0.0, 0.5, 1.0), ("0", "1"), ("0", "1"), np.array([0.5, 0.5]),
                             np.full((2, 2), 0.5), cells)
    with pytest.raises(FormMismatchError):
        build_discrete_constraints(ModelKind(MSM, 0.1), dist, form=DISCRETE_BINARY)
    general = build_discrete_constraints(ModelKind(KS, 0.1), dist)
    assert general.form == DISCRETE_GENERAL and general.n_rows == 4
    # discrete-general and density forms must not be mixed up
    with pytest.raises(FormMismatchError):
        build_discrete_constraints(ModelKind(MSM, 0.1), make_d1(), form="density")
