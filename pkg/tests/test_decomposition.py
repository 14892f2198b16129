import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sim_draw
from endomed.decomposition import (
    ALL_METHODS,
    EFFECTS,
    Method,
    decompose,
    group_mean_difference,
)
from endomed.designs import Dataset
from endomed.errors import DegenerateMediator, EmptyGroup
from endomed.simulation import SimulationDesign, run_monte_carlo, true_effects


def _small(seed=0, n=400, k=3, y=None):
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((n, k - 1))
    d = (rng.random(n) < 0.5).astype(float)
    z = (rng.random(n) < 0.5).astype(float)
    m = (0.3 * d + 0.6 * z + 0.2 * x0[:, 0] + rng.standard_normal(n) > 0.5).astype(float)
    x = np.column_stack([np.ones(n), x0])
    if y is None:
        y = 0.4 * d + m + 0.3 * d * m + x0.sum(axis=1) + rng.standard_normal(n)
    return Dataset(y=y, d=d, m=m, z=z, x=x)


class TestExactFits:
    @pytest.mark.parametrize("method", ALL_METHODS)
    def test_outcome_equals_treatment(self, method):
        data = _small()
        res = decompose(data.with_y(data.d.copy()), method)
        assert res.total.estimate == pytest.approx(1.0, abs=1e-10)
        assert res.direct.estimate == pytest.approx(1.0, abs=1e-10)
        assert res.indirect.estimate == pytest.approx(0.0, abs=1e-10)
        for name in EFFECTS:
            assert res[name].se == pytest.approx(0.0, abs=1e-10)
            assert res[name].degenerate
            assert res[name].t_value == 0.0

    @pytest.mark.parametrize("method", ALL_METHODS)
    def test_null_outcome(self, method):
        data = _small()
        res = decompose(data.with_y(np.zeros(data.n)), method)
        for name in EFFECTS:
            assert res[name].estimate == 0.0
            assert res[name].se == 0.0


class TestProperties:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(ALL_METHODS))
    def test_additivity(self, seed, method):
        res = decompose(_small(seed), method)
        assert res.indirect.estimate == res.total.estimate - res.direct.estimate
        for name in EFFECTS:
            e = res[name]
            assert e.t_value == e.estimate / e.se

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(ALL_METHODS), st.floats(-50, 50).filter(lambda c: abs(c) > 1e-2))
    def test_scale_equivariance(self, seed, method, c):
        data = _small(seed)
        a = decompose(data, method)
        b = decompose(data.with_y(c * data.y), method, theta=a.theta)
        for name in EFFECTS:
            assert b[name].estimate == pytest.approx(c * a[name].estimate, rel=1e-9, abs=1e-12)
            assert b[name].se == pytest.approx(abs(c) * a[name].se, rel=1e-9)
            assert b[name].t_value == pytest.approx(np.sign(c) * a[name].t_value, abs=1e-10)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([Method.OLS_EXOG, Method.IVE1]))
    def test_affine_covariate_invariance(self, seed, method):
        data = _small(seed)
        rng = np.random.default_rng(seed + 1)
        A = np.eye(3)
        A[0, 1:] = rng.normal(size=2)  # shifts keep the intercept column intact
        A[1:, 1:] = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        moved = Dataset(y=data.y, d=data.d, m=data.m, z=data.z, x=data.x @ A)
        a, b = decompose(data, method), decompose(moved, method)
        for name in EFFECTS:
            assert b[name].estimate == pytest.approx(a[name].estimate, abs=1e-8)

    def test_score_methods_share_probit(self):
        data = _small(3)
        a = decompose(data, "ive2")
        b = decompose(data, "ive3", theta=a.theta)
        assert a.j == 2 and b.j == 3
        np.testing.assert_array_equal(a.theta, b.theta)
        assert decompose(data, "ive1").j is None

    def test_influence_bundle(self):
        res = decompose(_small(4), "ive1")
        lam = res.influence
        assert lam.lambda1.shape == lam.lambda2.shape == (400,)
        se = np.sqrt(np.mean(lam.indirect**2) / 400)
        assert res.indirect.se == pytest.approx(se, rel=1e-12)

    def test_constant_mediator(self):
        data = _small()
        flat = Dataset(y=data.y, d=data.d, m=np.ones(data.n), z=data.z, x=data.x)
        with pytest.raises(DegenerateMediator):
            decompose(flat, "ive1")

    def test_method_parsing(self):
        assert Method.parse("IVE2") is Method.IVE2
        assert Method.parse("ols") is Method.OLS_EXOG
        with pytest.raises(ValueError):
            Method.parse("2sls")


class TestGroupMeanDifference:
    def test_arithmetic(self):
        data = Dataset(
            y=np.array([1.0, 2, 3, 4]), d=np.array([0.0, 0, 1, 1]), m=np.zeros(4), z=np.zeros(4), x=np.ones((4, 1))
        )
        assert group_mean_difference(data) == 2.0
        assert group_mean_difference(data.with_y(np.full(4, 7.0))) == 0.0

    def test_empty_group(self):
        data = Dataset(y=np.ones(3), d=np.ones(3), m=np.zeros(3), z=np.zeros(3), x=np.ones((3, 1)))
        with pytest.raises(EmptyGroup):
            group_mean_difference(data)


class TestSimulatedDraws:
    def test_ive_direct_unbiased_where_ols_is_not(self):
        data, pot = sim_draw(seed=2024)
        truth = true_effects(pot, data.z)
        ive = decompose(data, "ive1")
        ols = decompose(data, "ols")
        assert abs(ive.direct.estimate - truth.direct) <= 3 * ive.direct.se
        assert abs(ols.direct.estimate - truth.direct) > 3 * ols.direct.se

    def test_score_design_decomposition(self):
        data, pot = sim_draw(seed=99)
        truth = true_effects(pot, data.z)
        res = decompose(data, "ive2")
        for name in EFFECTS:
            assert abs(res[name].estimate - truth[name]) <= 3 * res[name].se

    def test_agreement_under_exogenous_mediator(self):
        design = SimulationDesign("continuous", "exogenous", n=4000, reps=60, seed=5, methods=("ols", "ive1"))
        rep = run_monte_carlo(design)
        np.testing.assert_array_equal(rep.estimates[:, 0, 0], rep.estimates[:, 1, 0])
        diff = rep.estimates[:, 0, 1] - rep.estimates[:, 1, 1]
        mc_se = diff.std(ddof=1) / np.sqrt(len(diff))
        assert abs(diff.mean()) <= 3 * mc_se
