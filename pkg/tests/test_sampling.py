import numpy as np
import pytest
from scipy import stats

from invarcdf.estimator import weighted_solve
from invarcdf.model import LossSpec, WeightFunction
from invarcdf.risk import Sampler
from invarcdf.sampling import (
    NominationScheme,
    empirical_cdf,
    generate,
    nominated_cdf,
    true_tau_curve,
)
from invarcdf.special import BetaIndex, reg_inc_beta


class TestScheme:
    def test_validation(self):
        with pytest.raises(ValueError):
            NominationScheme(kind="midrange", k=3, n=10)
        with pytest.raises(ValueError):
            NominationScheme(kind="median", k=4, n=10)
        with pytest.raises(ValueError):
            NominationScheme(kind="maxima", k=5, n=1)

    def test_recovery_transform_kinds(self):
        assert NominationScheme("maxima", 5, 10).recovery_transform.m == pytest.approx(0.2)
        assert NominationScheme("minima", 5, 10).recovery_transform.kind == "minima"
        assert NominationScheme("median", 5, 10).recovery_transform.kind == "median_nom"


class TestGenerate:
    def test_deterministic(self):
        scheme = NominationScheme("maxima", 5, 10)
        a = generate(scheme, Sampler("normal"), seed=42)
        b = generate(scheme, Sampler("normal"), seed=42)
        np.testing.assert_array_equal(a, b)
        assert len(a) == 10

    def test_k1_is_plain_sample(self):
        # singleton sets: maxima and minima coincide with the raw draws
        a = generate(NominationScheme("maxima", 1, 20), Sampler("uniform01"), seed=1)
        b = generate(NominationScheme("minima", 1, 20), Sampler("uniform01"), seed=1)
        np.testing.assert_array_equal(a, b)

    def test_maxima_ks(self):
        data = generate(NominationScheme("maxima", 5, 10_000), Sampler("uniform01"), seed=0)
        stat = stats.kstest(data, lambda t: np.clip(t, 0, 1) ** 5).statistic
        assert stat < 1.63 / np.sqrt(10_000)  # 1% critical value

    def test_median_ks(self):
        data = generate(NominationScheme("median", 5, 10_000), Sampler("uniform01"), seed=0)
        stat = stats.kstest(data, lambda t: reg_inc_beta(np.clip(t, 0, 1), 3, 3)).statistic
        assert stat < 1.63 / np.sqrt(10_000)

    def test_minima_ks(self):
        data = generate(NominationScheme("minima", 4, 10_000), Sampler("uniform01"), seed=0)
        stat = stats.kstest(data, lambda t: 1 - (1 - np.clip(t, 0, 1)) ** 4).statistic
        assert stat < 1.63 / np.sqrt(10_000)


class TestNominatedCdf:
    def test_formulas(self):
        F = np.linspace(0, 1, 11)
        np.testing.assert_allclose(
            nominated_cdf(NominationScheme("maxima", 3, 5), F), F**3, atol=1e-14
        )
        np.testing.assert_allclose(
            nominated_cdf(NominationScheme("minima", 3, 5), F), 1 - (1 - F) ** 3, atol=1e-14
        )
        np.testing.assert_allclose(
            nominated_cdf(NominationScheme("median", 5, 5), F), reg_inc_beta(F, 3, 3), atol=1e-12
        )


class TestTrueTauCurve:
    def test_curve_is_base_cdf(self):
        # tau undoes the scheme exactly
        grid = np.linspace(0.05, 0.95, 10)
        smp = Sampler("uniform01")
        for scheme in (
            NominationScheme("maxima", 5, 10),
            NominationScheme("minima", 3, 10),
            NominationScheme("median", 5, 10),
        ):
            curve = true_tau_curve(scheme, smp.cdf, grid)
            ys = np.array([y for _, y in curve])
            np.testing.assert_allclose(ys, grid, atol=1e-9)

    def test_normal_median_at_zero(self):
        curve = true_tau_curve(NominationScheme("median", 5, 10), Sampler("normal").cdf, [0.0])
        assert curve[0][1] == pytest.approx(0.5, abs=1e-9)

    def test_k1_is_identity(self):
        grid = np.linspace(0.1, 0.9, 9)
        curve = true_tau_curve(NominationScheme("maxima", 1, 10), Sampler("uniform01").cdf, grid)
        np.testing.assert_allclose([y for _, y in curve], grid, atol=1e-12)


class TestEmpiricalCdf:
    def test_levels(self):
        est = empirical_cdf([3.0, 1.0, 4.0, 2.0])
        assert est.values.u == (0.0, 0.25, 0.5, 0.75, 1.0)
        assert est.tail_value == 1.0
        assert est.evaluate(0.5) == 0.0
        assert est.evaluate(10.0) == 1.0

    def test_matches_recip_weighted_solution(self):
        n = 4
        loss = LossSpec("squared", H=WeightFunction("recip"))
        u = [weighted_solve(BetaIndex(i, n), loss) for i in range(n + 1)]
        est = empirical_cdf([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(est.values.as_array(), u, atol=1e-9)

    def test_requires_data(self):
        with pytest.raises(ValueError):
            empirical_cdf([])
