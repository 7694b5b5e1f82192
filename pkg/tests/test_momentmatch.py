"""Rescaling constants and the end-to-end EVSI estimator."""

import warnings

import numpy as np
import pytest

from evsikit.casemodels import (
    ConjugateToy,
    analytic_preposterior,
    get_design,
    get_model,
    quadratic_exact_evsi,
)
from evsikit.model import DecisionModel, InbSamples, compute_inb, run_psa
from evsikit.momentmatch import (
    EvsiOptions,
    compute_constants,
    estimate_evsi,
    evsi_from_rescaled,
)
from evsikit.oracles import closed_form_normal_evsi, enumeration_evsi
from evsikit.rng import DistSpec, SeedSpec
from evsikit.util import ComputationError, DegenerateModelError


def _standardised_inb(k=10000.0, n=50000, seed=0):
    """Synthetic INB samples with mean exactly 0 and variance exactly k^2."""
    x = SeedSpec(seed).generator().standard_normal(n)
    x = (x - x.mean()) / x.std(ddof=1) * k
    return InbSamples.from_values(x)


class TestComputeConstants:
    def test_no_information_collapses_to_prior_mean(self):
        inb = InbSamples.from_values([1.0, 3.0, 5.0])
        a, b = compute_constants(0.0, inb)
        assert a == 0.0 and b == pytest.approx(3.0)

    def test_full_information_is_identity(self):
        inb = _standardised_inb()
        a, b = compute_constants(np.var(inb.inb_theta, ddof=1), inb)
        assert a == pytest.approx(1.0) and b == pytest.approx(0.0, abs=1e-9)

    def test_normal_normal_closed_form_constants(self):
        # sigma2 = k^2 * 0.9 for a unit prior, unit data variance and N = 9
        inb = _standardised_inb(k=10000.0)
        a, b = compute_constants(0.9 * 10000.0**2, inb)
        assert a == pytest.approx(np.sqrt(0.9))
        assert b == pytest.approx(0.0, abs=1e-9)

    def test_noise_excess_clamps(self):
        inb = _standardised_inb()
        var = np.var(inb.inb_theta, ddof=1)
        with pytest.warns(UserWarning, match="clamping"):
            a, _ = compute_constants(var * 1.03, inb)
        assert a == 1.0

    def test_structural_excess_scales_up(self):
        inb = _standardised_inb()
        var = np.var(inb.inb_theta, ddof=1)
        with pytest.warns(UserWarning, match="outside"):
            a, _ = compute_constants(var * 1.2, inb)
        assert a == pytest.approx(np.sqrt(1.2))

    def test_degenerate_variance_rejected(self):
        with pytest.raises(DegenerateModelError):
            compute_constants(1.0, InbSamples.from_values([2.0, 2.0, 2.0]))


class TestEvsiFromRescaled:
    def test_all_negative(self):
        assert evsi_from_rescaled(np.array([-5.0, -1.0])) == 0.0

    def test_all_positive(self):
        assert evsi_from_rescaled(np.array([2.0, 4.0])) == 0.0

    def test_symmetric_pair(self):
        assert evsi_from_rescaled(np.array([-1.0, 1.0])) == pytest.approx(0.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evsi_from_rescaled(np.array([]))


class TestEstimateEvsi:
    def test_normal_normal_matches_closed_form(self):
        model = get_model("normal_normal", k=10000.0)
        design = get_design(model, "trial", n=9)
        psa = run_psa(model, 100000, SeedSpec(20))
        result = estimate_evsi(model, design, psa, EvsiOptions(Q=10, M=10000,
                                                               seed=SeedSpec(21)))
        oracle = closed_form_normal_evsi(ConjugateToy("normal_normal", 9))
        tol = max(0.01 * oracle.evsi, 3 * result.evsi_se)
        assert abs(result.evsi - oracle.evsi) <= tol

    def test_beta_binomial_close_to_enumeration(self):
        model = get_model("beta_binomial")
        design = get_design(model, "trial", n=10)
        psa = run_psa(model, 100000, SeedSpec(22))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # small discrete study advisory
            result = estimate_evsi(model, design, psa,
                                   EvsiOptions(Q=30, M=5000, seed=SeedSpec(23)))
        oracle = enumeration_evsi(ConjugateToy("beta_binomial_uniform", 10))
        assert abs(result.evsi - oracle.evsi) <= 0.02 * oracle.evsi

    def test_quadratic_model_upward_bias_band(self):
        model = get_model("quadratic_normal")
        design = get_design(model, "trial")
        psa = run_psa(model, 10000, SeedSpec(24))
        result = estimate_evsi(model, design, psa,
                               EvsiOptions(Q=30, M=1000, burn_in=0, seed=SeedSpec(25)))
        assert 1.9 <= result.evsi <= 2.25
        assert result.evsi >= 0.9 * quadratic_exact_evsi(model, 10)

    def test_small_discrete_study_warns(self):
        model = get_model("beta_binomial")
        design = get_design(model, "trial", n=5)
        psa = run_psa(model, 5000, SeedSpec(26))
        with pytest.warns(UserWarning, match="discrete"):
            estimate_evsi(model, design, psa, EvsiOptions(Q=5, M=1000, seed=SeedSpec(27)))

    def test_underresolved_variance_fails_loudly(self):
        # data depend only on the focal input here, so a beyond-slack excess
        # of sigma2 over the conditional variance must abort, not rescale;
        # the tiny quadrature budget and this seed produce such an excess
        model = get_model("two_param_linear")
        design = get_design(model, "trial")
        psa = run_psa(model, 3000, SeedSpec(501))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(ComputationError, match="focal"):
                estimate_evsi(model, design, psa,
                              EvsiOptions(Q=3, M=1000, seed=SeedSpec(601)))

    def test_stage_label_on_model_failure(self):
        def broken(cols):
            raise RuntimeError("boom")

        model = DecisionModel(
            name="broken",
            priors={"x": DistSpec("uniform", 0, 1)},
            n_treatments=2,
            net_benefit=broken,
        )
        design = get_design(get_model("beta_binomial"), "trial", n=25)
        psa = run_psa(get_model("beta_binomial"), 1000, SeedSpec(28))
        psa.columns["x"] = psa.columns.pop("p_success")
        psa.param_names = ("x",)
        with pytest.raises(ComputationError, match="net_benefit"):
            estimate_evsi(model, design, psa, EvsiOptions(Q=2, M=1000, seed=SeedSpec(29)))


class TestInvariance:
    def _run(self, model, seed=30):
        design = get_design(get_model("normal_normal", k=model.params["k"]),
                            "trial", n=9)
        # rebuild the design against the modified model so recipes match
        design = get_design(model, "trial", n=9) if model.name == "normal_normal" else design
        psa = run_psa(model, 30000, SeedSpec(seed))
        return estimate_evsi(model, design, psa,
                             EvsiOptions(Q=10, M=5000, seed=SeedSpec(seed + 1)))

    def test_common_offset_leaves_evsi_unchanged(self):
        base = get_model("normal_normal", k=10000.0, c=2000.0)
        result_base = self._run(base)

        offset = 777777.0
        shifted = DecisionModel(
            name="normal_normal",
            priors=base.priors,
            n_treatments=2,
            net_benefit=lambda cols: base.net_benefit(cols) + offset,
            comparison=base.comparison,
            params=base.params,
        )
        result_shifted = self._run(shifted)
        scale = 1.0 + abs(result_base.evsi)
        assert abs(result_shifted.evsi - result_base.evsi) <= 1e-9 * scale

    def test_positive_rescaling_scales_evsi_exactly(self):
        base = get_model("normal_normal", k=10000.0, c=2000.0)
        result_base = self._run(base)

        factor = 3.0
        scaled = DecisionModel(
            name="normal_normal",
            priors=base.priors,
            n_treatments=2,
            net_benefit=lambda cols: base.net_benefit(cols) * factor,
            comparison=base.comparison,
            params=base.params,
        )
        result_scaled = self._run(scaled)
        assert result_scaled.evsi == pytest.approx(factor * result_base.evsi, rel=1e-9)

    def test_a_within_unit_interval_without_clamping(self):
        for name, n in (("beta_binomial", 25), ("normal_normal", 9), ("exp_gamma", 10)):
            model = get_model(name)
            design = get_design(model, "trial", n=n)
            psa = run_psa(model, 20000, SeedSpec(31))
            result = estimate_evsi(model, design, psa,
                                   EvsiOptions(Q=10, M=2000, seed=SeedSpec(32)))
            assert 0.0 <= result.a <= 1.0
            assert not result.a_clamped

    def test_monotone_in_future_sample_size(self):
        model = get_model("beta_binomial")
        psa = run_psa(model, 50000, SeedSpec(33))
        estimates, ses = [], []
        for i, n in enumerate((10, 20, 50, 100)):
            design = get_design(model, "trial", n=n)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = estimate_evsi(model, design, psa,
                                    EvsiOptions(Q=20, M=2000, seed=SeedSpec(34 + i)))
            estimates.append(res.evsi)
            ses.append(res.evsi_se)
        for i in range(3):
            slack = 2 * np.hypot(ses[i], ses[i + 1])
            assert estimates[i + 1] >= estimates[i] - slack

    def test_moment_identities_of_rescaled_sample(self):
        model = get_model("exp_gamma")
        design = get_design(model, "trial", n=10)
        psa = run_psa(model, 20000, SeedSpec(38))
        result = estimate_evsi(model, design, psa,
                               EvsiOptions(Q=10, M=2000, seed=SeedSpec(39)))
        inb = compute_inb(model, psa)
        m = np.mean(inb.inb_theta)
        assert abs(np.mean(result.rescaled) - m) <= 1e-6 * (1 + abs(m))
        s2 = result.variance_estimate.sigma2
        assert abs(np.var(result.rescaled, ddof=1) - s2) <= 1e-6 * (1 + s2)

    def test_ordering_against_analytic_values(self):
        # analytic EVSI never exceeds analytic EVPI for the toys
        for variant, N in (("beta_binomial_uniform", 10), ("exp_gamma", 20),
                           ("normal_normal", 9)):
            toy = ConjugateToy(variant, N)
            summary = analytic_preposterior(toy)
            assert summary.evsi >= 0.0
