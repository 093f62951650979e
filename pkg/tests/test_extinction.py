import math

import numpy as np
import pytest

from sgrlab import (
    EnvironmentChain,
    ModelSpec,
    RichPoorSpec,
    SimParams,
    ValidationError,
    all_bounds,
    analyze_delta,
    classify,
    delta_threshold_closed,
    delta_threshold_numeric,
    estimate_sgr,
)
from sgrlab.extinction import lower_bound_value

from conftest import leslie2_model, leslie_rho

CASE_A = RichPoorSpec(f=0.55, F=1.35, s=0.45, pi1=0.5)
CASE_B = RichPoorSpec(f=0.5, F=1.3, s=0.5, pi1=0.9)
CASE_C = RichPoorSpec(f=0.7, F=1.1, s=0.4, pi1=0.5)


class TestRichPoorSpec:
    def test_requires_supercritical_rich_environment(self):
        with pytest.raises(ValidationError, match="f \\+ s\\*F > 1"):
            RichPoorSpec(f=0.3, F=1.0, s=0.5, pi1=0.5)

    def test_delta_domain(self):
        with pytest.raises(ValidationError, match="delta"):
            RichPoorSpec(f=0.55, F=1.35, s=0.45, pi1=0.5, delta=1.35)

    def test_pi1_domain(self):
        with pytest.raises(ValidationError, match="pi1"):
            RichPoorSpec(f=0.55, F=1.35, s=0.45, pi1=1.0)

    def test_model_structure(self):
        model = CASE_A.model(0.2)
        assert np.allclose(model.envs.matrices[0], [[0.55, 1.35], [0.45, 0.0]])
        assert np.allclose(model.envs.matrices[1], [[0.55, 1.15], [0.45, 0.0]])
        assert model.chain.pi.tolist() == [0.5, 0.5]


class TestClosedFormThresholds:
    def test_case_a_column_sum_family(self):
        # f + s = 1.0, pi1 = 0.5: exponent term is exactly 1
        assert delta_threshold_closed(CASE_A, "I") == pytest.approx(0.35, abs=1e-12)

    def test_case_a_min_matrix_family_ties(self):
        assert delta_threshold_closed(CASE_A, "IV") == pytest.approx(0.35, abs=1e-12)

    def test_case_b_values(self):
        rho1 = leslie_rho(0.5, 1.3, 0.5)
        expected_iii = 1.3 * (1.0 - rho1 ** (1.0 / (0.9 - 1.0)))
        assert delta_threshold_closed(CASE_B, "III") == pytest.approx(expected_iii, abs=1e-12)
        assert expected_iii == pytest.approx(0.7710867, abs=1e-7)
        assert delta_threshold_closed(CASE_B, "IV") == pytest.approx(0.3, abs=1e-12)

    def test_case_c_families_coincide(self):
        # f + s = F = rho(A1) = 1.1 makes the two closed forms agree
        assert delta_threshold_closed(CASE_C, "I") == pytest.approx(
            delta_threshold_closed(CASE_C, "III"), abs=1e-12
        )
        assert delta_threshold_closed(CASE_C, "III") == pytest.approx(0.1909091, abs=1e-7)

    def test_small_fertility_branch_certifies_nothing(self):
        # F < 1 branch: already at delta = 0 the bound is log F < 0, so the
        # (negative) formula value clamps to 0
        spec = RichPoorSpec(f=0.8, F=0.9, s=0.9, pi1=0.7)
        assert 0.9 * (1.0 - 0.9 ** (1.0 / (0.7 - 1.0))) < 0
        assert delta_threshold_closed(spec, "I") == 0.0
        assert delta_threshold_numeric(spec, "I") == 0.0

    def test_negative_formula_clamps_to_zero(self):
        # rich environment via adult fertility: f << 1 makes the min-matrix
        # threshold formula negative, so it certifies nothing
        spec = RichPoorSpec(f=0.2, F=3.0, s=0.5, pi1=0.5)
        assert delta_threshold_closed(spec, "IV") == pytest.approx(
            max(0.0, 3.0 - 0.8 / 0.5), abs=1e-12
        )
        spec2 = RichPoorSpec(f=0.05, F=25.0, s=0.05, pi1=0.5)
        assert delta_threshold_closed(spec2, "IV") == pytest.approx(25.0 - 19.0, abs=1e-9)

    def test_supercritical_juvenile_rate_certifies_everything(self):
        # f > 1: the min matrix grows for every delta < F
        spec = RichPoorSpec(f=1.2, F=1.0, s=0.5, pi1=0.5)
        assert delta_threshold_closed(spec, "IV") == pytest.approx(spec.max_delta, abs=1e-9)

    def test_unknown_family(self):
        with pytest.raises(ValidationError, match="closed form"):
            delta_threshold_closed(CASE_A, "V")

    def test_fertility_exactly_one_uses_numeric_path(self):
        spec = RichPoorSpec(f=0.6, F=1.0, s=0.9, pi1=0.5)
        # min column sum of the poor environment is 1 - delta: never above 1
        assert delta_threshold_closed(spec, "I") == 0.0


class TestNumericThresholds:
    def test_matches_closed_form_family_iii(self):
        expected = delta_threshold_closed(CASE_B, "III")
        assert delta_threshold_numeric(CASE_B, "III", tol=1e-9) == pytest.approx(
            expected, abs=1e-9
        )

    def test_matches_closed_form_family_iv(self):
        expected = delta_threshold_closed(CASE_A, "IV")
        assert delta_threshold_numeric(CASE_A, "IV", tol=1e-10) == pytest.approx(
            expected, abs=1e-9
        )

    def test_case_c_structure_family_wins(self):
        v = delta_threshold_numeric(CASE_C, "V")
        assert v > delta_threshold_closed(CASE_C, "IV") == pytest.approx(0.35, abs=1e-12)
        assert v > delta_threshold_closed(CASE_C, "III")

    def test_flat_column_sum_bound_certifies_nothing(self):
        # Case A: c_I(0) = 0, not > 0
        assert delta_threshold_numeric(CASE_A, "I") == 0.0

    def test_callable_bound(self):
        root = delta_threshold_numeric(CASE_B, lambda d: 0.5 - d)
        assert root == pytest.approx(0.5, abs=1e-9)

    def test_simulated_root_is_at_least_certified(self):
        sim = SimParams(samples=120, steps=250, burn_in=50, seed=5)

        def simulated(delta):
            return estimate_sgr(CASE_B.model(delta), sim).log_sgr_mean

        root = delta_threshold_numeric(CASE_B, simulated, tol=1e-4)
        assert root >= delta_threshold_closed(CASE_B, "III") - 0.02

    def test_bound_monotone_in_delta(self):
        for spec in (CASE_A, CASE_B, CASE_C):
            grid = np.linspace(0.0, spec.F * 0.95, 25)
            for family in ("I", "II", "III", "IV", "V"):
                values = [lower_bound_value(spec, d, family) for d in grid]
                assert all(a >= b - 1e-12 for a, b in zip(values, values[1:])), family

    def test_certified_thresholds_are_sufficient(self):
        # strictly below a positive threshold the family's bound certifies
        # non-extinction; families II-V certify strict growth, while the
        # column-sum formula can sit exactly at 0 on boundary configurations
        # (Case A has f + s = 1, where c_I == 0 below its threshold)
        sim = SimParams(samples=120, steps=250, burn_in=50, seed=13)
        for spec in (CASE_A, CASE_B, CASE_C):
            analysis = analyze_delta(spec)
            for key, family in (
                ("Delta_I", "I"), ("Delta_II_numeric", "II"), ("Delta_III", "III"),
                ("Delta_IV", "IV"), ("Delta_V_numeric", "V"),
            ):
                threshold = analysis.thresholds[key]
                if threshold <= 0:
                    continue
                delta = 0.9 * threshold
                value = lower_bound_value(spec, delta, family)
                if family == "I":
                    assert value >= 0, (spec, key)
                else:
                    assert value > 0, (spec, key)
                est = estimate_sgr(spec.model(delta), sim)
                assert est.log_sgr_mean > -3 * est.std_error, (spec, key)


class TestAnalyzeDelta:
    def test_case_a_min_matrix_among_winners(self):
        analysis = analyze_delta(CASE_A)
        best = max(analysis.thresholds.values())
        assert analysis.thresholds["Delta_IV"] == pytest.approx(best, abs=1e-9)
        assert "Delta_IV" in analysis.winners

    def test_case_b_max_matrix_wins(self):
        analysis = analyze_delta(CASE_B)
        assert analysis.winner == "Delta_III"
        assert analysis.thresholds["Delta_III"] == pytest.approx(0.7710867, abs=1e-6)
        assert analysis.thresholds["Delta_III"] > analysis.thresholds["Delta_IV"]

    def test_case_c_structure_family_wins(self):
        analysis = analyze_delta(CASE_C)
        assert analysis.winner == "Delta_V_numeric"

    def test_simulated_threshold_included_on_request(self):
        sim = SimParams(samples=60, steps=200, burn_in=50, seed=3)
        analysis = analyze_delta(CASE_A, sim=sim)
        assert "Delta_sim" in analysis.thresholds
        certified = [analysis.thresholds[k] for k in analysis.thresholds if k != "Delta_sim"]
        assert max(certified) <= analysis.thresholds["Delta_sim"] + 0.02

    def test_threshold_increases_with_rich_probability(self):
        values = [
            analyze_delta(RichPoorSpec(f=0.5, F=1.3, s=0.5, pi1=p)).thresholds["Delta_III"]
            for p in (0.2, 0.4, 0.6, 0.8)
        ]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_jsonable(self):
        doc = analyze_delta(CASE_B).to_jsonable()
        assert doc["winner"] == "Delta_III"
        assert set(doc["thresholds"]) == {
            "Delta_I", "Delta_II_numeric", "Delta_III", "Delta_IV", "Delta_V_numeric",
        }


class TestClassify:
    def test_growth_when_best_lower_positive(self):
        model = CASE_B.model(0.5)
        verdict = classify(model, all_bounds(model))
        assert verdict.status == "growth"
        # the max-matrix bound value at this reduction, in closed form
        expected = math.log(leslie_rho(0.5, 1.3, 0.5)) + 0.1 * math.log(1 - 0.5 / 1.3)
        assert verdict.best_lower[1] >= expected - 1e-12

    def test_extinction_by_mean_growth_rate(self):
        model = leslie2_model([0.5], [0.8], [0.5], [1.0])
        verdict = classify(model, all_bounds(model))
        assert verdict.status == "extinction"
        assert verdict.r0 == pytest.approx(0.9, abs=1e-12)
        assert verdict.to_jsonable()["r0_sufficient_for_extinction"] is True

    def test_critical_deterministic_is_indeterminate(self):
        model = leslie2_model([0.5], [1.0], [0.5], [1.0])  # rho exactly 1
        verdict = classify(model, all_bounds(model))
        assert verdict.status == "indeterminate"

    def test_never_both_growth_and_extinction(self):
        rng = np.random.default_rng(67)
        from conftest import random_leslie2_iid

        for _ in range(100):
            model = random_leslie2_iid(rng)
            report = all_bounds(model)
            verdict = classify(model, report)
            if verdict.status == "growth":
                assert report.best_upper[1] >= 0 or report.best_lower[1] <= report.best_upper[1]
            best_lo = report.best_lower[1]
            best_hi = report.best_upper[1]
            assert not (best_lo > 0 and best_hi < 0)

    def test_annotated_with_estimate(self):
        model = CASE_B.model(0.5)
        est = estimate_sgr(model, SimParams(samples=50, steps=200, burn_in=50, seed=2))
        verdict = classify(model, all_bounds(model), sgr=est)
        assert verdict.sgr is est
        assert "sgr" in verdict.to_jsonable()

    def test_r0_only_for_iid_leslie(self):
        model = ModelSpec(
            CASE_B.params_at(0.2).environment_set(),
            EnvironmentChain.markov([[0.9, 0.1], [0.3, 0.7]]),
        )
        verdict = classify(model, all_bounds(model))
        assert verdict.r0 is None
