"""Discrimination table, detector model, and scalar estimators."""

import itertools
import math

import pytest

from fusionsim.detection import (
    DiscriminationTable,
    OutcomeStats,
    PPNRDConfig,
    classify_click_distribution,
    classify_distribution,
    compose_efficiency,
    derive_discrimination_table,
    estimate_fidelity_singlet,
    expected_coincidence_rate,
    fold_clicks,
    heralded_mixture,
    ideal_table,
    nfold_rate,
    normalization_factors,
    ppnrd_response,
    resolve_probability,
    success_probability,
)
from fusionsim.experiment import (
    FULL_PREPARATION,
    PORT_KEEP_A,
    PORT_KEEP_B,
    BellLabel,
    ExperimentConfig,
    pair_correlations,
    run_fusion,
    singlet_fidelity,
)


def brute_force_clicks(n: int, k: int, eta: float) -> list[float]:
    """Enumerate every assignment of n photons to k cells and every
    detection subset; exact reference for the click-count distribution."""
    probs = [0.0] * (k + 1)
    for cells in itertools.product(range(k), repeat=n):
        for detected in itertools.product((0, 1), repeat=n):
            weight = (1 / k) ** n * math.prod(
                eta if d else (1 - eta) for d in detected
            )
            clicked = {c for c, d in zip(cells, detected) if d}
            probs[len(clicked)] += weight
    return probs


class TestPPNRD:
    def test_no_photons(self):
        assert ppnrd_response(0, PPNRDConfig()) == [1.0, 0.0, 0.0, 0.0, 0.0]

    def test_single_photon_click_probability_is_efficiency(self):
        for eta in (1.0, 0.72, 0.3):
            dist = ppnrd_response(1, PPNRDConfig(4, eta))
            assert abs(dist[1] - eta) < 1e-15
            assert abs(dist[0] - (1 - eta)) < 1e-15

    def test_four_photons_fully_resolved(self):
        dist = ppnrd_response(4, PPNRDConfig(4, 1.0))
        assert dist[4] == 24 / 256

    def test_two_photons(self):
        dist = ppnrd_response(2, PPNRDConfig(4, 1.0))
        assert abs(dist[2] - 0.75) < 1e-15
        assert abs(dist[1] - 0.25) < 1e-15

    @pytest.mark.parametrize("eta", [1.0, 0.72])
    @pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
    def test_matches_brute_force(self, n, eta):
        exact = brute_force_clicks(n, 4, eta)
        model = ppnrd_response(n, PPNRDConfig(4, eta))
        for c in range(5):
            assert abs(model[c] - exact[c]) < 1e-12

    def test_distributions_sum_to_one(self):
        for n in range(6):
            for eta in (1.0, 0.5):
                assert abs(sum(ppnrd_response(n, PPNRDConfig(4, eta))) - 1.0) < 1e-12

    def test_negative_photons_rejected(self):
        with pytest.raises(ValueError):
            ppnrd_response(-1, PPNRDConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PPNRDConfig(fanout=0)
        with pytest.raises(ValueError):
            PPNRDConfig(efficiency=1.4)


class TestNormalizationFactors:
    def setup_method(self):
        self.table = ideal_table(ExperimentConfig())

    def test_singly_occupied_pattern_factor_one(self):
        factors = normalization_factors(self.table, PPNRDConfig(4, 1.0))
        for pattern, factor in factors.items():
            if all(n <= 1 for n in pattern):
                assert abs(factor - 1.0) < 1e-15

    def test_four_photon_group(self):
        # A pattern whose only multiply-occupied group holds all four
        # photons; the leftover pair resolves singly on the other side.
        factors = normalization_factors(self.table, PPNRDConfig(4, 1.0))
        bunched = next(
            p for p in factors if 4 in p and all(n <= 1 for n in p if n != 4)
        )
        assert abs(factors[bunched] - 24 / 256) < 1e-15

    def test_two_double_groups(self):
        # Doubly-occupied groups contribute 3/4 each; singles contribute 1.
        config = PPNRDConfig(4, 1.0)
        factors = normalization_factors(self.table, config)
        double = next(
            p for p in factors
            if sum(n == 2 for n in p) == 2 and max(p) == 2
        )
        assert abs(factors[double] - 9 / 16) < 1e-15
        assert abs(resolve_probability(2, config) ** 2 - 9 / 16) < 1e-15

    def test_round_trip_recovers_pattern_probabilities(self):
        """Folding a real distribution through the detectors and dividing the
        fully-resolved click rates by the factors recovers the input."""
        config = PPNRDConfig(4, 1.0)
        result = run_fusion(BellLabel.PHI_PLUS, ExperimentConfig())
        clicks = fold_clicks(result.pattern_probs, config)
        factors = {
            pattern: math.prod(resolve_probability(n, config) for n in pattern)
            for pattern in result.pattern_probs
        }
        for pattern, prob in result.pattern_probs.items():
            observed = clicks.get(pattern, 0.0)
            # With unit efficiency a full-resolution signature is unambiguous
            # within a fixed photon total.
            recovered = observed / factors[pattern]
            assert abs(recovered - prob) < 1e-9


class TestDiscriminationTable:
    def setup_method(self):
        self.config = ExperimentConfig()
        self.table = ideal_table(self.config)
        self.ideal = {
            label: run_fusion(label, self.config).pattern_probs
            for label in BellLabel
        }

    def test_no_double_assignment_and_exhaustive(self):
        for label, dist in self.ideal.items():
            for pattern, prob in dist.items():
                if prob <= 1e-12:
                    continue
                others = [
                    other
                    for other, odist in self.ideal.items()
                    if other is not label and odist.get(pattern, 0.0) > 1e-12
                ]
                expected = None if others else label
                assert self.table.outcome(pattern) is expected

    def test_one_photon_per_group_on_one_side_heralds_phi_plus(self):
        for pattern in self.table.assignments:
            for side in (pattern[:4], pattern[4:]):
                if side == (1, 1, 1, 1):
                    assert self.table.outcome(pattern) is BellLabel.PHI_PLUS

    def test_four_bunched_photons_fail(self):
        for pattern in self.table.assignments:
            if 4 in pattern:
                assert self.table.outcome(pattern) is None

    def test_three_three_split_heralds_singlet(self):
        for pattern in self.table.assignments:
            if sum(pattern[:4]) == 3 and sum(pattern[4:]) == 3:
                assert self.table.outcome(pattern) is BellLabel.PSI_MINUS

    def test_antibunched_opposite_polarizations_unboosted(self):
        table = ideal_table(ExperimentConfig(ancilla_enabled=False))
        assert table.outcome((1, 0, 0, 1)) is BellLabel.PSI_MINUS
        assert table.outcome((0, 1, 1, 0)) is BellLabel.PSI_MINUS
        assert table.outcome((1, 1, 0, 0)) is BellLabel.PSI_PLUS
        assert table.outcome((2, 0, 0, 0)) is None

    def test_unseen_pattern_fails(self):
        assert self.table.outcome((8, 0, 0, 0, 0, 0, 0, 0)) is None

    def test_raw_click_mode(self):
        pattern = next(
            p for p, lab in self.table.assignments.items()
            if lab is BellLabel.PSI_MINUS
        )
        assert self.table.outcome_from_clicks(pattern) is BellLabel.PSI_MINUS
        short = (1,) + (0,) * 7
        assert self.table.outcome_from_clicks(short) is None

    def test_raw_click_outcome_rates_scale_by_factors(self):
        """Folding through lossy detectors and classifying only the fully
        resolved signatures leaves each outcome at its pattern rate times
        the normalization factor."""
        ppnrd = PPNRDConfig(4, 0.72)
        result = run_fusion(BellLabel.PHI_MINUS, ExperimentConfig())
        clicks = fold_clicks(result.pattern_probs, ppnrd)
        routed = classify_click_distribution(clicks, self.table)
        for outcome in BellLabel:
            expected = sum(
                prob * math.prod(resolve_probability(n, ppnrd) for n in pattern)
                for pattern, prob in result.pattern_probs.items()
                if self.table.outcome(pattern) is outcome
            )
            assert abs(routed[outcome] - expected) < 1e-9

    def test_needs_all_four_inputs(self):
        with pytest.raises(ValueError):
            derive_discrimination_table(
                {BellLabel.PHI_PLUS: {(1, 1, 1, 1, 2, 0, 0, 0): 1.0}}
            )


class TestSuccessProbability:
    def test_ideal_values(self):
        stats = success_probability(ExperimentConfig())
        expected = {
            BellLabel.PSI_MINUS: 1.0,
            BellLabel.PSI_PLUS: 1.0,
            BellLabel.PHI_PLUS: 0.5,
            BellLabel.PHI_MINUS: 0.5,
        }
        for label, value in expected.items():
            assert abs(stats.per_input_success[label] - value) < 1e-9
        assert abs(stats.outcome_probs[BellLabel.PSI_MINUS] - 0.25) < 1e-9
        assert abs(stats.outcome_probs[BellLabel.PHI_PLUS] - 0.125) < 1e-9
        assert abs(stats.total_success - 0.75) < 1e-9
        assert abs(stats.outcome_probs[None] - 0.25) < 1e-9

    def test_unboosted_limit(self):
        stats = success_probability(ExperimentConfig(ancilla_enabled=False))
        assert abs(stats.total_success - 0.5) < 1e-9
        assert stats.per_input_success[BellLabel.PHI_PLUS] < 1e-9
        assert stats.per_input_success[BellLabel.PHI_MINUS] < 1e-9

    def test_outcome_probabilities_sum_to_one(self):
        stats = success_probability(ExperimentConfig(overlap=0.95))
        assert abs(sum(stats.outcome_probs.values()) - 1.0) < 1e-9

    def test_distinguishable_even_parity_discrimination_collapses(self):
        """With fully distinguishable photons the ancilla boost dies: the
        even-parity inputs are heralded correctly only rarely (3.125%,
        versus 50% with perfect overlap)."""
        table = ideal_table(ExperimentConfig())
        result = run_fusion(BellLabel.PHI_PLUS, ExperimentConfig(overlap=0.0))
        routed = classify_distribution(result.pattern_probs, table)
        assert routed[BellLabel.PHI_PLUS] < 0.1
        assert abs(routed[BellLabel.PHI_PLUS] - 0.03125) < 1e-9


class TestHeraldedStates:
    def test_singlet_herald_fidelity_and_estimator_agree(self):
        config = ExperimentConfig()
        result = run_fusion(
            FULL_PREPARATION, config, conditional_filter=lambda p: sum(p[:4]) == 3
        )
        table = ideal_table(config)
        mixture = heralded_mixture(result, table, BellLabel.PSI_MINUS)
        fid_direct = singlet_fidelity(mixture, PORT_KEEP_A, PORT_KEEP_B)
        xx, yy, zz = pair_correlations(mixture, PORT_KEEP_A, PORT_KEEP_B)
        fid_pauli = estimate_fidelity_singlet(xx, yy, zz)
        assert abs(fid_direct - 1.0) < 1e-9
        assert abs(fid_pauli - 1.0) < 1e-9

    def test_requires_full_preparation(self):
        config = ExperimentConfig()
        result = run_fusion(BellLabel.PSI_MINUS, config)
        with pytest.raises(ValueError):
            heralded_mixture(result, ideal_table(config), BellLabel.PSI_MINUS)


class TestScalarEstimators:
    def test_fidelity_singlet_values(self):
        assert estimate_fidelity_singlet(-1.0, -1.0, -1.0) == 1.0
        assert estimate_fidelity_singlet(0.0, 0.0, 0.0) == 0.25
        assert estimate_fidelity_singlet(0.0, 0.0, -1.0) == 0.5

    def test_fidelity_clamps(self):
        assert estimate_fidelity_singlet(1.0, 1.0, 1.0) == 0.0

    def test_fidelity_range_check(self):
        with pytest.raises(ValueError, match="XX"):
            estimate_fidelity_singlet(1.5, 0.0, 0.0)

    def test_rate_identity(self):
        assert nfold_rate(1000.0, 1.0, 8) == 1000.0

    def test_eightfold_rate(self):
        rate = nfold_rate(7.1e6, 0.16, 8)
        assert abs(rate - 3.0494267801600006) < 1e-9
        assert abs(rate - 3.0) / 3.0 < 0.05

    def test_rate_validation(self):
        with pytest.raises(ValueError):
            nfold_rate(-1.0, 0.5, 2)
        with pytest.raises(ValueError):
            nfold_rate(1.0, 1.2, 2)
        with pytest.raises(ValueError):
            nfold_rate(1.0, 0.5, 0)

    def test_efficiency_composition(self):
        eta = compose_efficiency(0.712, 0.31, 0.72)
        assert abs(eta - 0.16) < 0.0015
        with pytest.raises(ValueError):
            compose_efficiency(1.2, 0.5, 0.5)

    def test_config_transmission_drives_rate(self):
        config = ExperimentConfig(transmission=0.16)
        rate = expected_coincidence_rate(config, 7.1e6)
        assert abs(rate - nfold_rate(7.1e6, 0.16, 8)) < 1e-12
