import numpy as np
import pytest
from scipy import stats

from steerbound.bounds import MixedStrategy, postselect, symmetric_mixture
from steerbound.geometry import fingerprint
from steerbound.simulate import (
    ANOMALY,
    COUNT_COLUMNS,
    DEMONSTRATED,
    NOT_DEMONSTRATED,
    ExperimentRecord,
    WernerModel,
    run_cheating,
    run_honest,
    verdict,
)
from steerbound.strategies import best_signs

SQRT3_INV = 1.0 / np.sqrt(3.0)


def pure_mixture(ms, strat):
    """Wrap one deterministic strategy as a weight-one mixture."""
    return MixedStrategy(
        epsilon=strat.support.m / ms.n,
        value=strat.value,
        components=((1.0, strat),),
        set_hash=fingerprint(ms),
    )


class TestWernerModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            WernerModel(mu=-0.1, eta=1.0)
        with pytest.raises(ValueError):
            WernerModel(mu=1.1, eta=1.0)
        with pytest.raises(ValueError):
            WernerModel(mu=0.5, eta=0.0)
        with pytest.raises(ValueError):
            WernerModel(mu=0.5, eta=1.0001)

    def test_category_probabilities(self):
        probs = WernerModel(mu=0.8, eta=0.7).category_probabilities()
        assert probs == pytest.approx([0.035, 0.315, 0.315, 0.035, 0.3], abs=1e-15)
        assert probs.sum() == pytest.approx(1.0, abs=1e-15)


class TestRunHonest:
    def test_record_bookkeeping(self, oct3):
        model = WernerModel(mu=0.6, eta=0.8)
        rec = run_honest(model, oct3, shots=5000, seed=9)
        assert rec.counts.shape == (3, 5)
        assert int(rec.counts.sum()) == 5000
        assert rec.shots == 5000
        assert rec.set_hash == fingerprint(oct3)
        assert rec.seed == 9
        assert np.array_equal(rec.weights, oct3.weights)
        assert set(rec.estimates) == {
            "S_raw",
            "S_hat",
            "epsilon_hat",
            "epsilon_hat_per_setting",
            "se_S",
            "se_epsilon",
        }

    def test_seed_controls_draw(self, oct3):
        model = WernerModel(mu=0.6, eta=0.8)
        a = run_honest(model, oct3, 5000, seed=1)
        b = run_honest(model, oct3, 5000, seed=1)
        c = run_honest(model, oct3, 5000, seed=2)
        assert np.array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, c.counts)

    def test_shot_count_checked(self, oct3):
        with pytest.raises(ValueError, match="shot"):
            run_honest(WernerModel(mu=0.5, eta=1.0), oct3, 0, seed=0)

    def test_pure_singlet_is_exact(self, oct3):
        rec = run_honest(WernerModel(mu=1.0, eta=1.0), oct3, 10000, seed=3)
        assert rec.estimates["S_hat"] == 1.0
        assert rec.estimates["epsilon_hat"] == 1.0
        assert rec.estimates["se_S"] == 0.0

    def test_estimates_hit_truth(self, geo7):
        model = WernerModel(mu=0.8, eta=0.7)
        rec = run_honest(model, geo7, shots=1_000_000, seed=17)
        est = rec.estimates
        assert abs(est["S_hat"] - 0.8) < 3.0 * est["se_S"]
        assert abs(est["epsilon_hat"] - 0.7) < 3.0 * est["se_epsilon"]
        assert est["se_S"] > 0.0

    def test_postselection_removes_eta(self, geo7):
        lossless = run_honest(WernerModel(mu=0.7, eta=1.0), geo7, 400_000, seed=101)
        lossy = run_honest(WernerModel(mu=0.7, eta=0.5), geo7, 400_000, seed=202)
        gap = abs(lossless.estimates["S_hat"] - lossy.estimates["S_hat"])
        spread = np.hypot(lossless.estimates["se_S"], lossy.estimates["se_S"])
        assert gap < 4.0 * spread


class TestRunCheating:
    def test_rejects_foreign_set(self, geo7_table, oct3):
        mix = symmetric_mixture(geo7_table, 0.5)
        with pytest.raises(ValueError, match="different"):
            run_cheating(mix, oct3, 1000, seed=0)

    def test_symmetric_mixture_reproduces_bound(self, geo7, geo7_table):
        mix = symmetric_mixture(geo7_table, 0.5)
        k = postselect(mix.value, 0.5)
        rec = run_cheating(mix, geo7, shots=200_000, seed=42)
        est = rec.estimates
        assert abs(est["S_hat"] - k) < 4.0 * est["se_S"]
        per = np.asarray(est["epsilon_hat_per_setting"])
        assert np.all(np.abs(per - 0.5) < 0.02)

    def test_pure_strategy_nulls_are_structural(self, geo7, geo7_gtable):
        strat = geo7_gtable.entries[(1, 4)]
        rec = run_cheating(pure_mixture(geo7, strat), geo7, 50_000, seed=5)
        per = np.asarray(rec.estimates["epsilon_hat_per_setting"])
        answered = strat.signs != 0
        assert np.all(per[answered] == 1.0)
        assert np.all(per[~answered] == 0.0)

    def test_cell_probabilities_respect_component_state(self, oct3, oct_table):
        # a full-support strategy never produces nulls and its receiver
        # marginals follow the component's pure state
        strat = oct_table.entries[0b111]
        rec = run_cheating(pure_mixture(oct3, strat), oct3, 30_000, seed=8)
        assert int(rec.counts[:, 4].sum()) == 0


class TestExperimentRecord:
    def test_shape_checked(self, oct3):
        with pytest.raises(ValueError, match="row per setting"):
            ExperimentRecord(
                counts=np.zeros((3, 4), dtype=int),
                shots=0,
                weights=oct3.weights,
                set_hash="x",
                seed=0,
                estimates={},
            )

    def test_negative_counts_rejected(self, oct3):
        counts = np.zeros((3, 5), dtype=int)
        counts[0, 0] = -1
        counts[0, 1] = 1
        with pytest.raises(ValueError, match="non-negative"):
            ExperimentRecord(
                counts=counts, shots=0, weights=oct3.weights,
                set_hash="x", seed=0, estimates={},
            )

    def test_total_must_match_shots(self, oct3):
        counts = np.full((3, 5), 2, dtype=int)
        with pytest.raises(ValueError, match="add up"):
            ExperimentRecord(
                counts=counts, shots=31, weights=oct3.weights,
                set_hash="x", seed=0, estimates={},
            )

    def test_to_dict(self, oct3):
        rec = run_honest(WernerModel(mu=0.5, eta=0.9), oct3, 1000, seed=4)
        d = rec.to_dict()
        assert d["columns"] == list(COUNT_COLUMNS)
        assert d["shots"] == 1000
        assert isinstance(d["estimates"]["epsilon_hat_per_setting"], list)
        assert np.asarray(d["counts"]).shape == (3, 5)


class TestVerdict:
    def test_alpha_validated(self, oct3):
        rec = run_honest(WernerModel(mu=0.9, eta=1.0), oct3, 1000, seed=0)
        with pytest.raises(ValueError, match="significance"):
            verdict(rec, 0.6, alpha=0.0)
        with pytest.raises(ValueError, match="significance"):
            verdict(rec, 0.6, alpha=1.0)

    def test_all_null_record_is_untestable(self, oct3):
        empty = best_signs(oct3, 0)
        rec = run_cheating(pure_mixture(oct3, empty), oct3, 1000, seed=0)
        with pytest.raises(ValueError, match="no postselected"):
            verdict(rec, 0.6)

    def test_dict_is_stable_schema(self, oct3):
        rec = run_honest(WernerModel(mu=0.9, eta=1.0), oct3, 10_000, seed=1)
        d = verdict(rec, SQRT3_INV).to_dict()
        assert set(d) == {"decision", "S_hat", "se", "epsilon_hat", "bound", "alpha"}

    def test_clear_violation_demonstrates(self, oct3):
        rec = run_honest(WernerModel(mu=0.9, eta=1.0), oct3, 100_000, seed=2)
        v = verdict(rec, SQRT3_INV)
        assert v.decision == DEMONSTRATED
        assert v.p_null_rates >= 0.01

    def test_weak_state_fails(self, oct3):
        rec = run_honest(WernerModel(mu=0.5, eta=1.0), oct3, 100_000, seed=3)
        assert verdict(rec, SQRT3_INV).decision == NOT_DEMONSTRATED

    def test_lopsided_nulls_flagged(self, geo7, geo7_gtable):
        strat = geo7_gtable.entries[(1, 4)]
        rec = run_cheating(pure_mixture(geo7, strat), geo7, 100_000, seed=6)
        v = verdict(rec, 0.5)
        assert v.decision == ANOMALY
        assert v.p_null_rates < 0.01

    def test_symmetric_cheater_stays_below_bound(self, geo7, geo7_table):
        mix = symmetric_mixture(geo7_table, 0.5)
        k = postselect(mix.value, 0.5)
        rec = run_cheating(mix, geo7, 200_000, seed=42)
        assert verdict(rec, k).decision == NOT_DEMONSTRATED

    def test_null_homogeneity_p_is_uniform(self, oct3):
        # honest losses are setting-independent, so the anomaly p-value
        # must be roughly uniform; a skewed test would eat the alpha budget
        model = WernerModel(mu=0.6, eta=0.75)
        ps = [
            verdict(run_honest(model, oct3, 20_000, seed=1000 + i), 0.9).p_null_rates
            for i in range(60)
        ]
        assert stats.kstest(ps, "uniform").pvalue > 1e-3
