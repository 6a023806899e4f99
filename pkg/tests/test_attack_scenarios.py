import logging
import unittest

from time_dilation_sim.attack_scenarios import SCENARIOS, run_a1, run_a2, run_a3, run_scenario
from time_dilation_sim.ln_channel import PRESETS, get_preset
from time_dilation_sim.schemas import NodePolicies, ScenarioConfig, StaleTipPolicy
from time_dilation_sim.sim_core import RandomSource
from time_dilation_sim.utils import *

logging.basicConfig(level=logging.INFO)

CAPACITY = DEFAULT_CHANNEL_CAPACITY
RESERVE = int(DEFAULT_CHANNEL_CAPACITY * DEFAULT_RESERVE_RATIO)
CHANNEL_COUNT = {AttackKind.A1: 1, AttackKind.A2: 2, AttackKind.A3: 2}


def light_config(kind, implementation, **kwargs):
    return ScenarioConfig(
        kind=kind, preset=get_preset(implementation), backend=BackendKind.LIGHT_CLIENT, **kwargs
    )


class TestThresholds(unittest.TestCase):
    def assert_threshold(self, kind, implementation, threshold, **kwargs):
        at = run_scenario(light_config(kind, implementation, forced_lead=threshold, **kwargs), RandomSource(11))
        self.assertTrue(at.success, f"{kind.value}/{implementation} lead {threshold}: {at.rejected}")
        self.assertGreater(at.stolen, 0)
        self.assertEqual(at.achieved_lead, threshold)

        below = run_scenario(
            light_config(kind, implementation, forced_lead=threshold - 1, **kwargs), RandomSource(11)
        )
        self.assertFalse(below.success, f"{kind.value}/{implementation} lead {threshold - 1}")
        self.assertIs(below.failure_cause, FailureCause.DEFENSE_CONFIRMED)
        self.assertTrue(below.defense_confirmed)
        self.assertEqual(below.stolen, 0)

    def test_a1_needs_csv_delta(self):
        for name, preset in PRESETS.items():
            with self.subTest(name):
                self.assert_threshold(AttackKind.A1, name, preset.csv_delta)

    def test_a2_needs_cltv_delta_plus_one(self):
        for name, preset in PRESETS.items():
            with self.subTest(name):
                self.assert_threshold(AttackKind.A2, name, preset.cltv_delta + 1)

    def test_a3_needs_timeout_policy_plus_one(self):
        for name, preset in PRESETS.items():
            with self.subTest(name):
                self.assert_threshold(AttackKind.A3, name, preset.timeout_policy + 1)

    def test_a3_attacker_wins_ties(self):
        for name, preset in PRESETS.items():
            with self.subTest(name):
                self.assert_threshold(
                    AttackKind.A3, name, preset.timeout_policy, a3_lead_mode=A3LeadMode.I
                )

    def test_threshold_lead(self):
        lnd = get_preset("lnd")
        self.assertEqual(ScenarioConfig(kind=AttackKind.A1, preset=lnd).threshold_lead, 144)
        self.assertEqual(ScenarioConfig(kind=AttackKind.A2, preset=lnd).threshold_lead, 41)
        self.assertEqual(ScenarioConfig(kind=AttackKind.A3, preset=lnd).threshold_lead, 11)
        self.assertEqual(
            ScenarioConfig(kind=AttackKind.A3, preset=lnd, a3_lead_mode=A3LeadMode.I).threshold_lead, 10
        )


class TestScenarioOutcomes(unittest.TestCase):
    def test_stolen_amounts(self):
        for kind in AttackKind:
            with self.subTest(kind.value):
                result = run_scenario(light_config(kind, "c-lightning"), RandomSource(3))
                self.assertTrue(result.success)
                self.assertEqual(result.stolen, CAPACITY - RESERVE)
                self.assertIsNone(result.failure_cause)

    def test_attacker_transactions_never_rejected_on_success(self):
        for kind in AttackKind:
            result = run_scenario(light_config(kind, "lnd"), RandomSource(8))
            self.assertTrue(result.success)
            self.assertFalse([r for r in result.rejected if r.split(":")[0] in ATTACKER_PARTIES])

    def test_capacity_conserved(self):
        for kind in AttackKind:
            for lead_offset in (0, -1):
                config = light_config(kind, "rust-lightning")
                config = config.model_copy(update={"forced_lead": config.threshold_lead + lead_offset})
                result = run_scenario(config, RandomSource(4))
                self.assertEqual(sum(result.final_holdings.values()), CAPACITY * CHANNEL_COUNT[kind])

    def test_htlc_can_use_whole_capacity(self):
        for kind in (AttackKind.A2, AttackKind.A3):
            result = run_scenario(light_config(kind, "eclair", reserve_ratio=0.0), RandomSource(2))
            self.assertTrue(result.success)
            self.assertEqual(result.stolen, CAPACITY)

    def test_explicit_htlc_amount(self):
        result = run_a2(light_config(AttackKind.A2, "lnd", htlc_amount=250_000), RandomSource(2))
        self.assertEqual(result.stolen, 250_000)

    def test_victim_funded_channel(self):
        result = run_a1(light_config(AttackKind.A1, "c-lightning", victim_funded=True), RandomSource(6))
        self.assertTrue(result.success)
        self.assertEqual(result.stolen, CAPACITY - 2 * RESERVE)

    def test_a1_justice_at_last_window_height(self):
        result = run_a1(light_config(AttackKind.A1, "c-lightning", forced_lead=143), RandomSource(6))
        self.assertTrue(result.defense_confirmed)
        self.assertEqual(result.final_holdings["alice"], CAPACITY)
        self.assertFalse(result.rejected)

    def test_no_dilation_fails(self):
        policies = NodePolicies(stale_tip=StaleTipPolicy(enabled=False))
        for kind in AttackKind:
            for backend in BackendKind:
                config = ScenarioConfig(
                    kind=kind,
                    preset=get_preset("c-lightning"),
                    backend=backend,
                    per_block_delay=0,
                    policies=policies,
                    max_blocks=30,
                )
                result = run_scenario(config, RandomSource(1))
                self.assertFalse(result.success)
                self.assertIs(result.failure_cause, FailureCause.INCONCLUSIVE)
                self.assertEqual(result.stolen, 0)
                self.assertEqual(result.exploit_hours, 0)

    def test_full_node_results_consistent(self):
        for seed in range(10):
            config = ScenarioConfig(kind=AttackKind.A2, preset=get_preset("lnd"), backend=BackendKind.FULL_NODE)
            result = run_scenario(config, RandomSource(seed))
            self.assertEqual(result.success, result.failure_cause is None)
            if result.success:
                self.assertEqual(result.achieved_lead, 41)
                self.assertGreater(result.eclipse_hours, 0)
            else:
                self.assertIs(result.failure_cause, FailureCause.STALE_TIP_DE_ECLIPSE)

    def test_deterministic(self):
        config = light_config(AttackKind.A3, "c-lightning")
        self.assertEqual(run_a3(config, RandomSource(9)), run_a3(config, RandomSource(9)))

    def test_trace_names_steps(self):
        result = run_a2(light_config(AttackKind.A2, "c-lightning"), RandomSource(5), trace=True)
        notes = [entry.note for entry in result.trace]
        self.assertTrue(any(note.startswith("step 4:") for note in notes))
        self.assertTrue(any(note.startswith("step 5:") for note in notes))
        self.assertTrue(any(entry.event == EventKind.BLOCK_MINED.value for entry in result.trace))

    def test_wrong_kind_rejected(self):
        with self.assertRaises(ValueError):
            run_a1(light_config(AttackKind.A2, "lnd"), RandomSource(1))
        self.assertEqual(set(SCENARIOS), set(AttackKind))


if __name__ == "__main__":
    unittest.main()
