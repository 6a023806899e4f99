import logging
import math
import unittest

from time_dilation_sim.chain_model import Block
from time_dilation_sim.eclipse_model import (
    BlockProber,
    block_probe,
    combined_probe,
    de_eclipse_probability,
    eclipse_probability,
    eclipse_probability_without_replacement,
    resolve_de_eclipse,
    transaction_probe,
)
from time_dilation_sim.schemas import SybilPool, VictimTopology
from time_dilation_sim.sim_core import RandomSource
from time_dilation_sim.simulation_exception import InvalidPoolException
from time_dilation_sim.utils import *

logging.basicConfig(level=logging.INFO)


class TestEclipseProbability(unittest.TestCase):
    def test_reference_value(self):
        pool = SybilPool(attacker_nodes=500, honest_nodes=50, outbound_count=8)
        self.assertAlmostEqual(eclipse_probability(pool), 0.4665, places=4)

    def test_edges(self):
        self.assertEqual(eclipse_probability(SybilPool(attacker_nodes=0, honest_nodes=50)), 0.0)
        self.assertEqual(eclipse_probability(SybilPool(attacker_nodes=50, honest_nodes=0)), 1.0)

    def test_empty_pool(self):
        with self.assertRaises(InvalidPoolException):
            eclipse_probability(SybilPool(attacker_nodes=0, honest_nodes=0))

    def test_monotone_in_attacker_nodes(self):
        values = [
            eclipse_probability(SybilPool(attacker_nodes=na, honest_nodes=50))
            for na in range(0, 2001, 100)
        ]
        self.assertEqual(values, sorted(values))

    def test_without_replacement(self):
        pool = SybilPool(attacker_nodes=3, honest_nodes=2, outbound_count=2)
        self.assertAlmostEqual(eclipse_probability_without_replacement(pool), 0.3)

        large = SybilPool(attacker_nodes=500, honest_nodes=50, outbound_count=8)
        self.assertLess(eclipse_probability_without_replacement(large), eclipse_probability(large))

        with self.assertRaises(InvalidPoolException):
            eclipse_probability_without_replacement(
                SybilPool(attacker_nodes=2, honest_nodes=1, outbound_count=8)
            )


class TestDeEclipse(unittest.TestCase):
    def test_pessimistic_always_de_eclipses(self):
        rng = RandomSource(1)
        pool = SybilPool(honest_nodes=0)
        for _ in range(10):
            self.assertIs(
                resolve_de_eclipse(pool, rng, TriggerMode.PESSIMISTIC), DeEclipseOutcome.DE_ECLIPSED
            )

    def test_probabilistic_edges(self):
        rng = RandomSource(1)
        no_honest = SybilPool(honest_nodes=0)
        poisoned = SybilPool(addrman_poisoning=1.0)
        for _ in range(10):
            self.assertIs(
                resolve_de_eclipse(no_honest, rng, TriggerMode.PROBABILISTIC),
                DeEclipseOutcome.STILL_ECLIPSED,
            )
            self.assertIs(
                resolve_de_eclipse(poisoned, rng, TriggerMode.PROBABILISTIC),
                DeEclipseOutcome.STILL_ECLIPSED,
            )

    def test_probabilistic_rate(self):
        rng = RandomSource(8)
        pool = SybilPool(attacker_nodes=500, honest_nodes=50)
        trials = 20_000
        hits = sum(
            resolve_de_eclipse(pool, rng, TriggerMode.PROBABILISTIC) is DeEclipseOutcome.DE_ECLIPSED
            for _ in range(trials)
        )
        self.assertAlmostEqual(hits / trials, de_eclipse_probability(pool), delta=0.01)
        self.assertTrue(math.isclose(de_eclipse_probability(pool), 50 / 550))


class TestProbes(unittest.TestCase):
    def setUp(self):
        self.rng = RandomSource(4)
        self.block = Block(height=101, mined_at=60_600)

    def test_transaction_probe(self):
        leak = transaction_probe(VictimTopology(tx_relay_link=True), self.rng)
        self.assertIs(leak.outcome, ProbeOutcome.LEAK_DETECTED)

        missed = transaction_probe(VictimTopology(block_relay_link=True), self.rng)
        self.assertIs(missed.outcome, ProbeOutcome.ECLIPSED)

        eclipsed = transaction_probe(VictimTopology(), self.rng)
        self.assertIs(eclipsed.outcome, ProbeOutcome.ECLIPSED)

    def test_block_probe_sees_block_relay_links(self):
        verdict = block_probe(VictimTopology(block_relay_link=True), self.block, self.rng)
        self.assertIs(verdict.outcome, ProbeOutcome.LEAK_DETECTED)

        verdict = block_probe(VictimTopology(), self.block, self.rng)
        self.assertIs(verdict.outcome, ProbeOutcome.ECLIPSED)

    def test_block_probe_consumes_block(self):
        prober = BlockProber()
        first = prober.probe(VictimTopology(), self.block, self.rng)
        self.assertIs(first.outcome, ProbeOutcome.ECLIPSED)
        self.assertEqual(prober.next_probe_height, 102)

        again = prober.probe(VictimTopology(), self.block, self.rng)
        self.assertIs(again.outcome, ProbeOutcome.INCONCLUSIVE)

        later = prober.probe(VictimTopology(), Block(height=102, mined_at=61_000), self.rng)
        self.assertIs(later.outcome, ProbeOutcome.ECLIPSED)

    def test_relay_back_probability_zero(self):
        topology = VictimTopology(tx_relay_link=True, block_relay_link=True, relay_back_probability=0.0)
        self.assertIs(combined_probe(topology, self.block, self.rng).outcome, ProbeOutcome.ECLIPSED)

    def test_combined_probe(self):
        self.assertIs(
            combined_probe(VictimTopology(block_relay_link=True), self.block, self.rng).outcome,
            ProbeOutcome.LEAK_DETECTED,
        )
        self.assertIs(
            combined_probe(VictimTopology(), self.block, self.rng).outcome, ProbeOutcome.ECLIPSED
        )


if __name__ == "__main__":
    unittest.main()
