import logging
import unittest

from time_dilation_sim.chain_model import Block
from time_dilation_sim.schemas import IbdPolicy, StaleTipPolicy
from time_dilation_sim.simulation_exception import OutOfOrderDeliveryException
from time_dilation_sim.utils import *
from time_dilation_sim.victim_node import VictimNode, check_ibd, check_stale_tip, deliver_block

logging.basicConfig(level=logging.INFO)


class TestVictimNode(unittest.TestCase):
    def test_deliver_consecutive(self):
        victim = VictimNode(BackendKind.FULL_NODE)
        deliver_block(victim, Block(1, 500), at=700)
        state = deliver_block(victim, Block(2, 900), at=2470)

        self.assertEqual(state.view.tip_height, 2)
        self.assertEqual(state.view.tip_seen_at, 2470)
        self.assertEqual(state.tip_mined_at, 900)
        self.assertEqual(state.last_delivery_at, 2470)
        self.assertEqual(state.pending_stale_check, 2470 + DEFAULT_STALE_THRESHOLD)

    def test_deliver_out_of_order(self):
        victim = VictimNode(BackendKind.FULL_NODE)
        with self.assertRaises(OutOfOrderDeliveryException):
            victim.deliver_block(Block(2, 500), at=600)

    def test_deliver_before_mined(self):
        victim = VictimNode(BackendKind.FULL_NODE)
        with self.assertRaises(OutOfOrderDeliveryException):
            victim.deliver_block(Block(1, 500), at=499)

    def test_stale_tip_threshold(self):
        victim = VictimNode(BackendKind.FULL_NODE)
        self.assertIs(check_stale_tip(victim, 1799), TriggerOutcome.NO_TRIGGER)
        self.assertIs(check_stale_tip(victim, 1800), TriggerOutcome.DE_ECLIPSE_ATTEMPT)

        victim.deliver_block(Block(1, 100), at=1000)
        self.assertIs(check_stale_tip(victim, 2799), TriggerOutcome.NO_TRIGGER)
        self.assertIs(check_stale_tip(victim, 2800), TriggerOutcome.DE_ECLIPSE_ATTEMPT)

    def test_stale_tip_disabled(self):
        victim = VictimNode(BackendKind.FULL_NODE, stale_tip=StaleTipPolicy(enabled=False))
        self.assertIs(victim.check_stale_tip(100_000), TriggerOutcome.NO_TRIGGER)
        self.assertIsNone(victim.state.pending_stale_check)

    def test_light_client_never_triggers(self):
        victim = VictimNode(BackendKind.LIGHT_CLIENT, ibd=IbdPolicy(enabled=True))
        self.assertIs(victim.check_stale_tip(10**9), TriggerOutcome.NO_TRIGGER)
        self.assertFalse(victim.check_ibd(10**9))
        self.assertIsNone(victim.state.pending_stale_check)

    def test_on_stale_check_arms_retry(self):
        victim = VictimNode(BackendKind.FULL_NODE)
        self.assertIs(victim.on_stale_check(1800), TriggerOutcome.DE_ECLIPSE_ATTEMPT)
        self.assertEqual(victim.state.de_eclipse_attempts, 1)
        self.assertEqual(victim.state.pending_stale_check, 1800 + DEFAULT_STALE_RETRY_INTERVAL)

        self.assertIs(victim.on_stale_check(2400), TriggerOutcome.DE_ECLIPSE_ATTEMPT)
        self.assertEqual(victim.state.de_eclipse_attempts, 2)

    def test_ibd_strictly_greater(self):
        victim = VictimNode(BackendKind.FULL_NODE, ibd=IbdPolicy(lag_threshold=3600, enabled=True))
        victim.deliver_block(Block(1, 1000), at=1200)
        self.assertFalse(check_ibd(victim, 4600))
        self.assertTrue(check_ibd(victim, 4601))
        self.assertEqual(victim.next_ibd_check(), 4601)

    def test_ibd_disabled_by_default(self):
        victim = VictimNode(BackendKind.FULL_NODE)
        self.assertFalse(victim.check_ibd(10**9))
        self.assertIsNone(victim.next_ibd_check())

    def test_sync_to(self):
        victim = VictimNode(BackendKind.FULL_NODE)
        state = victim.sync_to(Block(12, 7000), at=7300)
        self.assertEqual(victim.tip_height, 12)
        self.assertEqual(state.last_delivery_at, 7300)
        self.assertEqual(state.pending_stale_check, 7300 + DEFAULT_STALE_THRESHOLD)
        victim.deliver_block(Block(13, 7400), at=7400)
        self.assertEqual(victim.tip_height, 13)


if __name__ == "__main__":
    unittest.main()
