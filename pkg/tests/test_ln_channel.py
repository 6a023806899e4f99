import logging
import unittest

from time_dilation_sim.ln_channel import (
    PRESETS,
    OnChainLedger,
    accept_forward,
    build_route,
    entitled_holdings,
    final_holdings,
    get_preset,
    justice_window,
    new_hash_lock,
    open_channel,
    sweep_height,
    update_state,
)
from time_dilation_sim.schemas import Htlc, HtlcOp, OnChainTx, RouteHop
from time_dilation_sim.sim_core import RandomSource
from time_dilation_sim.simulation_exception import (
    ChannelUpdateException,
    ConfigException,
    RouteSetupException,
)
from time_dilation_sim.utils import *

logging.basicConfig(level=logging.INFO)

LND = PRESETS["lnd"]


def offered(lock, amount, expiry=50, created=0):
    return Htlc(
        amount=amount,
        lock=lock,
        expiry_height=expiry,
        created_at_height=created,
        direction=HtlcDirection.OFFERED,
    )


class TestPresets(unittest.TestCase):
    def test_defaults(self):
        values = {
            name: (preset.csv_delta, preset.cltv_delta, preset.timeout_policy)
            for name, preset in PRESETS.items()
        }
        self.assertEqual(
            values,
            {
                "c-lightning": (144, 14, 7),
                "lnd": (144, 40, 10),
                "eclair": (720, 144, 11),
                "rust-lightning": (144, 72, 6),
            },
        )

    def test_upper(self):
        self.assertEqual(get_preset("lnd-upper").csv_delta, 2016)
        self.assertEqual(get_preset("lnd-upper").name, "lnd-upper")
        with self.assertRaises(ConfigException):
            get_preset("eclair-upper")

    def test_overrides(self):
        preset = get_preset("eclair", {"csv_delta": 200, "cltv_delta": None})
        self.assertEqual(preset.csv_delta, 200)
        self.assertEqual(preset.cltv_delta, 144)
        self.assertEqual(PRESETS["eclair"].csv_delta, 720)

    def test_unknown(self):
        with self.assertRaises(ConfigException):
            get_preset("ptarmigan")


class TestUpdateState(unittest.TestCase):
    def setUp(self):
        self.rng = RandomSource(1)
        self.channel = open_channel("c", "alice", "bob", LND, 100)

    def test_open(self):
        self.assertEqual((self.channel.balance_local, self.channel.balance_remote), (100, 0))
        self.assertEqual(self.channel.state_number, 0)
        self.assertIn(0, self.channel.history)

    def test_explicit_balances_with_htlc(self):
        lock = new_hash_lock(self.rng)
        first = update_state(self.channel, (40, 50), [HtlcOp.add(offered(lock, 10))])
        self.assertEqual((first.balance_local, first.balance_remote, first.inflight), (40, 50, 10))
        self.assertEqual(first.state_number, 1)
        self.assertEqual(first.revoked_states, {0})

        second = update_state(first, (30, 60))
        self.assertEqual((second.balance_local, second.balance_remote), (30, 60))
        self.assertEqual(len(second.offered_htlcs), 1)
        self.assertEqual(second.state_number, 2)
        self.assertEqual(second.revoked_states, {0, 1})
        self.assertEqual(second.history[1].balance_local, 40)

    def test_input_untouched(self):
        update_state(self.channel, (60, 40))
        self.assertEqual(self.channel.state_number, 0)
        self.assertEqual(self.channel.balance_local, 100)

    def test_conservation_enforced(self):
        with self.assertRaises(ChannelUpdateException):
            update_state(self.channel, (60, 60))
        with self.assertRaises(ChannelUpdateException):
            update_state(self.channel, (110, -10))

    def test_max_inflight(self):
        channel = open_channel("c", "alice", "bob", LND, 100, max_inflight=20)
        lock = new_hash_lock(self.rng)
        with self.assertRaises(ChannelUpdateException):
            update_state(channel, htlc_ops=[HtlcOp.add(offered(lock, 25))])
        self.assertEqual(channel.state_number, 0)
        self.assertEqual(channel.inflight, 0)

    def test_reserve(self):
        channel = open_channel("c", "alice", "bob", LND, 100, reserve=10)
        with self.assertRaises(ChannelUpdateException):
            update_state(channel, (5, 95))
        self.assertEqual(update_state(channel, (10, 90)).balance_local, 10)

    def test_settle_credits_receiver(self):
        lock = new_hash_lock(self.rng)
        pending = update_state(self.channel, htlc_ops=[HtlcOp.add(offered(lock, 30))])
        self.assertEqual((pending.balance_local, pending.balance_remote), (70, 0))

        settled = update_state(pending, htlc_ops=[HtlcOp.settle(lock.payment_hash, lock.preimage)])
        self.assertEqual((settled.balance_local, settled.balance_remote, settled.inflight), (70, 30, 0))

    def test_fail_refunds_offerer(self):
        lock = new_hash_lock(self.rng)
        pending = update_state(self.channel, htlc_ops=[HtlcOp.add(offered(lock, 30))])
        failed = update_state(pending, htlc_ops=[HtlcOp.fail(lock.payment_hash)])
        self.assertEqual((failed.balance_local, failed.balance_remote), (100, 0))

    def test_wrong_preimage(self):
        lock = new_hash_lock(self.rng)
        pending = update_state(self.channel, htlc_ops=[HtlcOp.add(offered(lock, 30))])
        with self.assertRaises(ChannelUpdateException):
            update_state(pending, htlc_ops=[HtlcOp.settle(lock.payment_hash, b"not it")])

    def test_duplicate_hash(self):
        lock = new_hash_lock(self.rng)
        pending = update_state(self.channel, htlc_ops=[HtlcOp.add(offered(lock, 30))])
        with self.assertRaises(ChannelUpdateException):
            update_state(pending, htlc_ops=[HtlcOp.add(offered(lock, 5))])

    def test_entitled_holdings(self):
        lock = new_hash_lock(self.rng)
        pending = update_state(self.channel, htlc_ops=[HtlcOp.add(offered(lock, 30))])
        self.assertEqual(entitled_holdings(pending), {"alice": 70, "bob": 30})

    def test_random_operations_keep_invariants(self):
        rng = RandomSource(2024)
        rejected = 0
        for _ in range(10_000):
            channel = open_channel("c", "alice", "bob", LND, 1000, reserve=10, max_inflight=500)
            for _ in range(5):
                choice, amount, side = (int(v) for v in rng.integers(300, 3))
                choice %= 4
                amount += 1
                before = channel
                try:
                    if choice == 0:
                        delta = amount if side % 2 else -amount
                        channel = update_state(
                            channel, (channel.balance_local - delta, channel.balance_remote + delta)
                        )
                    elif choice == 1:
                        direction = HtlcDirection.OFFERED if side % 2 else HtlcDirection.RECEIVED
                        htlc = Htlc(
                            amount=amount,
                            lock=new_hash_lock(rng),
                            expiry_height=100,
                            direction=direction,
                        )
                        channel = update_state(channel, htlc_ops=[HtlcOp.add(htlc)])
                    elif channel.offered_htlcs or channel.received_htlcs:
                        htlc = (channel.offered_htlcs + channel.received_htlcs)[0]
                        op = (
                            HtlcOp.settle(htlc.payment_hash, htlc.lock.preimage)
                            if choice == 2
                            else HtlcOp.fail(htlc.payment_hash)
                        )
                        channel = update_state(channel, htlc_ops=[op])
                except ChannelUpdateException:
                    rejected += 1
                    self.assertIs(channel, before)

                self.assertEqual(
                    channel.balance_local + channel.balance_remote + channel.inflight, channel.capacity
                )
                self.assertGreaterEqual(min(channel.balance_local, channel.balance_remote), 0)
                self.assertLessEqual(channel.inflight, channel.max_inflight)
                if channel.reserve_met_local:
                    self.assertGreaterEqual(channel.balance_local, channel.reserve)
                if channel.reserve_met_remote:
                    self.assertGreaterEqual(channel.balance_remote, channel.reserve)
        self.assertGreater(rejected, 0)


class TestRoutes(unittest.TestCase):
    def test_two_hop_expiries(self):
        route = build_route(
            "alice",
            [
                RouteHop(channel_id="alice-bob", node="bob", cltv_delta=40),
                RouteHop(channel_id="bob-carol", node="carol", cltv_delta=40),
            ],
            final_delta=9,
            current_height=1000,
        )
        self.assertEqual(route.expiries, [1049, 1009])
        self.assertEqual(route.expiry_for("alice-bob"), 1049)

    def test_single_hop(self):
        route = build_route(
            "alice", [RouteHop(channel_id="alice-bob", node="bob", cltv_delta=40)], 18, 500
        )
        self.assertEqual(route.expiries, [518])

    def test_zero_delta_rejected(self):
        with self.assertRaises(RouteSetupException):
            build_route(
                "alice",
                [
                    RouteHop(channel_id="alice-bob", node="bob", cltv_delta=0),
                    RouteHop(channel_id="bob-carol", node="carol", cltv_delta=40),
                ],
                9,
                1000,
            )

    def test_enforced_delta(self):
        hops = [
            RouteHop(channel_id="alice-bob", node="bob", cltv_delta=14),
            RouteHop(channel_id="bob-carol", node="carol", cltv_delta=14),
        ]
        with self.assertRaises(RouteSetupException):
            build_route("alice", hops, 9, 1000, enforced={"bob": 40})
        self.assertEqual(build_route("alice", hops, 9, 1000, enforced={"bob": 14}).expiries, [1023, 1009])

    def test_empty_route(self):
        with self.assertRaises(RouteSetupException):
            build_route("alice", [], 9, 1000)

    def test_random_routes_are_sound(self):
        rng = RandomSource(31)
        for _ in range(200):
            length, final_delta = (int(v) + 1 for v in rng.integers(6, 2))
            deltas = [int(v) + 1 for v in rng.integers(200, length)]
            hops = [RouteHop(channel_id=f"c{i}", node=f"n{i}", cltv_delta=d) for i, d in enumerate(deltas)]
            route = build_route("payer", hops, final_delta, 700_000)

            self.assertEqual(route.expiries[-1], 700_000 + final_delta)
            for i in range(length - 1):
                self.assertTrue(accept_forward(route.expiries[i], route.expiries[i + 1], deltas[i]))

    def test_accept_forward(self):
        self.assertTrue(accept_forward(1049, 1009, 40))
        self.assertFalse(accept_forward(1048, 1009, 40))
        self.assertFalse(accept_forward(1049, 1009, 0))


class TestOnChainLedger(unittest.TestCase):
    def setUp(self):
        self.rng = RandomSource(5)
        channel = open_channel("ch", "mallory", "alice", LND, 1000)
        self.channel = update_state(channel, (500, 500))
        self.ledger = OnChainLedger()
        self.ledger.track(self.channel)

    def tx(self, kind, state_number=0, broadcaster=Side.LOCAL, **kwargs):
        return OnChainTx(
            kind=kind, channel_id="ch", state_number=state_number, broadcaster=broadcaster, **kwargs
        )

    def test_justice_window(self):
        self.assertEqual(list(justice_window(1000, 144))[0], 1000)
        self.assertEqual(list(justice_window(1000, 144))[-1], 1143)
        self.assertEqual(sweep_height(1000, 144), 1144)
        self.assertEqual(list(justice_window(1000, 1)), [1000])

    def test_justice_in_window(self):
        self.assertTrue(self.ledger.broadcast(self.tx(TxKind.COMMITMENT), 1000).confirmed)
        self.assertTrue(self.ledger.broadcast(self.tx(TxKind.JUSTICE), 1143).confirmed)

        sweep = self.ledger.broadcast(self.tx(TxKind.SWEEP), 1144)
        self.assertIs(sweep.reason, RejectReason.CONFLICTING_SPEND)
        self.assertEqual(final_holdings(self.channel, self.ledger), {"mallory": 0, "alice": 1000})

    def test_justice_too_late(self):
        self.ledger.broadcast(self.tx(TxKind.COMMITMENT), 1000)
        early_sweep = self.ledger.broadcast(self.tx(TxKind.SWEEP), 1143)
        self.assertIs(early_sweep.reason, RejectReason.NOT_YET_VALID)

        late = self.ledger.broadcast(self.tx(TxKind.JUSTICE), 1144)
        self.assertIs(late.reason, RejectReason.OUTSIDE_JUSTICE_WINDOW)
        self.assertTrue(self.ledger.broadcast(self.tx(TxKind.SWEEP), 1144).confirmed)
        self.assertEqual(final_holdings(self.channel, self.ledger), {"mallory": 1000, "alice": 0})

    def test_justice_requires_revoked_state(self):
        self.ledger.broadcast(self.tx(TxKind.COMMITMENT, state_number=1), 1000)
        result = self.ledger.broadcast(self.tx(TxKind.JUSTICE, state_number=1), 1001)
        self.assertIs(result.reason, RejectReason.NOT_REVOKED)
        self.assertEqual(final_holdings(self.channel, self.ledger), {"mallory": 500, "alice": 500})

    def test_missing_commitment(self):
        result = self.ledger.broadcast(self.tx(TxKind.JUSTICE), 1000)
        self.assertIs(result.reason, RejectReason.MISSING_COMMITMENT)

    def test_unknown_state(self):
        result = self.ledger.broadcast(self.tx(TxKind.COMMITMENT, state_number=9), 1000)
        self.assertIs(result.reason, RejectReason.UNKNOWN_STATE)

    def test_double_commitment(self):
        self.ledger.broadcast(self.tx(TxKind.COMMITMENT, state_number=1), 1000)
        result = self.ledger.broadcast(self.tx(TxKind.COMMITMENT, state_number=1, broadcaster=Side.REMOTE), 1001)
        self.assertIs(result.reason, RejectReason.CONFLICTING_SPEND)
        self.assertEqual(len(self.ledger.rejected), 1)

    def test_htlc_race(self):
        lock = new_hash_lock(self.rng)
        channel = update_state(
            open_channel("ch", "mallory", "bob", LND, 1000),
            htlc_ops=[HtlcOp.add(offered(lock, 100, expiry=50))],
        )
        ledger = OnChainLedger()
        ledger.track(channel)
        htlc_tx = dict(channel_id="ch", state_number=1, broadcaster=Side.LOCAL, payment_hash=lock.payment_hash)

        ledger.broadcast(OnChainTx(kind=TxKind.COMMITMENT, **htlc_tx), 40)
        timeout = OnChainTx(kind=TxKind.HTLC_TIMEOUT, valid_from_height=50, **htlc_tx)
        self.assertIs(ledger.broadcast(timeout, 45).reason, RejectReason.NOT_YET_VALID)

        wrong = OnChainTx(kind=TxKind.PREIMAGE, preimage=b"nope", **htlc_tx)
        self.assertIs(ledger.broadcast(wrong, 46).reason, RejectReason.WRONG_PREIMAGE)

        self.assertTrue(ledger.broadcast(timeout, 50).confirmed)
        claim = OnChainTx(kind=TxKind.PREIMAGE, preimage=lock.preimage, **htlc_tx)
        self.assertIs(ledger.broadcast(claim, 51).reason, RejectReason.CONFLICTING_SPEND)
        self.assertEqual(final_holdings(channel, ledger), {"mallory": 1000, "bob": 0})

    def test_preimage_claim_wins(self):
        lock = new_hash_lock(self.rng)
        channel = update_state(
            open_channel("ch", "mallory", "bob", LND, 1000),
            htlc_ops=[HtlcOp.add(offered(lock, 100, expiry=50))],
        )
        ledger = OnChainLedger()
        ledger.track(channel)
        htlc_tx = dict(channel_id="ch", state_number=1, broadcaster=Side.REMOTE, payment_hash=lock.payment_hash)

        ledger.broadcast(OnChainTx(kind=TxKind.COMMITMENT, **htlc_tx), 40)
        claim = OnChainTx(kind=TxKind.HTLC_SUCCESS, preimage=lock.preimage, **htlc_tx)
        self.assertTrue(ledger.broadcast(claim, 41).confirmed)
        timeout = OnChainTx(kind=TxKind.TIMEOUT, valid_from_height=50, **htlc_tx)
        self.assertIs(ledger.broadcast(timeout, 50).reason, RejectReason.CONFLICTING_SPEND)
        self.assertEqual(final_holdings(channel, ledger), {"mallory": 900, "bob": 100})

    def test_unclosed_channel_refunds_htlcs(self):
        lock = new_hash_lock(self.rng)
        channel = update_state(self.channel, htlc_ops=[HtlcOp.add(offered(lock, 100, expiry=50))])
        ledger = OnChainLedger()
        ledger.track(channel)
        self.assertEqual(final_holdings(channel, ledger), {"mallory": 500, "alice": 500})


if __name__ == "__main__":
    unittest.main()
