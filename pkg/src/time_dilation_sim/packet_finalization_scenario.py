from typing import Optional

from .base_scenario import BaseScenario
from .ln_channel import build_route, new_hash_lock, open_channel
from .schemas.channel import HashLock, Htlc, HtlcOp, OnChainTx, Route, RouteHop
from .utils import A3LeadMode, AttackKind, EventKind, HtlcDirection, Side, TxKind

UPSTREAM_ID = "alice-mallory"
DOWNSTREAM_ID = "mallory-bob"


class PacketFinalizationScenario(BaseScenario):
    """
    Alice pays Bob through Mallory. Bob reveals the preimage off-chain, Mallory
    never signs the resulting state, and Bob, pinned behind, only goes on-chain
    `timeout_policy` blocks before expiry in his own view. Mallory times the HTLC
    out first and still collects from Alice with the preimage she learned.
    """

    kind = AttackKind.A3

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.lock: Optional[HashLock] = None
        self.route: Optional[Route] = None
        self.bob_claimed = False
        self.upstream_settled = False

    @property
    def attacker_first(self) -> bool:
        return self.config.a3_lead_mode is A3LeadMode.I

    @property
    def downstream_expiry(self) -> int:
        return self.route.expiries[1]

    def prepare(self) -> None:
        capacity = self.config.channel_capacity
        reserve = self.config.reserve
        preset = self.config.preset
        self.add_channel(open_channel(UPSTREAM_ID, "alice", "mallory", preset, capacity, Side.LOCAL, reserve))
        self.add_channel(open_channel(DOWNSTREAM_ID, "mallory", "bob", preset, capacity, Side.LOCAL, reserve))

    def start_exploit(self) -> None:
        cltv_delta = self.config.preset.cltv_delta
        self.lock = new_hash_lock(self.token_rng)
        self.route = build_route(
            "alice",
            [
                RouteHop(channel_id=UPSTREAM_ID, node="mallory", cltv_delta=cltv_delta),
                RouteHop(channel_id=DOWNSTREAM_ID, node="bob", cltv_delta=cltv_delta),
            ],
            self.config.final_delta,
            self.base_height,
        )

        for channel_id, expiry in zip((UPSTREAM_ID, DOWNSTREAM_ID), self.route.expiries):
            htlc = Htlc(
                amount=self.htlc_amount,
                lock=self.lock,
                expiry_height=expiry,
                created_at_height=self.base_height,
                direction=HtlcDirection.OFFERED,
            )
            self.update(channel_id, htlc_ops=[HtlcOp.add(htlc)])

        self.note(
            EventKind.HTLC_EXPIRY,
            f"bob reveals the preimage off-chain, mallory stalls; bob's HTLC expires at {self.downstream_expiry}",
            3,
        )

    def victim_step(self) -> None:
        claim_height = self.downstream_expiry - self.config.preset.timeout_policy
        if self.bob_claimed or self.victim_view < claim_height:
            return

        self.bob_claimed = True
        commitment = self.ledger.commitment(DOWNSTREAM_ID)
        if commitment is not None and commitment.confirmed_at_height <= self.victim_view:
            self.broadcast(
                "bob", self.htlc_tx(TxKind.PREIMAGE, commitment.state_number, commitment.broadcaster), 4
            )
            return

        state_number = self.channels[DOWNSTREAM_ID].state_number
        result = self.broadcast(
            "bob",
            OnChainTx(
                kind=TxKind.COMMITMENT,
                channel_id=DOWNSTREAM_ID,
                state_number=state_number,
                broadcaster=Side.REMOTE,
            ),
            4,
        )
        if result.confirmed:
            self.broadcast("bob", self.htlc_tx(TxKind.HTLC_SUCCESS, state_number, Side.REMOTE), 4)

    def attacker_step(self) -> None:
        if self.network_height != self.downstream_expiry:
            return

        commitment = self.ledger.commitment(DOWNSTREAM_ID)
        if commitment is None:
            state_number = self.channels[DOWNSTREAM_ID].state_number
            result = self.broadcast(
                "mallory",
                OnChainTx(
                    kind=TxKind.COMMITMENT,
                    channel_id=DOWNSTREAM_ID,
                    state_number=state_number,
                    broadcaster=Side.LOCAL,
                ),
                5,
            )
            if result.confirmed:
                self.broadcast("mallory", self.htlc_tx(TxKind.HTLC_TIMEOUT, state_number, Side.LOCAL), 5)
        else:
            self.broadcast(
                "mallory", self.htlc_tx(TxKind.TIMEOUT, commitment.state_number, commitment.broadcaster), 5
            )

        self.update(UPSTREAM_ID, htlc_ops=[HtlcOp.settle(self.lock.payment_hash, self.lock.preimage)])
        self.upstream_settled = True
        self.note(EventKind.HTLC_EXPIRY, "mallory settles upstream with alice using the preimage", 6)

    def htlc_tx(self, kind: TxKind, state_number: int, owner: Side) -> OnChainTx:
        timeout = kind in (TxKind.HTLC_TIMEOUT, TxKind.TIMEOUT)
        return OnChainTx(
            kind=kind,
            channel_id=DOWNSTREAM_ID,
            state_number=state_number,
            broadcaster=owner,
            valid_from_height=self.downstream_expiry if timeout else 0,
            payment_hash=self.lock.payment_hash,
            preimage=None if timeout else self.lock.preimage,
        )

    def resolved(self) -> bool:
        return self.upstream_settled and self.bob_claimed
