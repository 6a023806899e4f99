from typing import Optional

from .base_scenario import BaseScenario
from .ln_channel import build_route, new_hash_lock, open_channel
from .schemas.channel import HashLock, Htlc, HtlcOp, OnChainTx, Route, RouteHop
from .utils import AttackKind, EventKind, HtlcDirection, Side, TxKind

INCOMING_ID = "mallory-bob"
OUTGOING_ID = "bob-mallet"


class PerHopDelayScenario(BaseScenario):
    """
    Mallory routes a payment through Bob to her accomplice Mallet. When the
    incoming HTLC expires Mallory times it out on-chain, and in the same instant
    Mallet settles the outgoing HTLC off-chain. Bob only accepts that settlement
    while his outgoing HTLC has not expired in his own view, which needs a lead
    of cltv_delta + 1.
    """

    kind = AttackKind.A2

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.lock: Optional[HashLock] = None
        self.route: Optional[Route] = None
        self.outgoing_pending = False
        self.bob_knows_preimage = False
        self.incoming_claimed = False

    @property
    def incoming_expiry(self) -> int:
        return self.route.expiries[0]

    @property
    def outgoing_expiry(self) -> int:
        return self.route.expiries[1]

    def prepare(self) -> None:
        capacity = self.config.channel_capacity
        reserve = self.config.reserve
        preset = self.config.preset
        self.add_channel(open_channel(INCOMING_ID, "mallory", "bob", preset, capacity, Side.LOCAL, reserve))
        self.add_channel(open_channel(OUTGOING_ID, "bob", "mallet", preset, capacity, Side.LOCAL, reserve))

    def start_exploit(self) -> None:
        cltv_delta = self.config.preset.cltv_delta
        self.lock = new_hash_lock(self.token_rng)
        self.route = build_route(
            "mallory",
            [
                RouteHop(channel_id=INCOMING_ID, node="bob", cltv_delta=cltv_delta),
                RouteHop(channel_id=OUTGOING_ID, node="mallet", cltv_delta=cltv_delta),
            ],
            self.config.final_delta,
            self.base_height,
            enforced={"bob": cltv_delta},
        )

        for channel_id, expiry in zip((INCOMING_ID, OUTGOING_ID), self.route.expiries):
            htlc = Htlc(
                amount=self.htlc_amount,
                lock=self.lock,
                expiry_height=expiry,
                created_at_height=self.base_height,
                direction=HtlcDirection.OFFERED,
            )
            self.update(channel_id, htlc_ops=[HtlcOp.add(htlc)])
        self.outgoing_pending = True

        self.note(
            EventKind.HTLC_EXPIRY,
            f"route set up, expiries {self.incoming_expiry} (mallory-bob) and "
            f"{self.outgoing_expiry} (bob-mallet)",
            3,
        )

    def victim_step(self) -> None:
        if self.outgoing_pending and self.victim_view >= self.outgoing_expiry:
            self.outgoing_pending = False
            self.go_on_chain(OUTGOING_ID, "bob", Side.LOCAL, TxKind.HTLC_TIMEOUT)

        if (
            self.bob_knows_preimage
            and not self.incoming_claimed
            and self.victim_view >= self.incoming_expiry - self.config.preset.timeout_policy
        ):
            self.incoming_claimed = True
            commitment = self.ledger.commitment(INCOMING_ID)
            if commitment is not None and commitment.confirmed_at_height <= self.victim_view:
                self.broadcast("bob", self.htlc_tx(TxKind.PREIMAGE, INCOMING_ID, commitment.state_number, commitment.broadcaster))
            else:
                self.go_on_chain(INCOMING_ID, "bob", Side.REMOTE, TxKind.HTLC_SUCCESS)

    def attacker_step(self) -> None:
        if self.network_height != self.incoming_expiry:
            return

        self.go_on_chain(INCOMING_ID, "mallory", Side.LOCAL, TxKind.HTLC_TIMEOUT, 4)

        if self.outgoing_pending:
            self.update(OUTGOING_ID, htlc_ops=[HtlcOp.settle(self.lock.payment_hash, self.lock.preimage)])
            self.outgoing_pending = False
            self.bob_knows_preimage = True
            self.note(EventKind.HTLC_EXPIRY, "mallet settles with bob off-chain", 5)
        else:
            commitment = self.ledger.commitment(OUTGOING_ID)
            if commitment is not None:
                self.broadcast(
                    "mallet",
                    self.htlc_tx(TxKind.PREIMAGE, OUTGOING_ID, commitment.state_number, commitment.broadcaster),
                    5,
                )

    def htlc_tx(self, kind: TxKind, channel_id: str, state_number: int, owner: Side) -> OnChainTx:
        timeout = kind in (TxKind.HTLC_TIMEOUT, TxKind.TIMEOUT)
        return OnChainTx(
            kind=kind,
            channel_id=channel_id,
            state_number=state_number,
            broadcaster=owner,
            valid_from_height=self.route.expiry_for(channel_id) if timeout else 0,
            payment_hash=self.lock.payment_hash,
            preimage=None if timeout else self.lock.preimage,
        )

    def go_on_chain(
        self, channel_id: str, party: str, side: Side, second_stage: TxKind, step: Optional[int] = None
    ) -> None:
        """Unilateral close with the latest commitment, then the HTLC spend on it."""
        state_number = self.channels[channel_id].state_number
        result = self.broadcast(
            party,
            OnChainTx(
                kind=TxKind.COMMITMENT,
                channel_id=channel_id,
                state_number=state_number,
                broadcaster=side,
            ),
            step,
        )
        if result.confirmed:
            self.broadcast(party, self.htlc_tx(second_stage, channel_id, state_number, side), step)

    def resolved(self) -> bool:
        if self.route is None or self.network_height < self.incoming_expiry:
            return False
        if self.bob_knows_preimage and not self.incoming_claimed:
            return False
        return not self.outgoing_pending
