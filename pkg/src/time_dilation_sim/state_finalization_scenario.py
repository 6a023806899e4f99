from .base_scenario import BaseScenario
from .ln_channel import open_channel, sweep_height
from .schemas.channel import OnChainTx
from .utils import AttackKind, EventKind, Side, TxKind

CHANNEL_ID = "mallory-alice"


class StateFinalizationScenario(BaseScenario):
    """
    Revoked-state broadcast. Mallory (channel local side) publishes a commitment
    she already revoked while Alice's view is pinned `lead` blocks behind; the
    theft works when Alice only sees the commitment after its justice window
    closed, i.e. lead >= csv_delta.
    """

    kind = AttackKind.A1

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.revoked_state: int = 0
        self.justice_attempted = False

    def prepare(self) -> None:
        capacity = self.config.channel_capacity
        reserve = self.config.reserve
        funder = Side.REMOTE if self.config.victim_funded else Side.LOCAL
        self.add_channel(
            open_channel(
                CHANNEL_ID, "mallory", "alice", self.config.preset, capacity, funder, reserve
            )
        )

        if self.config.victim_funded:
            # mallory routes payments to herself through alice until the channel favors her
            self.update(CHANNEL_ID, (capacity - reserve, reserve))

        self.revoked_state = self.channels[CHANNEL_ID].state_number
        self.update(CHANNEL_ID, (reserve, capacity - reserve))

    def start_exploit(self) -> None:
        self.note(
            EventKind.BROADCAST,
            f"state {self.revoked_state} revoked, alice holds "
            f"{self.channels[CHANNEL_ID].balance_remote} in state {self.channels[CHANNEL_ID].state_number}",
            1,
        )

    def attacker_step(self) -> None:
        if self.network_height == self.base_height + 1:
            self.broadcast(
                "mallory",
                OnChainTx(
                    kind=TxKind.COMMITMENT,
                    channel_id=CHANNEL_ID,
                    state_number=self.revoked_state,
                    broadcaster=Side.LOCAL,
                ),
                3,
            )

        commitment = self.ledger.commitment(CHANNEL_ID)
        if (
            commitment is not None
            and commitment.state_number == self.revoked_state
            and not self.ledger.is_spent(("to_local", CHANNEL_ID, self.revoked_state))
            and self.network_height
            >= sweep_height(commitment.confirmed_at_height, self.config.preset.csv_delta)
        ):
            self.broadcast(
                "mallory",
                OnChainTx(
                    kind=TxKind.SWEEP,
                    channel_id=CHANNEL_ID,
                    state_number=self.revoked_state,
                    broadcaster=Side.LOCAL,
                ),
                5,
            )

    def victim_step(self) -> None:
        commitment = self.ledger.commitment(CHANNEL_ID)
        if commitment is None or self.justice_attempted:
            return
        if self.victim_view < commitment.confirmed_at_height:
            return

        self.justice_attempted = True
        self.broadcast(
            "alice",
            OnChainTx(
                kind=TxKind.JUSTICE,
                channel_id=CHANNEL_ID,
                state_number=commitment.state_number,
                broadcaster=commitment.broadcaster,
            ),
            4,
        )

    def resolved(self) -> bool:
        return self.ledger.is_spent(("to_local", CHANNEL_ID, self.revoked_state))
