from pydantic import BaseModel, Field, PositiveInt, model_validator
from typing import Optional, List, Dict, Set

from time_dilation_sim.utils import HtlcDirection, HtlcOpKind, Side, TxKind, RejectReason


class ImplementationPreset(BaseModel):
    name: str
    csv_delta: PositiveInt  # C, contestation window after a unilateral close
    cltv_delta: PositiveInt  # M, per-hop timelock decrement
    timeout_policy: PositiveInt  # I, blocks before expiry to go on-chain with a preimage
    csv_delta_max: Optional[PositiveInt] = None  # upper bound when the default is a range


class HashLock(BaseModel):
    """
    Opaque payment hash / preimage pair. Matching is token equality, no hashing.
    """

    payment_hash: bytes
    preimage: bytes

    def unlocks(self, preimage: Optional[bytes]) -> bool:
        return preimage is not None and preimage == self.preimage


class Htlc(BaseModel):
    amount: PositiveInt
    lock: HashLock = Field(repr=False)
    expiry_height: int
    created_at_height: int = 0
    direction: HtlcDirection  # relative to the channel's local side

    @model_validator(mode="after")
    def expiry_after_creation(self):
        if self.expiry_height <= self.created_at_height:
            raise ValueError(
                f"HTLC expiry {self.expiry_height} must be after creation height {self.created_at_height}"
            )
        return self

    @property
    def payment_hash(self) -> bytes:
        return self.lock.payment_hash

    @property
    def offerer(self) -> Side:
        return Side.LOCAL if self.direction is HtlcDirection.OFFERED else Side.REMOTE


class HtlcOp(BaseModel):
    kind: HtlcOpKind
    htlc: Optional[Htlc] = None  # for ADD
    payment_hash: Optional[bytes] = None  # for SETTLE / FAIL
    preimage: Optional[bytes] = None  # for SETTLE

    @classmethod
    def add(cls, htlc: Htlc) -> "HtlcOp":
        return cls(kind=HtlcOpKind.ADD, htlc=htlc)

    @classmethod
    def settle(cls, payment_hash: bytes, preimage: bytes) -> "HtlcOp":
        return cls(kind=HtlcOpKind.SETTLE, payment_hash=payment_hash, preimage=preimage)

    @classmethod
    def fail(cls, payment_hash: bytes) -> "HtlcOp":
        return cls(kind=HtlcOpKind.FAIL, payment_hash=payment_hash)


class CommitmentSnapshot(BaseModel):
    state_number: int
    balance_local: int
    balance_remote: int
    offered_htlcs: List[Htlc] = []
    received_htlcs: List[Htlc] = []

    def balance(self, side: Side) -> int:
        return self.balance_local if side is Side.LOCAL else self.balance_remote

    def htlcs(self) -> List[Htlc]:
        return self.offered_htlcs + self.received_htlcs


class ChannelState(BaseModel):
    channel_id: str
    local: str  # party names
    remote: str
    preset: ImplementationPreset
    capacity: PositiveInt
    balance_local: int
    balance_remote: int
    reserve: int = 0
    max_inflight: int
    offered_htlcs: List[Htlc] = []
    received_htlcs: List[Htlc] = []
    state_number: int = 0
    revoked_states: Set[int] = set()
    history: Dict[int, CommitmentSnapshot] = {}
    reserve_met_local: bool = False
    reserve_met_remote: bool = False

    def party(self, side: Side) -> str:
        return self.local if side is Side.LOCAL else self.remote

    def balance(self, side: Side) -> int:
        return self.balance_local if side is Side.LOCAL else self.balance_remote

    @property
    def inflight(self) -> int:
        return sum(htlc.amount for htlc in self.offered_htlcs + self.received_htlcs)

    def find_htlc(self, payment_hash: bytes) -> Optional[Htlc]:
        for htlc in self.offered_htlcs + self.received_htlcs:
            if htlc.payment_hash == payment_hash:
                return htlc
        return None

    def snapshot(self) -> CommitmentSnapshot:
        return CommitmentSnapshot(
            state_number=self.state_number,
            balance_local=self.balance_local,
            balance_remote=self.balance_remote,
            offered_htlcs=list(self.offered_htlcs),
            received_htlcs=list(self.received_htlcs),
        )


class OnChainTx(BaseModel):
    kind: TxKind
    channel_id: str
    state_number: int
    broadcaster: Side  # whose commitment this transaction belongs to
    valid_from_height: int = 0
    payment_hash: Optional[bytes] = None  # HTLC-spending kinds
    preimage: Optional[bytes] = Field(default=None, repr=False)
    confirmed_at_height: Optional[int] = None


class BroadcastResult(BaseModel):
    tx: OnChainTx
    at_height: int
    confirmed: bool
    reason: Optional[RejectReason] = None


class RouteHop(BaseModel):
    channel_id: str
    node: str  # node receiving the HTLC on this channel
    cltv_delta: int  # delta the receiving node enforces when forwarding


class Route(BaseModel):
    payer: str
    hops: List[RouteHop]
    final_delta: PositiveInt
    current_height: int
    expiries: List[int]

    def expiry_for(self, channel_id: str) -> int:
        for hop, expiry in zip(self.hops, self.expiries):
            if hop.channel_id == channel_id:
                return expiry
        raise KeyError(f"Channel {channel_id} is not on this route")
