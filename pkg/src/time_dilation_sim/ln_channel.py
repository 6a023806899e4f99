import logging
from typing import Iterable, Optional

from devtools import pformat

from .schemas.channel import (
    BroadcastResult,
    ChannelState,
    HashLock,
    Htlc,
    HtlcOp,
    ImplementationPreset,
    OnChainTx,
    Route,
    RouteHop,
)
from .sim_core import RandomSource
from .simulation_exception import ChannelUpdateException, ConfigException, RouteSetupException
from .utils import KEY_CSV_DELTA, HtlcDirection, HtlcOpKind, RejectReason, Side, TxKind

PRESETS: dict[str, ImplementationPreset] = {
    "c-lightning": ImplementationPreset(
        name="c-lightning", csv_delta=144, cltv_delta=14, timeout_policy=7
    ),
    "lnd": ImplementationPreset(
        name="lnd", csv_delta=144, cltv_delta=40, timeout_policy=10, csv_delta_max=2016
    ),
    "eclair": ImplementationPreset(
        name="eclair", csv_delta=720, cltv_delta=144, timeout_policy=11
    ),
    "rust-lightning": ImplementationPreset(
        name="rust-lightning", csv_delta=144, cltv_delta=72, timeout_policy=6
    ),
}

UPPER_SUFFIX = "-upper"


def get_preset(name: str, overrides: Optional[dict] = None) -> ImplementationPreset:
    """
    Look up a preset by name. `<name>-upper` selects the top of a ranged csv_delta.

    Parameters:
        name: one of PRESETS, optionally suffixed with `-upper`
        overrides: csv_delta / cltv_delta / timeout_policy values replacing the defaults
    """
    base_name = name.removesuffix(UPPER_SUFFIX)
    if base_name not in PRESETS:
        raise ConfigException(
            f"Unknown implementation preset `{name}`",
            {"name": name, "known": sorted(PRESETS)},
        )

    preset = PRESETS[base_name]
    if name.endswith(UPPER_SUFFIX):
        if preset.csv_delta_max is None:
            raise ConfigException(
                f"Preset `{base_name}` has no csv_delta range", {"name": name}
            )
        preset = preset.model_copy(update={"name": name, KEY_CSV_DELTA: preset.csv_delta_max})

    updates = {key: value for key, value in (overrides or {}).items() if value is not None}
    if updates:
        preset = ImplementationPreset.model_validate(preset.model_dump() | updates)
    return preset


def new_hash_lock(rng: RandomSource) -> HashLock:
    return HashLock(payment_hash=rng.token(), preimage=rng.token())


def open_channel(
    channel_id: str,
    local: str,
    remote: str,
    preset: ImplementationPreset,
    capacity: int,
    funder: Side = Side.LOCAL,
    reserve: int = 0,
    max_inflight: Optional[int] = None,
) -> ChannelState:
    """
    Single-funded channel; the whole capacity starts on the funder's side.
    """
    balance_local = capacity if funder is Side.LOCAL else 0
    channel = ChannelState(
        channel_id=channel_id,
        local=local,
        remote=remote,
        preset=preset,
        capacity=capacity,
        balance_local=balance_local,
        balance_remote=capacity - balance_local,
        reserve=reserve,
        max_inflight=max_inflight if max_inflight is not None else capacity,
        reserve_met_local=balance_local >= reserve,
        reserve_met_remote=capacity - balance_local >= reserve,
    )
    channel.history[0] = channel.snapshot()
    return channel


def _credit(channel: ChannelState, side: Side, amount: int) -> None:
    if side is Side.LOCAL:
        channel.balance_local += amount
    else:
        channel.balance_remote += amount


def _apply_op(channel: ChannelState, op: HtlcOp, adjust_balances: bool) -> None:
    if op.kind is HtlcOpKind.ADD:
        htlc = op.htlc
        if channel.find_htlc(htlc.payment_hash) is not None:
            raise ChannelUpdateException(
                "HTLC with this payment hash already in flight",
                {"channel": channel.channel_id},
            )
        if htlc.direction is HtlcDirection.OFFERED:
            channel.offered_htlcs.append(htlc)
        else:
            channel.received_htlcs.append(htlc)
        if adjust_balances:
            _credit(channel, htlc.offerer, -htlc.amount)
        return

    htlc = channel.find_htlc(op.payment_hash)
    if htlc is None:
        raise ChannelUpdateException(
            f"No in-flight HTLC to {op.kind.value}", {"channel": channel.channel_id}
        )
    if op.kind is HtlcOpKind.SETTLE and not htlc.lock.unlocks(op.preimage):
        raise ChannelUpdateException(
            "Preimage does not unlock the HTLC", {"channel": channel.channel_id}
        )

    if htlc.direction is HtlcDirection.OFFERED:
        channel.offered_htlcs.remove(htlc)
    else:
        channel.received_htlcs.remove(htlc)
    if adjust_balances:
        payee = htlc.offerer.other if op.kind is HtlcOpKind.SETTLE else htlc.offerer
        _credit(channel, payee, htlc.amount)


def _check_invariants(channel: ChannelState) -> None:
    parameters = {
        "channel": channel.channel_id,
        "balance_local": channel.balance_local,
        "balance_remote": channel.balance_remote,
        "inflight": channel.inflight,
    }
    if min(channel.balance_local, channel.balance_remote) < 0:
        raise ChannelUpdateException("Negative balance", parameters)
    if channel.balance_local + channel.balance_remote + channel.inflight != channel.capacity:
        raise ChannelUpdateException("Update does not conserve capacity", parameters)
    if channel.inflight > channel.max_inflight:
        raise ChannelUpdateException(
            "In-flight HTLC value exceeds max_inflight",
            parameters | {"max_inflight": channel.max_inflight},
        )
    for side in Side:
        met = channel.reserve_met_local if side is Side.LOCAL else channel.reserve_met_remote
        if met and channel.balance(side) < channel.reserve:
            raise ChannelUpdateException(
                f"{channel.party(side)} would drop below the channel reserve",
                parameters | {"reserve": channel.reserve},
            )


def update_state(
    channel: ChannelState,
    new_balances: Optional[tuple[int, int]] = None,
    htlc_ops: Iterable[HtlcOp] = (),
) -> ChannelState:
    """
    Sign a new commitment and revoke the previous one.

    With `new_balances` the settled balances are taken as given and the HTLC ops
    only change the in-flight sets; without it each op moves funds itself (add
    debits the offerer, settle credits the receiver, fail refunds the offerer).
    The input channel is never modified; violations raise ChannelUpdateException.
    """
    updated = channel.model_copy(deep=True)
    if new_balances is not None:
        updated.balance_local, updated.balance_remote = new_balances

    for op in htlc_ops:
        _apply_op(updated, op, adjust_balances=new_balances is None)

    _check_invariants(updated)

    updated.reserve_met_local |= updated.balance_local >= updated.reserve
    updated.reserve_met_remote |= updated.balance_remote >= updated.reserve
    updated.revoked_states.add(channel.state_number)
    updated.state_number = channel.state_number + 1
    updated.history[updated.state_number] = updated.snapshot()

    logging.getLogger(__name__).debug(
        f"Channel {updated.channel_id} advanced to state {updated.state_number}: "
        f"{updated.balance_local}/{updated.balance_remote}, in flight {updated.inflight}"
    )
    return updated


def accept_forward(incoming_expiry: int, outgoing_expiry: int, required_delta: int) -> bool:
    """Route-setup check run by an intermediate hop before forwarding."""
    return required_delta > 0 and incoming_expiry >= outgoing_expiry + required_delta


def build_route(
    payer: str,
    hops: list[RouteHop],
    final_delta: int,
    current_height: int,
    enforced: Optional[dict[str, int]] = None,
) -> Route:
    """
    Assign HTLC expiries from the payee backwards. The last HTLC expires at
    current_height + final_delta; every earlier one adds the forwarding node's
    cltv_delta.

    Parameters:
        hops: hops[i] is the channel on which hops[i].node receives the HTLC
        enforced: cltv_delta each forwarding node insists on, defaults to the hop's own
    """
    if not hops:
        raise RouteSetupException("A route needs at least one hop", {"payer": payer})

    expiries = [current_height + final_delta]
    for hop in reversed(hops[:-1]):
        expiries.insert(0, expiries[0] + hop.cltv_delta)

    for i, hop in enumerate(hops[:-1]):
        required = (enforced or {}).get(hop.node, hop.cltv_delta)
        if not accept_forward(expiries[i], expiries[i + 1], required):
            raise RouteSetupException(
                f"{hop.node} rejects the route: cltv_delta {required} not satisfied",
                {
                    "node": hop.node,
                    "incoming_expiry": expiries[i],
                    "outgoing_expiry": expiries[i + 1],
                    "required_delta": required,
                },
            )

    return Route(
        payer=payer,
        hops=hops,
        final_delta=final_delta,
        current_height=current_height,
        expiries=expiries,
    )


def justice_window(commitment_confirmed_at: int, csv_delta: int) -> range:
    """Heights at which a justice transaction against a revoked commitment confirms."""
    return range(commitment_confirmed_at, commitment_confirmed_at + csv_delta)


def sweep_height(commitment_confirmed_at: int, csv_delta: int) -> int:
    return commitment_confirmed_at + csv_delta


class OnChainLedger:
    """
    Confirmed transactions of the tracked channels. Every spendable output is keyed
    (funding, channel), (htlc, channel, payment hash) or (to_local, channel, state),
    and at most one transaction ever spends a key.
    """

    def __init__(self):
        self.channels: dict[str, ChannelState] = {}
        self.spends: dict[tuple, OnChainTx] = {}
        self.confirmed: list[OnChainTx] = []
        self.rejected: list[BroadcastResult] = []

    def track(self, channel: ChannelState) -> None:
        self.channels[channel.channel_id] = channel

    def commitment(self, channel_id: str) -> Optional[OnChainTx]:
        return self.spends.get(("funding", channel_id))

    def is_spent(self, key: tuple) -> bool:
        return key in self.spends

    def _snapshot_htlc(self, tx: OnChainTx) -> Optional[Htlc]:
        snapshot = self.channels[tx.channel_id].history[tx.state_number]
        for htlc in snapshot.htlcs():
            if htlc.payment_hash == tx.payment_hash:
                return htlc
        return None

    def _validate(self, tx: OnChainTx, at_height: int) -> tuple[Optional[RejectReason], tuple]:
        channel = self.channels.get(tx.channel_id)
        if channel is None or tx.state_number not in channel.history:
            return RejectReason.UNKNOWN_STATE, ()

        if tx.kind is TxKind.COMMITMENT:
            return None, ("funding", tx.channel_id)

        commitment = self.commitment(tx.channel_id)
        if (
            commitment is None
            or commitment.state_number != tx.state_number
            or commitment.broadcaster is not tx.broadcaster
        ):
            return RejectReason.MISSING_COMMITMENT, ()
        confirmed_at = commitment.confirmed_at_height
        csv_delta = channel.preset.csv_delta

        if tx.kind is TxKind.JUSTICE:
            if tx.state_number not in channel.revoked_states:
                return RejectReason.NOT_REVOKED, ()
            if at_height not in justice_window(confirmed_at, csv_delta):
                return RejectReason.OUTSIDE_JUSTICE_WINDOW, ()
            return None, ("to_local", tx.channel_id, tx.state_number)

        if tx.kind is TxKind.SWEEP:
            if at_height < sweep_height(confirmed_at, csv_delta):
                return RejectReason.NOT_YET_VALID, ()
            return None, ("to_local", tx.channel_id, tx.state_number)

        htlc = self._snapshot_htlc(tx)
        if htlc is None:
            return RejectReason.UNKNOWN_STATE, ()
        if tx.kind in (TxKind.HTLC_TIMEOUT, TxKind.TIMEOUT):
            if at_height < max(tx.valid_from_height, htlc.expiry_height):
                return RejectReason.NOT_YET_VALID, ()
        elif not htlc.lock.unlocks(tx.preimage):
            return RejectReason.WRONG_PREIMAGE, ()
        return None, ("htlc", tx.channel_id, tx.payment_hash)

    def broadcast(self, tx: OnChainTx, at_height: int) -> BroadcastResult:
        """
        Confirm `tx` at `at_height` or reject it. Rejections are returned, never raised.
        """
        reason, key = self._validate(tx, at_height)
        if reason is None and key in self.spends:
            reason = RejectReason.CONFLICTING_SPEND

        if reason is not None:
            result = BroadcastResult(tx=tx, at_height=at_height, confirmed=False, reason=reason)
            self.rejected.append(result)
            logging.getLogger(__name__).debug(
                f"{tx.kind.value} on {tx.channel_id} rejected at height {at_height}: {reason.value}"
            )
            return result

        confirmed = tx.model_copy(update={"confirmed_at_height": at_height})
        self.spends[key] = confirmed
        self.confirmed.append(confirmed)
        logging.getLogger(__name__).debug(
            f"{tx.kind.value} on {tx.channel_id} (state {tx.state_number}) confirmed at height {at_height}"
        )
        return BroadcastResult(tx=confirmed, at_height=at_height, confirmed=True)


def final_holdings(channel: ChannelState, ledger: OnChainLedger) -> dict[str, int]:
    """
    What each party ends up owning from this channel.

    An unclosed channel pays out its latest state, with pending HTLCs returned to
    their offerers. A closed channel pays out the confirmed commitment: the
    non-broadcaster's balance directly, the broadcaster's balance to whoever won
    the justice/sweep race, and each HTLC to whoever spent it (offerer if unspent).
    """
    holdings = {channel.local: 0, channel.remote: 0}
    commitment = ledger.commitment(channel.channel_id)

    if commitment is None:
        for side in Side:
            holdings[channel.party(side)] += channel.balance(side)
        for htlc in channel.offered_htlcs + channel.received_htlcs:
            holdings[channel.party(htlc.offerer)] += htlc.amount
        return holdings

    snapshot = channel.history[commitment.state_number]
    owner = commitment.broadcaster
    holdings[channel.party(owner.other)] += snapshot.balance(owner.other)

    to_local = ledger.spends.get(("to_local", channel.channel_id, commitment.state_number))
    punished = to_local is not None and to_local.kind is TxKind.JUSTICE
    beneficiary = owner.other if punished else owner
    holdings[channel.party(beneficiary)] += snapshot.balance(owner)

    for htlc in snapshot.htlcs():
        spend = ledger.spends.get(("htlc", channel.channel_id, htlc.payment_hash))
        if punished:
            winner = owner.other
        elif spend is not None and spend.kind in (TxKind.HTLC_SUCCESS, TxKind.PREIMAGE):
            winner = htlc.offerer.other
        else:
            winner = htlc.offerer
        holdings[channel.party(winner)] += htlc.amount

    logger = logging.getLogger(__name__)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"Final holdings of {channel.channel_id}:\n" + pformat(holdings))
    return holdings


def entitled_holdings(channel: ChannelState) -> dict[str, int]:
    """Latest-state holdings with every in-flight HTLC fulfilled."""
    holdings = {channel.local: channel.balance_local, channel.remote: channel.balance_remote}
    for htlc in channel.offered_htlcs + channel.received_htlcs:
        holdings[channel.party(htlc.offerer.other)] += htlc.amount
    return holdings
