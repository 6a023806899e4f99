import logging
from dataclasses import dataclass
from typing import Optional

from .chain_model import GENESIS, Block, ChainView
from .schemas.scenario import IbdPolicy, StaleTipPolicy
from .simulation_exception import OutOfOrderDeliveryException
from .utils import BackendKind, TriggerOutcome


@dataclass(slots=True)
class VictimState:
    view: ChainView
    tip_mined_at: int
    last_delivery_at: int
    pending_stale_check: Optional[int] = None
    de_eclipse_attempts: int = 0


class VictimNode:
    """
    The victim's Bitcoin backend: block acceptance, stale-tip detection and the
    optional IBD fallback. Light clients never run the stale-tip heuristic.
    """

    def __init__(
        self,
        backend: BackendKind,
        stale_tip: Optional[StaleTipPolicy] = None,
        ibd: Optional[IbdPolicy] = None,
        tip: Block = GENESIS,
        start: int = 0,
    ):
        self.backend = backend
        self.stale_tip = stale_tip if stale_tip is not None else StaleTipPolicy()
        self.ibd = ibd if ibd is not None else IbdPolicy()
        self.state = VictimState(
            view=ChainView(tip_height=tip.height, tip_seen_at=start),
            tip_mined_at=tip.mined_at,
            last_delivery_at=start,
        )
        if self.stale_tip_active:
            self.state.pending_stale_check = start + self.stale_tip.threshold

    @property
    def stale_tip_active(self) -> bool:
        return self.backend is BackendKind.FULL_NODE and self.stale_tip.enabled

    @property
    def ibd_active(self) -> bool:
        return self.backend is BackendKind.FULL_NODE and self.ibd.enabled

    @property
    def tip_height(self) -> int:
        return self.state.view.tip_height

    def deliver_block(self, block: Block, at: int) -> VictimState:
        state = self.state
        if block.height != state.view.tip_height + 1:
            raise OutOfOrderDeliveryException(
                "Blocks must be delivered at consecutive heights",
                {"tip_height": state.view.tip_height, "block_height": block.height},
            )
        if at < block.mined_at:
            raise OutOfOrderDeliveryException(
                "Block delivered before it was mined",
                {"at": at, "mined_at": block.mined_at, "height": block.height},
            )

        state.view.tip_height = block.height
        state.view.tip_seen_at = at
        state.tip_mined_at = block.mined_at
        state.last_delivery_at = at
        if self.stale_tip_active:
            state.pending_stale_check = at + self.stale_tip.threshold
        return state

    def check_stale_tip(self, now: int) -> TriggerOutcome:
        if not self.stale_tip_active:
            return TriggerOutcome.NO_TRIGGER
        if now - self.state.last_delivery_at >= self.stale_tip.threshold:
            return TriggerOutcome.DE_ECLIPSE_ATTEMPT
        return TriggerOutcome.NO_TRIGGER

    def on_stale_check(self, now: int) -> TriggerOutcome:
        """
        Run the stale-tip timer firing at `now`; an attempt arms the next retry.
        """
        outcome = self.check_stale_tip(now)
        if outcome is TriggerOutcome.DE_ECLIPSE_ATTEMPT:
            self.state.de_eclipse_attempts += 1
            self.state.pending_stale_check = now + self.stale_tip.retry_interval
            logging.getLogger(__name__).debug(
                f"Stale tip at t={now}: attempt {self.state.de_eclipse_attempts}, "
                f"last delivery t={self.state.last_delivery_at}"
            )
        return outcome

    def check_ibd(self, wall_clock: int) -> bool:
        if not self.ibd_active:
            return False
        return wall_clock - self.state.tip_mined_at > self.ibd.lag_threshold

    def next_ibd_check(self) -> Optional[int]:
        """First second at which the IBD check would fire for the current tip."""
        if not self.ibd_active:
            return None
        return self.state.tip_mined_at + self.ibd.lag_threshold + 1

    def sync_to(self, tip: Block, at: int) -> VictimState:
        """
        Tip sync with an honest peer after a successful de-eclipse; no sync latency.
        """
        state = self.state
        state.view.tip_height = tip.height
        state.view.tip_seen_at = at
        state.tip_mined_at = tip.mined_at
        state.last_delivery_at = at
        state.pending_stale_check = (
            at + self.stale_tip.threshold if self.stale_tip_active else None
        )
        return state


def deliver_block(victim: VictimNode, block: Block, at: int) -> VictimState:
    return victim.deliver_block(block, at)


def check_stale_tip(victim: VictimNode, now: int) -> TriggerOutcome:
    return victim.check_stale_tip(now)


def check_ibd(victim: VictimNode, wall_clock: int) -> bool:
    return victim.check_ibd(wall_clock)
