import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from devtools import pformat

from .chain_model import Block, Chain
from .eclipse_model import resolve_de_eclipse
from .schemas.scenario import DilationOutcome, DilationStrategy, NodePolicies, TraceEntry
from .sim_core import RandomSource, SimEvent, Simulator
from .simulation_exception import HorizonExceededException
from .utils import (
    DEFAULT_MAX_BLOCKS,
    DEFAULT_MEAN_BLOCK_INTERVAL,
    SECONDS_PER_MINUTE,
    BackendKind,
    DeEclipseOutcome,
    EventKind,
    FailureCause,
    TriggerOutcome,
)
from .victim_node import VictimNode

MINING_STREAM = 0
DECISION_STREAM = 1


@dataclass(slots=True)
class DilationState:
    withheld: deque = field(default_factory=deque)  # mined, not yet delivered, by height
    last_delivery_at: int = 0  # latest delivery slot handed out
    achieved_lead: int = 0
    failure: Optional[FailureCause] = None


def eclipse_time_formula(
    target_lead: int, slowdown: float, block_minutes: float = 10.0
) -> float:
    """
    Closed-form eclipse time in minutes: (TL + (10/SR)·TL)·10.

    Parameters:
        target_lead: TL, blocks of advantage needed
        slowdown: SR, minutes of malicious delay per block; math.inf for a light client
        block_minutes: mean block interval in minutes
    Returns math.inf when SR is 0 (no dilation is possible).
    """
    if target_lead < 1:
        raise ValueError(f"Target lead must be at least 1, got {target_lead}")
    if slowdown < 0:
        raise ValueError(f"Slowdown must be non-negative, got {slowdown}")

    if math.isinf(slowdown):
        return target_lead * block_minutes
    if slowdown == 0:
        return math.inf
    return (target_lead + (block_minutes / slowdown) * target_lead) * block_minutes


def schedule_delivery(
    state: DilationState, strategy: DilationStrategy, block: Block
) -> int:
    """
    Hand out the delivery slot for the next undelivered block and record it.

    delivery(k) = max(mined_at(k), delivery(k-1) + per_block_delay)
    """
    at = max(block.mined_at, state.last_delivery_at + strategy.per_block_delay)
    state.last_delivery_at = at
    return at


class DilationRun:
    """
    One dilation trial: mining, scheduled deliveries and the victim's timers on a
    single event queue.
    """

    def __init__(
        self,
        strategy: DilationStrategy,
        backend: BackendKind,
        policies: NodePolicies,
        rng: RandomSource,
        mean_interval: int = DEFAULT_MEAN_BLOCK_INTERVAL,
        max_blocks: int = DEFAULT_MAX_BLOCKS,
        horizon_seconds: Optional[int] = None,
        trace: bool = False,
    ):
        self.strategy = strategy
        self.backend = backend
        self.policies = policies
        self.decision_rng = rng.fork(DECISION_STREAM)
        self.chain = Chain(rng.fork(MINING_STREAM), mean_interval)
        self.victim = VictimNode(backend, policies.stale_tip, policies.ibd)
        self.state = DilationState()
        self.sim = Simulator(horizon=horizon_seconds)
        self.max_blocks = max_blocks
        self.withhold_all = (
            backend is BackendKind.LIGHT_CLIENT and strategy.per_block_delay > 0
        )
        self.trace_enabled = trace
        self.trace: list[TraceEntry] = []

    @property
    def network_height(self) -> int:
        return self.chain.tip.height

    def run(self) -> DilationOutcome:
        try:
            self._schedule_next_block()
            self._arm_stale_check()
            self._arm_ibd_check()
            self.sim.run(self._handle)
        except HorizonExceededException as e:
            logging.getLogger(__name__).warning(
                f"Dilation trial hit the time horizon: {e.parameters}"
            )
            self.state.failure = FailureCause.INCONCLUSIVE

        outcome = DilationOutcome(
            elapsed=self.sim.now,
            failure=self.state.failure,
            achieved_lead=self.state.achieved_lead,
            network_height=self.network_height,
            victim_height=self.victim.tip_height,
            de_eclipse_attempts=self.victim.state.de_eclipse_attempts,
            trace=self.trace,
        )
        logger = logging.getLogger(__name__)
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                "Dilation outcome:\n" + pformat(outcome.model_dump(exclude={"trace"}))
            )
        return outcome

    def _handle(self, event: SimEvent) -> bool:
        if event.kind is EventKind.BLOCK_MINED:
            return self._on_block_mined(event.payload)
        if event.kind is EventKind.BLOCK_DELIVERED:
            return self._on_block_delivered(event.payload)
        if event.kind is EventKind.STALE_TIP_CHECK:
            return self._on_stale_check()
        if event.kind is EventKind.IBD_CHECK:
            return self._on_ibd_check(event.payload)
        return False

    def _schedule_next_block(self) -> None:
        block = self.chain.next_block()
        self.sim.schedule(SimEvent(block.mined_at, EventKind.BLOCK_MINED, block))

    def _arm_stale_check(self) -> None:
        pending = self.victim.state.pending_stale_check
        if pending is not None:
            self.sim.schedule(SimEvent(pending, EventKind.STALE_TIP_CHECK))

    def _arm_ibd_check(self) -> None:
        at = self.victim.next_ibd_check()
        if at is not None:
            self.sim.schedule(SimEvent(at, EventKind.IBD_CHECK, self.victim.tip_height))

    def _update_lead(self) -> int:
        lead = self.network_height - self.victim.tip_height
        self.state.achieved_lead = lead
        return lead

    def _record(self, event: EventKind, note: str = "") -> None:
        if self.trace_enabled:
            self.trace.append(
                TraceEntry(
                    time=self.sim.now,
                    event=event.value,
                    victim_height=self.victim.tip_height,
                    network_height=self.network_height,
                    lead=self.state.achieved_lead,
                    note=note,
                )
            )

    def _deliver(self, block: Block) -> None:
        self.victim.deliver_block(block, self.sim.now)
        self._update_lead()
        self._record(EventKind.BLOCK_DELIVERED, f"height {block.height}")
        self._arm_stale_check()
        self._arm_ibd_check()

    def _on_block_mined(self, block: Block) -> bool:
        self.chain.append(block)
        self._update_lead()
        self._record(EventKind.BLOCK_MINED, f"height {block.height}")

        if not self.withhold_all:
            at = schedule_delivery(self.state, self.strategy, block)
            if at == self.sim.now:
                self._deliver(block)
            else:
                self.state.withheld.append(block)
                self.sim.schedule(SimEvent(at, EventKind.BLOCK_DELIVERED, block))
        else:
            self.state.withheld.append(block)

        if self.state.achieved_lead >= self.strategy.target_lead:
            return True
        if self.network_height >= self.max_blocks:
            logging.getLogger(__name__).warning(
                f"Target lead {self.strategy.target_lead} not reached within "
                f"{self.max_blocks} blocks (lead {self.state.achieved_lead})"
            )
            self.state.failure = FailureCause.INCONCLUSIVE
            return True

        self._schedule_next_block()
        return False

    def _on_block_delivered(self, block: Block) -> bool:
        self.state.withheld.popleft()
        self._deliver(block)
        return False

    def _on_stale_check(self) -> bool:
        if self.victim.state.pending_stale_check != self.sim.now:
            return False  # superseded by a later delivery

        if self.victim.on_stale_check(self.sim.now) is TriggerOutcome.NO_TRIGGER:
            return False

        resolution = resolve_de_eclipse(
            self.policies.pool, self.decision_rng, self.policies.trigger_mode
        )
        if resolution is DeEclipseOutcome.DE_ECLIPSED:
            self.victim.sync_to(self.chain.tip, self.sim.now)
            self._update_lead()
            self.state.failure = FailureCause.STALE_TIP_DE_ECLIPSE
            self._record(EventKind.STALE_TIP_CHECK, "de-eclipsed")
            return True

        self._record(EventKind.STALE_TIP_CHECK, "extra connection hit a sybil")
        self._arm_stale_check()
        return False

    def _on_ibd_check(self, armed_for_height: int) -> bool:
        if armed_for_height != self.victim.tip_height:
            return False
        if self.victim.check_ibd(self.sim.now):
            self.state.failure = FailureCause.IBD_TRIGGERED
            self._record(EventKind.IBD_CHECK, "tip older than the IBD threshold")
            return True
        return False


def run_dilation(
    strategy: DilationStrategy,
    backend: BackendKind,
    policies: NodePolicies,
    rng: RandomSource,
    mean_interval: int = DEFAULT_MEAN_BLOCK_INTERVAL,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
    horizon_seconds: Optional[int] = None,
    trace: bool = False,
) -> DilationOutcome:
    return DilationRun(
        strategy,
        backend,
        policies,
        rng,
        mean_interval=mean_interval,
        max_blocks=max_blocks,
        horizon_seconds=horizon_seconds,
        trace=trace,
    ).run()


def slowdown_minutes(strategy: DilationStrategy, backend: BackendKind) -> float:
    """SR as used by `eclipse_time_formula` for this strategy and backend."""
    if strategy.per_block_delay == 0:
        return 0.0
    if backend is BackendKind.LIGHT_CLIENT:
        return math.inf
    return strategy.per_block_delay / SECONDS_PER_MINUTE
