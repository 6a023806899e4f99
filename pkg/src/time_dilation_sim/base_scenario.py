import logging
from abc import ABC, abstractmethod
from typing import Iterable, Optional

from devtools import pformat

from .chain_model import Block, Chain
from .dilation import run_dilation
from .ln_channel import OnChainLedger, entitled_holdings, final_holdings, update_state
from .schemas.channel import BroadcastResult, ChannelState, HtlcOp, OnChainTx
from .schemas.scenario import DilationOutcome, ScenarioConfig, ScenarioResult, TraceEntry
from .seed_context_filter import SeedContextFilter
from .sim_core import RandomSource
from .utils import ATTACKER_PARTIES, SECONDS_PER_HOUR, AttackKind, EventKind, FailureCause

EXPLOIT_STREAM = 2
TOKEN_STREAM = 3

EXTRA_EXPLOIT_BLOCKS = 10


class BaseScenario(ABC):
    """
    One end-to-end attack trial: channel preparation, the dilation phase, then an
    exploitation phase that walks the network chain block by block.

    During exploitation the attacker keeps relaying blocks so the lead stays
    fixed: when the network mines height h the victim sees h - lead. At each new
    height the victim reacts first and the attacker acts second (on-chain, then
    off-chain), unless `attacker_first` says otherwise. Every broadcast confirms
    at the network height it is made at.
    """

    kind: AttackKind = None

    def __init__(self, config: ScenarioConfig, rng: RandomSource, trace: bool = False):
        if config.kind is not self.kind:
            raise ValueError(f"{type(self).__name__} cannot run a {config.kind.value} config")

        self.config = config
        self.rng = rng
        self.token_rng = rng.fork(TOKEN_STREAM)
        self.trace_enabled = trace
        self.trace: list[TraceEntry] = []

        self.ledger = OnChainLedger()
        self.channels: dict[str, ChannelState] = {}
        self.entitled: dict[str, int] = {}
        self.defense_confirmed = False
        self.rejected: list[str] = []

        self.base_height = 0  # H, network height when the target lead was reached
        self.lead = 0
        self.network_height = 0
        self.now = 0

    @property
    def victim_view(self) -> int:
        return self.network_height - self.lead

    @property
    def attacker_first(self) -> bool:
        return False

    @property
    def htlc_amount(self) -> int:
        if self.config.htlc_amount is not None:
            return self.config.htlc_amount
        return self.config.channel_capacity - self.config.reserve

    @property
    def horizon_height(self) -> int:
        preset = self.config.preset
        return (
            self.base_height
            + self.lead
            + preset.csv_delta
            + preset.cltv_delta
            + self.config.final_delta
            + EXTRA_EXPLOIT_BLOCKS
        )

    def add_channel(self, channel: ChannelState) -> ChannelState:
        self.channels[channel.channel_id] = channel
        self.ledger.track(channel)
        return channel

    def update(
        self,
        channel_id: str,
        new_balances: Optional[tuple[int, int]] = None,
        htlc_ops: Iterable[HtlcOp] = (),
    ) -> ChannelState:
        return self.add_channel(update_state(self.channels[channel_id], new_balances, htlc_ops))

    def broadcast(self, party: str, tx: OnChainTx, step: Optional[int] = None) -> BroadcastResult:
        result = self.ledger.broadcast(tx, self.network_height)
        status = "confirmed" if result.confirmed else f"rejected ({result.reason.value})"
        if not result.confirmed:
            self.rejected.append(f"{party}:{tx.kind.value}:{result.reason.value}")
        elif party not in ATTACKER_PARTIES:
            self.defense_confirmed = True

        self.note(
            EventKind.BROADCAST,
            f"{party} broadcasts {tx.kind.value} on {tx.channel_id}: {status}",
            step,
        )
        return result

    def note(self, event: EventKind, text: str, step: Optional[int] = None) -> None:
        if not self.trace_enabled:
            return
        self.trace.append(
            TraceEntry(
                time=self.now,
                event=event.value,
                victim_height=self.victim_view,
                network_height=self.network_height,
                lead=self.lead,
                note=f"step {step}: {text}" if step is not None else text,
            )
        )

    @abstractmethod
    def prepare(self) -> None:
        """Open and shape channels before the victim is dilated."""
        pass

    @abstractmethod
    def start_exploit(self) -> None:
        """Set up HTLCs at height H, once the target lead is reached."""
        pass

    @abstractmethod
    def victim_step(self) -> None:
        pass

    @abstractmethod
    def attacker_step(self) -> None:
        pass

    @abstractmethod
    def resolved(self) -> bool:
        pass

    def holdings(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for channel in self.channels.values():
            for party, amount in final_holdings(channel, self.ledger).items():
                totals[party] = totals.get(party, 0) + amount
        return totals

    def stolen(self, holdings: dict[str, int]) -> int:
        """Value the honest parties lost relative to their latest agreed state."""
        loss = sum(
            amount - holdings.get(party, 0)
            for party, amount in self.entitled.items()
            if party not in ATTACKER_PARTIES
        )
        return max(0, loss)

    def run(self) -> ScenarioResult:
        SeedContextFilter.activate(self.rng.seed)
        logger = logging.getLogger(__name__)
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                f"Running {self.kind.value} against {self.config.preset.name}:\n"
                + pformat(self.config.model_dump())
            )

        self.prepare()
        outcome = run_dilation(
            self.config.strategy,
            self.config.backend,
            self.config.policies,
            self.rng,
            mean_interval=self.config.mean_block_interval,
            max_blocks=self.config.max_blocks,
            trace=self.trace_enabled,
        )
        self.trace.extend(outcome.trace)
        if not outcome.succeeded:
            return self.result(outcome, failure=outcome.failure)

        self.lead = outcome.achieved_lead
        self.base_height = self.network_height = outcome.network_height
        self.now = outcome.elapsed
        self.note(EventKind.BLOCK_MINED, f"lead {self.lead} reached, victim pinned", 2)

        self.start_exploit()
        for channel in self.channels.values():
            for party, amount in entitled_holdings(channel).items():
                self.entitled[party] = self.entitled.get(party, 0) + amount

        chain = Chain(
            self.rng.fork(EXPLOIT_STREAM),
            self.config.mean_block_interval,
            genesis=Block(self.base_height, outcome.elapsed),
        )
        while not self.resolved():
            if self.network_height >= self.horizon_height:
                logging.getLogger(__name__).warning(
                    f"{self.kind.value} exploitation unresolved at height {self.network_height}"
                )
                break

            block = chain.next_block()
            chain.append(block)
            self.network_height = block.height
            self.now = block.mined_at
            if self.attacker_first:
                self.attacker_step()
                self.victim_step()
            else:
                self.victim_step()
                self.attacker_step()

        return self.result(outcome)

    def result(
        self, outcome: DilationOutcome, failure: Optional[FailureCause] = None
    ) -> ScenarioResult:
        holdings = self.holdings()
        stolen = 0 if failure is not None else self.stolen(holdings)
        if failure is None and stolen == 0:
            failure = FailureCause.DEFENSE_CONFIRMED
        exploit_seconds = self.now - outcome.elapsed if outcome.succeeded else 0

        result = ScenarioResult(
            attack=self.kind,
            implementation=self.config.preset.name,
            backend=self.config.backend,
            success=failure is None,
            stolen=stolen,
            eclipse_hours=outcome.elapsed_hours,
            exploit_hours=exploit_seconds / SECONDS_PER_HOUR,
            failure_cause=failure,
            target_lead=self.config.target_lead,
            achieved_lead=outcome.achieved_lead,
            defense_confirmed=self.defense_confirmed,
            rejected=self.rejected,
            final_holdings=holdings,
            seed=self.rng.seed,
            trace=self.trace,
        )
        logger = logging.getLogger(__name__)
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                "Scenario result:\n" + pformat(result.model_dump(exclude={"trace"}))
            )
        return result
