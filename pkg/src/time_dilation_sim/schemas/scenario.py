from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt, model_validator
from typing import Optional, List, Dict

from time_dilation_sim.utils import (
    DEFAULT_CHANNEL_CAPACITY,
    DEFAULT_FINAL_DELTA,
    DEFAULT_IBD_LAG_THRESHOLD,
    DEFAULT_MAX_BLOCKS,
    DEFAULT_MEAN_BLOCK_INTERVAL,
    DEFAULT_PER_BLOCK_DELAY,
    DEFAULT_RESERVE_RATIO,
    DEFAULT_STALE_RETRY_INTERVAL,
    DEFAULT_STALE_THRESHOLD,
    SECONDS_PER_HOUR,
    A3LeadMode,
    AttackKind,
    BackendKind,
    FailureCause,
    TriggerMode,
)
from .channel import ImplementationPreset
from .eclipse import SybilPool


class StaleTipPolicy(BaseModel):
    threshold: PositiveInt = DEFAULT_STALE_THRESHOLD
    retry_interval: PositiveInt = DEFAULT_STALE_RETRY_INTERVAL
    enabled: bool = True


class IbdPolicy(BaseModel):
    lag_threshold: PositiveInt = DEFAULT_IBD_LAG_THRESHOLD
    enabled: bool = False


class NodePolicies(BaseModel):
    stale_tip: StaleTipPolicy = StaleTipPolicy()
    ibd: IbdPolicy = IbdPolicy()
    trigger_mode: TriggerMode = TriggerMode.PESSIMISTIC
    pool: SybilPool = SybilPool()


class DilationStrategy(BaseModel):
    per_block_delay: NonNegativeInt = DEFAULT_PER_BLOCK_DELAY  # SR, seconds between deliveries
    target_lead: PositiveInt  # TL


class TraceEntry(BaseModel):
    time: int
    event: str
    victim_height: int
    network_height: int
    lead: int
    note: str = ""

    def row(self, with_note: bool = True) -> list:
        values = [self.time, self.event, self.victim_height, self.network_height, self.lead]
        return values + [self.note] if with_note else values


class DilationOutcome(BaseModel):
    elapsed: NonNegativeInt  # seconds from attack start to target lead or failure
    failure: Optional[FailureCause] = None
    achieved_lead: int
    network_height: int
    victim_height: int
    de_eclipse_attempts: NonNegativeInt = 0
    trace: List[TraceEntry] = []

    @property
    def succeeded(self) -> bool:
        return self.failure is None

    @property
    def elapsed_hours(self) -> float:
        return self.elapsed / SECONDS_PER_HOUR


class ScenarioConfig(BaseModel):
    kind: AttackKind
    preset: ImplementationPreset
    backend: BackendKind = BackendKind.LIGHT_CLIENT
    per_block_delay: NonNegativeInt = DEFAULT_PER_BLOCK_DELAY
    mean_block_interval: PositiveInt = DEFAULT_MEAN_BLOCK_INTERVAL
    policies: NodePolicies = NodePolicies()
    channel_capacity: PositiveInt = DEFAULT_CHANNEL_CAPACITY
    reserve_ratio: float = Field(default=DEFAULT_RESERVE_RATIO, ge=0.0, lt=0.5)
    htlc_amount: Optional[PositiveInt] = None  # defaults to the largest payable amount
    final_delta: PositiveInt = DEFAULT_FINAL_DELTA  # N
    max_blocks: PositiveInt = DEFAULT_MAX_BLOCKS
    a3_lead_mode: A3LeadMode = A3LeadMode.I_PLUS_ONE
    victim_funded: bool = False  # A1: victim opened the channel, balances must be shaped first
    forced_lead: Optional[PositiveInt] = None  # diagnostic: dilate to exactly this lead

    @property
    def threshold_lead(self) -> int:
        if self.kind is AttackKind.A1:
            return self.preset.csv_delta
        if self.kind is AttackKind.A2:
            return self.preset.cltv_delta + 1
        if self.a3_lead_mode is A3LeadMode.I:
            return self.preset.timeout_policy
        return self.preset.timeout_policy + 1

    @property
    def target_lead(self) -> int:
        return self.forced_lead if self.forced_lead is not None else self.threshold_lead

    @property
    def strategy(self) -> DilationStrategy:
        return DilationStrategy(
            per_block_delay=self.per_block_delay, target_lead=self.target_lead
        )

    @property
    def reserve(self) -> int:
        return int(self.channel_capacity * self.reserve_ratio)

    @model_validator(mode="after")
    def final_delta_exceeds_timeout_policy(self):
        if self.kind is AttackKind.A3 and self.final_delta <= self.preset.timeout_policy:
            raise ValueError(
                f"A3 needs final_delta ({self.final_delta}) above timeout_policy ({self.preset.timeout_policy})"
            )
        return self


class ScenarioResult(BaseModel):
    attack: AttackKind
    implementation: str
    backend: BackendKind
    success: bool
    stolen: NonNegativeInt = 0
    eclipse_hours: float
    exploit_hours: float = 0.0
    failure_cause: Optional[FailureCause] = None
    target_lead: int
    achieved_lead: int
    defense_confirmed: bool = False
    rejected: List[str] = []
    final_holdings: Dict[str, int] = {}
    seed: int
    trace: List[TraceEntry] = []

    @model_validator(mode="after")
    def success_consistent(self):
        if self.success and self.stolen <= 0:
            raise ValueError("A successful scenario must steal a positive amount")
        if self.success == (self.failure_cause is not None):
            raise ValueError("failure_cause must be set exactly when the scenario failed")
        return self
