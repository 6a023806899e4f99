from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt
from typing import Optional

from time_dilation_sim.utils import (
    DEFAULT_ATTACKER_NODES,
    DEFAULT_CHANNEL_CAPACITY,
    DEFAULT_FINAL_DELTA,
    DEFAULT_HONEST_NODES,
    DEFAULT_IBD_LAG_THRESHOLD,
    DEFAULT_MAX_BLOCKS,
    DEFAULT_MEAN_BLOCK_INTERVAL,
    DEFAULT_OUTBOUND_COUNT,
    DEFAULT_PER_BLOCK_DELAY,
    DEFAULT_RESERVE_RATIO,
    DEFAULT_SCENARIO_TRIALS,
    DEFAULT_STALE_RETRY_INTERVAL,
    DEFAULT_STALE_THRESHOLD,
    SEED_MODULUS,
    A3LeadMode,
    BackendKind,
    OutputFormat,
    TriggerMode,
)


class AppConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    implementation: str = "c-lightning"
    csv_delta: Optional[PositiveInt] = None  # preset overrides
    cltv_delta: Optional[PositiveInt] = None
    timeout_policy: Optional[PositiveInt] = None

    backend: BackendKind = BackendKind.FULL_NODE
    per_block_delay: NonNegativeInt = DEFAULT_PER_BLOCK_DELAY
    mean_block_interval: PositiveInt = DEFAULT_MEAN_BLOCK_INTERVAL

    stale_tip_enabled: bool = True
    stale_threshold: PositiveInt = DEFAULT_STALE_THRESHOLD
    stale_retry_interval: PositiveInt = DEFAULT_STALE_RETRY_INTERVAL
    ibd_enabled: bool = False
    ibd_lag_threshold: PositiveInt = DEFAULT_IBD_LAG_THRESHOLD
    trigger_mode: TriggerMode = TriggerMode.PESSIMISTIC

    attacker_nodes: NonNegativeInt = DEFAULT_ATTACKER_NODES
    honest_nodes: NonNegativeInt = DEFAULT_HONEST_NODES
    outbound_count: PositiveInt = DEFAULT_OUTBOUND_COUNT
    addrman_poisoning: float = Field(default=0.0, ge=0.0, le=1.0)

    channel_capacity: PositiveInt = DEFAULT_CHANNEL_CAPACITY
    reserve_ratio: float = Field(default=DEFAULT_RESERVE_RATIO, ge=0.0, lt=0.5)
    htlc_amount: Optional[PositiveInt] = None
    final_delta: PositiveInt = DEFAULT_FINAL_DELTA
    max_blocks: PositiveInt = DEFAULT_MAX_BLOCKS
    a3_lead_mode: A3LeadMode = A3LeadMode.I_PLUS_ONE

    trials: PositiveInt = DEFAULT_SCENARIO_TRIALS
    seed: Optional[int] = Field(default=None, ge=0, lt=SEED_MODULUS)
    workers: PositiveInt = 1
    output_path: Optional[str] = None
    output_format: OutputFormat = OutputFormat.CSV
