from enum import Enum
from typing import Optional


KEY_CSV_DELTA = "csv_delta"
KEY_CLTV_DELTA = "cltv_delta"
KEY_TIMEOUT_POLICY = "timeout_policy"
KEY_ATTACKER_NODES = "attacker_nodes"
KEY_HONEST_NODES = "honest_nodes"
KEY_OUTBOUND_COUNT = "outbound_count"

ENV_SEED = "DILATION_SEED"

SECONDS_PER_MINUTE = 60
SECONDS_PER_HOUR = 3600

DEFAULT_SEED = 42
SEED_MODULUS = 2**64
DEFAULT_MEAN_BLOCK_INTERVAL = 600  # 10 minutes
DEFAULT_PER_BLOCK_DELAY = 1770  # 29.5 minutes
DEFAULT_STALE_THRESHOLD = 1800
DEFAULT_STALE_RETRY_INTERVAL = 600
DEFAULT_IBD_LAG_THRESHOLD = 86400
DEFAULT_MAX_BLOCKS = 10_000
DEFAULT_CHANNEL_CAPACITY = 100_000_000  # 1 BTC in satoshi
DEFAULT_RESERVE_RATIO = 0.01
DEFAULT_FINAL_DELTA = 18
DEFAULT_ATTACKER_NODES = 500
DEFAULT_HONEST_NODES = 50
DEFAULT_OUTBOUND_COUNT = 8
DEFAULT_DILATION_TRIALS = 100_000
DEFAULT_SCENARIO_TRIALS = 10_000
DEFAULT_LIGHTNING_PORT = 9735

FLOAT_DECIMALS = 4

EXPERIMENT_COLUMNS = [
    "attack",
    "implementation",
    "backend",
    "trials",
    "mean_hours",
    "p5_hours",
    "p95_hours",
    "failure_rate",
    "seed",
]

ECLIPSE_PROB_COLUMNS = ["na", "nh", "c", "probability"]
MAPPING_COLUMNS = ["bitcoin_id", "lightning_id", "endpoint"]
TRACE_COLUMNS = ["time", "event", "victim_height", "network_height", "lead"]
SCENARIO_TRACE_COLUMNS = TRACE_COLUMNS + ["note"]

ATTACKER_PARTIES = frozenset({"mallory", "mallet"})


class BackendKind(Enum):
    FULL_NODE = "full"
    LIGHT_CLIENT = "light"


class TriggerMode(Enum):
    PESSIMISTIC = "pessimistic"
    PROBABILISTIC = "probabilistic"


class TriggerOutcome(Enum):
    NO_TRIGGER = "NoTrigger"
    DE_ECLIPSE_ATTEMPT = "DeEclipseAttempt"


class DeEclipseOutcome(Enum):
    DE_ECLIPSED = "DeEclipsed"
    STILL_ECLIPSED = "StillEclipsed"


class EventKind(Enum):
    BLOCK_MINED = "BlockMined"
    BLOCK_DELIVERED = "BlockDelivered"
    STALE_TIP_CHECK = "StaleTipCheck"
    IBD_CHECK = "IbdCheck"
    HTLC_EXPIRY = "HtlcExpiry"
    BROADCAST = "Broadcast"


class FailureCause(Enum):
    STALE_TIP_DE_ECLIPSE = "StaleTipDeEclipse"
    IBD_TRIGGERED = "IbdTriggered"
    INCONCLUSIVE = "Inconclusive"
    DEFENSE_CONFIRMED = "DefenseConfirmed"


class AttackKind(Enum):
    A1 = "a1"
    A2 = "a2"
    A3 = "a3"


class A3LeadMode(Enum):
    """
    Which side wins the same-height broadcast race in A3.

    I_PLUS_ONE: the victim's preimage claim wins the tie, so the attacker needs I+1 blocks.
    I: the attacker's HTLC-timeout wins the tie, so I blocks suffice.
    """

    I_PLUS_ONE = "i_plus_one"
    I = "i"


class Side(Enum):
    LOCAL = "local"
    REMOTE = "remote"

    @property
    def other(self) -> "Side":
        return Side.REMOTE if self is Side.LOCAL else Side.LOCAL


class HtlcDirection(Enum):
    OFFERED = "Offered"
    RECEIVED = "Received"


class HtlcOpKind(Enum):
    ADD = "add"
    SETTLE = "settle"
    FAIL = "fail"


class TxKind(Enum):
    COMMITMENT = "Commitment"
    HTLC_TIMEOUT = "HtlcTimeout"
    HTLC_SUCCESS = "HtlcSuccess"
    PREIMAGE = "Preimage"
    TIMEOUT = "Timeout"
    JUSTICE = "Justice"
    SWEEP = "Sweep"


class RejectReason(Enum):
    CONFLICTING_SPEND = "ConflictingSpend"
    NOT_YET_VALID = "NotYetValid"
    OUTSIDE_JUSTICE_WINDOW = "OutsideJusticeWindow"
    NOT_REVOKED = "NotRevoked"
    MISSING_COMMITMENT = "MissingCommitment"
    WRONG_PREIMAGE = "WrongPreimage"
    UNKNOWN_STATE = "UnknownState"


class ProbeOutcome(Enum):
    ECLIPSED = "Eclipsed"
    LEAK_DETECTED = "LeakDetected"
    INCONCLUSIVE = "Inconclusive"


class OutputFormat(Enum):
    CSV = "csv"
    JSON = "json"


def parse_range(spec: str) -> list[int]:
    """
    Parse an inclusive `start:stop[:step]` sweep range into a list of integers.
    """
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"Range `{spec}` must look like start:stop[:step]")

    start, stop = int(parts[0]), int(parts[1])
    step = int(parts[2]) if len(parts) == 3 else 1
    if step <= 0:
        raise ValueError(f"Range `{spec}` needs a positive step")

    return list(range(start, stop + 1, step))


def format_float(value: Optional[float]) -> str:
    if value is None:
        return "nan"
    return f"{value:.{FLOAT_DECIMALS}f}"
