import logging
import math
from typing import Optional

from .chain_model import Block
from .schemas.eclipse import ProbeVerdict, SybilPool, VictimTopology
from .sim_core import RandomSource
from .simulation_exception import InvalidPoolException
from .utils import DeEclipseOutcome, ProbeOutcome, TriggerMode


def validate_pool(pool: SybilPool) -> None:
    if pool.total_nodes == 0:
        raise InvalidPoolException(
            "Sybil pool needs at least one node (N_h + N_a = 0)",
            pool.model_dump(),
        )


def eclipse_probability(pool: SybilPool) -> float:
    """
    Probability that all C outbound peers are attacker nodes: (N_a / (N_h + N_a))^C.

    Peers are drawn independently with replacement; the address-manager poisoning
    knob is not applied here.
    """
    validate_pool(pool)
    return (pool.attacker_nodes / pool.total_nodes) ** pool.outbound_count


def eclipse_probability_without_replacement(pool: SybilPool) -> float:
    """
    Comparison mode: C distinct peers drawn without replacement, C(N_a, C) / C(N, C).
    """
    validate_pool(pool)
    if pool.outbound_count > pool.total_nodes:
        raise InvalidPoolException(
            "Cannot draw more distinct peers than there are nodes", pool.model_dump()
        )
    return math.comb(pool.attacker_nodes, pool.outbound_count) / math.comb(
        pool.total_nodes, pool.outbound_count
    )


def de_eclipse_probability(pool: SybilPool) -> float:
    validate_pool(pool)
    return (1.0 - pool.addrman_poisoning) * pool.honest_nodes / pool.total_nodes


def resolve_de_eclipse(
    pool: SybilPool, rng: RandomSource, mode: TriggerMode = TriggerMode.PESSIMISTIC
) -> DeEclipseOutcome:
    """
    Decide whether the extra outbound connection opened by a stale-tip attempt
    reached an honest node.
    """
    if mode is TriggerMode.PESSIMISTIC:
        return DeEclipseOutcome.DE_ECLIPSED

    if rng.bernoulli(de_eclipse_probability(pool)):
        return DeEclipseOutcome.DE_ECLIPSED
    return DeEclipseOutcome.STILL_ECLIPSED


def _relays_back(topology: VictimTopology, rng: RandomSource) -> bool:
    return rng.bernoulli(topology.relay_back_probability)


def transaction_probe(topology: VictimTopology, rng: RandomSource) -> ProbeVerdict:
    """
    Send the victim a transaction withheld from the rest of the network; it comes
    back through an attacker link only if the victim has an honest tx-relaying link.
    Block-relay-only links are invisible to this probe.
    """
    if topology.tx_relay_link and _relays_back(topology, rng):
        return ProbeVerdict(
            outcome=ProbeOutcome.LEAK_DETECTED,
            evidence="withheld transaction announced back by an honest peer",
        )
    return ProbeVerdict(
        outcome=ProbeOutcome.ECLIPSED, evidence="withheld transaction never returned"
    )


class BlockProber:
    """
    Block probing: delay a fresh block on every attacker link to the victim and
    watch whether the victim announces it anyway. Every probe burns one block.
    """

    def __init__(self):
        self.last_probed_height: Optional[int] = None

    @property
    def next_probe_height(self) -> Optional[int]:
        if self.last_probed_height is None:
            return None
        return self.last_probed_height + 1

    def probe(
        self, topology: VictimTopology, next_block: Block, rng: RandomSource
    ) -> ProbeVerdict:
        if (
            self.last_probed_height is not None
            and next_block.height <= self.last_probed_height
        ):
            logging.getLogger(__name__).warning(
                f"Block {next_block.height} already used for probing; next probe needs block "
                f"{self.next_probe_height}"
            )
            return ProbeVerdict(
                outcome=ProbeOutcome.INCONCLUSIVE,
                evidence=f"block {next_block.height} already consumed by an earlier probe",
            )

        self.last_probed_height = next_block.height
        if topology.has_honest_link and _relays_back(topology, rng):
            return ProbeVerdict(
                outcome=ProbeOutcome.LEAK_DETECTED,
                evidence=f"withheld block {next_block.height} relayed back by the victim",
            )
        return ProbeVerdict(
            outcome=ProbeOutcome.ECLIPSED,
            evidence=f"withheld block {next_block.height} not seen from the victim",
        )


def block_probe(
    topology: VictimTopology,
    next_block: Block,
    rng: RandomSource,
    prober: Optional[BlockProber] = None,
) -> ProbeVerdict:
    return (prober if prober is not None else BlockProber()).probe(
        topology, next_block, rng
    )


def merge_verdicts(*verdicts: ProbeVerdict) -> ProbeVerdict:
    for verdict in verdicts:
        if verdict.outcome is ProbeOutcome.LEAK_DETECTED:
            return verdict
    for verdict in verdicts:
        if verdict.outcome is ProbeOutcome.INCONCLUSIVE:
            return verdict
    return ProbeVerdict(
        outcome=ProbeOutcome.ECLIPSED,
        evidence="; ".join(verdict.evidence for verdict in verdicts),
    )


def combined_probe(
    topology: VictimTopology,
    next_block: Block,
    rng: RandomSource,
    prober: Optional[BlockProber] = None,
) -> ProbeVerdict:
    return merge_verdicts(
        transaction_probe(topology, rng),
        block_probe(topology, next_block, rng, prober),
    )
