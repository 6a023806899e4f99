from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt

from time_dilation_sim.utils import (
    DEFAULT_ATTACKER_NODES,
    DEFAULT_HONEST_NODES,
    DEFAULT_OUTBOUND_COUNT,
    ProbeOutcome,
)


class SybilPool(BaseModel):
    attacker_nodes: NonNegativeInt = DEFAULT_ATTACKER_NODES  # N_a
    honest_nodes: NonNegativeInt = DEFAULT_HONEST_NODES  # N_h
    outbound_count: PositiveInt = DEFAULT_OUTBOUND_COUNT  # C
    addrman_poisoning: float = Field(default=0.0, ge=0.0, le=1.0)

    @property
    def total_nodes(self) -> int:
        return self.attacker_nodes + self.honest_nodes


class VictimTopology(BaseModel):
    """
    Links between the victim and the honest network that the attacker does not control.
    """

    tx_relay_link: bool = False  # full-relay link: transactions and blocks
    block_relay_link: bool = False  # block-relay-only link
    relay_back_probability: float = Field(default=1.0, ge=0.0, le=1.0)

    @property
    def has_honest_link(self) -> bool:
        return self.tx_relay_link or self.block_relay_link


class ProbeVerdict(BaseModel):
    outcome: ProbeOutcome
    evidence: str
