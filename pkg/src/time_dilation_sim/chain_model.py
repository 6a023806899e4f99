from dataclasses import dataclass

from .sim_core import RandomSource
from .utils import DEFAULT_MEAN_BLOCK_INTERVAL


@dataclass(frozen=True, slots=True)
class Block:
    height: int
    mined_at: int


@dataclass(slots=True)
class ChainView:
    tip_height: int
    tip_seen_at: int


GENESIS = Block(height=0, mined_at=0)


def mine_sequence(
    count: int,
    rng: RandomSource,
    mean_interval: int = DEFAULT_MEAN_BLOCK_INTERVAL,
    start: Block = GENESIS,
) -> list[Block]:
    """
    Mine `count` blocks after `start` with i.i.d. exponential inter-arrival times.
    """
    if count < 1:
        raise ValueError(f"Block count must be at least 1, got {count}")

    blocks = []
    previous = start
    for _ in range(count):
        previous = Block(
            height=previous.height + 1,
            mined_at=previous.mined_at + rng.sample_exponential(mean_interval),
        )
        blocks.append(previous)

    return blocks


def lead(attacker_view: ChainView, victim_view: ChainView) -> int:
    return attacker_view.tip_height - victim_view.tip_height


class Chain:
    """
    Mined chain that grows one block at a time on demand.
    """

    def __init__(
        self,
        rng: RandomSource,
        mean_interval: int = DEFAULT_MEAN_BLOCK_INTERVAL,
        genesis: Block = GENESIS,
    ):
        self.rng = rng
        self.mean_interval = mean_interval
        self.blocks: list[Block] = [genesis]

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def view(self) -> ChainView:
        return ChainView(tip_height=self.tip.height, tip_seen_at=self.tip.mined_at)

    def block_at(self, height: int) -> Block:
        return self.blocks[height - self.blocks[0].height]

    def next_block(self) -> Block:
        """
        Draw the next block without appending it; `append` commits it.
        """
        tip = self.tip
        return Block(
            height=tip.height + 1,
            mined_at=tip.mined_at + self.rng.sample_exponential(self.mean_interval),
        )

    def append(self, block: Block) -> None:
        if block.height != self.tip.height + 1 or block.mined_at <= self.tip.mined_at:
            raise ValueError(f"Block {block} does not extend tip {self.tip}")
        self.blocks.append(block)
