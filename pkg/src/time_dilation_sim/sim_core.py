import heapq
import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .simulation_exception import HorizonExceededException, ScheduleInPastException
from .utils import SEED_MODULUS, EventKind


@dataclass(frozen=True, slots=True)
class SimEvent:
    at: int
    kind: EventKind
    payload: Any = None


@dataclass(slots=True)
class EventRecord:
    at: int
    seq: int
    kind: EventKind
    payload: Any


class Simulator:
    """
    Ordered future-event queue plus the simulated clock.

    Parameters:
        start: clock value at construction
        horizon: last schedulable second, None for unbounded
        keep_log: record every processed event in `log`
    """

    def __init__(
        self, start: int = 0, horizon: Optional[int] = None, keep_log: bool = False
    ):
        if start < 0:
            raise ScheduleInPastException(
                "Simulation clock cannot start before zero", {"start": start}
            )
        self.now = start
        self.horizon = horizon
        self.keep_log = keep_log
        self.log: list[EventRecord] = []
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._seq = itertools.count()

    def __len__(self) -> int:
        return len(self._queue)

    def schedule(self, event: SimEvent) -> None:
        if event.at < self.now:
            raise ScheduleInPastException(
                "Cannot schedule an event in the past",
                {"at": event.at, "now": self.now, "kind": event.kind.value},
            )
        if self.horizon is not None and event.at > self.horizon:
            raise HorizonExceededException(
                "Event scheduled past the simulation horizon",
                {"at": event.at, "horizon": self.horizon, "kind": event.kind.value},
            )
        heapq.heappush(self._queue, (event.at, next(self._seq), event))

    def pop(self) -> Optional[SimEvent]:
        if not self._queue:
            return None

        at, seq, event = heapq.heappop(self._queue)
        self.now = at  # heap order guarantees at >= now
        if self.keep_log:
            self.log.append(EventRecord(at, seq, event.kind, event.payload))
        return event

    def run(self, handler: Callable[[SimEvent], bool]) -> None:
        """
        Process events until the queue drains or the handler returns True.
        """
        while True:
            event = self.pop()
            if event is None or handler(event):
                return


class RandomSource:
    """
    Seeded pseudo-random source shared by all stochastic modules.

    Uniforms come from PCG64's 64-bit output (53 mantissa bits, numpy's
    `Generator.random`). Exponential durations use the inverse CDF
    x = -mean * log1p(-u), quantized to whole seconds by rounding half up
    and clamped to at least one second.
    """

    def __init__(self, seed: int, stream: tuple[int, ...] = ()):
        if not 0 <= seed < SEED_MODULUS:
            raise ValueError(f"Seed {seed} is not a 64-bit unsigned integer")

        self.seed = seed
        self.stream = stream
        sequence = np.random.SeedSequence(entropy=seed, spawn_key=stream)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    @classmethod
    def for_trial(cls, cell_seed: int, trial_index: int) -> "RandomSource":
        return cls(cell_seed % SEED_MODULUS, (trial_index,))

    def fork(self, index: int) -> "RandomSource":
        """Independent sub-stream; forking never consumes draws from the parent."""
        return RandomSource(self.seed, self.stream + (index,))

    def uniform(self) -> float:
        return float(self._generator.random())

    def bernoulli(self, probability: float) -> bool:
        return self.uniform() < probability

    def integers(self, high: int, size: int) -> np.ndarray:
        return self._generator.integers(0, high, size=size)

    def uniforms(self, size: int | tuple[int, ...]) -> np.ndarray:
        return self._generator.random(size)

    def hypergeometric(self, good: int, bad: int, sample: int, size: int) -> np.ndarray:
        return self._generator.hypergeometric(good, bad, sample, size=size)

    def token(self, length: int = 32) -> bytes:
        return self._generator.bytes(length)

    def sample_exponential(self, mean_seconds: int) -> int:
        if mean_seconds <= 0:
            raise ValueError(f"Exponential mean must be positive, got {mean_seconds}")

        duration = -mean_seconds * math.log1p(-self.uniform())
        return max(1, math.floor(duration + 0.5))

