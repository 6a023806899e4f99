import logging
import re
from typing import Optional


class SeedContextFilter(logging.Filter):
    """
    Stamps records with the seed of the trial being simulated so that log lines
    from parallel cells can be told apart. Attach it to a handler, since logger
    filters do not see records propagated from child loggers.
    """

    active_seed: Optional[int] = None

    def __init__(self):
        super().__init__()
        self.prefix_pattern = re.compile(r"^\[seed=\d+\] ")

    @classmethod
    def activate(cls, seed: Optional[int]) -> None:
        cls.active_seed = seed

    def filter(self, record):
        record.seed = self.active_seed
        if self.active_seed is None:
            return True

        message = record.getMessage()
        if not self.prefix_pattern.match(message):
            record.msg = f"[seed={self.active_seed}] {message}"
            record.args = None
        return True
