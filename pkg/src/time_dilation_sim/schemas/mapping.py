from pydantic import BaseModel, model_validator
from typing import Optional, List


class NodeRecord(BaseModel):
    id: str
    endpoint: str  # address as written in the input, port included
    host: str  # IP (canonical form) or onion hostname, port stripped
    port: Optional[int] = None


class MatchPair(BaseModel):
    bitcoin_id: str
    lightning_id: str
    endpoint: str


class MatchCounts(BaseModel):
    bitcoin_total: int
    lightning_total: int
    matches: int  # distinct shared hosts

    @model_validator(mode="after")
    def matches_bounded(self):
        if self.matches > min(self.bitcoin_total, self.lightning_total):
            raise ValueError("More matched hosts than records in one of the lists")
        return self


class ParseIssue(BaseModel):
    source: str
    line_number: int
    line: str
    reason: str


class MatchReport(BaseModel):
    pairs: List[MatchPair]
    counts: MatchCounts
    issues: List[ParseIssue] = []
