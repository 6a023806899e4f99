from pydantic import BaseModel, Field, PositiveInt, model_validator
from typing import Optional, List

from time_dilation_sim.utils import DEFAULT_SCENARIO_TRIALS, DEFAULT_SEED
from .scenario import ScenarioConfig


class ExperimentPlan(BaseModel):
    scenarios: List[ScenarioConfig]
    trials_per_cell: PositiveInt = DEFAULT_SCENARIO_TRIALS
    base_seed: int = DEFAULT_SEED
    workers: PositiveInt = 1

    def cell_seed(self, index: int) -> int:
        return self.base_seed + index


class CellSummary(BaseModel):
    attack: str
    implementation: str
    backend: str
    trials: PositiveInt
    mean_hours: Optional[float] = None  # None when no trial reached the target lead
    p5_hours: Optional[float] = None
    p95_hours: Optional[float] = None
    failure_rate: float = Field(ge=0.0, le=1.0)
    seed: int
    formula_hours: Optional[float] = Field(default=None, exclude=True)  # closed-form eclipse time
    standard_error_hours: Optional[float] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def percentiles_bracket_mean(self):
        if self.mean_hours is not None and not (
            self.p5_hours <= self.mean_hours <= self.p95_hours
        ):
            raise ValueError(
                f"p5 {self.p5_hours} <= mean {self.mean_hours} <= p95 {self.p95_hours} violated"
            )
        return self
