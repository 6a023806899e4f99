import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Optional

import numpy as np

from .attack_scenarios import run_scenario
from .config import build_scenario_config
from .dilation import eclipse_time_formula, run_dilation, slowdown_minutes
from .ln_channel import PRESETS, UPPER_SUFFIX
from .schemas.config import AppConfig
from .schemas.experiment import CellSummary, ExperimentPlan
from .schemas.scenario import DilationStrategy, NodePolicies, ScenarioConfig
from .sim_core import RandomSource
from .simulation_exception import ExperimentException, SimulationException
from .utils import (
    DEFAULT_MAX_BLOCKS,
    DEFAULT_MEAN_BLOCK_INTERVAL,
    DEFAULT_SEED,
    EXPERIMENT_COLUMNS,
    FLOAT_DECIMALS,
    SECONDS_PER_MINUTE,
    AttackKind,
    BackendKind,
    FailureCause,
    OutputFormat,
    format_float,
)

DILATION_FAILURES = frozenset(
    {FailureCause.STALE_TIP_DE_ECLIPSE, FailureCause.IBD_TRIGGERED, FailureCause.INCONCLUSIVE}
)


def build_plan(
    attacks: Iterable[AttackKind],
    config: AppConfig,
    implementations: Optional[Iterable[str]] = None,
    backends: Iterable[BackendKind] = (BackendKind.FULL_NODE, BackendKind.LIGHT_CLIENT),
    trials: Optional[int] = None,
    base_seed: int = DEFAULT_SEED,
    workers: Optional[int] = None,
) -> ExperimentPlan:
    """
    One cell per attack x preset x backend. A1 against a preset with a ranged
    csv_delta gets an extra `<preset>-upper` cell for the top of the range.
    """
    names = list(implementations) if implementations is not None else list(PRESETS)
    backends = list(backends)
    scenarios = []
    for attack in attacks:
        for name in names:
            variants = [name]
            base_name = name.removesuffix(UPPER_SUFFIX)
            if attack is AttackKind.A1 and base_name in PRESETS and PRESETS[base_name].csv_delta_max:
                variants.append(base_name + UPPER_SUFFIX)
            for variant in dict.fromkeys(variants):
                for backend in backends:
                    scenarios.append(build_scenario_config(config, attack, variant, backend))

    return ExperimentPlan(
        scenarios=scenarios,
        trials_per_cell=trials if trials is not None else config.trials,
        base_seed=base_seed,
        workers=workers if workers is not None else config.workers,
    )


def _trial_hours(config: ScenarioConfig, cell_seed: int, start: int, stop: int) -> list[Optional[float]]:
    """Eclipse hours per trial, None where the dilation phase failed."""
    hours = []
    for index in range(start, stop):
        rng = RandomSource.for_trial(cell_seed, index)
        try:
            result = run_scenario(config, rng)
        except (SimulationException, ValueError) as e:
            raise ExperimentException(
                f"Trial {index} of {config.kind.value}/{config.preset.name}/{config.backend.value} failed: {e}",
                {"cell_seed": cell_seed, "trial": index},
            )
        hours.append(None if result.failure_cause in DILATION_FAILURES else result.eclipse_hours)
    return hours


def _chunks(trials: int, workers: int) -> list[tuple[int, int]]:
    size = math.ceil(trials / workers)
    return [(start, min(start + size, trials)) for start in range(0, trials, size)]


def summarize(
    config: ScenarioConfig, hours: list[Optional[float]], seed: int
) -> CellSummary:
    durations = np.sort(np.array([h for h in hours if h is not None], dtype=float))
    trials = len(hours)
    failure_rate = (trials - len(durations)) / trials

    mean = p5 = p95 = standard_error = None
    if len(durations):
        mean = float(durations.mean())
        p5, p95 = (float(p) for p in np.percentile(durations, [5, 95]))
        # interpolation can drift a hair past the mean on degenerate samples
        p5, p95 = min(p5, mean), max(p95, mean)
        if len(durations) > 1:
            standard_error = float(durations.std(ddof=1) / math.sqrt(len(durations)))

    formula_minutes = eclipse_time_formula(
        config.target_lead,
        slowdown_minutes(config.strategy, config.backend),
        config.mean_block_interval / SECONDS_PER_MINUTE,
    )
    return CellSummary(
        attack=config.kind.value,
        implementation=config.preset.name,
        backend=config.backend.value,
        trials=trials,
        mean_hours=mean,
        p5_hours=p5,
        p95_hours=p95,
        failure_rate=failure_rate,
        seed=seed,
        formula_hours=None if math.isinf(formula_minutes) else formula_minutes / 60,
        standard_error_hours=standard_error,
    )


def run_cell(config: ScenarioConfig, trials: int, cell_seed: int, workers: int = 1) -> CellSummary:
    """
    Trial `j` draws from `RandomSource.for_trial(cell_seed, j)`, so the result does not depend on `workers`.
    """
    if workers > 1 and trials > 1:
        chunks = _chunks(trials, workers)
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_trial_hours, config, cell_seed, start, stop)
                for start, stop in chunks
            ]
            hours = [h for future in futures for h in future.result()]
    else:
        hours = _trial_hours(config, cell_seed, 0, trials)

    summary = summarize(config, hours, cell_seed)
    logging.getLogger(__name__).info(
        f"{summary.attack}/{summary.implementation}/{summary.backend}: mean "
        f"{format_float(summary.mean_hours)} h, failure rate {format_float(summary.failure_rate)}"
    )
    return summary


def run_table(
    attack: AttackKind, plan: ExperimentPlan
) -> dict[tuple[str, str], CellSummary]:
    """
    Run every cell of `plan` for `attack`, keyed by (implementation, backend).
    """
    table = {}
    for index, config in enumerate(plan.scenarios):
        if config.kind is not attack:
            continue
        summary = run_cell(config, plan.trials_per_cell, plan.cell_seed(index), plan.workers)
        table[(summary.implementation, summary.backend)] = summary
    return table


def failure_sweep(
    delays: list[int],
    target_lead: int,
    trials: int,
    policies: Optional[NodePolicies] = None,
    base_seed: int = DEFAULT_SEED,
    mean_interval: int = DEFAULT_MEAN_BLOCK_INTERVAL,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
) -> list[tuple[int, float]]:
    """
    Full-node dilation failure rate per delivery delay. Trial `j` replays the same
    mining sequence for every delay, so the rates are directly comparable.
    """
    policies = policies if policies is not None else NodePolicies()
    threshold = policies.stale_tip.threshold
    if any(delay >= threshold for delay in delays):
        raise ExperimentException(
            f"Sweep delays must stay below the stale-tip threshold ({threshold} s)",
            {"delays": delays, "threshold": threshold},
        )

    rates = []
    for delay in delays:
        strategy = DilationStrategy(per_block_delay=delay, target_lead=target_lead)
        failures = sum(
            not run_dilation(
                strategy,
                BackendKind.FULL_NODE,
                policies,
                RandomSource.for_trial(base_seed, index),
                mean_interval=mean_interval,
                max_blocks=max_blocks,
            ).succeeded
            for index in range(trials)
        )
        rates.append((delay, failures / trials))
        logging.getLogger(__name__).info(
            f"delay {delay} s: failure rate {format_float(failures / trials)}"
        )
    return rates


def _row(summary: CellSummary) -> dict:
    return summary.model_dump(include=set(EXPERIMENT_COLUMNS))


def render(results: list[CellSummary], output_format: OutputFormat) -> str:
    if not results:
        raise ExperimentException("No results to emit")

    if output_format is OutputFormat.JSON:
        rows = [
            {
                key: round(value, FLOAT_DECIMALS) if isinstance(value, float) else value
                for key, value in _row(summary).items()
            }
            for summary in results
        ]
        return json.dumps(rows, indent=2) + "\n"

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(EXPERIMENT_COLUMNS)
    for summary in results:
        row = _row(summary)
        writer.writerow(
            [
                format_float(row[column]) if column.endswith(("_hours", "_rate")) else row[column]
                for column in EXPERIMENT_COLUMNS
            ]
        )
    return buffer.getvalue()


def emit(results: list[CellSummary], output_format: OutputFormat, path: str) -> None:
    text = render(results, output_format)
    try:
        with open(path, "w", newline="") as fout:
            fout.write(text)
    except OSError as e:
        raise ExperimentException(f"Unable to write results to {path}", {"path": path, "error": str(e)})
    logging.getLogger(__name__).info(f"Wrote {len(results)} rows to {path}")
