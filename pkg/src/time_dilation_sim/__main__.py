import csv
import io
import logging
import sys
from typing import Optional

import click

from time_dilation_sim.attack_scenarios import run_scenario
from time_dilation_sim.config import build_policies, build_pool, build_scenario_config, load_config, resolve_seed
from time_dilation_sim.dilation import run_dilation
from time_dilation_sim.eclipse_model import eclipse_probability, eclipse_probability_without_replacement
from time_dilation_sim.experiments import build_plan, emit, failure_sweep, render, run_table
from time_dilation_sim.ln_channel import PRESETS, get_preset
from time_dilation_sim.mapping import (
    correlate_by_ip,
    first_spy_direct_probability,
    load_node_list,
    simulate_origin_inference,
    write_matches_csv,
)
from time_dilation_sim.schemas.config import AppConfig
from time_dilation_sim.schemas.eclipse import SybilPool
from time_dilation_sim.schemas.scenario import DilationStrategy, ScenarioResult, TraceEntry
from time_dilation_sim.seed_context_filter import SeedContextFilter
from time_dilation_sim.sim_core import RandomSource
from time_dilation_sim.simulation_exception import SimulationException
from time_dilation_sim.utils import (
    DEFAULT_DILATION_TRIALS,
    ECLIPSE_PROB_COLUMNS,
    ENV_SEED,
    KEY_ATTACKER_NODES,
    KEY_HONEST_NODES,
    KEY_OUTBOUND_COUNT,
    SCENARIO_TRACE_COLUMNS,
    SEED_MODULUS,
    TRACE_COLUMNS,
    AttackKind,
    BackendKind,
    OutputFormat,
    format_float,
    parse_range,
)

PROG_NAME = "time-dilation-sim"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

IMPLEMENTATIONS = list(PRESETS) + [f"{name}-upper" for name, preset in PRESETS.items() if preset.csv_delta_max]


class AttackOptions(click.Choice):
    def __init__(self, allow_all: bool = False):
        super().__init__(choices=[kind.value for kind in AttackKind] + (["all"] if allow_all else []))


class BackendOptions(click.Choice):
    def __init__(self):
        super().__init__(choices=[kind.value for kind in BackendKind])


class ImplementationOptions(click.Choice):
    def __init__(self):
        super().__init__(choices=IMPLEMENTATIONS)


def seed_option(command):
    return click.option(
        "--seed",
        type=click.IntRange(min=0, max=SEED_MODULUS - 1),
        envvar=ENV_SEED,
        default=None,
        help=f"Random seed (also read from ${ENV_SEED}); falls back to the config file, then 42.",
    )(command)


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format=LOG_FORMAT)
    logging.getLogger("time_dilation_sim").setLevel(logging.DEBUG if verbose else logging.WARNING)
    for handler in logging.getLogger().handlers:
        if not any(isinstance(f, SeedContextFilter) for f in handler.filters):
            handler.addFilter(SeedContextFilter())


def backend_or_default(value: Optional[str], config: AppConfig) -> BackendKind:
    return BackendKind(value) if value is not None else config.backend


def echo_trace(entries: list[TraceEntry], with_note: bool) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SCENARIO_TRACE_COLUMNS if with_note else TRACE_COLUMNS)
    for entry in entries:
        writer.writerow(entry.row(with_note))
    click.echo(buffer.getvalue(), nl=False)


def pool_with_overrides(config: AppConfig, na: Optional[int], nh: Optional[int], outbound: Optional[int]) -> SybilPool:
    updates = {KEY_ATTACKER_NODES: na, KEY_HONEST_NODES: nh, KEY_OUTBOUND_COUNT: outbound}
    return build_pool(config).model_copy(update={k: v for k, v in updates.items() if v is not None})


def result_lines(result: ScenarioResult) -> list[str]:
    return [
        f"attack: {result.attack.value}",
        f"implementation: {result.implementation}",
        f"backend: {result.backend.value}",
        f"success: {str(result.success).lower()}",
        f"stolen: {result.stolen}",
        f"eclipse_hours: {format_float(result.eclipse_hours)}",
        f"exploit_hours: {format_float(result.exploit_hours)}",
        f"failure_cause: {result.failure_cause.value if result.failure_cause else '-'}",
        f"target_lead: {result.target_lead}",
        f"achieved_lead: {result.achieved_lead}",
        f"defense_confirmed: {str(result.defense_confirmed).lower()}",
        f"rejected: {';'.join(result.rejected) or '-'}",
        f"seed: {result.seed}",
    ]


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Config file: .json, .yaml/.yml, or plain `key = value` lines.",
)
@click.option("-v", "--verbose", is_flag=True, help="Log at DEBUG level.")
@click.pass_context
def main(ctx, config_path, verbose):
    """Simulate eclipse and time-dilation attacks on Lightning nodes."""
    configure_logging(verbose)
    ctx.obj = load_config(config_path) if config_path else AppConfig()


@main.command("eclipse-prob")
@click.option("--na", type=click.IntRange(min=0), default=None, help="Attacker (sybil) nodes.")
@click.option("--nh", type=click.IntRange(min=0), default=None, help="Honest reachable nodes.")
@click.option("--c", "outbound", type=click.IntRange(min=1), default=None, help="Outbound connections.")
@click.option("--sweep-na", default=None, help="Print a table over an inclusive start:stop[:step] range of --na.")
@click.option("--without-replacement", is_flag=True, help="Draw distinct peers instead.")
@seed_option
@click.pass_obj
def eclipse_prob(config: AppConfig, na, nh, outbound, sweep_na, without_replacement, seed):
    """Probability that all outbound peers of a fresh node are sybils."""
    pool = pool_with_overrides(config, na, nh, outbound)
    probability = eclipse_probability_without_replacement if without_replacement else eclipse_probability

    if sweep_na is None:
        click.echo(format_float(probability(pool)))
        return

    try:
        values = parse_range(sweep_na)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--sweep-na")

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(ECLIPSE_PROB_COLUMNS)
    for value in values:
        row_pool = pool.model_copy(update={KEY_ATTACKER_NODES: value})
        writer.writerow([value, row_pool.honest_nodes, row_pool.outbound_count, format_float(probability(row_pool))])
    click.echo(buffer.getvalue(), nl=False)


@main.command()
@click.option("--backend", type=BackendOptions(), default=None)
@click.option("--target-lead", type=click.IntRange(min=1), default=144, show_default=True)
@click.option("--delay", type=click.IntRange(min=0), default=None, help="Seconds between deliveries.")
@click.option("--trace", is_flag=True, help="Print one line per event.")
@seed_option
@click.pass_obj
def dilate(config: AppConfig, backend, target_lead, delay, trace, seed):
    """Run a single dilation trial."""
    seed = resolve_seed(seed, config)
    strategy = DilationStrategy(
        per_block_delay=delay if delay is not None else config.per_block_delay,
        target_lead=target_lead,
    )
    outcome = run_dilation(
        strategy,
        backend_or_default(backend, config),
        build_policies(config),
        RandomSource(seed),
        mean_interval=config.mean_block_interval,
        max_blocks=config.max_blocks,
        trace=trace,
    )

    if trace:
        echo_trace(outcome.trace, with_note=False)
    click.echo(f"elapsed_hours: {format_float(outcome.elapsed_hours)}")
    click.echo(f"failure: {outcome.failure.value if outcome.failure else '-'}")
    click.echo(f"achieved_lead: {outcome.achieved_lead}")
    click.echo(f"de_eclipse_attempts: {outcome.de_eclipse_attempts}")


@main.command()
@click.option("--attack", type=AttackOptions(), required=True)
@click.option("--impl", type=ImplementationOptions(), default=None)
@click.option("--backend", type=BackendOptions(), default=None)
@click.option("--forced-lead", type=click.IntRange(min=1), default=None, help="Dilate to exactly this lead.")
@click.option("--victim-funded", is_flag=True, help="A1: the victim opened the channel.")
@click.option("--trace", is_flag=True, help="Print the annotated event timeline.")
@seed_option
@click.pass_obj
def scenario(config: AppConfig, attack, impl, backend, forced_lead, victim_funded, trace, seed):
    """Run one attack end to end."""
    seed = resolve_seed(seed, config)
    scenario_config = build_scenario_config(
        config, AttackKind(attack), impl, backend_or_default(backend, config), forced_lead
    )
    if victim_funded:
        scenario_config = scenario_config.model_copy(update={"victim_funded": True})

    result = run_scenario(scenario_config, RandomSource(seed), trace=trace)
    if trace:
        echo_trace(result.trace, with_note=True)
    for line in result_lines(result):
        click.echo(line)


@main.command()
@click.option("--attack", type=AttackOptions(allow_all=True), default="all", show_default=True)
@click.option("--impl", "implementations", type=click.Choice(list(PRESETS)), multiple=True)
@click.option("--backend", "backends", type=BackendOptions(), multiple=True)
@click.option("--trials", type=click.IntRange(min=1), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--out", "output_path", type=click.Path(dir_okay=False), default=None)
@click.option("--format", "output_format", type=click.Choice([f.value for f in OutputFormat]), default=None)
@seed_option
@click.pass_obj
def experiment(config: AppConfig, attack, implementations, backends, trials, workers, output_path, output_format, seed):
    """Monte-Carlo eclipse-time tables."""
    attacks = list(AttackKind) if attack == "all" else [AttackKind(attack)]
    plan = build_plan(
        attacks,
        config,
        implementations=implementations or None,
        backends=[BackendKind(b) for b in backends] or (BackendKind.FULL_NODE, BackendKind.LIGHT_CLIENT),
        trials=trials,
        base_seed=resolve_seed(seed, config),
        workers=workers,
    )

    results = [summary for kind in attacks for summary in run_table(kind, plan).values()]
    output_format = OutputFormat(output_format) if output_format else config.output_format
    output_path = output_path or config.output_path
    if output_path:
        emit(results, output_format, output_path)
        click.echo(f"Wrote {len(results)} cells to {output_path}", err=True)
    else:
        click.echo(render(results, output_format), nl=False)


@main.command("map")
@click.option("--bitcoin", "bitcoin_path", type=click.Path(dir_okay=False), required=True)
@click.option("--lightning", "lightning_path", type=click.Path(dir_okay=False), required=True)
@click.option("--out", "output_path", type=click.Path(dir_okay=False), default=None)
@seed_option
def map_nodes(bitcoin_path, lightning_path, output_path, seed):
    """Correlate Bitcoin and Lightning node lists by IP."""
    bitcoin, bitcoin_issues = load_node_list(bitcoin_path)
    lightning, lightning_issues = load_node_list(lightning_path)
    report = correlate_by_ip(bitcoin, lightning, bitcoin_issues + lightning_issues)

    for issue in report.issues:
        click.echo(f"{issue.source}:{issue.line_number}: {issue.reason}", err=True)
    if output_path:
        write_matches_csv(report, output_path)
    else:
        for pair in report.pairs:
            click.echo(f"{pair.bitcoin_id},{pair.lightning_id},{pair.endpoint}")
    counts = report.counts
    click.echo(
        f"matches: {counts.matches} (bitcoin {counts.bitcoin_total}, lightning {counts.lightning_total})"
    )


@main.command("failure-sweep")
@click.option("--delays", default="1170:1770:300", show_default=True, help="Inclusive start:stop[:step] seconds.")
@click.option("--impl", type=ImplementationOptions(), default=None, help="Use this preset's csv_delta as the lead.")
@click.option("--target-lead", type=click.IntRange(min=1), default=None)
@click.option("--trials", type=click.IntRange(min=1), default=None)
@seed_option
@click.pass_obj
def failure_sweep_command(config: AppConfig, delays, impl, target_lead, trials, seed):
    """Full-node dilation failure rate per delivery delay."""
    try:
        delay_values = parse_range(delays)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--delays")

    if target_lead is None:
        target_lead = get_preset(impl or config.implementation).csv_delta
    rates = failure_sweep(
        delay_values,
        target_lead,
        trials or config.trials,
        policies=build_policies(config),
        base_seed=resolve_seed(seed, config),
        mean_interval=config.mean_block_interval,
        max_blocks=config.max_blocks,
    )
    click.echo("delay,failure_rate")
    for delay, rate in rates:
        click.echo(f"{delay},{format_float(rate)}")


@main.command("first-spy")
@click.option("--na", type=click.IntRange(min=0), default=None)
@click.option("--nh", type=click.IntRange(min=0), default=None)
@click.option("--c", "outbound", type=click.IntRange(min=1), default=None)
@click.option("--trials", type=click.IntRange(min=1), default=DEFAULT_DILATION_TRIALS, show_default=True)
@click.option("--without-replacement", is_flag=True)
@seed_option
@click.pass_obj
def first_spy(config: AppConfig, na, nh, outbound, trials, without_replacement, seed):
    """Chance that a light client connects directly to a sybil."""
    pool = pool_with_overrides(config, na, nh, outbound)

    simulated = simulate_origin_inference(
        pool, trials, RandomSource(resolve_seed(seed, config)), with_replacement=not without_replacement
    )
    click.echo(f"closed_form: {format_float(first_spy_direct_probability(pool))}")
    click.echo(f"simulated: {format_float(simulated)}")


def parse_and_dispatch(argv: list[str]) -> int:
    """
    Run the CLI on `argv`: 0 on success, 1 on a usage error, 2 on a runtime error.
    """
    if not argv:
        with click.Context(main, info_name=PROG_NAME) as ctx:
            click.echo(ctx.get_help(), err=True)
        return 1

    try:
        code = main.main(args=list(argv), prog_name=PROG_NAME, standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    except click.ClickException as e:
        e.show()
        return 2
    except SimulationException as e:
        click.echo(f"Error: {e.title} {e.parameters}", err=True)
        return 2
    except OSError as e:
        click.echo(f"Error: {e}", err=True)
        return 2

    return code if isinstance(code, int) else 0


def run() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    run()
