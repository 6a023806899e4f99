import logging
from logging import NullHandler

from time_dilation_sim.attack_scenarios import run_a1, run_a2, run_a3, run_scenario
from time_dilation_sim.dilation import eclipse_time_formula, run_dilation, schedule_delivery
from time_dilation_sim.eclipse_model import (
    block_probe,
    combined_probe,
    eclipse_probability,
    resolve_de_eclipse,
    transaction_probe,
)
from time_dilation_sim.experiments import build_plan, emit, failure_sweep, run_table
from time_dilation_sim.ln_channel import (
    PRESETS,
    OnChainLedger,
    build_route,
    get_preset,
    justice_window,
    update_state,
)
from time_dilation_sim.mapping import (
    correlate_by_ip,
    first_spy_direct_probability,
    simulate_origin_inference,
)
from time_dilation_sim.sim_core import RandomSource, Simulator
from time_dilation_sim.simulation_exception import SimulationException

from time_dilation_sim.utils import AttackKind, BackendKind, FailureCause, TriggerMode

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(NullHandler())
