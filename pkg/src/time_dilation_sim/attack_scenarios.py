from .base_scenario import BaseScenario
from .packet_finalization_scenario import PacketFinalizationScenario
from .per_hop_delay_scenario import PerHopDelayScenario
from .schemas.scenario import ScenarioConfig, ScenarioResult
from .sim_core import RandomSource
from .state_finalization_scenario import StateFinalizationScenario
from .utils import AttackKind

SCENARIOS: dict[AttackKind, type[BaseScenario]] = {
    AttackKind.A1: StateFinalizationScenario,
    AttackKind.A2: PerHopDelayScenario,
    AttackKind.A3: PacketFinalizationScenario,
}


def run_a1(config: ScenarioConfig, rng: RandomSource, trace: bool = False) -> ScenarioResult:
    return StateFinalizationScenario(config, rng, trace).run()


def run_a2(config: ScenarioConfig, rng: RandomSource, trace: bool = False) -> ScenarioResult:
    return PerHopDelayScenario(config, rng, trace).run()


def run_a3(config: ScenarioConfig, rng: RandomSource, trace: bool = False) -> ScenarioResult:
    return PacketFinalizationScenario(config, rng, trace).run()


def run_scenario(config: ScenarioConfig, rng: RandomSource, trace: bool = False) -> ScenarioResult:
    return SCENARIOS[config.kind](config, rng, trace).run()
