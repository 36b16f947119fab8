"""Simulation lab for inclusion-list designs on a leader-based BFT host."""

from .config import ScenarioConfig, load, loads, scenario
from .consensus import Simulation, leader_of, run_scenario
from .simnet import ConfigError, NetConfig, SimNet, SimTimeout

__all__ = [
    "ConfigError", "NetConfig", "ScenarioConfig", "SimNet", "SimTimeout", "Simulation",
    "leader_of", "load", "loads", "run_scenario", "scenario",
]
__version__ = "0.1.0"
