"""Deterministic discrete-event simulator for container orchestration on elastic clusters."""
from .scenario import Scenario, load, reference_scenario
from .simulation import RunResult, Simulation, run_scenario

__all__ = ["Scenario", "load", "reference_scenario", "RunResult", "Simulation", "run_scenario"]
__version__ = "0.1.0"
