"""
Multivirus Defense
==================

Simulation, passivity-based design and adaptive mitigation of multi-virus
malware propagation on networks.
"""

__version__ = "0.1.0"

from .components import ReportComponent
from .control import ControllerConfig, ControllerKind, simulate_adaptive
from .design import DesignProblem, design_min_cost, feasible, uniform_rate
from .enums import EntryRegistry, EntryType
from .errors import ConfigError, MitigationError
from .history import ReportHistory
from .markov import monte_carlo
from .master_equation import master_equation
from .meanfield import Dynamics, simulate_aggregate, simulate_subset
from .network import Network, erdos_renyi, from_edge_list
from .passivity import CouplingForm, build_Qbar, passivity_index_bound
from .reports import ErrorReport, Report, ScenarioReport
from .scenario import Scenario, ScenarioRegistry, parse_scenario, run_scenario
from .trajectory import Trajectory
from .virus import VirusModel, coexisting, competing, from_rates

__all__ = [
    "ConfigError",
    "ControllerConfig",
    "ControllerKind",
    "CouplingForm",
    "DesignProblem",
    "Dynamics",
    "EntryRegistry",
    "EntryType",
    "ErrorReport",
    "MitigationError",
    "Network",
    "Report",
    "ReportComponent",
    "ReportHistory",
    "Scenario",
    "ScenarioRegistry",
    "ScenarioReport",
    "Trajectory",
    "VirusModel",
    "build_Qbar",
    "coexisting",
    "competing",
    "design_min_cost",
    "erdos_renyi",
    "feasible",
    "from_edge_list",
    "from_rates",
    "master_equation",
    "monte_carlo",
    "parse_scenario",
    "passivity_index_bound",
    "run_scenario",
    "simulate_adaptive",
    "simulate_aggregate",
    "simulate_subset",
    "uniform_rate",
]
