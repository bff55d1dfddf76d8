"""Natural-language VNA operation.

Layers, bottom to top: `scpi` (grammar, simulator, transport), `rftools`
(trace analysis and multipath estimation), `contracts` (task contracts),
`knowledge` (skills, templates, tools, rules, docs), `state` (verified
session state), `intent` (utterance to contract), `planner` (contract to
executable graph), `runtime` (verify-then-commit executor), and `gateway`
(run store, HTTP API, benchmark, CLI).
"""

from .contracts import TaskClass, TaskContract, validate_contract
from .planner import Route, compile_contract, route_label, select_route, validate_structure
from .runtime import Executor, ExecutionResult, FailureReport, Recovery, VerifyOutcome
from .state import StateManager

__version__ = "0.1.0"

__all__ = [
    "Executor",
    "ExecutionResult",
    "FailureReport",
    "Recovery",
    "Route",
    "StateManager",
    "TaskClass",
    "TaskContract",
    "VerifyOutcome",
    "compile_contract",
    "route_label",
    "select_route",
    "validate_contract",
    "validate_structure",
    "__version__",
]
