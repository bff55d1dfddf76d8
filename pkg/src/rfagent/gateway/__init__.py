from .bench import BENCHMARK_CASES, BenchCase, run_benchmark
from .service import Gateway, GatewayConfig
from .store import RunStore
from .summarize import summarize

__all__ = [
    "BENCHMARK_CASES",
    "BenchCase",
    "Gateway",
    "GatewayConfig",
    "RunStore",
    "run_benchmark",
    "summarize",
]
