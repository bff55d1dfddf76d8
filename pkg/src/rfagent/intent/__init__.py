from .grounder import GroundingError, ground
from .providers import (
    DeterministicProvider,
    IntentProvider,
    ProviderError,
    RemoteLlmConfig,
    RemoteLlmProvider,
)
from .service import WIDEBAND_SPAN_HZ, IntentService, mark_safety

__all__ = [
    "DeterministicProvider",
    "GroundingError",
    "IntentProvider",
    "IntentService",
    "ProviderError",
    "RemoteLlmConfig",
    "RemoteLlmProvider",
    "WIDEBAND_SPAN_HZ",
    "ground",
    "mark_safety",
]
