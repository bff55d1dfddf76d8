from .multipath import (
    MultipathEstimate,
    NoPathFoundError,
    PathEstimate,
    estimate_bulk_delay,
    multipath_model,
    sic_multipath,
)
from .traces import (
    ComplexTrace,
    EmptyTraceError,
    FrequencyAxis,
    MagnitudeRange,
    MinimumDetection,
    NonuniformAxisError,
    PeakDetection,
    RefinePolicy,
    SweepWindow,
    TimeDomainProfile,
    detect_minimum,
    detect_peak,
    load_trace_csv,
    magnitude_range,
    refine_step,
    resolution_ns,
    save_trace_csv,
    time_domain_transform,
    trace_from_interleaved,
)

__all__ = [
    "ComplexTrace",
    "EmptyTraceError",
    "FrequencyAxis",
    "MagnitudeRange",
    "MinimumDetection",
    "MultipathEstimate",
    "NoPathFoundError",
    "NonuniformAxisError",
    "PathEstimate",
    "PeakDetection",
    "RefinePolicy",
    "SweepWindow",
    "TimeDomainProfile",
    "detect_minimum",
    "detect_peak",
    "estimate_bulk_delay",
    "load_trace_csv",
    "magnitude_range",
    "multipath_model",
    "refine_step",
    "resolution_ns",
    "save_trace_csv",
    "sic_multipath",
    "time_domain_transform",
    "trace_from_interleaved",
]
