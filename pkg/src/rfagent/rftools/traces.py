"""Trace containers and scalar analysis operations.

All functions here are pure: same trace in, same numbers out. They never
talk to the instrument; acquisition is someone else's job.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_DB_FLOOR = 1e-20  # avoids log(0) on synthetic zero samples


class EmptyTraceError(ValueError):
    pass


class NonuniformAxisError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyAxis:
    """Uniform frequency grid from start to stop inclusive."""

    start_hz: float
    stop_hz: float
    points: int

    def __post_init__(self) -> None:
        if self.points < 2:
            raise EmptyTraceError(f"axis needs at least 2 points, got {self.points}")
        if self.stop_hz <= self.start_hz:
            raise NonuniformAxisError("stop must exceed start")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start_hz, self.stop_hz, self.points)

    @property
    def step_hz(self) -> float:
        return (self.stop_hz - self.start_hz) / (self.points - 1)

    @property
    def bandwidth_hz(self) -> float:
        return self.stop_hz - self.start_hz

    @classmethod
    def from_grid(cls, freqs_hz: np.ndarray) -> "FrequencyAxis":
        freqs = np.asarray(freqs_hz, dtype=float)
        if len(freqs) < 2:
            raise EmptyTraceError("grid needs at least 2 points")
        steps = np.diff(freqs)
        mean = float(np.mean(steps))
        if mean <= 0 or np.any(np.abs(steps - mean) > 1e-6 * abs(mean)):
            raise NonuniformAxisError("grid spacing is not uniform")
        return cls(start_hz=float(freqs[0]), stop_hz=float(freqs[-1]), points=len(freqs))


@dataclass
class ComplexTrace:
    axis: FrequencyAxis
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        if len(self.values) != self.axis.points:
            raise EmptyTraceError(
                f"trace has {len(self.values)} values for a {self.axis.points}-point axis"
            )

    def magnitude_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.maximum(np.abs(self.values), _DB_FLOOR))


def trace_from_interleaved(axis: FrequencyAxis, interleaved: list[float]) -> ComplexTrace:
    """Build a trace from re,im,re,im... instrument data."""
    data = np.asarray(interleaved, dtype=float)
    if len(data) != 2 * axis.points:
        raise EmptyTraceError(f"expected {2 * axis.points} interleaved values, got {len(data)}")
    return ComplexTrace(axis=axis, values=data[0::2] + 1j * data[1::2])


@dataclass(frozen=True)
class MagnitudeRange:
    min_db: float
    max_db: float
    f_at_min_hz: float
    f_at_max_hz: float


def magnitude_range(trace: ComplexTrace) -> MagnitudeRange:
    """Extremes of |S| in dB; ties resolved toward the lowest frequency."""
    mags = trace.magnitude_db()
    freqs = trace.axis.grid()
    i_min = int(np.argmin(mags))
    i_max = int(np.argmax(mags))
    return MagnitudeRange(
        min_db=float(mags[i_min]),
        max_db=float(mags[i_max]),
        f_at_min_hz=float(freqs[i_min]),
        f_at_max_hz=float(freqs[i_max]),
    )


@dataclass(frozen=True)
class PeakDetection:
    f_peak_hz: float
    peak_db: float
    prominence_db: float


def detect_peak(trace: ComplexTrace) -> PeakDetection:
    """Strongest sample and its prominence over the trace median."""
    mags = trace.magnitude_db()
    i = int(np.argmax(mags))
    return PeakDetection(
        f_peak_hz=float(trace.axis.grid()[i]),
        peak_db=float(mags[i]),
        prominence_db=float(mags[i] - np.median(mags)),
    )


@dataclass(frozen=True)
class MinimumDetection:
    f_min_hz: float
    min_db: float


def detect_minimum(trace: ComplexTrace) -> MinimumDetection:
    mags = trace.magnitude_db()
    i = int(np.argmin(mags))
    return MinimumDetection(f_min_hz=float(trace.axis.grid()[i]), min_db=float(mags[i]))


@dataclass(frozen=True)
class SweepWindow:
    center_hz: float
    span_hz: float


@dataclass(frozen=True)
class RefinePolicy:
    """Coarse-to-fine zoom policy for resonance searches."""

    reduction_factor: float = 10.0
    final_span_hz: float = 1.0e6
    min_depth_db: float = -10.0
    frequency_range_hz: tuple[float, float] = (1.0e7, 2.65e10)


def refine_step(window: SweepWindow, f_min_hz: float, policy: RefinePolicy) -> SweepWindow:
    """Narrow the sweep window onto a detected minimum.

    New center is the detected minimum, shifted if needed so the whole span
    stays inside the instrument range; span shrinks by the reduction factor
    but never below final_span_hz.
    """
    if window.span_hz <= policy.final_span_hz:
        raise ValueError("window is already at the final span")
    span = max(window.span_hz / policy.reduction_factor, policy.final_span_hz)
    lo, hi = policy.frequency_range_hz
    center = min(max(f_min_hz, lo + span / 2.0), hi - span / 2.0)
    return SweepWindow(center_hz=center, span_hz=span)


@dataclass
class TimeDomainProfile:
    """Delay-domain view of a trace.

    complex_response is the raw inverse DFT of the (windowed, padded)
    samples, so with no window and no padding the transform round-trips:
    fft(complex_response) reproduces the trace values.
    """

    delays_ns: np.ndarray
    power_db: np.ndarray
    complex_response: np.ndarray
    bin_ns: float


def time_domain_transform(
    trace: ComplexTrace,
    window: str | None = None,
    zero_pad_factor: int = 1,
) -> TimeDomainProfile:
    """Windowed IDFT of the trace; delays wrap at the alias period 1/step.

    Delay bins at or beyond half the period are reported as negative delays.
    power_db is normalized so the strongest bin sits at 0 dB.
    """
    if zero_pad_factor < 1:
        raise ValueError("zero_pad_factor must be >= 1")
    values = trace.values
    if window is None:
        pass
    elif window.lower() == "hann":
        values = values * np.hanning(len(values))
    else:
        raise ValueError(f"unknown window {window!r}")

    n = len(values)
    m = n * int(zero_pad_factor)
    padded = np.zeros(m, dtype=complex)
    padded[:n] = values
    response = np.fft.ifft(padded)

    step_hz = trace.axis.step_hz
    bin_s = 1.0 / (m * step_hz)
    idx = np.arange(m)
    delays_s = np.where(idx < m - m // 2, idx, idx - m) * bin_s
    mags = np.abs(response)
    peak = float(np.max(mags))
    if peak <= 0.0:
        power_db = np.full(m, 20.0 * np.log10(_DB_FLOOR))
    else:
        power_db = 20.0 * np.log10(np.maximum(mags, _DB_FLOOR) / peak)
    return TimeDomainProfile(
        delays_ns=delays_s * 1e9,
        power_db=power_db,
        complex_response=response,
        bin_ns=bin_s * 1e9,
    )


def resolution_ns(axis: FrequencyAxis) -> float:
    """Nominal two-sided delay resolution of the band, 1/bandwidth."""
    return 1e9 / axis.bandwidth_hz


def save_trace_csv(path: str | Path, trace: ComplexTrace) -> None:
    """Persist as freq_hz,re,im rows with a header line."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "re", "im"])
        for f, v in zip(trace.axis.grid(), trace.values):
            writer.writerow([repr(float(f)), repr(float(v.real)), repr(float(v.imag))])


def load_trace_csv(path: str | Path) -> ComplexTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["freq_hz"]:
        raise EmptyTraceError(f"{path} is not a trace file")
    freqs = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([float(r[1]) + 1j * float(r[2]) for r in rows[1:]])
    return ComplexTrace(axis=FrequencyAxis.from_grid(freqs), values=values)
