import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfagent.rftools.traces import (
    ComplexTrace,
    FrequencyAxis,
    RefinePolicy,
    SweepWindow,
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


def make_trace(values, start=1e9, stop=2e9):
    axis = FrequencyAxis(start, stop, len(values))
    return ComplexTrace(axis, np.asarray(values, dtype=complex))


class TestAxis:
    def test_grid_endpoints_and_step(self):
        axis = FrequencyAxis(1e9, 2e9, 11)
        grid = axis.grid()
        assert grid[0] == 1e9 and grid[-1] == 2e9
        assert axis.step_hz == 1e8
        assert axis.bandwidth_hz == 1e9

    def test_from_grid_roundtrip(self):
        axis = FrequencyAxis(2.4e9, 2.5e9, 201)
        again = FrequencyAxis.from_grid(axis.grid())
        assert again == axis

    def test_from_grid_rejects_nonuniform(self):
        with pytest.raises(Exception):
            FrequencyAxis.from_grid(np.array([1e9, 1.5e9, 1.7e9]))

    def test_too_few_points(self):
        with pytest.raises(Exception):
            FrequencyAxis(1e9, 2e9, 1)


def test_trace_from_interleaved():
    axis = FrequencyAxis(1e9, 2e9, 3)
    trace = trace_from_interleaved(axis, [1.0, 0.0, 0.0, -1.0, 0.5, 0.5])
    assert trace.values[0] == 1.0
    assert trace.values[1] == -1.0j
    assert trace.values[2] == 0.5 + 0.5j


class TestDetection:
    def test_magnitude_range(self):
        trace = make_trace([1.0, 0.1, 0.5])
        found = magnitude_range(trace)
        assert found.max_db == pytest.approx(0.0)
        assert found.min_db == pytest.approx(-20.0)
        assert found.f_at_max_hz == 1e9
        assert found.f_at_min_hz == 1.5e9

    def test_detect_peak(self):
        trace = make_trace([0.1, 0.1, 2.0, 0.1, 0.1])
        found = detect_peak(trace)
        assert found.f_peak_hz == 1.5e9
        assert found.peak_db == pytest.approx(20 * math.log10(2.0))
        assert found.prominence_db == pytest.approx(20 * math.log10(2.0 / 0.1))

    def test_detect_minimum(self):
        trace = make_trace([1.0, 0.01, 1.0, 1.0, 1.0])
        found = detect_minimum(trace)
        assert found.f_min_hz == 1.25e9
        assert found.min_db == pytest.approx(-40.0)


class TestRefineStep:
    def test_span_shrinks_by_policy_factor(self):
        window = SweepWindow(center_hz=3e9, span_hz=2e9)
        after = refine_step(window, 3.5e9, RefinePolicy())
        assert after.span_hz == 2e8
        assert after.center_hz == 3.5e9

    def test_span_floors_at_final(self):
        window = SweepWindow(center_hz=3e9, span_hz=5e6)
        after = refine_step(window, 3e9, RefinePolicy())
        assert after.span_hz == 1e6

    def test_raises_once_final_span_reached(self):
        window = SweepWindow(center_hz=3e9, span_hz=1e6)
        with pytest.raises(ValueError):
            refine_step(window, 3e9, RefinePolicy())

    def test_center_clamped_to_instrument_range(self):
        window = SweepWindow(center_hz=1e8, span_hz=1e9)
        after = refine_step(window, 2e7, RefinePolicy())
        # center must keep the full window above the 10 MHz floor
        assert after.center_hz - after.span_hz / 2 >= 1e7
        assert after.span_hz == 1e8

    def test_ladder_from_wideband_converges_in_five_steps(self):
        window = SweepWindow(center_hz=3e9, span_hz=2e9)
        spans = []
        for _ in range(4):
            window = refine_step(window, 3.575946e9, RefinePolicy())
            spans.append(window.span_hz)
        assert spans == [2e8, 2e7, 2e6, 1e6]
        with pytest.raises(ValueError):
            refine_step(window, 3.575946e9, RefinePolicy())


class TestTimeDomain:
    def test_resolution_is_inverse_bandwidth(self):
        axis = FrequencyAxis(1e9, 1.04e9, 101)  # 40 MHz span
        assert resolution_ns(axis) == pytest.approx(25.0)

    def test_single_delay_peak_location(self):
        axis = FrequencyAxis(1e9, 1.04e9, 1001)
        tau_ns = 500.0
        values = np.exp(-2j * np.pi * axis.grid() * tau_ns * 1e-9)
        profile = time_domain_transform(ComplexTrace(axis, values), zero_pad_factor=8)
        i = int(np.argmax(profile.power_db))
        assert profile.delays_ns[i] == pytest.approx(tau_ns, abs=resolution_ns(axis) / 8)

    def test_transform_roundtrips_without_window(self):
        axis = FrequencyAxis(1e9, 1.04e9, 64)
        rng = np.random.default_rng(5)
        values = rng.normal(size=64) + 1j * rng.normal(size=64)
        profile = time_domain_transform(ComplexTrace(axis, values))
        back = np.fft.fft(profile.complex_response)
        np.testing.assert_allclose(back, values, atol=1e-9)


class TestCsv:
    def test_roundtrip_preserves_values_exactly(self, tmp_path):
        axis = FrequencyAxis(1e9, 2e9, 5)
        values = np.array([1.0, 0.5 - 0.25j, -1e-12 + 3j, 0.0, 2.0 + 2.0j])
        path = tmp_path / "trace.csv"
        save_trace_csv(path, ComplexTrace(axis, values))
        loaded = load_trace_csv(path)
        assert loaded.axis == axis
        np.testing.assert_array_equal(loaded.values, values)

    def test_header_names_the_columns(self, tmp_path):
        path = tmp_path / "trace.csv"
        save_trace_csv(path, make_trace([1.0, 2.0]))
        assert path.read_text().splitlines()[0] == "freq_hz,re,im"


@settings(max_examples=50)
@given(
    center=st.floats(min_value=1e8, max_value=2e10),
    span=st.floats(min_value=2e6, max_value=5e9),
    offset=st.floats(min_value=-0.5, max_value=0.5),
)
def test_refine_step_always_contains_target_or_clamps(center, span, offset):
    policy = RefinePolicy()
    target = center + offset * span
    after = refine_step(SweepWindow(center, span), target, policy)
    lo, hi = policy.frequency_range_hz
    assert after.span_hz <= span
    assert after.span_hz >= policy.final_span_hz
    assert after.center_hz - after.span_hz / 2 >= lo - 1e-6
    assert after.center_hz + after.span_hz / 2 <= hi + 1e-6


@settings(max_examples=50)
@given(st.lists(st.complex_numbers(max_magnitude=1e3, min_magnitude=1e-6,
                                   allow_nan=False, allow_infinity=False),
                min_size=2, max_size=64))
def test_magnitude_range_brackets_every_sample(values):
    trace = make_trace(values)
    found = magnitude_range(trace)
    mags = 20 * np.log10(np.abs(np.asarray(values)))
    assert found.min_db <= mags.min() + 1e-9
    assert found.max_db >= mags.max() - 1e-9
