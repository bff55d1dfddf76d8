"""Device-under-test models evaluated by the simulator.

Each model maps (s_parameter, frequency grid) to a complex response vector.
Responses are deterministic for a given (noise_seed, sweep_index) pair so a
replayed run sees bit-identical data; with noise_floor_db None the output is
noise free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Fixed small reflections/leakage used where a model does not define the
# requested parameter; values in dB relative to unity.
_DEFAULT_REFLECTION_DB = -25.0
_DEFAULT_LEAKAGE_DB = -60.0


@dataclass
class ThroughLine:
    """Matched through connection with flat insertion loss."""

    insertion_loss_db: float = 3.0

    def response(self, s_parameter: str, freqs_hz: np.ndarray) -> np.ndarray:
        if s_parameter in ("S21", "S12"):
            return np.full(len(freqs_hz), 10.0 ** (-self.insertion_loss_db / 20.0), dtype=complex)
        return np.full(len(freqs_hz), 10.0 ** (_DEFAULT_REFLECTION_DB / 20.0), dtype=complex)


@dataclass
class ResonantAntenna:
    """Single resonance reflection model.

    S11(f) = (m + jQd) / (1 + jQd) with d = 2(f - f_r)/f_r and
    m = 10^(match_depth_db/20): |S11| dips to match_depth_db at f_r and
    returns to 0 dB far from resonance.
    """

    resonance_hz: float = 3.575946e9
    q_factor: float = 200.0
    match_depth_db: float = -30.0

    def response(self, s_parameter: str, freqs_hz: np.ndarray) -> np.ndarray:
        if s_parameter in ("S11", "S22"):
            m = 10.0 ** (self.match_depth_db / 20.0)
            delta = 2.0 * (freqs_hz - self.resonance_hz) / self.resonance_hz
            qd = 1j * self.q_factor * delta
            return (m + qd) / (1.0 + qd)
        return np.full(len(freqs_hz), 10.0 ** (_DEFAULT_LEAKAGE_DB / 20.0), dtype=complex)


@dataclass
class PathComponent:
    rel_delay_ns: float
    rel_power_db: float


@dataclass
class MultipathChannel:
    """Discrete multipath channel behind a common bulk delay.

    S21(f) = sum_k a_k exp(-j 2 pi f (tau0 + tau_k)), a_k = 10^(p_k/20).
    """

    bulk_delay_ns: float = 4504.145
    paths: list[PathComponent] = field(
        default_factory=lambda: [
            PathComponent(0.0, 0.0),
            PathComponent(200.0, -5.0),
            PathComponent(500.0, -10.0),
        ]
    )

    def response(self, s_parameter: str, freqs_hz: np.ndarray) -> np.ndarray:
        if s_parameter in ("S21", "S12"):
            out = np.zeros(len(freqs_hz), dtype=complex)
            for p in self.paths:
                tau = (self.bulk_delay_ns + p.rel_delay_ns) * 1e-9
                out += 10.0 ** (p.rel_power_db / 20.0) * np.exp(-2j * np.pi * freqs_hz * tau)
            return out
        return np.full(len(freqs_hz), 10.0 ** (-40.0 / 20.0), dtype=complex)


@dataclass
class BandpassLink:
    """Single-pole bandpass transmission around f0 with 3 dB bandwidth bw."""

    f0_hz: float = 11.0e9
    bw_hz: float = 400e6
    gain_db: float = -3.0

    def response(self, s_parameter: str, freqs_hz: np.ndarray) -> np.ndarray:
        if s_parameter in ("S21", "S12"):
            g = 10.0 ** (self.gain_db / 20.0)
            return g / (1.0 + 2j * (freqs_hz - self.f0_hz) / self.bw_hz)
        return np.full(len(freqs_hz), 10.0 ** (_DEFAULT_REFLECTION_DB / 20.0), dtype=complex)


DutModel = ThroughLine | ResonantAntenna | MultipathChannel | BandpassLink


def evaluate(
    dut: DutModel,
    s_parameter: str,
    freqs_hz: np.ndarray,
    noise_floor_db: float | None,
    noise_seed: int,
    sweep_index: int,
) -> np.ndarray:
    """Model response plus seeded additive complex noise."""
    clean = dut.response(s_parameter, np.asarray(freqs_hz, dtype=float))
    if noise_floor_db is None:
        return clean
    rng = np.random.default_rng(np.random.SeedSequence([noise_seed, sweep_index]))
    sigma = 10.0 ** (noise_floor_db / 20.0)
    noise = rng.normal(0.0, sigma / np.sqrt(2.0), size=(2, len(clean)))
    return clean + noise[0] + 1j * noise[1]


_SCENARIOS: dict[str, DutModel] = {
    "through": ThroughLine(),
    "resonant": ResonantAntenna(),
    "bandpass": BandpassLink(),
    "multipath": MultipathChannel(),
}


def scenario(name: str) -> DutModel:
    """Named DUT presets selectable from the CLI and benchmark."""
    try:
        return _SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(_SCENARIOS)}") from None
