"""Second-order RLC model of the electro-optic modulator drive chain."""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError

E24 = (1.0, 1.1, 1.2, 1.3, 1.5, 1.6, 1.8, 2.0, 2.2, 2.4, 2.7, 3.0,
       3.3, 3.6, 3.9, 4.3, 4.7, 5.1, 5.6, 6.2, 6.8, 7.5, 8.2, 9.1)


def _positive(**kwargs) -> None:
    for name, value in kwargs.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise InvalidArgumentError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class RlcParams:
    inductance: float
    capacitance: float
    damping_ratio: float = 0.7
    source_impedance: float = 50.0

    def __post_init__(self):
        _positive(inductance=self.inductance, capacitance=self.capacitance,
                  damping_ratio=self.damping_ratio, source_impedance=self.source_impedance)
        if self.damping_ratio > 2:
            raise InvalidArgumentError(f"damping_ratio must lie in (0, 2], got {self.damping_ratio!r}")


def ring_frequency(inductance: float, capacitance: float) -> float:
    """Natural frequency 1/(2 pi sqrt(LC)) in Hz."""
    _positive(inductance=inductance, capacitance=capacitance)
    return 1.0 / (2.0 * math.pi * math.sqrt(inductance * capacitance))


def total_resistance(zeta: float, inductance: float, capacitance: float) -> float:
    """Series resistance 2 zeta sqrt(L/C) that sets damping ratio ``zeta``."""
    _positive(zeta=zeta, inductance=inductance, capacitance=capacitance)
    return 2.0 * zeta * math.sqrt(inductance / capacitance)


def series_resistance(r_total: float, z_source: float) -> float:
    _positive(r_total=r_total, z_source=z_source)
    if r_total <= z_source:
        raise InvalidArgumentError(
            f"source impedance {z_source} already meets the required {r_total}; no series resistor needed"
        )
    return r_total - z_source


def settling_time_estimate(zeta: float, inductance: float, capacitance: float, band: float = 0.02) -> float:
    """Envelope settling time -ln(band sqrt(1 - zeta^2)) / (zeta omega_n)."""
    _positive(inductance=inductance, capacitance=capacitance)
    if not 0 < zeta < 1:
        raise InvalidArgumentError(f"settling estimate needs an underdamped zeta in (0, 1), got {zeta!r}")
    if not 0 < band < 1:
        raise InvalidArgumentError(f"band must lie in (0, 1), got {band!r}")
    omega_n = 1.0 / math.sqrt(inductance * capacitance)
    return -math.log(band * math.sqrt(1.0 - zeta * zeta)) / (zeta * omega_n)


def _e24_decades(value: float) -> list[float]:
    exp = math.floor(math.log10(value))
    return [round(m * 10.0**e, 12) for e in (exp - 1, exp, exp + 1) for m in E24]


def nearest_e24(value: float) -> float:
    _positive(value=value)
    return min(_e24_decades(value), key=lambda c: (abs(c - value), c))


def e24_at_least(value: float) -> float:
    """Smallest E24 value >= ``value``; rounding up keeps the damping at or above target."""
    _positive(value=value)
    candidates = _e24_decades(value)
    k = bisect.bisect_left(candidates, value * (1 - 1e-12))
    return candidates[k]


def damping_from_resistance(resistance: float, inductance: float, capacitance: float) -> float:
    _positive(resistance=resistance, inductance=inductance, capacitance=capacitance)
    return resistance / (2.0 * math.sqrt(inductance / capacitance))


@dataclass
class StepTrace:
    times: np.ndarray
    volts: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.volts = np.asarray(self.volts, dtype=float)
        if self.times.shape != self.volts.shape or self.times.ndim != 1:
            raise InvalidArgumentError("times and volts must be 1-D arrays of equal length")
        if self.times.size < 16:
            raise InvalidArgumentError(f"a step trace needs at least 16 samples, got {self.times.size}")
        dt = np.diff(self.times)
        if np.any(dt <= 0):
            raise InvalidArgumentError("trace times must be strictly increasing")
        if np.max(np.abs(dt - dt.mean())) > 1e-6 * dt.mean():
            raise InvalidArgumentError("trace must be uniformly sampled")

    @property
    def dt(self) -> float:
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    @classmethod
    def from_csv(cls, text: str) -> StepTrace:
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
        try:
            float(rows[0][0])
        except (ValueError, IndexError):
            rows = rows[1:]
        try:
            data = np.array([[float(r[0]), float(r[1])] for r in rows])
        except (ValueError, IndexError) as exc:
            raise InvalidArgumentError(f"malformed step trace: {exc}") from exc
        if data.size == 0:
            raise InvalidArgumentError("empty step trace")
        return cls(data[:, 0], data[:, 1])

    def to_csv(self) -> str:
        lines = ["time_s,volts"]
        lines += [f"{t!r},{v!r}" for t, v in zip(self.times.tolist(), self.volts.tolist())]
        return "\n".join(lines) + "\n"


def step_response(times, zeta: float, f_ring: float, amplitude: float = 1.0) -> np.ndarray:
    """Closed-form underdamped unit-step response with damped frequency ``f_ring``."""
    if not 0 < zeta < 1:
        raise InvalidArgumentError("step_response needs 0 < zeta < 1")
    t = np.asarray(times, dtype=float)
    omega_d = 2.0 * math.pi * f_ring
    omega_n = omega_d / math.sqrt(1.0 - zeta * zeta)
    sigma = zeta * omega_n
    shape = 1.0 - np.exp(-sigma * t) * (np.cos(omega_d * t) + sigma / omega_d * np.sin(omega_d * t))
    return amplitude * np.where(t >= 0, shape, 0.0)


def synthetic_trace(zeta: float, f_ring: float, dt: float, duration: float, amplitude: float = 1.0) -> StepTrace:
    n = int(round(duration / dt))
    t = np.arange(n) * dt
    return StepTrace(t, step_response(t, zeta, f_ring, amplitude))


def _refine_peak(y: np.ndarray, k: int) -> tuple[float, float]:
    """Parabolic interpolation through samples k-1, k, k+1: (offset, height)."""
    a, b, c = y[k - 1], y[k], y[k + 1]
    denom = a - 2 * b + c
    if denom == 0:
        return 0.0, float(b)
    offset = 0.5 * (a - c) / denom
    return float(offset), float(b - 0.25 * (a - c) * offset)


def _dominant_frequency(y: np.ndarray, dt: float, n_fft: int) -> float:
    """DFT peak of ``y`` (zero-padded to ``n_fft``) with quadratic interpolation."""
    spectrum = np.abs(np.fft.rfft(y - y.mean(), n=n_fft))
    freqs = np.fft.rfftfreq(n_fft, dt)
    k = int(np.argmax(spectrum[1:])) + 1
    if 1 <= k < spectrum.size - 1:
        offset, _ = _refine_peak(spectrum, k)
        return float(freqs[k] + offset * (freqs[1] - freqs[0]))
    return float(freqs[k])


def extract_damping(trace: StepTrace, final_value: float | None = None, min_overshoot: float = 1e-4) -> tuple[float, float]:
    """Damping ratio by logarithmic decrement and ring frequency by DFT.

    The decrement is averaged over all usable overshoot peaks,
    delta = ln(p_0 / p_K) / K, and zeta = delta / sqrt(4 pi^2 + delta^2).
    Peaks smaller than ``min_overshoot`` times the step height are ignored.

    A decaying ringing has a broadened, skewed spectrum, so the DFT is taken
    of the overshoot with the fitted envelope exp(-sigma t) divided out, over
    the window containing the usable peaks (zero-padded to the trace length
    times eight).
    """
    y = trace.volts
    if final_value is None:
        tail = max(4, y.size // 10)
        final_value = float(np.median(y[-tail:]))
    step = abs(final_value - y[0]) or 1.0
    overshoot = y - final_value
    peaks, positions = [], []
    for k in range(1, y.size - 1):
        if overshoot[k] > overshoot[k - 1] and overshoot[k] >= overshoot[k + 1] and overshoot[k] > 0:
            offset, height = _refine_peak(overshoot, k)
            if height > min_overshoot * step:
                peaks.append(height)
                positions.append(k + offset)
    if len(peaks) < 2:
        raise InsufficientDataError(f"need at least 2 overshoot peaks, found {len(peaks)}")
    n_periods = len(peaks) - 1
    delta = math.log(peaks[0] / peaks[-1]) / n_periods
    if delta <= 0:
        raise InsufficientDataError("overshoot peaks do not decay")
    zeta = delta / math.sqrt(4 * math.pi**2 + delta**2)

    dt = trace.dt
    period = (positions[-1] - positions[0]) * dt / n_periods
    sigma = delta / period
    t = np.arange(y.size) * dt
    window = t <= positions[-1] * dt + period
    flattened = overshoot[window] * np.exp(sigma * t[window])
    return zeta, _dominant_frequency(flattened, dt, 8 * y.size)


def decay_rate(zeta: float, f_ring: float) -> float:
    """Envelope decay rate sigma = zeta omega_n, with ``f_ring`` the damped frequency."""
    if not 0 < zeta < 1:
        raise InvalidArgumentError("decay_rate needs 0 < zeta < 1")
    _positive(f_ring=f_ring)
    return zeta * 2 * math.pi * f_ring / math.sqrt(1 - zeta * zeta)


def estimate_lc(f_ring: float, decay: float, resistance: float) -> tuple[float, float]:
    """Invert omega_d = omega_n sqrt(1 - zeta^2) and sigma = R / (2L) for (L, C).

    ``f_ring`` is the damped ringing frequency and ``resistance`` the loop
    resistance present while the ringing was recorded.
    """
    _positive(f_ring=f_ring, resistance=resistance)
    if not (math.isfinite(decay) and decay > 0):
        raise InvalidArgumentError(f"decay rate must be positive (undamped ringing is not invertible), got {decay!r}")
    omega_d = 2 * math.pi * f_ring
    omega_n_sq = omega_d * omega_d + decay * decay
    zeta = decay / math.sqrt(omega_n_sq)
    if zeta >= 1:
        raise InvalidArgumentError("inputs imply an overdamped circuit")
    inductance = resistance / (2 * decay)
    capacitance = 1.0 / (omega_n_sq * inductance)
    return inductance, capacitance


def design_report(params: RlcParams, band: float = 0.02) -> dict:
    """Key quantities for a drive-circuit damping design."""
    L, C = params.inductance, params.capacitance
    r_total = total_resistance(params.damping_ratio, L, C)
    r_series = series_resistance(r_total, params.source_impedance)
    chosen = e24_at_least(r_series)
    achieved = damping_from_resistance(chosen + params.source_impedance, L, C)
    report = {
        "inductance_h": L,
        "capacitance_f": C,
        "damping_ratio": params.damping_ratio,
        "source_impedance_ohm": params.source_impedance,
        "f_ring_hz": ring_frequency(L, C),
        "r_total_ohm": r_total,
        "r_series_ohm": r_series,
        "r_series_e24_ohm": chosen,
        "r_series_e24_nearest_ohm": nearest_e24(r_series),
        "damping_ratio_with_e24": achieved,
    }
    if params.damping_ratio < 1:
        report["settling_time_s"] = settling_time_estimate(params.damping_ratio, L, C, band)
    if achieved < 1:
        report["settling_time_with_e24_s"] = settling_time_estimate(achieved, L, C, band)
    return report
