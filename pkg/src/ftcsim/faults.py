"""Time-parameterized sensor and actuator fault signals.

Every signal is identically zero before its onset time.  Additive sensor
faults enter the measurement as ``y_f = y + E f(t)``; actuator faults add
torque per joint.  Noisy signals are seeded and sampled-and-held at a fixed
rate so that runs replay bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FaultSignal",
    "SensorFaultSpec",
    "ActuatorFaultSpec",
    "eval_fault",
    "apply_sensor_fault",
    "apply_actuator_fault",
]

KINDS = ("zero", "step", "ramp", "sinusoid", "tanh_step", "noisy_offset", "composite")


@dataclass
class FaultSignal:
    """One fault channel.

    kind:
        zero          f = 0
        step          f = amplitude
        ramp          f = slope * (t - onset)
        sinusoid      f = amplitude * sin(frequency * (t - time_ref) + phase)
        tanh_step     f = amplitude * tanh((t - onset)^2 / width)
        noisy_offset  f = amplitude + held uniform noise in [-noise_amplitude, +noise_amplitude]
        composite     f = sum of member signals

    All kinds evaluate to exactly 0 for t < onset.
    """

    kind: str = "zero"
    onset: float = 0.0
    amplitude: float = 0.0
    slope: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    time_ref: float = 0.0
    width: float = 1.0
    noise_amplitude: float = 0.0
    seed: int = 0
    hold_dt: float = 1e-3
    members: tuple = ()
    _noise: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "tanh_step" and not self.width > 0:
            raise ValueError("tanh_step width must be positive")
        if self.kind == "noisy_offset" and not self.hold_dt > 0:
            raise ValueError("noisy_offset hold_dt must be positive")
        if self.kind == "composite":
            self.members = tuple(
                m if isinstance(m, FaultSignal) else FaultSignal(**m) for m in self.members)

    def noise_samples(self, count: int) -> np.ndarray:
        """First ``count`` held noise values; regenerated from the seed so the
        sequence at index k never depends on how far the cache has grown."""
        if self._noise is None or self._noise.shape[0] < count:
            rng = np.random.default_rng(self.seed)
            grow = max(count, 2 * (0 if self._noise is None else self._noise.shape[0]), 1024)
            self._noise = rng.uniform(-self.noise_amplitude, self.noise_amplitude, grow)
        return self._noise[:count]

    def _noise_at(self, t: float) -> float:
        k = int(math.floor((t - self.onset) / self.hold_dt + 1e-9))
        if k < 0:
            k = 0
        return float(self.noise_samples(k + 1)[k])


def eval_fault(sig: FaultSignal, t: float) -> float:
    """Evaluate one channel at time t (total function, no failure modes)."""
    if sig.kind == "composite":
        return sum(eval_fault(m, t) for m in sig.members)
    if t < sig.onset or sig.kind == "zero":
        return 0.0
    if sig.kind == "step":
        return sig.amplitude
    if sig.kind == "ramp":
        return sig.slope * (t - sig.onset)
    if sig.kind == "sinusoid":
        return sig.amplitude * math.sin(sig.frequency * (t - sig.time_ref) + sig.phase)
    if sig.kind == "tanh_step":
        dt = t - sig.onset
        return sig.amplitude * math.tanh(dt * dt / sig.width)
    # noisy_offset
    return sig.amplitude + sig._noise_at(t)


@dataclass
class SensorFaultSpec:
    """Constant propagation matrix E (n x m) plus m fault channels."""

    E: np.ndarray
    channels: tuple

    def __post_init__(self):
        self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
        self.channels = tuple(
            c if isinstance(c, FaultSignal) else FaultSignal(**c) for c in self.channels)
        n, m = self.E.shape
        if m > n:
            raise ValueError(f"E must have at most as many columns as rows, got {self.E.shape}")
        if len(self.channels) != m:
            raise ValueError(f"expected {m} fault channels to match E's columns, got {len(self.channels)}")

    @property
    def n(self) -> int:
        return self.E.shape[0]

    @property
    def m(self) -> int:
        return self.E.shape[1]

    def eval(self, t: float) -> np.ndarray:
        return np.array([eval_fault(c, t) for c in self.channels])

    @classmethod
    def none(cls, n: int, m: int = 1) -> "SensorFaultSpec":
        E = np.zeros((n, m))
        E[:m, :m] = np.eye(m)
        return cls(E=E, channels=tuple(FaultSignal() for _ in range(m)))


@dataclass
class ActuatorFaultSpec:
    """Per-joint additive torque signals (N m)."""

    channels: tuple

    def __post_init__(self):
        self.channels = tuple(
            c if isinstance(c, FaultSignal) else FaultSignal(**c) for c in self.channels)

    @property
    def n(self) -> int:
        return len(self.channels)

    def eval(self, t: float) -> np.ndarray:
        return np.array([eval_fault(c, t) for c in self.channels])

    @classmethod
    def none(cls, n: int) -> "ActuatorFaultSpec":
        return cls(channels=tuple(FaultSignal() for _ in range(n)))


def apply_sensor_fault(y: np.ndarray, spec: SensorFaultSpec, t: float) -> np.ndarray:
    """Corrupted measurement y_f = y + E f(t)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (spec.n,):
        raise ValueError(f"measurement must have shape ({spec.n},), got {y.shape}")
    return y + spec.E @ spec.eval(t)


def apply_actuator_fault(tau: np.ndarray, spec: ActuatorFaultSpec, t: float) -> np.ndarray:
    """Applied torque tau + additive per-joint fault."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (spec.n,):
        raise ValueError(f"torque must have shape ({spec.n},), got {tau.shape}")
    return tau + spec.eval(t)
