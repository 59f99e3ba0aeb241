"""Closed-loop scenario engine.

Wires plant, sensor/actuator faults, virtual-actuator filter, adaptive
observer, funnel transform, and the sliding-mode control law into one ODE
system, integrates it with a fixed-step classic Runge-Kutta scheme, and
extracts verification metrics from the resulting trace.

Two integration backends produce identical traces up to floating-point
noise: a compiled extension (default when built) and a pure-Python
reference loop; see ``ftcsim.backends``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import backends
from .controller import ControllerConfig
from .faults import ActuatorFaultSpec, SensorFaultSpec
from .funnel import FunnelParams, mu as funnel_mu
from .manipulator import ManipulatorModel
from .observer import AugmentedSystem, ObserverGains

__all__ = [
    "ReferenceSpec",
    "Scenario",
    "SimulationTrace",
    "MetricsReport",
    "RunResult",
    "ScenarioValidationError",
    "trace_columns",
    "rk4_step",
    "run_scenario",
    "compute_metrics",
]

TRACE_FORMAT_VERSION = 1

STATUS_OK = "ok"
STATUS_FUNNEL = "funnel_violation"
STATUS_NON_FINITE = "non_finite"


class ScenarioValidationError(ValueError):
    """A scenario failed its pre-run checks."""


@dataclass(frozen=True)
class ReferenceSpec:
    """Per-joint sinusoidal reference y_d = offset + amplitude sin(freq t + phase)."""

    amplitude: np.ndarray
    frequency: np.ndarray
    phase: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        for name in ("amplitude", "frequency", "phase", "offset"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim != 1:
                raise ValueError(f"reference {name} must be 1-D")
            object.__setattr__(self, name, v)
        n = self.amplitude.shape[0]
        if any(getattr(self, k).shape[0] != n for k in ("frequency", "phase", "offset")):
            raise ValueError("reference arrays must share one length")

    @property
    def n(self) -> int:
        return self.amplitude.shape[0]

    def eval(self, t: float):
        """Reference position, velocity, acceleration at time t (analytic)."""
        arg = self.frequency * t + self.phase
        yd = self.offset + self.amplitude * np.sin(arg)
        yd_dot = self.amplitude * self.frequency * np.cos(arg)
        yd_ddot = -self.amplitude * self.frequency ** 2 * np.sin(arg)
        return yd, yd_dot, yd_ddot


@dataclass
class Scenario:
    """Everything one closed-loop run needs."""

    model: ManipulatorModel
    reference: ReferenceSpec
    funnels: tuple                      # n FunnelParams
    aug: AugmentedSystem
    obs_gains: ObserverGains
    controller: ControllerConfig
    sensor_fault: SensorFaultSpec
    actuator_fault: ActuatorFaultSpec
    horizon: float = 50.0
    step: float = 1e-3
    seed: int = 0
    q0: np.ndarray = None
    qd0: np.ndarray = None
    x_v0: np.ndarray = None
    x_hat0: np.ndarray = None
    pi_hat0: np.ndarray = None
    beta_hat0: float = 0.0

    def __post_init__(self):
        n, m = self.aug.n, self.aug.m
        self.q0 = np.zeros(n) if self.q0 is None else np.asarray(self.q0, dtype=float)
        self.qd0 = np.zeros(n) if self.qd0 is None else np.asarray(self.qd0, dtype=float)
        self.x_v0 = np.zeros(n) if self.x_v0 is None else np.asarray(self.x_v0, dtype=float)
        self.x_hat0 = np.zeros(3 * n) if self.x_hat0 is None else np.asarray(self.x_hat0, dtype=float)
        self.pi_hat0 = np.zeros(m) if self.pi_hat0 is None else np.asarray(self.pi_hat0, dtype=float)
        if isinstance(self.funnels, FunnelParams):
            self.funnels = (self.funnels,) * n
        self.funnels = tuple(self.funnels)

    @property
    def n(self) -> int:
        return self.aug.n

    @property
    def m(self) -> int:
        return self.aug.m

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.horizon / self.step + 0.5))

    def validate(self):
        """Raise ScenarioValidationError on any structural problem."""
        n, m = self.aug.n, self.aug.m
        problems = []
        if not self.step > 0:
            problems.append(f"step must be positive, got {self.step}")
        if self.horizon < self.step:
            problems.append(f"horizon {self.horizon} shorter than one step {self.step}")
        if self.model.n != n:
            problems.append(f"model dimension {self.model.n} != augmented n {n}")
        if self.obs_gains.n != n:
            problems.append(f"observer gain dimension {self.obs_gains.n} != n {n}")
        if self.obs_gains.m != m:
            problems.append(f"observer gain fault dimension {self.obs_gains.m} != m {m}")
        if self.reference.n != n:
            problems.append(f"reference dimension {self.reference.n} != n {n}")
        if len(self.funnels) != n:
            problems.append(f"need {n} funnel parameter sets, got {len(self.funnels)}")
        if (self.sensor_fault.n, self.sensor_fault.m) != (n, m):
            problems.append(f"sensor fault spec shape {(self.sensor_fault.n, self.sensor_fault.m)} != {(n, m)}")
        if self.actuator_fault.n != n:
            problems.append(f"actuator fault spec has {self.actuator_fault.n} channels, expected {n}")
        for name, v, size in (("q0", self.q0, n), ("qd0", self.qd0, n), ("x_v0", self.x_v0, n),
                              ("x_hat0", self.x_hat0, 3 * n), ("pi_hat0", self.pi_hat0, m)):
            if v.shape != (size,):
                problems.append(f"{name} must have shape ({size},), got {v.shape}")
        if not problems and self.controller.mode == "second_order":
            yd0, _, _ = self.reference.eval(0.0)
            e0 = self.x_hat0[:n] - yd0
            for j, p in enumerate(self.funnels):
                if abs(e0[j]) >= p.mu0:
                    problems.append(
                        f"initial error |e_{j}(0)|={abs(e0[j]):.4g} outside funnel mu0={p.mu0}")
        if problems:
            raise ScenarioValidationError("; ".join(problems))

    def initial_state(self) -> np.ndarray:
        """Packed integrator state: (x1, x2, x_v, x_hat_a, pi_hat, beta_hat, accum)."""
        n = self.n
        return np.concatenate([
            self.q0, self.qd0, self.x_v0, self.x_hat0, self.pi_hat0,
            [self.beta_hat0], np.zeros(n)])


def trace_columns(n: int, m: int) -> list:
    """Versioned column order of the simulation trace."""
    cols = ["t"]
    for prefix, k in (("q", n), ("qd", n), ("yf", n), ("xv", n), ("xhat1", n),
                      ("xhat2", n), ("xhatv", n), ("e", n), ("mu", n), ("z", n),
                      ("eta", n), ("sigma", n), ("u", n), ("f", m), ("fhat", m),
                      ("pihat", m)):
        cols += [f"{prefix}{i + 1}" for i in range(k)]
    cols += ["betahat", "V2", "xtilde_norm"]
    cols += [f"yd{i + 1}" for i in range(n)]
    return cols


@dataclass
class SimulationTrace:
    """Uniformly sampled record of every plant/observer/controller channel."""

    columns: list
    data: np.ndarray

    def col(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def block(self, prefix: str) -> np.ndarray:
        idx = [i for i, c in enumerate(self.columns)
               if c.startswith(prefix) and c[len(prefix):].isdigit()]
        if not idx:
            raise KeyError(f"no columns with prefix {prefix!r}")
        return self.data[:, idx]

    @property
    def t(self) -> np.ndarray:
        return self.col("t")

    def __len__(self) -> int:
        return self.data.shape[0]

    def to_csv(self, path):
        header = (f"# ftcsim trace format v{TRACE_FORMAT_VERSION}\n"
                  + ",".join(self.columns))
        np.savetxt(path, self.data, fmt="%.17e", delimiter=",",
                   header=header, comments="")

    @classmethod
    def from_csv(cls, path) -> "SimulationTrace":
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("# ftcsim trace format"):
                raise ValueError(f"{path}: not an ftcsim trace file")
            columns = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        return cls(columns=columns, data=data)


def rk4_step(rhs, state: np.ndarray, t: float, h: float) -> np.ndarray:
    """One classic fixed-step 4-stage update of d(state)/dt = rhs(t, state)."""
    k1 = rhs(t, state)
    k2 = rhs(t + 0.5 * h, state + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, state + 0.5 * h * k2)
    k4 = rhs(t + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class MetricsReport:
    """Scalar verification metrics derived from one trace."""

    funnel_violations: int
    first_violation_time: float | None
    steady_state_error: np.ndarray          # per joint, |e| over last 10% of horizon
    true_steady_state_error: np.ndarray     # per joint, |q - yd| over last 10%
    fault_onset: float | None
    fault_rmse_post_onset: float | None
    fault_rmse_final_10s: float | None
    fault_rms_post_onset: float | None
    recovery_time: float | None             # seconds after onset until max|e| < threshold
    recovery_threshold: float
    max_xtilde_final_window: float
    xtilde_window: float
    sigma_settling_time: float | None       # time after which ||sigma||_inf stays < tol
    sigma_tolerance: float
    v2_violations: int
    beta_hat_max: float

    def to_text(self) -> str:
        def fmt(v):
            if v is None:
                return "n/a"
            if isinstance(v, np.ndarray):
                return "[" + ", ".join(f"{x:.6g}" for x in v) + "]"
            if isinstance(v, float):
                return f"{v:.6g}"
            return str(v)

        lines = ["# ftcsim metrics"]
        for name in ("funnel_violations", "first_violation_time", "steady_state_error",
                     "true_steady_state_error", "fault_onset", "fault_rmse_post_onset",
                     "fault_rmse_final_10s", "fault_rms_post_onset", "recovery_time",
                     "recovery_threshold", "max_xtilde_final_window", "xtilde_window",
                     "sigma_settling_time", "sigma_tolerance", "v2_violations",
                     "beta_hat_max"):
            lines.append(f"{name} = {fmt(getattr(self, name))}")
        return "\n".join(lines) + "\n"


def compute_metrics(trace: SimulationTrace, recovery_threshold: float = 0.05,
                    sigma_tol: float = 1e-3, xtilde_window: float = 20.0,
                    post_transient: float = 5.0) -> MetricsReport:
    """Extract the MetricsReport from a (possibly partial) trace."""
    t = trace.t
    e = trace.block("e")
    mu_ = trace.block("mu")
    q = trace.block("q")
    yd = trace.block("yd")
    f = trace.block("f")
    fhat = trace.block("fhat")
    sigma = trace.block("sigma")
    v2 = trace.col("V2")
    xt = trace.col("xtilde_norm")
    bh = trace.col("betahat")
    t_end = t[-1]

    viol = np.abs(e) >= mu_
    viol_rows = viol.any(axis=1)
    n_viol = int(viol_rows.sum())
    first_viol = float(t[np.argmax(viol_rows)]) if n_viol else None

    tail = t >= t_end - 0.1 * (t_end - t[0])
    sse = np.abs(e[tail]).max(axis=0)
    true_sse = np.abs(q[tail] - yd[tail]).max(axis=0)

    active = np.abs(f).max(axis=1) > 0.0
    onset = float(t[np.argmax(active)]) if active.any() else None
    rmse_post = rmse_10 = rms_post = recovery = None
    if onset is not None:
        post = t >= onset
        err = fhat[post] - f[post]
        rmse_post = float(np.sqrt(np.mean(err ** 2)))
        rms_post = float(np.sqrt(np.mean(f[post] ** 2)))
        w10 = t >= t_end - 10.0
        if w10.any():
            rmse_10 = float(np.sqrt(np.mean((fhat[w10] - f[w10]) ** 2)))
        ok = post & (np.abs(e).max(axis=1) < recovery_threshold)
        if ok.any():
            recovery = float(t[np.argmax(ok)] - onset)

    wxt = t >= t_end - xtilde_window
    max_xt = float(xt[wxt].max()) if wxt.any() else float(xt.max())

    snorm = np.abs(sigma).max(axis=1)
    above = snorm >= sigma_tol
    if above.any():
        k_last = len(t) - 1 - int(np.argmax(above[::-1]))
        settle = float(t[k_last + 1]) if k_last + 1 < len(t) else None
    else:
        settle = float(t[0])

    wpt = t >= post_transient
    dv = np.diff(v2[wpt])
    scale = np.maximum(np.abs(v2[wpt][:-1]), 1e-30)
    v2_viol = int(np.sum(dv > 1e-9 * scale + 1e-15))

    return MetricsReport(
        funnel_violations=n_viol, first_violation_time=first_viol,
        steady_state_error=sse, true_steady_state_error=true_sse,
        fault_onset=onset, fault_rmse_post_onset=rmse_post,
        fault_rmse_final_10s=rmse_10, fault_rms_post_onset=rms_post,
        recovery_time=recovery, recovery_threshold=recovery_threshold,
        max_xtilde_final_window=max_xt, xtilde_window=xtilde_window,
        sigma_settling_time=settle, sigma_tolerance=sigma_tol,
        v2_violations=v2_viol, beta_hat_max=float(bh.max()))


@dataclass
class RunResult:
    trace: SimulationTrace
    metrics: MetricsReport | None
    status: str
    failure_message: str | None = None
    fail_time: float | None = None
    fail_joint: int | None = None
    runtime_s: float = 0.0
    backend: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def run_scenario(sc: Scenario, backend: str | None = None,
                 metrics_kwargs: dict | None = None) -> RunResult:
    """Integrate a scenario and compute its metrics.

    Pre-run validation problems raise ScenarioValidationError.  Runtime
    failures (funnel violation, divergence) are reported in the returned
    status together with the partial trace.
    """
    sc.validate()
    name, loop = backends.get_loop(backend)
    t0 = time.perf_counter()
    data, status, fail_time, fail_joint, message = loop(sc)
    elapsed = time.perf_counter() - t0
    trace = SimulationTrace(columns=trace_columns(sc.n, sc.m), data=data)
    metrics = compute_metrics(trace, **(metrics_kwargs or {})) if len(trace) >= 2 else None
    return RunResult(trace=trace, metrics=metrics, status=status,
                     failure_message=message, fail_time=fail_time,
                     fail_joint=fail_joint, runtime_s=elapsed, backend=name)
