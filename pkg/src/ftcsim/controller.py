"""Fixed-time terminal sliding-mode control on a second-order integral surface.

The scalar shaping function g blends two signed fractional powers through a
state-dependent gain 1/phi, giving fast convergence far from the origin and
finite-time terminal behavior near it.  The surface

    sigma = dz/dt + g(z) + g(eta),    eta = z + integral of g(z)

drives the transformed tracking error z; the integral state eta removes the
steady-state error a first-order surface leaves under persistent
perturbations such as sensor faults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .funnel import TransformState
from .manipulator import ManipulatorModel, JointState, dynamics_terms
from .observer import ObserverGains

__all__ = [
    "GFuncParams",
    "SurfaceGains",
    "ControllerConfig",
    "ControllerState",
    "signed_power",
    "p_star",
    "g_func",
    "g_bar",
    "g_dot",
    "g_dot_bar",
    "sliding_surface",
    "baseline_first_order",
    "surface_power_terms",
    "control_law",
    "baseline_control_law",
    "upsilon_dot",
    "settling_time_bound",
    "surface_settling_bound",
]


def _check_odd_pair(name_num: str, num: int, name_den: str, den: int):
    for nm, v in ((name_num, num), (name_den, den)):
        if not (isinstance(v, int) and v > 0 and v % 2 == 1):
            raise ValueError(f"{nm} must be a positive odd integer, got {v!r}")


@dataclass(frozen=True)
class GFuncParams:
    """Parameters of the scalar shaping function g.

    lam_lo scales the above-unity power p_lo/q_lo (> 1), lam_hi scales the
    below-unity power p_hi/q_hi (< 1).  a in (0, 1), b > 0 and even c shape
    the gain profile phi.
    """

    lam_lo: float
    lam_hi: float
    a: float
    b: float
    c: int
    p_lo: int
    q_lo: int
    p_hi: int
    q_hi: int

    def __post_init__(self):
        if not (self.lam_lo > 0 and self.lam_hi > 0):
            raise ValueError("lam_lo and lam_hi must be positive")
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if not (isinstance(self.c, int) and self.c > 0 and self.c % 2 == 0):
            raise ValueError(f"c must be a positive even integer, got {self.c!r}")
        _check_odd_pair("p_lo", self.p_lo, "q_lo", self.q_lo)
        _check_odd_pair("p_hi", self.p_hi, "q_hi", self.q_hi)
        if not self.p_lo > self.q_lo:
            raise ValueError(f"need p_lo > q_lo, got {self.p_lo} <= {self.q_lo}")
        if not self.p_hi < self.q_hi:
            raise ValueError(f"need p_hi < q_hi, got {self.p_hi} >= {self.q_hi}")

    @property
    def exp_lo(self) -> float:
        return self.p_lo / self.q_lo

    @property
    def exp_hi(self) -> float:
        return self.p_hi / self.q_hi


@dataclass(frozen=True)
class SurfaceGains:
    """Reaching-law gains: k1 on sigma, c_lo on the >1 power, c_hi on the <1 power."""

    k1: float
    c_lo: float
    c_hi: float
    p_lo: int
    q_lo: int
    p_hi: int
    q_hi: int

    def __post_init__(self):
        if not (self.k1 > 0 and self.c_lo > 0 and self.c_hi > 0):
            raise ValueError("k1, c_lo and c_hi must be positive")
        _check_odd_pair("p_lo", self.p_lo, "q_lo", self.q_lo)
        _check_odd_pair("p_hi", self.p_hi, "q_hi", self.q_hi)
        if not self.p_lo > self.q_lo:
            raise ValueError(f"need p_lo > q_lo, got {self.p_lo} <= {self.q_lo}")
        if not self.p_hi < self.q_hi:
            raise ValueError(f"need p_hi < q_hi, got {self.p_hi} >= {self.q_hi}")

    @property
    def exp_lo(self) -> float:
        return self.p_lo / self.q_lo

    @property
    def exp_hi(self) -> float:
        return self.p_hi / self.q_hi


@dataclass(frozen=True)
class ControllerConfig:
    g: GFuncParams
    surface: SurfaceGains
    eps_g: float = 1e-6
    mode: str = "second_order"   # or "first_order_raw" (comparison baseline)

    def __post_init__(self):
        if self.mode not in ("second_order", "first_order_raw"):
            raise ValueError(f"unknown controller mode {self.mode!r}")
        if not self.eps_g > 0:
            raise ValueError("eps_g must be positive")


@dataclass
class ControllerState:
    """Integral of g(z); the integral surface state is eta = z + accum."""

    accum: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "ControllerState":
        return cls(np.zeros(n))

    def eta(self, z: np.ndarray) -> np.ndarray:
        return z + self.accum


def signed_power(x: float, e: float) -> float:
    """sgn(x) |x|^e; the exact real root for odd p/q ratios on negatives."""
    if x == 0.0:
        return 0.0
    return math.copysign(abs(x) ** e, x)


def p_star(chi: float, p: GFuncParams) -> float:
    """Piecewise exponent: 1 inside the unit ball, p_lo/q_lo outside,
    midpoint value on the unit sphere."""
    ax = abs(chi)
    if ax < 1.0:
        return 1.0
    if ax > 1.0:
        return p.exp_lo
    return 0.5 + 0.5 * p.exp_lo


def _phi(ax: float, p: GFuncParams) -> float:
    return p.a + (1.0 - p.a) * math.exp(-p.b * ax ** p.c)


def g_func(chi: float, p: GFuncParams) -> float:
    """Scalar shaping function; odd in chi and zero at the origin."""
    ax = abs(chi)
    ps = p_star(chi, p)
    val = p.lam_lo * signed_power(chi, ps) + p.lam_hi * signed_power(chi, p.exp_hi)
    return val / _phi(ax, p)


def g_bar(v: np.ndarray, p: GFuncParams) -> np.ndarray:
    """Elementwise g over a vector."""
    return np.array([g_func(x, p) for x in np.asarray(v, dtype=float)])


def g_dot(chi: float, chi_dot: float, p: GFuncParams, eps_g: float = 1e-6) -> float:
    """Time derivative of g(chi(t)) given chi and its rate.

    The piecewise exponent is treated as constant (its jump set has measure
    zero).  The |chi|^(p_hi/q_hi - 1) factor diverges at the origin; below
    eps_g it is frozen at its eps_g value, which bounds the feedforward
    without changing the sign structure.
    """
    ax = abs(chi)
    ps = p_star(chi, p)
    phi = _phi(ax, p)
    phi_dot = -(1.0 - p.a) * p.b * p.c * signed_power(chi, p.c - 1) * chi_dot * math.exp(-p.b * ax ** p.c)
    num = p.lam_lo * signed_power(chi, ps) + p.lam_hi * signed_power(chi, p.exp_hi)
    ax_safe = ax if ax > eps_g else eps_g
    slope = (p.lam_lo * ps * ax ** (ps - 1.0) + p.lam_hi * p.exp_hi * ax_safe ** (p.exp_hi - 1.0)) / phi
    return -phi_dot / (phi * phi) * num + slope * chi_dot


def g_dot_bar(v: np.ndarray, vdot: np.ndarray, p: GFuncParams, eps_g: float = 1e-6) -> np.ndarray:
    return np.array([g_dot(x, xd, p, eps_g)
                     for x, xd in zip(np.asarray(v, dtype=float), np.asarray(vdot, dtype=float))])


def sliding_surface(z: np.ndarray, zdot: np.ndarray, state: ControllerState,
                    p: GFuncParams) -> np.ndarray:
    """Second-order integral surface sigma = dz/dt + g(z) + g(eta)."""
    eta = state.eta(z)
    return zdot + g_bar(z, p) + g_bar(eta, p)


def baseline_first_order(z: np.ndarray, zdot: np.ndarray, p: GFuncParams) -> np.ndarray:
    """First-order comparison surface sigma = dz/dt + g(z); no integral state."""
    return zdot + g_bar(z, p)


def surface_power_terms(sigma: np.ndarray, s: SurfaceGains) -> np.ndarray:
    """k1 sigma + c_lo sgn(sigma)|sigma|^(p_lo/q_lo) + c_hi sgn(sigma)|sigma|^(p_hi/q_hi)."""
    lo = np.array([signed_power(v, s.exp_lo) for v in sigma])
    hi = np.array([signed_power(v, s.exp_hi) for v in sigma])
    return s.k1 * sigma + s.c_lo * lo + s.c_hi * hi


def upsilon_dot(y_tilde: np.ndarray, y_tilde_dot: np.ndarray, beta_hat: float,
                dbeta_hat: float, gains: ObserverGains) -> np.ndarray:
    """Analytic time derivative of the adaptive correction term.

    Matches upsilon() exactly along trajectories, including the series branch
    used below the singularity guard.
    """
    s = float(y_tilde @ y_tilde)
    out = gains.Upsilon @ y_tilde_dot
    if s >= gains.eps_sing ** 2:
        th = math.tanh(s / gains.rho1)
        th2 = th * th
        dots = 2.0 * float(y_tilde_dot @ y_tilde)
        theta1 = (2.0 / gains.rho1) * s * th * (1.0 - th2) * dots
        theta2 = th2 * dots
        psi = (theta1 - theta2) / (s * s)
        out = out + (dbeta_hat * th2 / s) * y_tilde + (beta_hat * th2 / s) * y_tilde_dot \
            + (beta_hat * psi) * y_tilde
    else:
        r2 = gains.rho1 ** 2
        out = out + (beta_hat / r2) * (s * y_tilde_dot + 2.0 * float(y_tilde @ y_tilde_dot) * y_tilde) \
            + (dbeta_hat / r2) * s * y_tilde
    return out


def control_law(model: ManipulatorModel, cfg: ControllerConfig, tr: TransformState,
                eta: np.ndarray, eta_dot: np.ndarray, sigma: np.ndarray,
                x1_hat: np.ndarray, x2_hat: np.ndarray,
                correction: np.ndarray, ydd_ref: np.ndarray) -> np.ndarray:
    """Torque command of the fault-tolerant tracking law.

    ``correction`` is the observer feedforward (see observer_feedforward);
    on the sliding surface with zero errors everything but gravity
    compensation vanishes.
    """
    for name, v in (("x1_hat", x1_hat), ("x2_hat", x2_hat), ("sigma", sigma),
                    ("correction", correction)):
        if not np.isfinite(v).all():
            raise FloatingPointError(f"control law input {name} contains non-finite entries")
    t = dynamics_terms(model, JointState(x1_hat, x2_hat))
    gdz = g_dot_bar(tr.z, tr.zdot, cfg.g, cfg.eps_g)
    gde = g_dot_bar(eta, eta_dot, cfg.g, cfg.eps_g)
    reach = tr.R + gdz + gde + surface_power_terms(sigma, cfg.surface)
    return t.D @ x2_hat + t.G - t.M @ (correction - ydd_ref) - t.M @ (reach / tr.r)


def baseline_control_law(model: ManipulatorModel, cfg: ControllerConfig,
                         e: np.ndarray, edot: np.ndarray, sigma: np.ndarray,
                         x1_meas: np.ndarray, x2_meas: np.ndarray,
                         ydd_ref: np.ndarray) -> np.ndarray:
    """Comparison law for the first-order surface fed by raw measurements.

    No funnel transform and no observer corrections: dynamics terms are
    evaluated at the measured state, so a sensor fault biases the loop.
    """
    t = dynamics_terms(model, JointState(x1_meas, x2_meas))
    reach = g_dot_bar(e, edot, cfg.g, cfg.eps_g) + surface_power_terms(sigma, cfg.surface)
    return t.D @ x2_meas + t.G + t.M @ (ydd_ref - reach)


def settling_time_bound(p: GFuncParams) -> float:
    """Settling-time bound of d(chi)/dt = -g(chi); independent of chi(0)."""
    far = p.q_lo / (p.lam_lo * (p.p_lo - p.q_lo))
    near = (p.q_hi / (p.q_hi - p.p_hi)) * (1.0 / p.lam_lo) * math.log(1.0 + p.lam_lo / p.lam_hi)
    return far + near


def surface_settling_bound(s: SurfaceGains, n: int) -> float:
    """Fixed-time bound on sigma reaching zero under the reaching law.

    Uses the energy inequality dV <= -a V^th1 - b V^th2 with th1 > 1 > th2
    derived from the two fractional powers (the linear -k1 term only speeds
    this up, so the bound is conservative).
    """
    th_lo = (s.p_lo + s.q_lo) / (2.0 * s.q_lo)           # > 1
    th_hi = (s.p_hi + s.q_hi) / (2.0 * s.q_hi)           # < 1
    a_lo = s.c_lo * 2.0 ** th_lo * n ** ((s.q_lo - s.p_lo) / (2.0 * s.q_lo))
    a_hi = s.c_hi * 2.0 ** th_hi
    return 1.0 / (a_lo * (th_lo - 1.0)) + 1.0 / (a_hi * (1.0 - th_hi))
