"""Rigid-body dynamics for the shipped manipulator models.

All models expose the standard form

    M(q) qdd + D(q, qd) qd + G(q) = tau

through closed-form inertia/Coriolis/gravity terms.  Three models are
provided: a 3-DOF solar-tracker base (closed form with calibrated default
parameters), a generic planar two-link arm (user-supplied parameters), and
a constant-inertia diagnostic model used by integrator sanity tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "JointState",
    "DynamicsTerms",
    "SolarTrackerParams",
    "TwoLinkParams",
    "ConstantInertiaParams",
    "SolarTracker",
    "TwoLink",
    "ConstantInertia",
    "ManipulatorModel",
    "InertiaConditioningError",
    "dynamics_terms",
    "forward_dynamics",
    "plant_rhs",
    "gravity_norm_bound",
    "make_model",
]


class InertiaConditioningError(ValueError):
    """Raised when M(q) is numerically singular or ill-conditioned."""


@dataclass(frozen=True)
class JointState:
    """Joint positions (rad) and velocities (rad/s), each of length n."""

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        qd = np.asarray(self.qd, dtype=float)
        if q.ndim != 1 or qd.shape != q.shape:
            raise ValueError(f"q and qd must be 1-D with equal length, got {q.shape} and {qd.shape}")
        if not (np.isfinite(q).all() and np.isfinite(qd).all()):
            raise ValueError("joint state contains non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class DynamicsTerms:
    """Inertia matrix M (n x n), Coriolis/centrifugal matrix D, gravity vector G."""

    M: np.ndarray
    D: np.ndarray
    G: np.ndarray


def _check_positive(obj, names):
    for name in names:
        if not getattr(obj, name) > 0.0:
            raise ValueError(f"{type(obj).__name__}.{name} must be strictly positive")
    for f in fields(obj):
        if not math.isfinite(getattr(obj, f.name)):
            raise ValueError(f"{type(obj).__name__}.{f.name} is not finite")


@dataclass(frozen=True)
class SolarTrackerParams:
    """Physical parameters of the 3-DOF solar-tracker base.

    Defaults are the calibrated values of the physical unit.  Masses in kg,
    lengths in m, inertias in kg m^2, gravity in m/s^2.
    """

    m1: float = 27.387
    m2: float = 15.843
    m3: float = 40.53
    l1: float = 0.07
    l2: float = 0.085
    l3: float = 0.326
    L1: float = 0.410
    L2: float = 0.170
    L3: float = 0.5
    Ix1: float = 0.285
    Ix2: float = 0.254
    Ix3: float = 2.161
    Iy1: float = 0.458
    Iy2: float = 0.254
    Iy3: float = 1.949
    Iz1: float = 0.427
    Iz2: float = 0.229
    Iz3: float = 3.341
    gravity: float = 9.807

    def __post_init__(self):
        _check_positive(self, ["m1", "m2", "m3", "l1", "l2", "l3", "L1", "L2", "L3"])


@dataclass(frozen=True)
class TwoLinkParams:
    """Planar two-link arm: masses, link lengths, COM distances, inertias.

    No published calibration is bundled for this arm; the defaults are a
    generic 1 kg / 1 m textbook arm and are meant to be overridden.
    """

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    lc1: float = 0.5
    lc2: float = 0.5
    I1: float = 0.1
    I2: float = 0.1
    gravity: float = 9.81

    def __post_init__(self):
        _check_positive(self, ["m1", "m2", "l1", "l2", "lc1", "lc2", "I1", "I2"])


@dataclass(frozen=True)
class ConstantInertiaParams:
    """Decoupled diagnostic model: constant diagonal M, D = 0, G = 0."""

    inertia: tuple = (1.0, 1.0)

    def __post_init__(self):
        if any(not (v > 0 and math.isfinite(v)) for v in self.inertia):
            raise ValueError("inertia entries must be finite and strictly positive")
        object.__setattr__(self, "inertia", tuple(float(v) for v in self.inertia))


class ManipulatorModel:
    """Base class: concrete models implement ``terms(q, qd) -> (M, D, G)``."""

    n: int = 0

    def terms(self, q: np.ndarray, qd: np.ndarray):
        raise NotImplementedError


class SolarTracker(ManipulatorModel):
    """3-DOF solar-tracker base with closed-form M, D, G."""

    n = 3

    def __init__(self, params: SolarTrackerParams | None = None):
        self.params = params or SolarTrackerParams()

    def terms(self, q, qd):
        p = self.params
        m2, m3 = p.m2, p.m3
        l2, l3, L2 = p.l2, p.l3, p.L2
        Ix2, Ix3 = p.Ix2, p.Ix3
        Iy2, Iy3 = p.Iy2, p.Iy3
        Iz1, Iz2, Iz3 = p.Iz1, p.Iz2, p.Iz3

        s2, c2 = math.sin(q[1]), math.cos(q[1])
        s3, c3 = math.sin(q[2]), math.cos(q[2])
        q1d, q2d, q3d = qd[0], qd[1], qd[2]

        # recurring subexpressions; sharing them keeps M exactly symmetric
        e3 = c3 * l3 + L2
        k22 = m2 * l2 * l2 + m3 * e3 * e3
        kxz = Ix3 - Iz3

        m11 = (s2 * s2 * (k22 + Iy2 + Iy3) + m3 * s3 * s3 * l3 * l3 + Iz1
               + c2 * c2 * (Iz2 + s3 * s3 * Ix3 + c3 * c3 * Iz3))
        m12 = s3 * c2 * (c3 * kxz - m3 * l3 * e3)
        m13 = s2 * (m3 * l3 * (l3 + c3 * L2) - Iy3)
        m22 = k22 + Ix2 + c3 * c3 * Ix3 + s3 * s3 * Iz3
        m33 = m3 * l3 * l3 + Iy3
        M = np.array([[m11, m12, m13], [m12, m22, 0.0], [m13, 0.0, m33]])

        a_ = s3 * c3 * (m3 * l3 * l3 + c2 * c2 * kxz) - s2 * s2 * (m3 * s3 * l3 * e3)
        b_ = s2 * c2 * (k22 + Iy2 + Iy3 - Iz2 - s3 * s3 * Ix3 - c3 * c3 * Iz3)
        c_ = c2 * (m3 * s3 * s3 * l3 * l3 + c3 * c3 * kxz + 0.5 * (Iz3 - Iy3 - Ix3))
        e_ = c2 * (c3 * c3 * kxz - m3 * c3 * l3 * e3 + 0.5 * (Iy3 + Iz3 - Ix3))
        f_ = s3 * (c3 * (Iz3 - Ix3) - m3 * l3 * e3)

        d11 = a_ * q3d + b_ * q2d
        d12 = b_ * q1d - s2 * s3 * (c3 * kxz - m3 * l3 * e3) * q2d + c_ * q3d
        d13 = a_ * q1d + c_ * q2d - m3 * s2 * s3 * l3 * L2 * q3d
        d21 = -b_ * q1d + e_ * q3d
        d22 = f_ * q3d
        d23 = e_ * q1d + f_ * q2d
        d31 = -a_ * q1d - e_ * q2d
        d32 = -e_ * q1d + s3 * (m3 * l3 * e3 - c3 * (Iz3 - Ix3)) * q2d
        D = np.array([[d11, d12, d13], [d21, d22, d23], [d31, d32, 0.0]])

        G = -p.gravity * np.array([0.0, s2 * (m2 * l2 + m3 * e3), m3 * l3 * s3 * c2])
        return M, D, G


class TwoLink(ManipulatorModel):
    """Planar two-link arm, Christoffel-consistent Coriolis matrix."""

    n = 2

    def __init__(self, params: TwoLinkParams | None = None):
        self.params = params or TwoLinkParams()

    def terms(self, q, qd):
        p = self.params
        m1, m2 = p.m1, p.m2
        l1, lc1, lc2 = p.l1, p.lc1, p.lc2
        I1, I2 = p.I1, p.I2
        g = p.gravity

        c1 = math.cos(q[0])
        s2, c2 = math.sin(q[1]), math.cos(q[1])
        c12 = math.cos(q[0] + q[1])
        q1d, q2d = qd[0], qd[1]

        m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + I1 + I2
        m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + I2
        m22 = m2 * lc2 * lc2 + I2
        M = np.array([[m11, m12], [m12, m22]])

        h = -m2 * l1 * lc2 * s2
        D = np.array([[h * q2d, h * (q1d + q2d)], [-h * q1d, 0.0]])

        G = np.array([(m1 * lc1 + m2 * l1) * g * c1 + m2 * lc2 * g * c12,
                      m2 * lc2 * g * c12])
        return M, D, G


class ConstantInertia(ManipulatorModel):
    """Constant diagonal inertia, no Coriolis or gravity forces."""

    def __init__(self, params: ConstantInertiaParams | None = None):
        self.params = params or ConstantInertiaParams()
        self.n = len(self.params.inertia)

    def terms(self, q, qd):
        n = self.n
        M = np.diag(self.params.inertia)
        return M, np.zeros((n, n)), np.zeros(n)


def dynamics_terms(model: ManipulatorModel, state: JointState) -> DynamicsTerms:
    """Evaluate M, D, G at the given joint state."""
    if state.n != model.n:
        raise ValueError(f"state dimension {state.n} does not match model dimension {model.n}")
    M, D, G = model.terms(state.q, state.qd)
    return DynamicsTerms(M=M, D=D, G=G)


def forward_dynamics(model: ManipulatorModel, state: JointState, tau: np.ndarray,
                     cond_cap: float = 1e12) -> np.ndarray:
    """Joint accelerations qdd = M^{-1}(tau - D qd - G), via a linear solve.

    Raises InertiaConditioningError if M(q) is not SPD or its condition
    number exceeds ``cond_cap``.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (model.n,):
        raise ValueError(f"tau must have shape ({model.n},), got {tau.shape}")
    t = dynamics_terms(model, state)
    eigs = np.linalg.eigvalsh(t.M)
    if eigs[0] <= 0.0:
        raise InertiaConditioningError(f"inertia matrix not positive definite at q={state.q}")
    if eigs[-1] / eigs[0] > cond_cap:
        raise InertiaConditioningError(
            f"inertia matrix condition number {eigs[-1] / eigs[0]:.3e} exceeds cap {cond_cap:.3e}")
    c, low = _cho_factor(t.M)
    return _cho_solve(c, tau - t.D @ state.qd - t.G)


def _cho_factor(M):
    # SPD factorization; numpy's cholesky raises LinAlgError on failure
    return np.linalg.cholesky(M), True


def _cho_solve(c, b):
    y = np.linalg.solve(c, b)
    return np.linalg.solve(c.T, y)


def plant_rhs(model: ManipulatorModel, state: JointState, tau: np.ndarray) -> np.ndarray:
    """State derivative of x = (q, qd): (qd, forward_dynamics)."""
    qdd = forward_dynamics(model, state, tau)
    return np.concatenate([state.qd, qdd])


def gravity_norm_bound(params: SolarTrackerParams) -> float:
    """Triangle bound on ||G(q)|| valid for every q of the solar tracker."""
    p = params
    return p.gravity * (p.m2 * p.l2 + p.m3 * (p.l3 + p.L2) + p.m3 * p.l3)


_MODEL_KINDS = {
    "solar_tracker": (SolarTracker, SolarTrackerParams),
    "two_link": (TwoLink, TwoLinkParams),
    "constant_inertia": (ConstantInertia, ConstantInertiaParams),
}


def make_model(kind: str, params: dict | None = None) -> ManipulatorModel:
    """Build a model by config name, applying parameter overrides."""
    if kind not in _MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(_MODEL_KINDS)}")
    cls, pcls = _MODEL_KINDS[kind]
    params = dict(params or {})
    if kind == "constant_inertia" and "inertia" in params:
        params["inertia"] = tuple(params["inertia"])
    return cls(pcls(**params))
