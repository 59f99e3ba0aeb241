"""Prescribed performance funnel and hyperbolic error transform.

The funnel mu(t) = (mu0 - mu_inf) exp(-decay t) + mu_inf bounds |e_i(t)|
for all time.  The transform z = atanh(e / mu) converts funnel containment
into boundedness of z; the controller consumes z together with the diagonal
scaling matrices r, s and their rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["FunnelParams", "FunnelViolation", "TransformState",
           "mu", "transform_z", "transform_derivatives"]


class FunnelViolation(RuntimeError):
    """Tracking error reached the funnel boundary; carries joint and time."""

    def __init__(self, joint: int, t: float | None, error: float, bound: float):
        self.joint = joint
        self.t = t
        self.error = error
        self.bound = bound
        at = f" at t={t:.6g}s" if t is not None else ""
        super().__init__(
            f"funnel violation on joint {joint}{at}: |e|={abs(error):.6g} >= mu={bound:.6g}")


@dataclass(frozen=True)
class FunnelParams:
    """Initial radius mu0 (rad), asymptotic radius mu_inf (rad), decay rate (1/s)."""

    mu0: float
    mu_inf: float
    decay: float

    def __post_init__(self):
        if not (self.mu0 > self.mu_inf > 0.0):
            raise ValueError(f"need mu0 > mu_inf > 0, got mu0={self.mu0}, mu_inf={self.mu_inf}")
        if not self.decay > 0.0:
            raise ValueError(f"decay must be positive, got {self.decay}")


def mu(t: float, p: FunnelParams):
    """Funnel radius and its first two time derivatives at time t."""
    ex = math.exp(-p.decay * t)
    span = p.mu0 - p.mu_inf
    return (span * ex + p.mu_inf,
            -p.decay * span * ex,
            p.decay * p.decay * span * ex)


# Clamp applied to e/mu before atanh.  It only prevents non-finite
# intermediates in the step that raises FunnelViolation; the violation is
# detected on the unclamped ratio.
_OMEGA_CLAMP = 1.0 - 1e-9


def _mu_arrays(t: float, funnels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    vals = [mu(t, p) for p in funnels]
    return (np.array([v[0] for v in vals]),
            np.array([v[1] for v in vals]),
            np.array([v[2] for v in vals]))


def transform_z(e: np.ndarray, mu_val: np.ndarray, t: float | None = None) -> np.ndarray:
    """Elementwise atanh(e / mu).  Raises FunnelViolation when |e_i| >= mu_i."""
    e = np.asarray(e, dtype=float)
    mu_val = np.broadcast_to(np.asarray(mu_val, dtype=float), e.shape)
    omega = e / mu_val
    bad = np.abs(omega) >= 1.0
    if bad.any():
        j = int(np.argmax(bad))
        raise FunnelViolation(joint=j, t=t, error=float(e[j]), bound=float(mu_val[j]))
    return np.arctanh(np.clip(omega, -_OMEGA_CLAMP, _OMEGA_CLAMP))


@dataclass(frozen=True)
class TransformState:
    """Transformed error with everything the control law needs.

    The diagonal matrices r, s and their rates are stored as vectors of
    diagonal entries.  By construction d^2z/dt^2 = R + r * edd.
    """

    omega: np.ndarray
    z: np.ndarray
    zdot: np.ndarray
    r: np.ndarray
    rdot: np.ndarray
    s: np.ndarray
    sdot: np.ndarray
    R: np.ndarray
    mu: np.ndarray
    mudot: np.ndarray


def transform_derivatives(e: np.ndarray, edot: np.ndarray, funnels, t: float) -> TransformState:
    """Evaluate z, dz/dt and the scaling terms at time t.

    ``funnels`` is a sequence of per-joint FunnelParams (commonly n copies of
    one shared parameter set).
    """
    e = np.asarray(e, dtype=float)
    edot = np.asarray(edot, dtype=float)
    m_, md, mdd = _mu_arrays(t, funnels)
    z = transform_z(e, m_, t)
    omega = np.clip(e / m_, -_OMEGA_CLAMP, _OMEGA_CLAMP)

    one = 1.0 - omega * omega
    r = 1.0 / (m_ * one)
    s = md / m_
    ew = edot - s * e
    omega_dot = ew / m_
    sdot = (mdd * m_ - md * md) / (m_ * m_)
    rdot = (-md * one + 2.0 * m_ * omega * omega_dot) / (m_ * one) ** 2
    zdot = r * ew
    R = rdot * ew - r * (sdot * e + s * edot)
    return TransformState(omega=omega, z=z, zdot=zdot, r=r, rdot=rdot,
                          s=s, sdot=sdot, R=R, mu=m_, mudot=md)
