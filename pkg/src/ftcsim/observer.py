"""Adaptive observer for sensor-fault estimation.

A stable first-order filter driven by the faulty measurement recasts the
sensor fault as an actuator-channel fault of an augmented 3n-state system.
The observer estimates the augmented state together with the fault value
(through the adaptive vector pi_hat) and a fault-derivative bound proxy
(the adaptive scalar beta_hat), so no bound on the fault or its rate needs
to be known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .manipulator import JointState, ManipulatorModel, dynamics_terms

__all__ = [
    "AugmentedSystem",
    "ObserverGains",
    "ObserverState",
    "ObserverDerivatives",
    "FaultEstimate",
    "GainConditionReport",
    "build_augmented",
    "virtual_filter_rhs",
    "upsilon",
    "fault_estimate",
    "observer_rhs",
    "output_error_rate",
    "observer_feedforward",
    "validate_gain_conditions",
    "decay_rate",
    "disturbance_level",
    "ultimate_bound",
    "estimate_lipschitz",
]

#: |a| >= TANH_GATE * b  implies  1 - 2 tanh^2(a/b) <= 0
TANH_GATE = 0.8814


@dataclass(frozen=True)
class AugmentedSystem:
    """Block matrices of the plant + virtual-actuator augmentation."""

    A_a: np.ndarray   # 3n x 3n
    E_a: np.ndarray   # 3n x m
    C_a: np.ndarray   # n x 3n
    A_v: np.ndarray   # n x n
    E: np.ndarray     # n x m
    n: int
    m: int


def _observability_rank(A_a: np.ndarray, C_a: np.ndarray) -> int:
    """Numeric rank of the observability matrix.

    Each block row C_a A_a^k is normalized before the rank computation;
    otherwise high powers of A_a (entries ~ |A_v|^k) drown the tolerance.
    """
    blocks = []
    B = C_a.copy()
    for _ in range(A_a.shape[0] // C_a.shape[0]):
        scale = np.abs(B).max()
        blocks.append(B / scale if scale > 0 else B)
        B = B @ A_a
    return int(np.linalg.matrix_rank(np.vstack(blocks)))


def build_augmented(A_v: np.ndarray, E: np.ndarray) -> AugmentedSystem:
    """Assemble the augmented system for a filter matrix A_v and fault map E.

    Requires -A_v Hurwitz (so the filter is stable) and the augmented pair
    (A_a, C_a) observable.
    """
    A_v = np.atleast_2d(np.asarray(A_v, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    n = A_v.shape[0]
    if A_v.shape != (n, n):
        raise ValueError(f"A_v must be square, got {A_v.shape}")
    if E.shape[0] != n:
        raise ValueError(f"E must have {n} rows, got {E.shape}")
    m = E.shape[1]

    eigs = np.linalg.eigvals(A_v)
    if not np.all(eigs.real > 0.0):
        raise ValueError(f"-A_v must be Hurwitz (eigenvalues of A_v in the open right half plane), got {eigs}")

    Z = np.zeros((n, n))
    A = np.block([[Z, np.eye(n)], [Z, Z]])
    C = np.hstack([np.eye(n), Z])
    A_a = np.block([[A, np.zeros((2 * n, n))], [A_v @ C, -A_v]])
    E_a = np.vstack([np.zeros((2 * n, m)), A_v @ E])
    C_a = np.hstack([np.zeros((n, 2 * n)), np.eye(n)])

    rank = _observability_rank(A_a, C_a)
    if rank < 3 * n:
        raise ValueError(f"augmented pair is unobservable: observability rank {rank} < {3 * n}")
    return AugmentedSystem(A_a=A_a, E_a=E_a, C_a=C_a, A_v=A_v, E=E, n=n, m=m)


def _as_spd(name: str, X, size: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = float(X) * np.eye(size)
    X = np.atleast_2d(X)
    if X.shape != (size, size):
        raise ValueError(f"{name} must be {size}x{size}, got {X.shape}")
    if np.abs(X - X.T).max() > 1e-8 * max(1.0, np.abs(X).max()):
        raise ValueError(f"{name} must be symmetric")
    X = 0.5 * (X + X.T)
    if np.linalg.eigvalsh(X)[0] <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    return X


@dataclass
class ObserverGains:
    """Observer design parameters.

    L (3n x n) and P (3n x 3n, SPD) come from an offline synthesis and are
    validated, not derived, here.  Lambda is not free: it solves
    P Lambda = C_a^T.  kappa (Lipschitz constant of the plant nonlinearity)
    and the analysis constants c1, c2 are only needed by the gain-condition
    report.
    """

    L: np.ndarray
    P: np.ndarray
    Gamma: np.ndarray
    gamma: np.ndarray
    Upsilon: np.ndarray
    rho1: float
    rho2: float
    kappa: float | None = None
    c1: float = 1.0
    c2: float = 1.0
    eps_sing: float = 1e-8
    d_hat_source: str = "filter_measurement"
    n: int = 0
    m: int = 0
    Lambda: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.L = np.atleast_2d(np.asarray(self.L, dtype=float))
        if self.L.shape[0] % 3 != 0:
            raise ValueError(f"L must have 3n rows, got {self.L.shape}")
        self.n = self.L.shape[0] // 3
        if self.L.shape[1] != self.n:
            raise ValueError(f"L must be 3n x n, got {self.L.shape}")
        if self.m <= 0:
            self.m = self.n
        self.P = _as_spd("P", self.P, 3 * self.n)
        self.Gamma = _as_spd("Gamma", self.Gamma, self.m)
        self.gamma = _as_spd("gamma", self.gamma, self.m)
        self.Upsilon = _as_spd("Upsilon", self.Upsilon, self.n)
        if not self.rho1 > 0 or not self.rho2 > 0:
            raise ValueError("rho1 and rho2 must be positive")
        if self.d_hat_source not in ("filter_measurement", "filter_estimate"):
            raise ValueError(f"d_hat_source must be 'filter_measurement' or 'filter_estimate', "
                             f"got {self.d_hat_source!r}")
        C_aT = np.vstack([np.zeros((2 * self.n, self.n)), np.eye(self.n)])
        self.Lambda = np.linalg.solve(self.P, C_aT)

    # n x n blocks of L and Lambda used by the control law
    def L_blocks(self):
        n = self.n
        return self.L[:n], self.L[n:2 * n], self.L[2 * n:]

    def Lambda_blocks(self):
        n = self.n
        return self.Lambda[:n], self.Lambda[n:2 * n], self.Lambda[2 * n:]


@dataclass
class ObserverState:
    """Augmented estimate, adaptive terms, and plant-side filter state."""

    x_hat_a: np.ndarray   # (3n,) = (x1_hat, x2_hat, xv_hat)
    pi_hat: np.ndarray    # (m,)
    beta_hat: float
    x_v: np.ndarray       # (n,) virtual-actuator filter state

    @classmethod
    def zeros(cls, n: int, m: int) -> "ObserverState":
        return cls(np.zeros(3 * n), np.zeros(m), 0.0, np.zeros(n))

    def blocks(self):
        n = self.x_v.shape[0]
        return self.x_hat_a[:n], self.x_hat_a[n:2 * n], self.x_hat_a[2 * n:]


@dataclass(frozen=True)
class ObserverDerivatives:
    dx_hat_a: np.ndarray
    dpi_hat: np.ndarray
    dbeta_hat: float
    dx_v: np.ndarray


@dataclass(frozen=True)
class FaultEstimate:
    d_hat: np.ndarray
    f_hat: np.ndarray
    y_tilde: np.ndarray


def virtual_filter_rhs(x_v: np.ndarray, y_f: np.ndarray, A_v: np.ndarray) -> np.ndarray:
    """Filter dynamics dx_v/dt = -A_v x_v + A_v y_f."""
    return -A_v @ x_v + A_v @ y_f


def upsilon(y_tilde: np.ndarray, beta_hat: float, gains: ObserverGains) -> np.ndarray:
    """Adaptive output-error correction term.

    For ||y_tilde|| below eps_sing the 0/0 factor is replaced by its series
    value (beta_hat / rho1^2) ||y_tilde||^2 y_tilde, which tends to the same
    limit (zero) and keeps the expression smooth.
    """
    s = float(y_tilde @ y_tilde)
    out = gains.Upsilon @ y_tilde
    if s >= gains.eps_sing ** 2:
        th = math.tanh(s / gains.rho1)
        out = out + (beta_hat * th * th / s) * y_tilde
    else:
        out = out + (beta_hat / gains.rho1 ** 2) * s * y_tilde
    return out


def fault_estimate(state: ObserverState, gains: ObserverGains, aug: AugmentedSystem) -> FaultEstimate:
    """d_hat = pi_hat + Gamma E^T (filter output) and f_hat = gamma d_hat.

    The filter output is the measured filter state x_v by default: the filter
    is constructed by the designer, so its state is available, and feeding it
    back directly gives the fault estimator its full bandwidth.  Setting
    ``gains.d_hat_source = "filter_estimate"`` uses the observer's own xv_hat
    instead, which routes the update through the output-error corrections
    only (much slower for the bundled gain sets).
    """
    xv_hat = state.x_hat_a[2 * aug.n:]
    src = state.x_v if gains.d_hat_source == "filter_measurement" else xv_hat
    d_hat = state.pi_hat + gains.Gamma @ (aug.E.T @ src)
    return FaultEstimate(d_hat=d_hat, f_hat=gains.gamma @ d_hat, y_tilde=state.x_v - xv_hat)


def _nonlinearity(model: ManipulatorModel, q, qd, u):
    t = dynamics_terms(model, JointState(q, qd))
    c = np.linalg.cholesky(t.M)
    return np.linalg.solve(c.T, np.linalg.solve(c, u - t.D @ qd - t.G))


def observer_rhs(state: ObserverState, y_f: np.ndarray, u: np.ndarray,
                 aug: AugmentedSystem, gains: ObserverGains,
                 model: ManipulatorModel) -> ObserverDerivatives:
    """Time derivatives of the full observer state.

    The plant nonlinearity is evaluated at the estimate, the correction uses
    the filter-output error y_tilde = x_v - xv_hat, and the two adaptation
    laws update pi_hat and beta_hat.
    """
    if not (np.isfinite(state.x_hat_a).all() and np.isfinite(state.x_v).all()
            and np.isfinite(state.pi_hat).all() and math.isfinite(state.beta_hat)):
        raise FloatingPointError("observer state contains non-finite entries")
    n = aug.n
    x1h, x2h, xvh = state.blocks()
    y_tilde = state.x_v - xvh
    est = fault_estimate(state, gains, aug)
    ups = upsilon(y_tilde, state.beta_hat, gains)

    H_a = np.zeros(3 * n)
    H_a[n:2 * n] = _nonlinearity(model, x1h, x2h, u)
    core = aug.A_a @ state.x_hat_a + H_a + aug.E_a @ est.f_hat
    dx_hat_a = core + gains.L @ y_tilde + gains.Lambda @ ups
    dpi_hat = -gains.Gamma @ (aug.E.T @ (aug.C_a @ core))

    s = float(y_tilde @ y_tilde)
    th = math.tanh(s / gains.rho1)
    dbeta_hat = 2.0 * th * th - gains.rho2 * state.beta_hat
    dx_v = virtual_filter_rhs(state.x_v, y_f, aug.A_v)
    return ObserverDerivatives(dx_hat_a, dpi_hat, dbeta_hat, dx_v)


def output_error_rate(state: ObserverState, y_f: np.ndarray, aug: AugmentedSystem,
                      gains: ObserverGains) -> np.ndarray:
    """d/dt of y_tilde along the flow: filter rate minus estimated-output rate."""
    n = aug.n
    x1h, _, xvh = state.blocks()
    y_tilde = state.x_v - xvh
    est = fault_estimate(state, gains, aug)
    ups = upsilon(y_tilde, state.beta_hat, gains)
    L3 = gains.L[2 * n:]
    Lam3 = gains.Lambda[2 * n:]
    y_dot = virtual_filter_rhs(state.x_v, y_f, aug.A_v)
    yhat_dot = aug.A_v @ x1h - aug.A_v @ xvh + aug.A_v @ (aug.E @ est.f_hat) + L3 @ y_tilde + Lam3 @ ups
    return y_dot - yhat_dot


def observer_feedforward(gains: ObserverGains, y_tilde, y_tilde_dot, ups, ups_dot) -> np.ndarray:
    """L2 y_tilde + L1 d(y_tilde)/dt + Lambda2 upsilon + Lambda1 d(upsilon)/dt."""
    L1, L2, _ = gains.L_blocks()
    Lam1, Lam2, _ = gains.Lambda_blocks()
    return L2 @ y_tilde + L1 @ y_tilde_dot + Lam2 @ ups + Lam1 @ ups_dot


@dataclass(frozen=True)
class GainConditionReport:
    Q1: np.ndarray
    Q2: np.ndarray
    min_eig_Q1: float
    min_eig_Q2: float
    Q1_positive: bool
    Q2_positive: bool
    lambda_residual: float

    @property
    def passed(self) -> bool:
        return self.Q1_positive and self.Q2_positive


def _sym(X):
    return 0.5 * (X + X.T)


def validate_gain_conditions(aug: AugmentedSystem, gains: ObserverGains) -> GainConditionReport:
    """Assemble the two sufficient-condition matrices and report their spectra.

    Scalar additive terms enter as multiples of the identity, and each matrix
    is symmetrized before the eigenvalue check (the positivity statement only
    concerns the symmetric part).  Requires gains.kappa.
    """
    if gains.kappa is None:
        raise ValueError("gain-condition report requires kappa (plant Lipschitz constant)")
    P, L = gains.P, gains.L
    c1, c2, kap = gains.c1, gains.c2, gains.kappa
    A_a, C_a, E_a, E = aug.A_a, aug.C_a, aug.E_a, aug.E
    n3 = 3 * aug.n
    I3n = np.eye(n3)
    Im = np.eye(aug.m)

    eps1 = C_a.T @ E @ gains.Gamma.T @ gains.gamma.T @ E_a.T
    eps2 = gains.gamma.T @ E_a.T
    eps3 = E.T @ C_a @ A_a
    eps4 = E.T @ C_a @ E_a @ gains.gamma @ gains.Gamma @ E.T @ C_a
    eps5 = E.T @ C_a

    Acl = A_a - L @ C_a
    Q1 = -_sym(Acl.T @ P + P @ Acl + P @ P.T + 4.0 * kap ** 2 * I3n
               + 3.0 * eps1 @ eps1.T + (c1 / 2.0 + c2 / 2.0) * I3n)
    Q2 = -_sym(-E.T @ C_a @ E_a + 3.0 * eps2 @ eps2.T + 0.5 * Im
               + eps3 @ eps3.T / (2.0 * c1) + eps4 @ eps4.T / (2.0 * c2)
               + 0.25 * eps5 @ eps5.T)

    e1 = float(np.linalg.eigvalsh(Q1)[0])
    e2 = float(np.linalg.eigvalsh(Q2)[0])
    resid = float(np.abs(P @ gains.Lambda - C_a.T).max())
    return GainConditionReport(Q1=Q1, Q2=Q2, min_eig_Q1=e1, min_eig_Q2=e2,
                               Q1_positive=e1 > 0.0, Q2_positive=e2 > 0.0,
                               lambda_residual=resid)


def decay_rate(report: GainConditionReport, gains: ObserverGains) -> float:
    """Error-energy decay rate: the slowest of the three contraction channels."""
    lam_p = float(np.linalg.eigvalsh(gains.P)[-1])
    lam_gi = float(np.linalg.eigvalsh(np.linalg.inv(gains.Gamma))[-1])
    return min(report.min_eig_Q1 / lam_p, 2.0 * report.min_eig_Q2 / lam_gi, gains.rho2)


def disturbance_level(beta: float, rho1: float, rho2: float, y_tilde_norm: float) -> float:
    """Residual forcing term of the error-energy inequality.

    Two branches split at ||y_tilde|| = 0.8814 rho1 (below it the squared-tanh
    gate no longer dominates and an extra beta appears).
    """
    base = 0.5 * rho2 * beta * beta
    if y_tilde_norm >= TANH_GATE * rho1:
        return base
    return base + beta


def ultimate_bound(V1_0: float, alpha: float, delta: float, P: np.ndarray) -> float:
    """Radius of the ultimate bound on the augmented estimation error."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if delta < 0.0:
        raise ValueError("delta must be non-negative")
    lam_min = float(np.linalg.eigvalsh(np.asarray(P, dtype=float))[0])
    if lam_min <= 0.0:
        raise ValueError("P must be positive definite")
    return math.sqrt(max(V1_0, delta / alpha) / lam_min)


def estimate_lipschitz(model: ManipulatorModel, q_box: float, qd_box: float, u_box: float,
                       samples: int = 200, seed: int = 0, fd_step: float = 1e-6) -> float:
    """Sampled estimate of the Lipschitz constant of the plant nonlinearity.

    Draws (q, qd, u) uniformly from the given boxes and returns the largest
    2-norm of the finite-difference Jacobian of H(x, u) with respect to x.
    """
    n = model.n
    rng = np.random.default_rng(seed)
    kappa = 0.0
    for _ in range(samples):
        q = rng.uniform(-q_box, q_box, n)
        qd = rng.uniform(-qd_box, qd_box, n)
        u = rng.uniform(-u_box, u_box, n)
        x = np.concatenate([q, qd])
        J = np.zeros((2 * n, 2 * n))
        for j in range(2 * n):
            xp = x.copy(); xp[j] += fd_step
            xm = x.copy(); xm[j] -= fd_step
            Hp = np.concatenate([np.zeros(n), _nonlinearity(model, xp[:n], xp[n:], u)])
            Hm = np.concatenate([np.zeros(n), _nonlinearity(model, xm[:n], xm[n:], u)])
            J[:, j] = (Hp - Hm) / (2.0 * fd_step)
        kappa = max(kappa, float(np.linalg.norm(J, 2)))
    return kappa
