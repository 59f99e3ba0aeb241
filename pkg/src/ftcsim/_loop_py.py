"""Pure-Python integration loop (reference backend).

Composes the public module functions into the closed-loop right-hand side
and integrates with fixed-step RK4.  The compiled backend in ``_core``
mirrors this file statement-for-statement; keep the two in sync.
"""

from __future__ import annotations

import math

import numpy as np

from . import controller as ctl
from . import funnel as fn
from . import observer as obs
from .faults import apply_actuator_fault, apply_sensor_fault
from .funnel import FunnelViolation
from .manipulator import JointState, dynamics_terms


def _solve_spd(M, b):
    c = np.linalg.cholesky(M)
    return np.linalg.solve(c.T, np.linalg.solve(c, b))


def run_loop(sc):
    """Integrate the scenario; returns (data, status, fail_time, fail_joint, message)."""
    n, m = sc.n, sc.m
    aug, gains, cfg = sc.aug, sc.obs_gains, sc.controller
    model = sc.model
    gp, sp_ = cfg.g, cfg.surface
    baseline = cfg.mode == "first_order_raw"
    L1, L2, L3 = gains.L_blocks()
    Lam1, Lam2, Lam3 = gains.Lambda_blocks()

    i_x1 = slice(0, n)
    i_x2 = slice(n, 2 * n)
    i_xv = slice(2 * n, 3 * n)
    i_xh = slice(3 * n, 6 * n)
    i_pi = slice(6 * n, 6 * n + m)
    i_bh = 6 * n + m
    i_ac = slice(6 * n + m + 1, 7 * n + m + 1)

    def rhs(t, y, diag=None):
        x1 = y[i_x1]
        x2 = y[i_x2]
        x_v = y[i_xv]
        x_hat = y[i_xh]
        pi_hat = y[i_pi]
        beta_hat = y[i_bh]
        accum = y[i_ac]
        x1h, x2h, xvh = x_hat[:n], x_hat[n:2 * n], x_hat[2 * n:]

        y_f = apply_sensor_fault(x1, sc.sensor_fault, t)
        state = obs.ObserverState(x_hat_a=x_hat, pi_hat=pi_hat, beta_hat=beta_hat, x_v=x_v)
        y_tilde = x_v - xvh
        est = obs.fault_estimate(state, gains, aug)
        ups = obs.upsilon(y_tilde, beta_hat, gains)
        s2 = float(y_tilde @ y_tilde)
        th = math.tanh(s2 / gains.rho1)
        dbeta = 2.0 * th * th - gains.rho2 * beta_hat

        yd, yd_dot, yd_ddot = sc.reference.eval(t)

        if baseline:
            e = y_f - yd
            e_dot = x2 - yd_dot
            z, zdot = e, e_dot
            eta = np.zeros(n)
            sigma = ctl.baseline_first_order(z, zdot, gp)
            u = ctl.baseline_control_law(model, cfg, e, e_dot, sigma, y_f, x2, yd_ddot)
            mu_now = np.array([fn.mu(t, p)[0] for p in sc.funnels])
        else:
            e = x1h - yd
            e_dot = x2h + L1 @ y_tilde + Lam1 @ ups - yd_dot
            tr = fn.transform_derivatives(e, e_dot, sc.funnels, t)
            z, zdot = tr.z, tr.zdot
            eta = z + accum
            gz = ctl.g_bar(z, gp)
            sigma = zdot + gz + ctl.g_bar(eta, gp)
            eta_dot = zdot + gz
            y_tilde_dot = obs.output_error_rate(state, y_f, aug, gains)
            ups_dot = ctl.upsilon_dot(y_tilde, y_tilde_dot, beta_hat, dbeta, gains)
            corr = obs.observer_feedforward(gains, y_tilde, y_tilde_dot, ups, ups_dot)
            u = ctl.control_law(model, cfg, tr, eta, eta_dot, sigma, x1h, x2h, corr, yd_ddot)
            mu_now = tr.mu

        tau = apply_actuator_fault(u, sc.actuator_fault, t)
        t_true = dynamics_terms(model, JointState(x1, x2))
        x2_dot = _solve_spd(t_true.M, tau - t_true.D @ x2 - t_true.G)
        dx_v = obs.virtual_filter_rhs(x_v, y_f, aug.A_v)

        t_hat = dynamics_terms(model, JointState(x1h, x2h))
        H = _solve_spd(t_hat.M, u - t_hat.D @ x2h - t_hat.G)
        core = aug.A_a @ x_hat + aug.E_a @ est.f_hat
        core[n:2 * n] += H
        dx_hat = core + gains.L @ y_tilde + gains.Lambda @ ups
        dpi = -gains.Gamma @ (aug.E.T @ core[2 * n:])

        dy = np.empty_like(y)
        dy[i_x1] = x2
        dy[i_x2] = x2_dot
        dy[i_xv] = dx_v
        dy[i_xh] = dx_hat
        dy[i_pi] = dpi
        dy[i_bh] = dbeta
        dy[i_ac] = ctl.g_bar(z, gp) if baseline else gz

        if diag is not None:
            f_now = sc.sensor_fault.eval(t)
            x_tilde = np.concatenate([x1 - x1h, x2 - x2h, x_v - xvh])
            diag.update(yf=y_f, e=e, mu=mu_now, z=z, eta=eta, sigma=sigma, u=u,
                        f=f_now, fhat=est.f_hat, yd=yd,
                        V2=0.5 * float(sigma @ sigma),
                        xtn=float(np.linalg.norm(x_tilde)))
        return dy

    h = sc.step
    n_steps = sc.n_steps
    cols = 14 * n + 3 * m + 4
    data = np.zeros((n_steps + 1, cols))
    y = sc.initial_state()
    t = 0.0
    status, fail_time, fail_joint, message = "ok", None, None, None
    rows = 0
    for k in range(n_steps + 1):
        diag = {}
        try:
            k1 = rhs(t, y, diag)
        except FunnelViolation as exc:
            status, fail_time, fail_joint, message = "funnel_violation", t, exc.joint, str(exc)
            break
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            status, fail_time, message = "non_finite", t, str(exc)
            break
        row = data[k]
        row[0] = t
        o = 1
        for v in (y[i_x1], y[i_x2], diag["yf"], y[i_xv], y[i_xh][:n],
                  y[i_xh][n:2 * n], y[i_xh][2 * n:], diag["e"], diag["mu"],
                  diag["z"], diag["eta"], diag["sigma"], diag["u"],
                  diag["f"], diag["fhat"], y[i_pi]):
            row[o:o + len(v)] = v
            o += len(v)
        row[o] = y[i_bh]
        row[o + 1] = diag["V2"]
        row[o + 2] = diag["xtn"]
        row[o + 3:o + 3 + n] = diag["yd"]
        rows = k + 1
        if k == n_steps:
            break
        try:
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
        except FunnelViolation as exc:
            status, fail_time, fail_joint, message = "funnel_violation", exc.t, exc.joint, str(exc)
            break
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            status, fail_time, message = "non_finite", t, str(exc)
            break
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(y).all():
            status, fail_time, message = "non_finite", t + h, "state diverged to non-finite values"
            break
        t = (k + 1) * h
    return data[:rows], status, fail_time, fail_joint, message
