"""Adapter between Scenario objects and the compiled integration kernel.

Flattens model parameters, gains, funnel/reference arrays, and fault
channels (composites expanded to primitives, noise sequences precomputed)
into the plain arrays ``ftcsim._core.run`` consumes.
"""

from __future__ import annotations

import math

import numpy as np

from . import _core
from .faults import FaultSignal
from .manipulator import ConstantInertia, SolarTracker, TwoLink

_KIND_CODE = {"step": 1, "ramp": 2, "sinusoid": 3, "tanh_step": 4, "noisy_offset": 5}

_STATUS = {0: "ok", 1: "funnel_violation", 2: "non_finite"}


def _model_args(model):
    if isinstance(model, TwoLink):
        p = model.params
        return 0, np.array([p.m1, p.m2, p.l1, p.lc1, p.lc2, p.I1, p.I2, p.gravity])
    if isinstance(model, SolarTracker):
        p = model.params
        return 1, np.array([p.m2, p.m3, p.l2, p.l3, p.L2, p.Ix2, p.Ix3,
                            p.Iy2, p.Iy3, p.Iz1, p.Iz2, p.Iz3, p.gravity])
    if isinstance(model, ConstantInertia):
        return 2, np.array(model.params.inertia, dtype=float)
    raise TypeError(f"compiled backend does not support model type {type(model).__name__}; "
                    "use backend='python'")


def _flatten(sig: FaultSignal, channel: int, out: list):
    if sig.kind == "composite":
        for mem in sig.members:
            _flatten(mem, channel, out)
    elif sig.kind != "zero":
        out.append((channel, sig))


def _fault_arrays(channels, horizon: float, noise_pool: dict):
    prims = []
    for ch, sig in enumerate(channels):
        _flatten(sig, ch, prims)
    count = len(prims)
    kind = np.zeros(count, dtype=np.intc)
    chan = np.zeros(count, dtype=np.intc)
    t0 = np.zeros(count)
    par = np.zeros((count, 4))
    noise_id = np.full(count, -1, dtype=np.intc)
    for i, (ch, sig) in enumerate(prims):
        kind[i] = _KIND_CODE[sig.kind]
        chan[i] = ch
        t0[i] = sig.onset
        if sig.kind == "step":
            par[i, 0] = sig.amplitude
        elif sig.kind == "ramp":
            par[i, 0] = sig.slope
        elif sig.kind == "sinusoid":
            par[i] = (sig.amplitude, sig.frequency, sig.phase, sig.time_ref)
        elif sig.kind == "tanh_step":
            par[i, 0], par[i, 1] = sig.amplitude, sig.width
        else:  # noisy_offset
            par[i, 0] = sig.amplitude
            count_needed = int(math.floor(max(horizon - sig.onset, 0.0) / sig.hold_dt + 1e-9)) + 2
            samples = np.array(sig.noise_samples(count_needed), dtype=float)
            noise_id[i] = len(noise_pool["start"])
            noise_pool["start"].append(len(noise_pool["data"]))
            noise_pool["len"].append(samples.shape[0])
            noise_pool["dt"].append(sig.hold_dt)
            noise_pool["t0"].append(sig.onset)
            noise_pool["data"].extend(samples.tolist())
    return kind, chan, t0, par, noise_id


def run_loop(sc):
    """Compiled counterpart of ftcsim._loop_py.run_loop (same contract)."""
    n, m = sc.n, sc.m
    gains, cfg = sc.obs_gains, sc.controller
    gp, sg = cfg.g, cfg.surface
    model_kind, model_params = _model_args(sc.model)

    scal = np.array([
        gains.rho1, gains.rho2, gains.eps_sing,
        gp.lam_lo, gp.lam_hi, gp.a, gp.b, float(gp.c),
        gp.exp_lo, gp.exp_hi, 0.5 + 0.5 * gp.exp_lo, cfg.eps_g,
        sg.k1, sg.c_lo, sg.c_hi, sg.exp_lo, sg.exp_hi,
    ])

    noise_pool = {"data": [], "start": [], "len": [], "dt": [], "t0": []}
    sf = _fault_arrays(sc.sensor_fault.channels, sc.horizon, noise_pool)
    af = _fault_arrays(sc.actuator_fault.channels, sc.horizon, noise_pool)
    noise_data = np.array(noise_pool["data"], dtype=float)
    noise_start = np.array(noise_pool["start"], dtype=np.int64)
    noise_len = np.array(noise_pool["len"], dtype=np.int64)
    noise_dt = np.array(noise_pool["dt"], dtype=float)
    noise_t0 = np.array(noise_pool["t0"], dtype=float)

    mu0 = np.array([p.mu0 for p in sc.funnels])
    muinf = np.array([p.mu_inf for p in sc.funnels])
    dec = np.array([p.decay for p in sc.funnels])

    n_steps = sc.n_steps
    out = np.zeros((n_steps + 1, 14 * n + 3 * m + 4))
    rows, code, fail_time, fail_joint = _core.run(
        n, m, model_kind, 1 if cfg.mode == "first_order_raw" else 0,
        1 if gains.d_hat_source == "filter_measurement" else 0,
        sc.step, n_steps, scal, model_params,
        np.ascontiguousarray(sc.aug.A_v), np.ascontiguousarray(sc.aug.E),
        np.ascontiguousarray(gains.L), np.ascontiguousarray(gains.Lambda),
        np.ascontiguousarray(gains.Gamma), np.ascontiguousarray(gains.gamma),
        np.ascontiguousarray(gains.Upsilon),
        mu0, muinf, dec,
        sc.reference.amplitude.copy(), sc.reference.frequency.copy(),
        sc.reference.phase.copy(), sc.reference.offset.copy(),
        *sf, *af,
        noise_data, noise_start, noise_len, noise_dt, noise_t0,
        sc.initial_state(), out)

    status = _STATUS[code]
    message = None
    if code == 1:
        message = (f"funnel violation on joint {fail_joint} at t={fail_time:.6g}s")
    elif code == 2:
        message = f"state diverged or inertia factorization failed at t={fail_time:.6g}s"
    return (out[:rows], status,
            None if code == 0 else float(fail_time),
            None if fail_joint < 0 else int(fail_joint),
            message)
