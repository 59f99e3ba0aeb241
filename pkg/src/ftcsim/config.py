"""Scenario configuration: YAML documents with named presets.

A config document mirrors the Scenario structure section by section.  A
``preset`` key pulls in one of the bundled parameter sets; every field can
then be overridden individually.  Unknown keys are rejected with their full
path.  ``resolve_config`` expands presets and defaults into a complete
document that reproduces the exact scenario when re-loaded.
"""

from __future__ import annotations

import copy
import dataclasses

import numpy as np
import yaml

from .controller import ControllerConfig, GFuncParams, SurfaceGains
from .engine import ReferenceSpec, Scenario
from .faults import ActuatorFaultSpec, FaultSignal, SensorFaultSpec
from .funnel import FunnelParams
from .manipulator import make_model
from .observer import ObserverGains, build_augmented
from .presets import preset_config

__all__ = ["ConfigError", "load_config", "resolve_config", "build_scenario",
           "scenario_from_file", "dump_config"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


_FAULT_KEYS = {f.name for f in dataclasses.fields(FaultSignal)} - {"_noise"}

_SCHEMA = {
    "preset": None,
    "model": {"kind": None, "params": "open"},
    "reference": {"amplitude": None, "frequency": None, "phase": None, "offset": None},
    "funnel": {"mu0": None, "mu_inf": None, "decay": None},
    "observer": {"A_v": None, "L": None, "P": None, "Gamma": None, "gamma": None,
                 "Upsilon": None, "rho1": None, "rho2": None, "kappa": None,
                 "c1": None, "c2": None, "eps_sing": None, "d_hat_source": None},
    "controller": {
        "g": {"lam_lo": None, "lam_hi": None, "a": None, "b": None, "c": None,
              "p_lo": None, "q_lo": None, "p_hi": None, "q_hi": None},
        "surface": {"k1": None, "c_lo": None, "c_hi": None,
                    "p_lo": None, "q_lo": None, "p_hi": None, "q_hi": None},
        "eps_g": None,
        "mode": None,
    },
    "faults": {"sensor": {"E": None, "channels": "channels"},
               "actuator": {"channels": "channels"}},
    "simulation": {"horizon": None, "step": None, "seed": None,
                   "initial": {"q": None, "qd": None, "x_v": None, "x_hat": None,
                               "pi_hat": None, "beta_hat": None}},
}


def _check_keys(doc, schema, path=""):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or 'document'} must be a mapping, got {type(doc).__name__}")
    for key, val in doc.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key {here!r}")
        sub = schema[key]
        if sub == "open" or sub is None:
            continue
        if sub == "channels":
            _check_channels(val, here)
        elif isinstance(sub, dict) and val is not None:
            _check_keys(val, sub, here)


def _check_channels(channels, path):
    if not isinstance(channels, list):
        raise ConfigError(f"{path} must be a list of fault-channel mappings")
    for i, ch in enumerate(channels):
        if not isinstance(ch, dict):
            raise ConfigError(f"{path}[{i}] must be a mapping")
        for key in ch:
            if key == "members":
                _check_channels(ch["members"], f"{path}[{i}].members")
            elif key not in _FAULT_KEYS:
                raise ConfigError(f"unknown fault key {path}[{i}].{key!r}")


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path) -> dict:
    """Read and structurally validate one YAML config document."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: YAML parse error: {exc}") from exc
    if doc is None:
        doc = {}
    _check_keys(doc, _SCHEMA)
    return doc


def _as_vector(val, n, name):
    if val is None:
        return np.zeros(n)
    if np.isscalar(val):
        return np.full(n, float(val))
    v = np.asarray(val, dtype=float)
    if v.shape != (n,):
        raise ConfigError(f"{name} must be a scalar or a length-{n} list, got shape {v.shape}")
    return v


def _as_matrix(val, rows, cols, name):
    if val is None:
        raise ConfigError(f"missing required matrix {name}")
    if np.isscalar(val):
        if rows != cols:
            raise ConfigError(f"{name} must be a {rows}x{cols} matrix, scalar shorthand needs a square shape")
        return float(val) * np.eye(rows)
    v = np.asarray(val, dtype=float)
    if v.shape != (rows, cols):
        raise ConfigError(f"{name} must be {rows}x{cols}, got {v.shape}")
    return v


def resolve_config(doc: dict, seed: int | None = None) -> dict:
    """Expand preset and defaults into a complete, self-contained document."""
    _check_keys(doc, _SCHEMA)
    doc = copy.deepcopy(doc)
    preset = doc.pop("preset", None)
    if preset is not None:
        doc = _merge(preset_config(preset), doc)
    for section, default in (("model", {"kind": None, "params": {}}),
                             ("reference", {}), ("funnel", {}), ("observer", {}),
                             ("controller", {}), ("faults", {}), ("simulation", {})):
        doc.setdefault(section, copy.deepcopy(default))
    sim = doc["simulation"]
    sim.setdefault("horizon", 50.0)
    sim.setdefault("step", 1e-3)
    sim.setdefault("seed", 0)
    if seed is not None:
        sim["seed"] = int(seed)
    sim.setdefault("initial", {})
    doc["controller"].setdefault("eps_g", 1e-6)
    doc["controller"].setdefault("mode", "second_order")

    # assign missing noise seeds and hold rates from the simulation section
    counter = [int(sim["seed"])]

    def fill(ch):
        if ch.get("kind") == "noisy_offset":
            if "seed" not in ch:
                ch["seed"] = counter[0]
            counter[0] += 1
            ch.setdefault("hold_dt", float(sim["step"]))
        for mem in ch.get("members", []):
            fill(mem)

    for group in ("sensor", "actuator"):
        for ch in doc["faults"].get(group, {}).get("channels", []):
            fill(ch)
    return doc


def _build_signal(ch: dict) -> FaultSignal:
    ch = dict(ch)
    members = ch.pop("members", ())
    return FaultSignal(members=tuple(_build_signal(dict(m)) for m in members), **ch)


def build_scenario(doc: dict) -> Scenario:
    """Construct a Scenario from a resolved config document."""
    try:
        model = make_model(doc["model"]["kind"], doc["model"].get("params"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    n = model.n

    fa = doc.get("faults", {})
    sensor_doc = fa.get("sensor") or {}
    if "E" in sensor_doc and sensor_doc["E"] is not None:
        E = np.atleast_2d(np.asarray(sensor_doc["E"], dtype=float))
        if E.shape[0] != n:
            raise ConfigError(f"faults.sensor.E must have {n} rows, got {E.shape}")
    else:
        E = np.zeros((n, 1))
        E[0, 0] = 1.0
    m = E.shape[1]
    channels = sensor_doc.get("channels") or [{"kind": "zero"}] * m
    try:
        sensor = SensorFaultSpec(E=E, channels=tuple(_build_signal(c) for c in channels))
        act_channels = (fa.get("actuator") or {}).get("channels") or [{"kind": "zero"}] * n
        actuator = ActuatorFaultSpec(channels=tuple(_build_signal(c) for c in act_channels))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"faults: {exc}") from exc

    ob = doc.get("observer", {})
    try:
        A_v = _as_matrix(ob.get("A_v"), n, n, "observer.A_v")
        aug = build_augmented(A_v, E)
        gains = ObserverGains(
            L=_as_matrix(ob.get("L"), 3 * n, n, "observer.L"),
            P=_as_matrix(ob.get("P"), 3 * n, 3 * n, "observer.P"),
            Gamma=_as_matrix(ob.get("Gamma"), m, m, "observer.Gamma"),
            gamma=_as_matrix(ob.get("gamma"), m, m, "observer.gamma"),
            Upsilon=_as_matrix(ob.get("Upsilon"), n, n, "observer.Upsilon"),
            rho1=float(ob.get("rho1", 1.0)), rho2=float(ob.get("rho2", 1.0)),
            kappa=None if ob.get("kappa") is None else float(ob["kappa"]),
            c1=float(ob.get("c1", 1.0)), c2=float(ob.get("c2", 1.0)),
            eps_sing=float(ob.get("eps_sing", 1e-8)),
            d_hat_source=ob.get("d_hat_source", "filter_measurement"), m=m)
    except ValueError as exc:
        raise ConfigError(f"observer: {exc}") from exc

    co = doc.get("controller", {})
    try:
        cfg = ControllerConfig(
            g=GFuncParams(**co["g"]), surface=SurfaceGains(**co["surface"]),
            eps_g=float(co.get("eps_g", 1e-6)), mode=co.get("mode", "second_order"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"controller: {exc}") from exc

    fu = doc.get("funnel", {})
    try:
        mu0 = _as_vector(fu.get("mu0"), n, "funnel.mu0")
        mu_inf = _as_vector(fu.get("mu_inf"), n, "funnel.mu_inf")
        decay = _as_vector(fu.get("decay"), n, "funnel.decay")
        funnels = tuple(FunnelParams(mu0[i], mu_inf[i], decay[i]) for i in range(n))
    except ValueError as exc:
        raise ConfigError(f"funnel: {exc}") from exc

    re_ = doc.get("reference", {})
    try:
        reference = ReferenceSpec(
            amplitude=_as_vector(re_.get("amplitude"), n, "reference.amplitude"),
            frequency=_as_vector(re_.get("frequency"), n, "reference.frequency"),
            phase=_as_vector(re_.get("phase"), n, "reference.phase"),
            offset=_as_vector(re_.get("offset"), n, "reference.offset"))
    except ValueError as exc:
        raise ConfigError(f"reference: {exc}") from exc

    sim = doc.get("simulation", {})
    init = sim.get("initial") or {}
    try:
        return Scenario(
            model=model, reference=reference, funnels=funnels, aug=aug,
            obs_gains=gains, controller=cfg, sensor_fault=sensor,
            actuator_fault=actuator,
            horizon=float(sim.get("horizon", 50.0)), step=float(sim.get("step", 1e-3)),
            seed=int(sim.get("seed", 0)),
            q0=_as_vector(init.get("q"), n, "initial.q"),
            qd0=_as_vector(init.get("qd"), n, "initial.qd"),
            x_v0=_as_vector(init.get("x_v"), n, "initial.x_v"),
            x_hat0=_as_vector(init.get("x_hat"), 3 * n, "initial.x_hat"),
            pi_hat0=_as_vector(init.get("pi_hat"), m, "initial.pi_hat"),
            beta_hat0=float(init.get("beta_hat", 0.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def scenario_from_file(path, seed: int | None = None):
    """Load, resolve and build; returns (scenario, resolved_doc)."""
    resolved = resolve_config(load_config(path), seed=seed)
    return build_scenario(resolved), resolved


def dump_config(doc: dict, path):
    """Write a resolved config document (YAML, full float precision)."""
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, default_flow_style=None, width=100)
