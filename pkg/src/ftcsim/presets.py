"""Named parameter presets for the two shipped demonstration scenarios.

``example1``: planar two-link arm (n=2), single fault channel on the first
position sensor, tanh-profile sensor fault at t=25 s.

``example2``: 3-DOF solar-tracker base (n=3), faults on all three position
sensors at t=25 s plus additive actuator faults at t=35 s; the default
sensor profile is the two-tone sinusoid (scenario variants are selected via
``sensor_scenario``).

Presets are plain config dictionaries in the same schema the YAML loader
accepts, so every field can be overridden individually.
"""

from __future__ import annotations

import copy

__all__ = ["PRESETS", "preset_config", "example2_sensor_channels", "SENSOR_SCENARIOS"]

# Observer synthesis output for example 1 (6x6 SPD matrix P, gain L).
_P_EX1 = [
    [5.9419, 0.0001, -0.6670, 0.0001, -1.9084, 0.0040],
    [0.0001, 5.9419, 0.0001, -0.6670, 0.0040, -1.9084],
    [-0.6670, 0.0001, 0.6044, -0.0000, -0.0265, 0.0001],
    [0.0001, -0.6670, -0.0000, 0.6044, 0.0001, -0.0265],
    [-1.9084, 0.0040, -0.0265, 0.0001, 4.7186, -0.0106],
    [0.0040, -1.9084, 0.0001, -0.0265, -0.0106, 4.7186],
]
_L_EX1 = [
    [14.1213, 0.0036],
    [0.0536, 14.1214],
    [15.2936, 0.0015],
    [0.0626, 15.2936],
    [-7.2526, -0.1340],
    [0.0006, -7.2528],
]

# Observer synthesis output for example 2 (9x9).  The tiny off-pattern
# entries of the source matrix are solver dust; the block pattern below is
# symmetric and SPD.
def _p_ex2():
    d = [3.23637] * 3 + [3.237968] * 3 + [2.696713] * 3
    P = [[0.0] * 9 for _ in range(9)]
    for i in range(9):
        P[i][i] = d[i]
    for k in range(3):
        P[k][3 + k] = P[3 + k][k] = -1.07894
        P[k][6 + k] = P[6 + k][k] = -0.01348
        P[3 + k][6 + k] = P[6 + k][3 + k] = -0.03236
    return P


def _l_ex2():
    L = [[0.0] * 3 for _ in range(9)]
    for k in range(3):
        L[k][k] = 93.74817
        L[3 + k][k] = 31.24764
        L[6 + k][k] = -98.6566
    return L


_EXAMPLE1 = {
    "model": {"kind": "two_link", "params": {}},
    "reference": {
        "amplitude": [0.5, 0.4],
        "frequency": [0.5, 0.8],
        "phase": [0.0, 0.0],
        "offset": [0.3, -0.2],
    },
    "funnel": {"mu0": 5.0, "mu_inf": 2.0, "decay": 0.1},
    "observer": {
        "A_v": [[20.0, 0.1], [0.1, 20.0]],
        "L": _L_EX1,
        "P": _P_EX1,
        "Gamma": 0.05,
        "gamma": 1.0,
        "Upsilon": 1.0,
        "rho1": 100.0,
        "rho2": 0.001,
        "kappa": None,
        "c1": 1.0,
        "c2": 1.0,
        "eps_sing": 1e-8,
    },
    "controller": {
        "g": {"lam_lo": 1.0, "lam_hi": 2.0, "a": 0.7, "b": 1.0, "c": 2,
              "p_lo": 25, "q_lo": 23, "p_hi": 23, "q_hi": 25},
        "surface": {"k1": 10.0, "c_lo": 10.0, "c_hi": 10.0,
                    "p_lo": 25, "q_lo": 23, "p_hi": 23, "q_hi": 25},
        "eps_g": 1e-6,
        "mode": "second_order",
    },
    "faults": {
        "sensor": {
            "E": [[1.0], [0.0]],
            "channels": [
                {"kind": "tanh_step", "onset": 25.0, "amplitude": 3.0, "width": 0.2},
            ],
        },
        "actuator": {"channels": [{"kind": "zero"}, {"kind": "zero"}]},
    },
    "simulation": {
        "horizon": 50.0,
        "step": 1e-3,
        "seed": 0,
        "initial": {"q": [0.0, 0.0], "qd": [0.0, 0.0]},
    },
}


#: Sensor-fault scenario menu for example 2 (applied to all three joints).
SENSOR_SCENARIOS = ("sinusoid", "offset_noise", "ramp", "composite")


def example2_sensor_channels(scenario: str, onset: float = 25.0, seed: int = 0,
                             hold_dt: float = 1e-3) -> list:
    """Per-joint fault channel definitions for one example-2 scenario."""
    if scenario == "sinusoid":
        ch = {"kind": "composite", "members": [
            {"kind": "sinusoid", "onset": onset, "amplitude": 0.5, "frequency": 1.0},
            {"kind": "sinusoid", "onset": onset, "amplitude": 0.5, "frequency": 3.5},
        ]}
    elif scenario == "offset_noise":
        ch = {"kind": "noisy_offset", "onset": onset, "amplitude": 0.5,
              "noise_amplitude": 0.05, "seed": seed, "hold_dt": hold_dt}
    elif scenario == "ramp":
        ch = {"kind": "ramp", "onset": onset, "slope": 0.02}
    elif scenario == "composite":
        ch = {"kind": "composite", "members": [
            {"kind": "step", "onset": onset, "amplitude": 0.3},
            {"kind": "ramp", "onset": onset, "slope": 0.02},
            {"kind": "sinusoid", "onset": onset, "amplitude": 0.2, "frequency": 2.0},
        ]}
    else:
        raise ValueError(f"unknown sensor scenario {scenario!r}; expected one of {SENSOR_SCENARIOS}")
    out = []
    for j in range(3):
        c = copy.deepcopy(ch)
        if c["kind"] == "noisy_offset":
            c["seed"] = seed + j
        out.append(c)
    return out


_EXAMPLE2 = {
    "model": {"kind": "solar_tracker", "params": {}},
    "reference": {
        "amplitude": [0.5, 0.5, 0.5],
        "frequency": [0.5, 0.5, 0.5],
        "phase": [0.0, 0.0, 0.0],
        "offset": [0.0, 0.0, 0.0],
    },
    "funnel": {"mu0": 2.0, "mu_inf": 0.3, "decay": 2.0},
    "observer": {
        "A_v": 100.0,
        "L": _l_ex2(),
        "P": _p_ex2(),
        "Gamma": 0.01,
        "gamma": 10.0,
        "Upsilon": 300.0,
        "rho1": 0.01,
        "rho2": 0.01,
        "kappa": None,
        "c1": 1.0,
        "c2": 1.0,
        "eps_sing": 1e-8,
    },
    "controller": {
        "g": {"lam_lo": 0.01, "lam_hi": 1.0, "a": 0.7, "b": 1.0, "c": 2,
              "p_lo": 11, "q_lo": 9, "p_hi": 9, "q_hi": 11},
        "surface": {"k1": 1.0, "c_lo": 1.0, "c_hi": 1.0,
                    "p_lo": 11, "q_lo": 9, "p_hi": 9, "q_hi": 11},
        "eps_g": 1e-6,
        "mode": "second_order",
    },
    "faults": {
        "sensor": {
            "E": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            "channels": example2_sensor_channels("sinusoid"),
        },
        "actuator": {"channels": [
            {"kind": "sinusoid", "onset": 35.0, "amplitude": 5.0, "frequency": 10.0, "time_ref": 35.0},
            {"kind": "sinusoid", "onset": 35.0, "amplitude": 5.0, "frequency": 5.0, "time_ref": 35.0},
            {"kind": "sinusoid", "onset": 35.0, "amplitude": 5.0, "frequency": 7.0, "time_ref": 35.0},
        ]},
    },
    "simulation": {
        "horizon": 50.0,
        "step": 5e-4,
        "seed": 0,
        "initial": {"q": [0.0, 0.0, 0.0], "qd": [0.0, 0.0, 0.0]},
    },
}

PRESETS = {"example1": _EXAMPLE1, "example2": _EXAMPLE2}


def preset_config(name: str) -> dict:
    """Deep copy of a named preset config."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])
