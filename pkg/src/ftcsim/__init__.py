"""Fault-tolerant tracking control simulator for rigid manipulators.

Closed-loop simulation of an adaptive sensor-fault observer combined with a
fixed-time terminal sliding-mode controller under prescribed performance
funnels, for concrete manipulator models.
"""

from .backends import HAVE_COMPILED, available_backends, default_backend
from .controller import (ControllerConfig, GFuncParams, SurfaceGains,
                         settling_time_bound, surface_settling_bound)
from .engine import (MetricsReport, ReferenceSpec, RunResult, Scenario,
                     ScenarioValidationError, SimulationTrace, compute_metrics,
                     rk4_step, run_scenario, trace_columns)
from .faults import (ActuatorFaultSpec, FaultSignal, SensorFaultSpec,
                     apply_actuator_fault, apply_sensor_fault, eval_fault)
from .funnel import FunnelParams, FunnelViolation, mu, transform_derivatives, transform_z
from .manipulator import (ConstantInertia, JointState, ManipulatorModel,
                          SolarTracker, SolarTrackerParams, TwoLink,
                          TwoLinkParams, dynamics_terms, forward_dynamics,
                          make_model, plant_rhs)
from .observer import (AugmentedSystem, ObserverGains, ObserverState,
                       build_augmented, estimate_lipschitz, fault_estimate,
                       observer_rhs, ultimate_bound, upsilon,
                       validate_gain_conditions, virtual_filter_rhs)
from .presets import PRESETS, preset_config

__version__ = "0.1.0"
