"""Characterization and operating-point analysis of interior PM synchronous machines.

Flux-linkage lookup tables, MTPA and field-weakening set-points, loss and
efficiency models, efficiency maps, workload planning and drive cycles.
"""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .machine import (AcResistanceParams, CurrentPolar, DcResistanceParams, DqValue,
                      MachineParams, PhaseWaveforms, dq_from_polar, park_transform,
                      polar_from_dq, reconstruct_full_period, waveforms_to_dq)
from .fluxmap import (FluxMap, MapSource, SkewSpec, SyntheticMachine, SyntheticModelParams,
                      build_from_samples, complete_by_symmetry, ensure_completed,
                      interpolate, skew_average, synthetic_flux_map)
from .losses import (CoreLossCoefficients, CoreRegion, EtaMarker, FrictionCoefficients,
                     LossBreakdown, LossesConfig, WaveformSample, core_loss,
                     conduction_loss, efficiency, friction_loss, loss_breakdown)
from .solver import (OperatingPointSolver, SolverSettings, capability_envelope,
                     field_weakening_setpoint, mtpa_setpoint)
from .mapgen import (CostModel, EfficiencyMap, SweepPlan, build_efficiency_map,
                     estimate_runtime, plan_sweep, run_characterization)
from .drivecycle import (DriveCycle, DriveCycleResult, VehicleParams, evaluate_cycle,
                         load_cycle, wheel_demand)
