"""Power schedules, acknowledgment suppression, and remote estimation cost.

A smart sensor transmits Kalman-filtered state estimates over an erasure
channel whose delivery probability depends on transmit power, under a
long-run average energy budget.  This package implements the two classical
schedule families (a periodic offline pattern and an acknowledgment-driven
online detector), an attacker that suppresses the detector's power-up flags
on a rational duty cycle, exact Markov-chain performance analysis of the
attacked loop, closed-form reference values, and a seeded, bit-reproducible
Monte Carlo engine, with a CLI that emits analysis reports and plot-ready
CSV data.
"""

from .attack import AttackerConfig, AttackerState, attacker_step, reduce_beta
from .chain_analytics import (
    ChainModel,
    ThresholdReport,
    build_transition_matrix,
    chain_J,
    chain_flag_rates,
    detect_attack,
    enumerate_states,
    j_max,
    no_attack_chain,
    recommend_schedule,
    stationary_distribution,
    threshold_beta,
)
from .errors import (
    AckSiegeError,
    AnalysisError,
    BudgetError,
    CalibrationError,
    ConfigError,
    ModelError,
    SolverError,
)
from .lds_core import (
    EstimatorState,
    SteadyState,
    SystemModel,
    h_power_trace,
    initial_estimator_state,
    kalman_sensor_step,
    lyapunov_h,
    remote_update,
    riccati_gtilde,
    steady_state_cov,
)
from .montecarlo import (
    SimConfig,
    SimReport,
    simulate,
    simulate_trajectory_check,
    sweep_beta,
)
from .schedule import (
    AckMemory,
    DetectorConfig,
    DetectorState,
    EnergyModel,
    OfflineSchedule,
    build_offline_schedule,
    calibrate_mu,
    detector_step,
    first_principles_offline_J,
    fixed_window_avg_trace,
    fixed_window_flag_rate,
    initial_detector_state,
    offline_J_closed_form,
    offline_energy_closed_form,
    online_J_closed_form,
    online_formula_vs_chain,
    reduce_energy_budget,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # lds_core
    "SystemModel", "SteadyState", "EstimatorState",
    "lyapunov_h", "riccati_gtilde", "steady_state_cov", "h_power_trace",
    "kalman_sensor_step", "remote_update", "initial_estimator_state",
    # schedule
    "EnergyModel", "OfflineSchedule", "DetectorConfig", "DetectorState",
    "AckMemory", "reduce_energy_budget", "build_offline_schedule",
    "offline_energy_closed_form", "offline_J_closed_form",
    "first_principles_offline_J", "initial_detector_state", "detector_step",
    "online_J_closed_form", "fixed_window_flag_rate",
    "fixed_window_avg_trace", "calibrate_mu", "online_formula_vs_chain",
    # attack
    "AttackerConfig", "AttackerState", "reduce_beta", "attacker_step",
    # chain_analytics
    "ChainModel", "ThresholdReport", "enumerate_states",
    "build_transition_matrix", "no_attack_chain", "stationary_distribution",
    "chain_J", "chain_flag_rates", "j_max", "threshold_beta",
    "recommend_schedule", "detect_attack",
    # montecarlo
    "SimConfig", "SimReport", "simulate", "simulate_trajectory_check",
    "sweep_beta",
    # errors
    "AckSiegeError", "ModelError", "BudgetError", "SolverError",
    "CalibrationError", "AnalysisError", "ConfigError",
]
