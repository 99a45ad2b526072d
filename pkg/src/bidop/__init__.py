"""Bistatic Doppler estimation from multipath CIR phases under TX/RX
clock asynchrony: scenario simulator, phase/waveform synthesizers, the
LoS-referenced estimation pipeline, and a Monte Carlo sweep harness.
"""

from .estimator import (
    BranchInconsistencyError,
    DegeneratePairError,
    DiffSeries,
    EstimationInfeasibleError,
    EstimatorError,
    ThetaEstimate,
    cancel_offsets,
    closed_form,
    difference_and_average,
    estimate,
    g_jacobian,
    g_model,
    nls_refine,
    static_baseline,
)
from .experiments import (
    Record,
    SweepConfig,
    SweepFailureError,
    SweepResult,
    load_sweep_config,
    run_sweep,
    summarize,
    t_sensitivity,
)
from .phase_model import (
    NuisanceTrace,
    PhasePanel,
    read_panel_csv,
    synthesize_nuisance,
    synthesize_panel,
    write_panel_csv,
)
from .profiles import (
    PROFILES,
    CarrierProfile,
    frames_in_window,
    get_profile,
    scale_period,
    validate_profile,
)
from .scenario import (
    InfeasibleScenarioError,
    Scenario,
    bistatic_angles,
    path_delays,
    path_frequencies,
    rx_doppler,
    sample_scenario,
)
from .waveform import (
    PanelRejectedError,
    PilotWaveform,
    TapChannel,
    estimate_cir,
    extract_path_phases,
    golay_pair,
    make_pilot,
    propagate,
    synthesize_panel_waveform,
)

__version__ = "0.1.0"

__all__ = [
    "BranchInconsistencyError",
    "CarrierProfile",
    "DegeneratePairError",
    "DiffSeries",
    "EstimationInfeasibleError",
    "EstimatorError",
    "InfeasibleScenarioError",
    "NuisanceTrace",
    "PanelRejectedError",
    "PhasePanel",
    "PilotWaveform",
    "PROFILES",
    "Record",
    "Scenario",
    "SweepConfig",
    "SweepFailureError",
    "SweepResult",
    "TapChannel",
    "ThetaEstimate",
    "bistatic_angles",
    "cancel_offsets",
    "closed_form",
    "difference_and_average",
    "estimate",
    "estimate_cir",
    "extract_path_phases",
    "frames_in_window",
    "g_jacobian",
    "g_model",
    "get_profile",
    "golay_pair",
    "load_sweep_config",
    "make_pilot",
    "nls_refine",
    "path_delays",
    "path_frequencies",
    "propagate",
    "read_panel_csv",
    "run_sweep",
    "rx_doppler",
    "sample_scenario",
    "scale_period",
    "static_baseline",
    "summarize",
    "synthesize_nuisance",
    "synthesize_panel",
    "synthesize_panel_waveform",
    "t_sensitivity",
    "validate_profile",
    "write_panel_csv",
]
