//! Damped p-system `u_t - v_x = 0`, `v_t + p(u)_x = -a(t, x) v` with the
//! γ-law pressure `p(u) = u^(-γ)/γ`.
//!
//! The crate evolves the Riemann invariants with an upwind scheme, traces
//! characteristics through the computed field, integrates the Riccati
//! dynamics of the invariant gradients along them, and measures life-spans
//! and their scaling with the perturbation size.

pub mod characteristics;
pub mod config;
pub mod damping;
pub mod error;
pub mod field;
pub mod gas;
pub mod history;
pub mod lifespan;
pub mod oracle;
pub mod profile;
pub mod quad;
pub mod report;

pub use characteristics::{
    gradient_crosscheck, integrating_factor, region_boundaries, riccati_evolve, trace, CharPath,
    Direction, PathSample, PathTracer, RegionKind, RegionSpec, RegionTracker, RiccatiKind,
    RiccatiMode, RiccatiOptions, RiccatiState, Sign, Transcription,
};
pub use config::{
    emit_config, parse_config, parse_epsilons, preset, Expectation, RunConfig, ScenarioPreset,
    PRESETS,
};
pub use damping::{AssumptionReport, DampingFamily, DampingSpec, Violation};
pub use error::{Error, Result};
pub use field::{
    run_until, sup_norms_on_region, FieldState, Grid1D, InitialData, RunOutcome, SolverOptions,
    StepMonitor, StopCause, TimeSeries, TimeSeriesRow,
};
pub use gas::{GasLaw, GasState, RiemannPair};
pub use history::{HistoryRecorder, SolverHistory};
pub use lifespan::{
    estimate_t_star, fit_scaling, run_sweep, run_sweep_with, simulate, BlowupReport, FitOptions,
    HorizonRule, ScalingFit, ScalingModel, Simulation, SimulationResult, SweepPlan, SweepResult,
    SweepRow,
};
pub use oracle::{
    dual_solver_difference, lax_friedrichs_run, riccati_closed_form, simple_wave_t_star,
    SimpleWaveOracle,
};
pub use profile::Profile;
