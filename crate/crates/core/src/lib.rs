//! Conditional dynamics, photodetection feedback and intensity correlations
//! of a weakly driven cavity coupled to N two-level atoms.
//!
//! Rates are given as ν = ω/2π in MHz and times in ns; the dynamics run on
//! angular rates internally.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod conditional;
pub mod correlator;
pub mod drive;
pub mod error;
pub mod fitting;
pub mod model;
pub mod ode;
pub mod oracle;
pub mod presets;
pub mod roots;
pub mod steady_state;
pub mod trajectory;

pub use basis::{AmplitudeVector, BasisState, ExcitationBasis};
pub use conditional::{
    evolve, find_capture, g2_free, response_at_tau_star, simulate_capture_release, sweep_steps,
    CaptureSolution, ConditionalState, CrossingMode, G2Series, Response, SweepTable, TimeGrid,
};
pub use correlator::{histogram, normalize, Histogram, HistogramSpec, NormalizeMode, StopMode};
pub use drive::{DriveWaveform, FeedbackPulse, PulseShape, SampledShape};
pub use error::{Error, Result};
pub use model::{
    derived_rates, drive_for_photon_number, fit_effective_params, DerivedRates, EffectiveParams,
    SystemParams,
};
pub use steady_state::{post_jump_state, solve_amplitudes, SteadyStateSolution};
pub use trajectory::{
    run, ClickRecord, Detector, FeedbackConfig, InitialState, RunOutput, RunStats, TrajectoryConfig,
};
