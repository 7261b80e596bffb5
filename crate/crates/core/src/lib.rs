//! Multichannel feedforward active noise control simulation built around the
//! filtered-reference LMS (McFxLMS) algorithm.
//!
//! - [`dsp`]: delay lines, dot products and batch FIR filtering
//! - [`fir_design`]: Hamming-window bandpass design
//! - [`signal`]: seeded noise, references, synthetic paths, disturbance
//! - [`mcfxlms`]: control units, controller and the cancellation loop
//! - [`metrics`]: block MSE and noise reduction
//! - [`harness`]: config-driven scenarios and result export
//! - [`io`]: CSV formats

pub mod dsp;
pub mod error;
pub mod fir_design;
pub mod harness;
pub mod io;
pub mod mcfxlms;
pub mod metrics;
pub mod signal;

pub use dsp::{dot, filter_batch, DelayLine, FirFilter};
pub use error::{Error, Result};
pub use fir_design::{design_bandpass, magnitude_response, BandSpec};
pub use harness::{export_result, run_scenario, Outcome, ScenarioConfig, SimResult};
pub use mcfxlms::{
    Coefficients, ControlUnit, Dims, McFxLmsController, RunOptions, RunOutput, Topology,
};
pub use metrics::{compute_metrics, MetricsReport};
pub use signal::{PathMatrix, PathSynthSpec, ReferenceMode, SignalMatrix};
