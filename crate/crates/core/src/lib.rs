//! Feedforward active-noise-control simulation.
//!
//! * [`dsp`]: FIR filtering, delay lines, seeded noise, band-limiting, EMA powers.
//! * [`paths`]: impulse-response I/O, surrogate paths, log-spectral distance.
//! * [`adaptive`]: cross-updated online secondary-path modeling FxLMS with an
//!   error-jump detector.
//! * [`meta`]: meta-learned co-initialization of the control filter and the
//!   secondary-path model.
//! * [`harness`]: path-switch scenarios, metrics, the diversity study, CSV output.
//! * [`config`]: TOML run configuration used by the `metanc` binary.

pub mod adaptive;
pub mod config;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod jobs;
pub mod meta;
pub mod paths;

pub use error::{Error, Result};
