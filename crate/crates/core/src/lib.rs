//! Streaming fullband speech enhancement.
//!
//! The signal path works on 10 ms hops of 48 kHz audio with 40 ms of
//! look-ahead: ERB band analysis, a multi-period pitch comb filter, a small
//! int8-weight recurrent network predicting per-band gains and comb
//! strengths, and an envelope postfilter.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod pitch;
pub mod postfilter;
pub mod records;
pub mod spectral;
pub mod synth;
pub mod targets;
pub mod wav;

pub use error::{Error, Result};
