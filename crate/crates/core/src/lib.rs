//! Zero-touch WLAN radio resource management.
//!
//! A fast airtime-interference replica of an AP fleet ([`environment`]), a
//! sequence-to-sequence actor-critic agent with a candidate selector
//! ([`agent`]), its trainer, reference policies, threshold calibration,
//! observation-noise robustness sweeps and closed-loop replay tooling.

pub mod agent;
pub mod baselines;
pub mod calibration;
pub mod checkpoint;
pub mod environment;
pub mod harness;
pub mod nn;
pub mod error;
pub mod rng;
pub mod robustness;
pub mod topology;
pub mod trainer;

pub use error::{Error, Result};
