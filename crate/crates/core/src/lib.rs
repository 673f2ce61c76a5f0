//! Energy-efficient over-the-air federated learning with a pinching-antenna
//! server.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: waveguide and array line-of-sight channels
//! - [`metrics`]: aggregation error, computation SNR/rate, transmission energy
//! - [`optimizer`]: placement, power scaling, scheduling and the outer loop
//! - [`fl`]: FedAvg over the simulated analog uplink
//! - [`harness`]: configuration, scenarios, datasets, sweeps and CSV output

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod fl;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod scenario;

pub use channel::{Device, MimoArray, SystemParams, Waveguide};
pub use error::{Error, Result};
pub use metrics::{AirCompMetrics, TransceiverState};
pub use optimizer::SolverConfig;
pub use scenario::Scenario;
