//! Federated averaging over the simulated analog uplink.

mod data;
mod local;
mod model;
mod normalize;
mod round;
mod train;

pub use data::{Dataset, GaussianBlobs};
pub use local::{local_update, LocalObjective, LocalSchedule, Supervised};
pub use model::Architecture;
pub use normalize::{denormalize, normalize, pooled_reference, renormalized_weights, NormalizationStats, STD_FLOOR};
pub use round::{run_round, RoundOutcome, Uplink};
pub use train::{establish_link, substream, train, Backend, Link, Purpose, RoundReport, TrainConfig};
