//! Age-of-information scheduling for blind OFDMA uplinks with short packets.
//!
//! The crate covers the finite-blocklength error model, the analytic
//! cluster size for clustered round-robin, per-slot schedulers and
//! sub-carrier assigners, a block-fading channel, a slot-level simulator,
//! and an enumeration lab that checks round-robin optimality numerically.

pub mod assignment;
pub mod channel;
pub mod cluster_opt;
pub mod config;
pub mod dominance;
pub mod error;
pub mod fbl;
pub mod lambert;
pub mod schedulers;
pub mod sim;

pub use assignment::{AssignmentMatrix, LinkTable};
pub use channel::{ChannelConfig, ChannelModel, ChannelState};
pub use cluster_opt::{ClusterOptInput, ClusterOptResult};
pub use config::{AssignmentConfig, AssignmentMode, AutoOr, RunConfig, SchedulerConfig, SimConfig, SystemConfig};
pub use dominance::{ItiHistory, Schedule, StochasticMeasure};
pub use error::{Error, Result};
pub use fbl::{FblParams, LinkQuality, SnrDistribution};
pub use schedulers::{Policy, SchedulerState};
pub use sim::{ExperimentSummary, MetricsRecord, SummaryStat};
