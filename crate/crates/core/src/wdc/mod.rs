//! Erasure-coded wireless data center: scenario, channels, the compositional
//! adapter, queueing delay and Monte-Carlo metrics.

pub mod adapter;
pub mod channel;
pub mod metrics;
pub mod queue;
pub mod scenario;

pub use adapter::{build_problem, DataCenterProblem, StartPoint};
pub use channel::{capacity, sample_channel, ChannelSample};
pub use metrics::{estimate_moments, evaluate, throughput, DecisionReport, ServerMoments};
pub use queue::{pk_delay, server_moments, simulate_fifo, simulate_mg1, QueueEstimate};
pub use scenario::{
    equiprobable_policy, zipf_rates, DecisionVector, Geometry, PathLoss, Scenario, Utility,
};
