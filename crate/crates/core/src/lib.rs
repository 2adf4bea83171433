//! Flow-level simulation and stochastic risk analysis for data-center fabrics.
//!
//! The crate has two halves that meet in the middle:
//!
//! * a fluid, event-driven simulator of a k-ary fat-tree running a mix of
//!   elephant and mice flows under one of three flow-handling algorithms
//!   (static ECMP hashing, Hedera-style elephant rescheduling, DCTCP-style
//!   marking-driven rate adaptation), producing probe throughput and
//!   error-factor samples ([`topology`], [`workload`], [`sched`], [`fabric`]);
//! * a statistics pipeline that fits discrete distributions to those samples
//!   with Kolmogorov-Smirnov / Anderson-Darling tests and feeds the accepted
//!   fits into a Monte Carlo shortfall predictor with value-at-risk reporting
//!   ([`gof`], [`dist`], [`risk`]).
//!
//! Everything is deterministic: all randomness flows through the counter-based
//! generator in [`rng`], so a (seed, worker-count) pair always reproduces the
//! same artifacts bit for bit.

pub mod dist;
pub mod error;
pub mod fabric;
pub mod gof;
pub mod risk;
pub mod rng;
pub mod sched;
pub mod sigfmt;
pub mod topology;
pub mod workload;

pub use dist::FittedDistribution;
pub use error::{Error, Result};
pub use fabric::{Algorithm, RunResult, SampleSet, SimParams};
pub use gof::{Family, GofReport, Moments, Selection};
pub use risk::{ElephantProfile, RiskReport};
pub use rng::CounterRng;
pub use topology::{FatTreeTopology, LinkId, NodeId, Path};
pub use workload::{Flow, FlowKind, Pattern, Ratio, Scenario};
