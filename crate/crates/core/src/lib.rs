//! Posted-price admission control for jobs on servers.
//!
//! Jobs of integer length arrive at servers one step at a time; a server
//! that is free accepts a job iff its value per step is at least the posted
//! price. The crate computes exact long-run welfare and revenue, searches for
//! good prices, evaluates worst-case guarantees of single-price schemes, and
//! cross-checks everything by simulation and offline benchmarks.

pub mod bounds;
pub mod error;
pub mod offline;
pub mod optimize;
pub mod sim;
pub mod steady;
pub mod values;

pub use error::{Error, Result};
pub use offline::{CorrelatedClassList, JobClass, LpSolution};
pub use optimize::{FleetScheme, OptimizationResult, PriceSchedule, SearchConfig, SearchMethod};
pub use sim::{SimConfig, SimModel, SimResult};
pub use steady::{Fleet, FleetMode, JobMix, SteadyStateMetrics};
pub use values::ValueDistribution;
