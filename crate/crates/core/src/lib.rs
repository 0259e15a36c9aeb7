//! Cycle-level simulator of a multiprocessor, superscalar quantum control
//! processor.
//!
//! A program in timed assembly ([`isa`]) is split into blocks
//! ([`program`]) that a scheduler ([`sched`]) allocates to processor cores
//! ([`processor`]). Cores issue operations to a device model ([`qpu`]);
//! [`metrics`] turns the run into cycles-per-step and time-ratio figures.

pub mod bench;
pub mod config;
pub mod engine;
pub mod error;
pub mod isa;
pub mod metrics;
pub mod processor;
pub mod program;
pub mod qpu;
pub mod sched;

pub use config::{CostConfig, DependencyRepr, MachineConfig};
pub use engine::{run_program, Prepared, RunOutput};
pub use error::{RunError, SimFault};
pub use metrics::RunReport;
