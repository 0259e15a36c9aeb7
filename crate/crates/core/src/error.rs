use thiserror::Error;

use crate::isa::Diagnostic;
use crate::program::TableError;

/// Faults that abort a simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimFault {
    #[error("deadlock: core {core} made no progress for {cycles} cycles (pc {pc})")]
    Deadlock { core: usize, pc: u32, cycles: u64 },
    #[error("attribution gap in block {block}: {attributed} of {cycles} cycles attributed")]
    AttributionGap { block: usize, cycles: u64, attributed: u64 },
    #[error("block {block} signaled done twice (core {core})")]
    DoubleCompletion { block: usize, core: usize },
    #[error("block {block} allocated before its dependencies were satisfied (cycle {cycle})")]
    UnsafeAllocation { block: usize, cycle: u64 },
    #[error("FMR at pc {pc} reads r{reg}, which belongs to an open MRCE context")]
    FmrOnOpenContext { pc: u32, reg: u8 },
    #[error("dispatch group at pc {pc} mixes timing labels")]
    MixedLabels { pc: u32 },
    #[error("instruction at pc {pc} executed outside any block")]
    OutsideBlock { pc: u32 },
}

/// Anything that stops a program from running to completion.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("validation failed:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("block table: {0}")]
    Table(#[from] TableError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("runtime fault: {0}")]
    Fault(#[from] SimFault),
}

impl RunError {
    pub fn is_validation(&self) -> bool {
        !matches!(self, RunError::Fault(_))
    }
}
