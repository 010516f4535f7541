use thiserror::Error;

use crate::memsim::Addr;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("access to unallocated address {0}")]
    Unallocated(Addr),
    #[error("out of memory: requested {requested} words, arena limit {limit}")]
    OutOfMemory { requested: u64, limit: u64 },
    #[error("stack overflow on core {core}: need {need} words, arena has {cap}")]
    StackOverflow { core: usize, need: u64, cap: u64 },
    #[error("rejected descriptor: {0}")]
    Descriptor(String),
    #[error("deadlock at tick {tick}: {detail}")]
    Deadlock { tick: u64, detail: String },
    #[error("internal fault: {0}")]
    Internal(String),
}
