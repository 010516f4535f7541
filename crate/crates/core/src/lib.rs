//! Simulated multicore with private caches and write-invalidate coherence,
//! a fork-join runtime with priority and randomized work stealing, and a
//! suite of hierarchical balanced parallel algorithms.

pub mod algos;
pub mod compute;
pub mod error;
pub mod memsim;
pub mod metrics;
pub mod sched;

pub use error::SimError;
