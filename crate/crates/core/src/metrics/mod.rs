//! Derived quantities of completed runs: sequential baselines, cache and
//! block miss excess, idle time, stack block delay, measured friendliness
//! and sharing, and bound checks.

pub mod bounds;
pub mod delay;
pub mod excess;
pub mod report;
pub mod run;

pub use bounds::{check_bound, BoundEval, BoundSpec, Params, Regime};
pub use delay::{
    estimate_fl, frame_block_delay_above, measure_idle, stack_block_delay, stack_invalidations,
    IdleBreakdown, SizeClass, StackDelay,
};
pub use excess::{block_wait, block_wait_total, compute_excess, params, ExcessReport};
pub use report::{build_report, csv_row, evaluate_bounds, Check, Report, CSV_COLUMNS};
pub use run::{execute, Experiment, RunRecord};
