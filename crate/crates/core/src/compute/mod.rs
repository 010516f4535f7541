//! Fork-join computation model: lazily expanded jobs, task records and
//! deques, execution stacks, BP/HBP descriptors, priorities and the
//! in-order output layout.

pub mod desc;
pub mod job;
pub mod layout;
pub mod prio;
pub mod stack;
pub mod task;

pub use desc::{build_bp, build_hbp, BPDescriptor, FTag, HBPDescriptor, HbpRound, LTag};
pub use job::{
    ceil_log2, child_priority, split, stage_priorities, Access, Bp, BpKernel, Ctx, Expansion,
    FanOut, Job, LeafFn, MakeJob, Stages,
};
pub use layout::{inorder_pos, layout_output};
pub use prio::{assign_priorities, root_priority, Labeled};
pub use stack::{pad_gap, ExecutionStack};
pub use task::{NodeKind, TaskDeque, TaskId, TaskNode, TaskState};
