use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::job::Job;
use crate::memsim::{AddrRange, CoreId, Tick};

pub type TaskId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    /// Not yet expanded.
    Pending,
    BpFork,
    BpLeaf,
    /// A node whose children run as sequenced stages.
    HbpCall,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Pending => "pending",
            NodeKind::BpFork => "bp-fork",
            NodeKind::BpLeaf => "bp-leaf",
            NodeKind::HbpCall => "hbp-call",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Pending,
    Running,
    Suspended,
    Done,
}

/// Live record of one task in the computation tree.
pub struct TaskNode {
    pub job: Box<dyn Job>,
    /// Unique over the run; slab ids are reused.
    pub serial: u64,
    pub kind: NodeKind,
    pub size: u64,
    pub depth: u32,
    pub priority: i64,
    pub parent: Option<TaskId>,
    /// Position under the parent: fork side or stage index.
    pub index: u32,
    pub join_counter: u8,
    pub frame: Option<AddrRange>,
    pub frame_core: CoreId,
    pub state: TaskState,
    /// Core currently executing this task's kernel.
    pub kernel_core: CoreId,
    pub start_core: CoreId,
    pub start_tick: Tick,
    /// Remaining stages of an `HbpCall`, in reverse order.
    pub stages: Vec<Box<dyn Job>>,
    pub stage_count: u32,
    /// Index and priority of the stage to start next.
    pub next_stage: u32,
    pub next_stage_prio: i64,
    /// Core that started the most recent stage.
    pub stage_start_core: CoreId,
    pub stolen: bool,
}

/// Per-core work deque: thieves take the top (front), the owner uses the
/// bottom (back).
#[derive(Clone, Debug, Default)]
pub struct TaskDeque {
    pub owner: CoreId,
    items: VecDeque<(TaskId, i64)>,
}

impl TaskDeque {
    pub fn new(owner: CoreId) -> Self {
        Self {
            owner,
            items: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Pushes at the bottom. Returns false if the push breaks the strictly
    /// decreasing top-to-bottom priority order.
    pub fn push_bottom(&mut self, task: TaskId, prio: i64) -> bool {
        let ok = self.items.back().is_none_or(|&(_, p)| p > prio);
        self.items.push_back((task, prio));
        ok
    }

    pub fn pop_bottom(&mut self) -> Option<(TaskId, i64)> {
        self.items.pop_back()
    }

    pub fn steal_top(&mut self) -> Option<(TaskId, i64)> {
        self.items.pop_front()
    }

    pub fn top(&self) -> Option<(TaskId, i64)> {
        self.items.front().copied()
    }

    pub fn priorities(&self) -> impl Iterator<Item = i64> + '_ {
        self.items.iter().map(|&(_, p)| p)
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.items
            .iter()
            .zip(self.items.iter().skip(1))
            .all(|(a, b)| a.1 > b.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn owner_and_thief_ends() {
        let mut d = TaskDeque::new(0);
        assert!(d.push_bottom(1, 5));
        assert!(d.push_bottom(2, 4));
        assert!(d.push_bottom(3, 3));
        assert_eq!(d.steal_top(), Some((1, 5)));
        assert_eq!(d.pop_bottom(), Some((3, 3)));
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn detects_order_violation() {
        let mut d = TaskDeque::new(0);
        assert!(d.push_bottom(1, 5));
        assert!(!d.push_bottom(2, 5));
        assert!(!d.is_strictly_decreasing());
    }
}
