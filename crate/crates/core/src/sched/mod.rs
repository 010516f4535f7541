//! Executors for fork-join computations on the simulated machine: priority
//! work stealing (PWS) with its distributed steal/task trees, randomized
//! work stealing (RWS), and a sequential executor.

mod engine;
pub mod prefix;
pub mod touch;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use engine::run;
pub use prefix::{PrefixResult, PrefixTree};
pub use touch::{TaskInfo, TouchLog};

use crate::compute::ceil_log2;
use crate::memsim::{AddrRange, CoreId, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Pws,
    Rws,
    Seq,
}

impl SchedulerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::Pws => "pws",
            SchedulerKind::Rws => "rws",
            SchedulerKind::Seq => "seq",
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pws" => Ok(Self::Pws),
            "rws" => Ok(Self::Rws),
            "seq" => Ok(Self::Seq),
            _ => Err(format!("unknown scheduler {s:?} (pws, rws, seq)")),
        }
    }
}

/// Optional logs kept during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraceOpts {
    /// fork/start/finish/steal/usurp records.
    pub tasks: bool,
    /// Stack frame pushes and releases.
    pub frames: bool,
    /// Per-task block sets for friendliness and sharing estimates.
    pub touches: bool,
}

#[derive(Clone, Debug)]
pub struct SchedConfig {
    pub kind: SchedulerKind,
    pub seed: u64,
    /// Skip ⌈√|τ|⌉ words before each frame.
    pub padded: bool,
    /// PWS: snapshot deque heads at phase start instead of phase end, so
    /// matched tasks may vanish before the grab.
    pub stress: bool,
    pub trace: TraceOpts,
}

impl SchedConfig {
    pub fn new(kind: SchedulerKind) -> Self {
        Self {
            kind,
            seed: 0,
            padded: false,
            stress: false,
            trace: TraceOpts::default(),
        }
    }
}

/// Scheduler steps in one PWS phase on `p` cores: publish, up-sweep,
/// down-sweep, match.
pub fn phase_steps(p: usize) -> u32 {
    2 * ceil_log2(p as u64) + PHASE_STEP_CONSTANT
}

/// The additive constant of the phase length (publish + match).
pub const PHASE_STEP_CONSTANT: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StealKind {
    Stolen,
    PseudoStolen,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StealRecord {
    pub tick: Tick,
    pub round: u64,
    pub priority: i64,
    pub thief: CoreId,
    pub victim: CoreId,
    pub task: u64,
    pub kind: StealKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskEventKind {
    Fork,
    Start,
    Finish,
    Steal,
    Usurp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub tick: Tick,
    pub core: CoreId,
    pub task: u64,
    pub event: TaskEventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub task: u64,
    pub core: CoreId,
    pub start: u64,
    pub len: u64,
    pub size: u64,
    pub pushed: Tick,
    pub popped: Tick,
}

impl FrameRecord {
    pub fn range(&self) -> AddrRange {
        AddrRange {
            start: self.start,
            len: self.len,
        }
    }
}

/// Stack extent used by a stolen task on its thief's stack while it ran.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StolenExtent {
    pub task: u64,
    pub size: u64,
    pub core: CoreId,
    pub start: u64,
    pub high_water: u64,
    pub from: Tick,
    pub to: Tick,
}

/// Counts of violated scheduler properties; all zero in a correct run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    /// Deque priorities not strictly decreasing top to bottom.
    pub deque_order: u64,
    /// A steal of priority ≥ d after a failed request in round d.
    pub steal_after_failure: u64,
    /// Priorities with more than p−1 stolen plus pseudo-stolen tasks.
    pub steals_per_priority: u64,
    /// Attempts above 2·p·D′.
    pub attempts_bound: u64,
    /// A round priority above its predecessor.
    pub round_order: u64,
    /// Steals from one victim not in top-down (decreasing priority) order.
    pub steal_order: u64,
    /// Collection boundaries with more than p−1 usurpations.
    pub usurpers: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.deque_order
            + self.steal_after_failure
            + self.steals_per_priority
            + self.attempts_bound
            + self.round_order
            + self.steal_order
            + self.usurpers
    }
}

/// Scheduler counters of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedStats {
    pub makespan: Tick,
    pub tasks: u64,
    pub steals: u64,
    pub pseudo_steals: u64,
    pub failed_steals: u64,
    pub steal_attempts: u64,
    pub steals_per_priority: BTreeMap<i64, u64>,
    pub pseudo_per_priority: BTreeMap<i64, u64>,
    /// Executed round priorities in order.
    pub rounds: Vec<i64>,
    /// D′: number of distinct round priorities.
    pub distinct_priorities: u64,
    pub phases: u64,
    /// Phases after which some thief was still waiting.
    pub retry_phases: u64,
    pub steps_per_phase: u32,
    pub sched_ticks: u64,
    /// Usurpations at sequenced-collection boundaries, keyed
    /// `(priority of the sequencing node, index of the next stage)`.
    #[serde(with = "entries")]
    pub usurpations: BTreeMap<(i64, u32), u64>,
    /// Joins where the last child finished on a core other than the forker.
    pub join_usurpations: u64,
    pub busy_ticks: Vec<u64>,
    pub idle_steal_wait: Vec<u64>,
    pub idle_upass_wait: Vec<u64>,
    pub steal_overhead: Vec<u64>,
    pub violations: Violations,
}

impl SchedStats {
    pub fn idle_total(&self) -> u64 {
        self.idle_steal_wait.iter().sum::<u64>() + self.idle_upass_wait.iter().sum::<u64>()
    }

    pub fn total_usurpations(&self) -> u64 {
        self.usurpations.values().sum()
    }

    pub fn max_usurpations_per_boundary(&self) -> u64 {
        self.usurpations.values().copied().max().unwrap_or(0)
    }

    pub fn max_steals_per_priority(&self) -> u64 {
        let mut all = self.steals_per_priority.clone();
        for (&k, &v) in &self.pseudo_per_priority {
            *all.entry(k).or_default() += v;
        }
        all.values().copied().max().unwrap_or(0)
    }
}

/// Serializes a map with tuple keys as a list of `[key, value]` pairs.
mod entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    type Map = BTreeMap<(i64, u32), u64>;

    pub fn serialize<S: Serializer>(m: &Map, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Map, D::Error> {
        let v: Vec<((i64, u32), u64)> = Vec::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

/// Everything a run produces besides the final memory image.
#[derive(Default)]
pub struct RunOutput {
    pub stats: SchedStats,
    pub steal_log: Vec<StealRecord>,
    pub task_log: Vec<TaskEvent>,
    pub frame_log: Vec<FrameRecord>,
    pub stolen_extents: Vec<StolenExtent>,
    pub touches: Option<TouchLog>,
}
