use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::RunRecord;
use crate::memsim::block_delay_in;

/// Per-core idle time split by what the core was waiting for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdleBreakdown {
    /// Waiting for a steal phase while work was available somewhere.
    pub steal_wait: Vec<u64>,
    /// Waiting with every deque empty, i.e. for up-pass joins to complete.
    pub upass_wait: Vec<u64>,
    pub total: u64,
    pub makespan: u64,
}

pub fn measure_idle(run: &RunRecord) -> IdleBreakdown {
    let s = &run.out.stats;
    IdleBreakdown {
        steal_wait: s.idle_steal_wait.clone(),
        upass_wait: s.idle_upass_wait.clone(),
        total: s.idle_total(),
        makespan: s.makespan,
    }
}

/// Block delay on the stack of one stolen task while it ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackDelay {
    pub task: u64,
    pub size: u64,
    pub blocks: u64,
    /// Largest delay over the task's stack blocks.
    pub max_delay: u64,
    pub total_delay: u64,
}

/// Stack block delay of every stolen task. Needs the event log.
pub fn stack_block_delay(run: &RunRecord) -> Vec<StackDelay> {
    let events = run.ms.events();
    let b = run.ms.config().block_words;
    run.out
        .stolen_extents
        .iter()
        .map(|x| {
            let (first, last) = (x.start / b, x.high_water.max(x.start + 1).div_ceil(b));
            let delays: Vec<u64> = (first..last)
                .map(|blk| block_delay_in(events, blk, x.from, x.to))
                .collect();
            StackDelay {
                task: x.task,
                size: x.size,
                blocks: last - first,
                max_delay: delays.iter().copied().max().unwrap_or(0),
                total_delay: delays.iter().sum(),
            }
        })
        .collect()
}

/// Largest block delay seen on the frame of any task larger than
/// `min_size`, over the frame's lifetime. Needs the event and frame logs.
pub fn frame_block_delay_above(run: &RunRecord, min_size: u64) -> u64 {
    let events = run.ms.events();
    let b = run.ms.config().block_words;
    run.out
        .frame_log
        .iter()
        .filter(|f| f.size > min_size)
        .flat_map(|f| {
            let r = f.range();
            (r.start / b..r.end().div_ceil(b))
                .map(move |blk| block_delay_in(events, blk, f.pushed, f.popped))
        })
        .max()
        .unwrap_or(0)
}

/// Invalidation misses on stack blocks, summed over cores.
pub fn stack_invalidations(run: &RunRecord) -> u64 {
    run.ms.counters().stack_invalidation_misses.iter().sum()
}

/// Measured friendliness and sharing for one task-size class
/// `[2^k, 2^(k+1))` words.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeClass {
    pub log_size: u32,
    pub tasks: u64,
    /// max over tasks of (#blocks − size/B)⁺.
    pub f_hat: f64,
    /// max over tasks of blocks written that parallel tasks also write.
    pub l_hat: u64,
}

/// Per size class f̂ and L̂ from the touch log. Empty without it.
pub fn estimate_fl(run: &RunRecord) -> Vec<SizeClass> {
    let Some(log) = &run.out.touches else {
        return Vec::new();
    };
    let b = run.ms.config().block_words as f64;
    let shared = log.shared_written();
    let mut classes: BTreeMap<u32, SizeClass> = BTreeMap::new();
    for (serial, t) in log.tasks.iter().enumerate() {
        if t.size == 0 {
            continue;
        }
        let k = t.size.ilog2();
        let c = classes.entry(k).or_insert(SizeClass {
            log_size: k,
            tasks: 0,
            f_hat: 0.0,
            l_hat: 0,
        });
        c.tasks += 1;
        c.f_hat = c.f_hat.max((t.blocks as f64 - t.size as f64 / b).max(0.0));
        c.l_hat = c
            .l_hat
            .max(shared.get(&(serial as u64)).copied().unwrap_or(0));
    }
    classes.into_values().collect()
}
