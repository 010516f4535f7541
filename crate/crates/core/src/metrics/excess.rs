use serde::{Deserialize, Serialize};

use super::bounds::{BoundEval, Params};
use super::run::{Experiment, RunRecord};
use crate::error::SimError;
use crate::memsim::MachineState;

/// Misses of a parallel run measured against its sequential baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    /// All misses of the one-core run.
    pub q_seq: u64,
    /// All misses of the parallel run.
    pub q_par: u64,
    /// Cold plus capacity misses of the parallel run.
    pub q_par_cold_capacity: u64,
    pub invalidation_misses: u64,
    /// max(0, cold + capacity − Q_seq).
    pub cache_excess: u64,
    /// Invalidation-miss latency in units of the miss cost.
    pub block_wait_total: f64,
    pub idle_total: u64,
    pub bounds: Vec<BoundEval>,
}

fn comparable(a: &Experiment, b: &Experiment) -> bool {
    let strip = |e: &Experiment| Experiment {
        sched: a.sched,
        p: a.p,
        seed: a.seed,
        events: false,
        touches: false,
        tasks: false,
        stress: false,
        ..e.clone()
    };
    strip(a) == strip(b)
}

/// Invalidation latency over all cores of `ms`, in miss units.
pub fn block_wait(ms: &MachineState) -> f64 {
    let ticks: u64 = ms.counters().invalidation_ticks.iter().sum();
    ticks as f64 / ms.config().cost.miss_cost as f64
}

/// Block wait of a run: invalidation latency over all cores in miss units.
pub fn block_wait_total(run: &RunRecord) -> f64 {
    block_wait(&run.ms)
}

pub fn compute_excess(run: &RunRecord, baseline: &RunRecord) -> Result<ExcessReport, SimError> {
    if !comparable(&run.exp, &baseline.exp) {
        return Err(SimError::InvalidConfig(
            "excess needs runs that differ only in scheduler, p and seed".into(),
        ));
    }
    let c = run.ms.counters();
    let q_seq = baseline.ms.counters().total_misses();
    let cc = c.total_cold_capacity();
    Ok(ExcessReport {
        q_seq,
        q_par: c.total_misses(),
        q_par_cold_capacity: cc,
        invalidation_misses: c.total_invalidation(),
        cache_excess: cc.saturating_sub(q_seq),
        block_wait_total: block_wait_total(run),
        idle_total: run.out.stats.idle_total(),
        bounds: Vec::new(),
    })
}

pub fn params(run: &RunRecord) -> Params {
    let e = &run.exp;
    Params {
        n: e.alg.input_len(e.n) as f64,
        p: e.p as f64,
        m: e.m as f64,
        b: e.b as f64,
        miss_cost: e.cost.miss_cost as f64,
        d_prime: run.out.stats.distinct_priorities as f64,
    }
}
