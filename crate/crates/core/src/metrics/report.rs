use serde::{Deserialize, Serialize};

use super::bounds::{self, check_bound, BoundEval};
use super::delay::{estimate_fl, measure_idle, IdleBreakdown, SizeClass};
use super::excess::{compute_excess, params, ExcessReport};
use super::run::{Experiment, RunRecord};
use crate::algos::{Algorithm, Verification};
use crate::error::SimError;
use crate::memsim::MemCounters;
use crate::sched::{SchedStats, SchedulerKind};

/// Outcome of one invariant check of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// The JSON report of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub config: Experiment,
    pub verification: Verification,
    pub counters: MemCounters,
    pub sched: SchedStats,
    pub max_writes_per_variable: u32,
    pub write_budget: u32,
    pub excess: Option<ExcessReport>,
    pub bounds: Vec<BoundEval>,
    pub idle: IdleBreakdown,
    pub friendliness: Vec<SizeClass>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn is_bp_scan(alg: Algorithm) -> bool {
    matches!(
        alg,
        Algorithm::Msum
            | Algorithm::MatrixAdd
            | Algorithm::MtBi
            | Algorithm::RmToBi
            | Algorithm::BiToRmDirect
    )
}

/// Bound evaluations that apply to `run`, using the frozen constants.
pub fn evaluate_bounds(run: &RunRecord, ex: Option<&ExcessReport>) -> Vec<BoundEval> {
    let q = params(run);
    let s = &run.out.stats;
    let mut out = Vec::new();
    if run.exp.sched == SchedulerKind::Pws {
        out.push(check_bound(
            &bounds::STEALS_PER_PRIORITY,
            &q,
            s.max_steals_per_priority() as f64,
            1.0,
        ));
        out.push(check_bound(
            &bounds::STEAL_ATTEMPTS,
            &q,
            s.steal_attempts as f64,
            1.0,
        ));
        out.push(check_bound(
            &bounds::USURPERS,
            &q,
            s.max_usurpations_per_boundary() as f64,
            1.0,
        ));
    }
    if let Some(ex) = ex {
        if is_bp_scan(run.exp.alg) {
            out.push(check_bound(
                &bounds::CACHE_EXCESS,
                &q,
                ex.cache_excess as f64,
                bounds::C_CACHE_EXCESS,
            ));
        }
        if run.exp.alg == Algorithm::Msum {
            out.push(check_bound(
                &bounds::BLOCK_EXCESS,
                &q,
                ex.block_wait_total,
                bounds::C_BLOCK_EXCESS,
            ));
            let upass: u64 = s.idle_upass_wait.iter().sum();
            out.push(check_bound(
                &bounds::UPASS_IDLE,
                &q,
                upass as f64,
                bounds::C_UPASS_IDLE,
            ));
        }
        if run.exp.alg == Algorithm::Strassen {
            out.push(check_bound(
                &bounds::STRASSEN_EXCESS,
                &q,
                ex.cache_excess as f64,
                bounds::C_STRASSEN_EXCESS,
            ));
        }
    }
    out
}

/// Builds the report of `run`; `baseline` is its sequential counterpart.
pub fn build_report(run: &RunRecord, baseline: Option<&RunRecord>) -> Result<Report, SimError> {
    let mut excess = baseline.map(|b| compute_excess(run, b)).transpose()?;
    let evals = evaluate_bounds(run, excess.as_ref());
    let budget = run.exp.alg.spec().write_budget;
    let (max_writes, at) = run.ms.max_writes_per_variable();
    let v = &run.out.stats.violations;
    let mut checks = vec![
        Check {
            name: "output".into(),
            pass: run.verification.ok,
            detail: format!(
                "{} mismatches, max |err| {:e}",
                run.verification.mismatches, run.verification.max_abs_err
            ),
        },
        Check {
            name: "limited-access".into(),
            pass: max_writes <= budget,
            detail: format!("max {max_writes} writes (at {at:?}), budget {budget}"),
        },
    ];
    if run.exp.sched == SchedulerKind::Pws {
        checks.push(Check {
            name: "scheduler-invariants".into(),
            pass: v.total() == 0,
            detail: format!("{v:?}"),
        });
    }
    if let Some(b) = baseline {
        checks.push(Check {
            name: "baseline-output".into(),
            pass: b.verification.ok,
            detail: format!("{} mismatches", b.verification.mismatches),
        });
    }
    for e in &evals {
        checks.push(Check {
            name: format!("bound {}", e.name),
            pass: e.pass,
            detail: match &e.skipped {
                Some(why) => format!("skipped: {why}"),
                None => format!(
                    "measured {} vs {} x {:.3}, ratio {:.4}",
                    e.measured, e.c_max, e.formula, e.ratio
                ),
            },
        });
    }
    if let Some(ex) = excess.as_mut() {
        ex.bounds = evals.clone();
    }
    Ok(Report {
        config: run.exp.clone(),
        verification: run.verification.clone(),
        counters: run.ms.counters().clone(),
        sched: run.out.stats.clone(),
        max_writes_per_variable: max_writes,
        write_budget: budget,
        excess,
        bounds: evals,
        idle: measure_idle(run),
        friendliness: estimate_fl(run),
        checks,
    })
}

/// Column names of [`csv_row`], in order.
pub const CSV_COLUMNS: &[&str] = &[
    "alg",
    "sched",
    "n",
    "p",
    "M",
    "B",
    "hit_cost",
    "miss_cost",
    "steal_cost",
    "sched_interval",
    "padded",
    "gapped",
    "seed",
    "makespan",
    "hits",
    "cold_misses",
    "capacity_misses",
    "invalidation_misses",
    "stack_invalidation_misses",
    "upgrades",
    "queue_ticks",
    "invalidation_ticks",
    "reads",
    "writes",
    "steals",
    "pseudo_steals",
    "failed_steals",
    "steal_attempts",
    "phases",
    "steps_per_phase",
    "usurpations",
    "join_usurpations",
    "idle_steal_wait",
    "idle_upass_wait",
    "max_writes",
    "violations",
    "q_seq",
    "cache_excess",
    "block_wait_total",
    "ratio_steals_per_priority",
    "ratio_steal_attempts",
    "ratio_usurpers",
    "ratio_cache_excess",
    "ratio_block_excess",
    "ratio_upass_idle",
    "ratio_strassen_excess",
    "ok",
];

/// One CSV row of the report, matching [`CSV_COLUMNS`].
pub fn csv_row(r: &Report) -> Vec<String> {
    let c = &r.config;
    let k = &r.counters;
    let s = &r.sched;
    let sum = |v: &Vec<u64>| v.iter().sum::<u64>().to_string();
    let ratio = |name: &str| {
        r.bounds
            .iter()
            .find(|b| b.name.starts_with(name))
            .map(|b| format!("{:.6}", b.ratio))
            .unwrap_or_default()
    };
    let ex = r.excess.as_ref();
    vec![
        c.alg.name().to_string(),
        c.sched.as_str().to_string(),
        c.n.to_string(),
        c.p.to_string(),
        c.m.to_string(),
        c.b.to_string(),
        c.cost.hit_cost.to_string(),
        c.cost.miss_cost.to_string(),
        c.cost.steal_cost.to_string(),
        c.cost.sched_interval.to_string(),
        c.padded.to_string(),
        c.gapped.to_string(),
        c.seed.to_string(),
        s.makespan.to_string(),
        sum(&k.hits),
        sum(&k.cold_misses),
        sum(&k.capacity_misses),
        sum(&k.invalidation_misses),
        sum(&k.stack_invalidation_misses),
        sum(&k.upgrades),
        sum(&k.queue_ticks),
        sum(&k.invalidation_ticks),
        sum(&k.reads),
        sum(&k.writes),
        s.steals.to_string(),
        s.pseudo_steals.to_string(),
        s.failed_steals.to_string(),
        s.steal_attempts.to_string(),
        s.phases.to_string(),
        s.steps_per_phase.to_string(),
        s.total_usurpations().to_string(),
        s.join_usurpations.to_string(),
        sum(&s.idle_steal_wait),
        sum(&s.idle_upass_wait),
        r.max_writes_per_variable.to_string(),
        s.violations.total().to_string(),
        ex.map(|e| e.q_seq.to_string()).unwrap_or_default(),
        ex.map(|e| e.cache_excess.to_string()).unwrap_or_default(),
        ex.map(|e| format!("{:.3}", e.block_wait_total))
            .unwrap_or_default(),
        ratio("steals-per-priority"),
        ratio("steal-attempts"),
        ratio("usurpers"),
        ratio("cache-excess"),
        ratio("block-excess"),
        ratio("upass-idle"),
        ratio("strassen-excess"),
        r.passed().to_string(),
    ]
}
