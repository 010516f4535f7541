use serde::{Deserialize, Serialize};

use crate::algos::{self, Algorithm, Instance, PrepOpts, Verification};
use crate::error::SimError;
use crate::memsim::{CostModel, MachineState, MemConfig};
use crate::sched::{self, RunOutput, SchedConfig, SchedulerKind, TraceOpts};

/// Everything that determines one simulated run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub alg: Algorithm,
    pub sched: SchedulerKind,
    pub n: usize,
    pub p: usize,
    /// Cache size M in words.
    pub m: u64,
    /// Block size B in words.
    pub b: u64,
    pub cost: CostModel,
    pub padded: bool,
    pub gapped: bool,
    pub stress: bool,
    pub seed: u64,
    /// Keep the memory event log.
    pub events: bool,
    /// Keep per-task block-touch sets.
    pub touches: bool,
    /// Keep task and frame logs.
    pub tasks: bool,
}

impl Experiment {
    pub fn new(alg: Algorithm, sched: SchedulerKind, n: usize, p: usize, m: u64, b: u64) -> Self {
        Self {
            alg,
            sched,
            n,
            p,
            m,
            b,
            cost: CostModel::default(),
            padded: false,
            gapped: false,
            stress: false,
            seed: 0,
            events: false,
            touches: false,
            tasks: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The same experiment on one core under the sequential executor.
    pub fn baseline(&self) -> Self {
        Self {
            sched: SchedulerKind::Seq,
            p: 1,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let pow2 = |v: u64| v != 0 && v.is_power_of_two();
        if self.p == 0 || self.p > 64 {
            return Err(SimError::InvalidConfig(format!(
                "p = {} outside 1..=64",
                self.p
            )));
        }
        if !pow2(self.m) || !pow2(self.b) {
            return Err(SimError::InvalidConfig(
                "M and B must be powers of two".into(),
            ));
        }
        if self.m < self.b {
            return Err(SimError::InvalidConfig(format!(
                "M = {} < B = {}",
                self.m, self.b
            )));
        }
        if self.sched == SchedulerKind::Seq && self.p != 1 {
            return Err(SimError::InvalidConfig(
                "the sequential executor needs p = 1".into(),
            ));
        }
        self.cost.validate()?;
        algos::check_size(self.alg, self.n)
    }

    pub fn mem_config(&self) -> Result<MemConfig, SimError> {
        let mut cfg = MemConfig::new(self.p, self.m, self.b);
        cfg.cost = self.cost;
        cfg.log_events = self.events;
        cfg.stack_words = algos::stack_words(self.alg, self.n, self.padded)?;
        Ok(cfg)
    }

    pub fn sched_config(&self) -> SchedConfig {
        let mut c = SchedConfig::new(self.sched);
        c.seed = self.seed;
        c.padded = self.padded;
        c.stress = self.stress;
        c.trace = TraceOpts {
            tasks: self.tasks,
            frames: self.tasks,
            touches: self.touches,
        };
        c
    }
}

/// A completed run with its final machine state.
pub struct RunRecord {
    pub exp: Experiment,
    pub ms: MachineState,
    pub out: RunOutput,
    pub verification: Verification,
    pub instance: Instance,
}

impl RunRecord {
    pub fn misses(&self) -> u64 {
        self.ms.counters().total_misses()
    }
}

pub fn execute(exp: &Experiment) -> Result<RunRecord, SimError> {
    exp.validate()?;
    let mut ms = MachineState::new(exp.mem_config()?)?;
    let opts = PrepOpts { gapped: exp.gapped };
    let (root, instance) = algos::prepare(exp.alg, exp.n, exp.seed, &mut ms, opts)?;
    let out = sched::run(&mut ms, root, &exp.sched_config())?;
    let verification = algos::verify(&instance, &ms);
    Ok(RunRecord {
        exp: exp.clone(),
        ms,
        out,
        verification,
        instance,
    })
}
