use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use super::{
    phase_steps, FrameRecord, PrefixTree, RunOutput, SchedConfig, SchedStats, SchedulerKind,
    StealKind, StealRecord, StolenExtent, TaskEvent, TaskEventKind, TouchLog,
};
use crate::compute::{
    child_priority, pad_gap, root_priority, Access, Ctx, ExecutionStack, Expansion, Job, NodeKind,
    TaskDeque, TaskId, TaskNode, TaskState,
};
use crate::error::SimError;
use crate::memsim::{CoreId, MachineState, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum After {
    Nothing,
    Expand,
    Finish,
    Forked(TaskId, TaskId),
    Joined {
        parent: TaskId,
        last: bool,
    },
    /// RWS: make one steal attempt.
    Steal,
}

struct CoreRt {
    clock: Tick,
    task: Option<TaskId>,
    /// Priority of the kernel being executed, for the flagged bound.
    exec_prio: Option<i64>,
    ops: Vec<Access>,
    pos: usize,
    body_serial: u64,
    after: After,
    idle: bool,
    idle_mark: Tick,
    open_extents: Vec<usize>,
}

impl CoreRt {
    fn busy(&self) -> bool {
        !self.idle
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Entry {
    Idle,
    Head {
        task: TaskId,
        serial: u64,
        prio: i64,
    },
    Flagged(i64),
}

struct Phase {
    end: Tick,
    thieves: Vec<CoreId>,
    snapshot: Option<Vec<Entry>>,
}

struct PwsState {
    round: Option<i64>,
    round_no: u64,
    pending: BTreeMap<CoreId, Tick>,
    phase: Option<Phase>,
    last_end: Tick,
    steal_tree: PrefixTree,
    task_tree: PrefixTree,
    failed_in_round: BTreeSet<CoreId>,
    failure_in_round: bool,
    /// Last priority stolen from each victim since it last acquired work by
    /// stealing.
    last_victim_prio: Vec<Option<i64>>,
    barren_phases: u64,
}

struct Engine<'a> {
    ms: &'a mut MachineState,
    cfg: &'a SchedConfig,
    p: usize,
    tasks: Vec<Option<TaskNode>>,
    free: Vec<TaskId>,
    next_serial: u64,
    cores: Vec<CoreRt>,
    deques: Vec<TaskDeque>,
    stacks: Vec<ExecutionStack>,
    heap: BinaryHeap<Reverse<(Tick, CoreId)>>,
    done: bool,
    out: RunOutput,
    stats: SchedStats,
    touches: Option<TouchLog>,
    open_frames: FxHashMap<u64, usize>,
    pws: PwsState,
    rng: ChaCha8Rng,
}

/// Runs `root` to completion on `ms` under the configured scheduler.
pub fn run(
    ms: &mut MachineState,
    root: Box<dyn Job>,
    cfg: &SchedConfig,
) -> Result<RunOutput, SimError> {
    let p = ms.config().cores;
    let mut e = Engine {
        p,
        tasks: Vec::new(),
        free: Vec::new(),
        next_serial: 0,
        cores: (0..p)
            .map(|_| CoreRt {
                clock: 0,
                task: None,
                exec_prio: None,
                ops: Vec::new(),
                pos: 0,
                body_serial: 0,
                after: After::Nothing,
                idle: true,
                idle_mark: 0,
                open_extents: Vec::new(),
            })
            .collect(),
        deques: (0..p).map(TaskDeque::new).collect(),
        stacks: (0..p)
            .map(|c| ExecutionStack::new(c, ms.stack_arena(c)))
            .collect(),
        heap: BinaryHeap::new(),
        done: false,
        out: RunOutput::default(),
        stats: SchedStats {
            busy_ticks: vec![0; p],
            idle_steal_wait: vec![0; p],
            idle_upass_wait: vec![0; p],
            steal_overhead: vec![0; p],
            steps_per_phase: phase_steps(p),
            ..SchedStats::default()
        },
        touches: cfg.trace.touches.then(TouchLog::default),
        open_frames: FxHashMap::default(),
        pws: PwsState {
            round: None,
            round_no: 0,
            pending: BTreeMap::new(),
            phase: None,
            last_end: 0,
            steal_tree: PrefixTree::new(p),
            task_tree: PrefixTree::new(p),
            failed_in_round: BTreeSet::new(),
            failure_in_round: false,
            last_victim_prio: vec![None; p],
            barren_phases: 0,
        },
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        ms,
        cfg,
    };
    e.execute(root)?;
    Ok(e.finish())
}

impl<'a> Engine<'a> {
    fn task(&self, id: TaskId) -> &TaskNode {
        self.tasks[id].as_ref().expect("dangling task id")
    }

    fn task_mut(&mut self, id: TaskId) -> &mut TaskNode {
        self.tasks[id].as_mut().expect("dangling task id")
    }

    fn log(&mut self, core: CoreId, task: u64, event: TaskEventKind) {
        if self.cfg.trace.tasks {
            self.out.task_log.push(TaskEvent {
                tick: self.cores[core].clock,
                core,
                task,
                event,
            });
        }
    }

    fn new_task(
        &mut self,
        job: Box<dyn Job>,
        parent: Option<TaskId>,
        index: u32,
        priority: i64,
        depth: u32,
    ) -> TaskId {
        let serial = self.next_serial;
        self.next_serial += 1;
        if let Some(t) = self.touches.as_mut() {
            let ps = parent.map(|p| self.tasks[p].as_ref().unwrap().serial);
            t.open(serial, ps, job.size(), job.label());
        }
        let node = TaskNode {
            size: job.size(),
            job,
            serial,
            kind: NodeKind::Pending,
            depth,
            priority,
            parent,
            index,
            join_counter: 0,
            frame: None,
            frame_core: 0,
            state: TaskState::Pending,
            kernel_core: 0,
            start_core: 0,
            start_tick: 0,
            stages: Vec::new(),
            stage_count: 0,
            next_stage: 0,
            next_stage_prio: 0,
            stage_start_core: 0,
            stolen: false,
        };
        match self.free.pop() {
            Some(id) => {
                self.tasks[id] = Some(node);
                id
            }
            None => {
                self.tasks.push(Some(node));
                self.tasks.len() - 1
            }
        }
    }

    fn execute(&mut self, root: Box<dyn Job>) -> Result<(), SimError> {
        let prio = root_priority(root.as_ref());
        let id = self.new_task(root, None, 0, prio, 0);
        self.cores[0].idle = false;
        self.start_task(0, id)?;
        self.heap.push(Reverse((0, 0)));
        for c in 1..self.p {
            match self.cfg.kind {
                SchedulerKind::Pws => {
                    self.pws.pending.insert(c, 0);
                }
                SchedulerKind::Rws => {
                    self.cores[c].idle = false;
                    self.cores[c].after = After::Steal;
                    self.heap.push(Reverse((0, c)));
                }
                SchedulerKind::Seq => {}
            }
        }
        while !self.done {
            let next_core = self.heap.peek().map(|r| r.0);
            let next_phase = self.next_phase_event();
            match (next_core, next_phase) {
                (None, None) => {
                    return Err(SimError::Deadlock {
                        tick: self.cores.iter().map(|c| c.clock).max().unwrap_or(0),
                        detail: "no core can run and no steal phase is pending".into(),
                    })
                }
                (Some((t, _)), Some(tp)) if t > tp => self.phase_event(tp)?,
                (None, Some(tp)) => self.phase_event(tp)?,
                (Some(_), tp) => {
                    let Reverse((_, c)) = self.heap.pop().unwrap();
                    let mut limit = self
                        .heap
                        .peek()
                        .map(|r| r.0)
                        .unwrap_or((Tick::MAX, usize::MAX));
                    if let Some(tp) = tp {
                        limit = limit.min((tp, usize::MAX));
                    }
                    self.run_core(c, limit)?;
                }
            }
        }
        Ok(())
    }

    /// Runs events of core `c` until it passes `limit`, goes idle, or the
    /// computation ends.
    fn run_core(&mut self, c: CoreId, limit: (Tick, CoreId)) -> Result<(), SimError> {
        loop {
            self.core_event(c)?;
            if self.done || !self.cores[c].busy() {
                return Ok(());
            }
            if (self.cores[c].clock, c) > limit {
                break;
            }
        }
        self.heap.push(Reverse((self.cores[c].clock, c)));
        Ok(())
    }

    fn core_event(&mut self, c: CoreId) -> Result<(), SimError> {
        let core = &mut self.cores[c];
        if core.pos < core.ops.len() {
            let a = core.ops[core.pos];
            core.pos += 1;
            let t = core.clock;
            let latency = match a {
                Access::Read(x) => self.ms.read(c, x, t)?.1,
                Access::Write(x, w) => self.ms.write(c, x, w, t)?,
            };
            let core = &mut self.cores[c];
            core.clock += latency;
            self.stats.busy_ticks[c] += latency;
            if let Some(tl) = self.touches.as_mut() {
                let addr = a.addr();
                if !self.ms.is_stack_addr(addr) {
                    tl.touch(
                        core.body_serial,
                        self.ms.block_of(addr),
                        matches!(a, Access::Write(..)),
                    );
                }
            }
            return Ok(());
        }
        let after = std::mem::replace(&mut core.after, After::Nothing);
        match after {
            After::Nothing => Err(SimError::Internal(format!(
                "core {c} busy with nothing to do"
            ))),
            After::Expand => self.expand(c),
            After::Finish => self.complete(c),
            After::Forked(l, r) => {
                let (rprio, rserial) = {
                    let t = self.task(r);
                    (t.priority, t.serial)
                };
                if !self.deques[c].push_bottom(r, rprio) {
                    self.stats.violations.deque_order += 1;
                }
                self.log(c, rserial, TaskEventKind::Fork);
                self.start_task(c, l)
            }
            After::Joined { parent, last } => {
                if last {
                    let (kc, serial) = {
                        let t = self.task(parent);
                        (t.kernel_core, t.serial)
                    };
                    if kc != c {
                        self.stats.join_usurpations += 1;
                        self.log(c, serial, TaskEventKind::Usurp);
                    }
                    self.resume_tail(c, parent);
                    Ok(())
                } else {
                    self.find_work(c)
                }
            }
            After::Steal => self.rws_attempt(c),
        }
    }

    fn load_body(&mut self, c: CoreId, id: TaskId, head: bool) {
        let t = self.tasks[id].as_ref().expect("dangling task id");
        let mut cx = Ctx::new(self.ms, t.frame.map(|r| r.start));
        if head {
            t.job.head(&mut cx);
        } else {
            t.job.tail(&mut cx);
        }
        let serial = t.serial;
        let core = &mut self.cores[c];
        core.ops = cx.into_ops();
        core.pos = 0;
        core.body_serial = serial;
    }

    fn start_task(&mut self, c: CoreId, id: TaskId) -> Result<(), SimError> {
        let clock = self.cores[c].clock;
        let padded = self.cfg.padded;
        let (fw, size, serial, prio) = {
            let t = self.task_mut(id);
            t.state = TaskState::Running;
            t.kernel_core = c;
            t.start_core = c;
            t.start_tick = clock;
            (t.job.frame_words(), t.size, t.serial, t.priority)
        };
        if fw > 0 {
            let gap = if padded { pad_gap(size) } else { 0 };
            let range = self.stacks[c].push(fw, gap)?;
            self.ms.fresh_variables(range);
            let t = self.task_mut(id);
            t.frame = Some(range);
            t.frame_core = c;
            let top = self.stacks[c].top();
            for &i in &self.cores[c].open_extents {
                let x = &mut self.out.stolen_extents[i];
                x.high_water = x.high_water.max(top);
            }
            if self.cfg.trace.frames {
                self.open_frames.insert(serial, self.out.frame_log.len());
                self.out.frame_log.push(FrameRecord {
                    task: serial,
                    core: c,
                    start: range.start,
                    len: range.len,
                    size,
                    pushed: clock,
                    popped: 0,
                });
            }
        }
        self.stats.tasks += 1;
        self.cores[c].task = Some(id);
        self.cores[c].exec_prio = Some(prio);
        self.log(c, serial, TaskEventKind::Start);
        self.load_body(c, id, true);
        self.cores[c].after = After::Expand;
        Ok(())
    }

    fn expand(&mut self, c: CoreId) -> Result<(), SimError> {
        let id = self.cores[c]
            .task
            .ok_or_else(|| SimError::Internal("expand without task".into()))?;
        let (exp, frame, prio, levels, align, depth, serial) = {
            let t = self.task(id);
            let frame = t.frame.map(|r| r.start);
            (
                t.job.expand(frame),
                frame,
                t.priority,
                t.job.levels(),
                t.job.align_children(),
                t.depth,
                t.serial,
            )
        };
        match exp {
            Expansion::Leaf => {
                self.set_kind(id, serial, NodeKind::BpLeaf);
                self.load_body(c, id, false);
                self.cores[c].after = After::Finish;
            }
            Expansion::Fork(l, r) => {
                self.set_kind(id, serial, NodeKind::BpFork);
                let lp = child_priority(prio, levels, l.levels(), align);
                let rp = child_priority(prio, levels, r.levels(), align);
                let lt = self.new_task(l, Some(id), 0, lp, depth + 1);
                let rt = self.new_task(r, Some(id), 1, rp, depth + 1);
                let t = self.task_mut(id);
                t.join_counter = 2;
                t.state = TaskState::Suspended;
                let core = &mut self.cores[c];
                core.ops.clear();
                core.pos = 0;
                core.body_serial = serial;
                if let Some(f) = frame {
                    core.ops.push(Access::Write(f, 2));
                }
                core.after = After::Forked(lt, rt);
            }
            Expansion::Seq(stages) => {
                self.set_kind(id, serial, NodeKind::HbpCall);
                if stages.is_empty() {
                    self.load_body(c, id, false);
                    self.cores[c].after = After::Finish;
                    return Ok(());
                }
                let t = self.task_mut(id);
                t.stage_count = stages.len() as u32;
                t.stages = stages;
                t.stages.reverse();
                t.next_stage = 0;
                t.next_stage_prio = prio - 1;
                t.state = TaskState::Suspended;
                t.stage_start_core = c;
                self.start_next_stage(c, id)?;
            }
        }
        Ok(())
    }

    fn set_kind(&mut self, id: TaskId, serial: u64, kind: NodeKind) {
        self.task_mut(id).kind = kind;
        if let Some(t) = self.touches.as_mut() {
            t.set_kind(serial, kind);
        }
    }

    fn start_next_stage(&mut self, c: CoreId, id: TaskId) -> Result<(), SimError> {
        let (job, idx, prio, depth) = {
            let t = self.task_mut(id);
            let job = t.stages.pop().expect("no stage left");
            let idx = t.next_stage;
            let prio = t.next_stage_prio;
            t.next_stage += 1;
            t.next_stage_prio -= job.levels() as i64;
            (job, idx, prio, t.depth)
        };
        let sid = self.new_task(job, Some(id), idx, prio, depth + 1);
        self.start_task(c, sid)
    }

    fn resume_tail(&mut self, c: CoreId, id: TaskId) {
        let t = self.task_mut(id);
        t.kernel_core = c;
        t.state = TaskState::Running;
        let prio = t.priority;
        self.cores[c].task = Some(id);
        self.cores[c].exec_prio = Some(prio);
        self.load_body(c, id, false);
        self.cores[c].after = After::Finish;
    }

    fn complete(&mut self, c: CoreId) -> Result<(), SimError> {
        let id = self.cores[c]
            .task
            .take()
            .ok_or_else(|| SimError::Internal("finish without task".into()))?;
        let mut t = self.tasks[id].take().expect("dangling task id");
        self.free.push(id);
        t.state = TaskState::Done;
        let clock = self.cores[c].clock;
        if let Some(r) = t.frame {
            self.stacks[t.frame_core].pop(r)?;
            if let Some(i) = self.open_frames.remove(&t.serial) {
                self.out.frame_log[i].popped = clock;
            }
        }
        if let Some(tl) = self.touches.as_mut() {
            tl.close(t.serial);
        }
        self.log(c, t.serial, TaskEventKind::Finish);
        if t.stolen {
            for core in self.cores.iter_mut() {
                if let Some(k) = core
                    .open_extents
                    .iter()
                    .position(|&i| self.out.stolen_extents[i].task == t.serial)
                {
                    let i = core.open_extents.swap_remove(k);
                    self.out.stolen_extents[i].to = clock;
                }
            }
        }
        let Some(pid) = t.parent else {
            self.done = true;
            self.stats.makespan = clock;
            return Ok(());
        };
        let (kind, frame, pserial, pprio) = {
            let p = self.task(pid);
            (p.kind, p.frame, p.serial, p.priority)
        };
        match kind {
            NodeKind::BpFork => {
                let p = self.task_mut(pid);
                if p.join_counter == 0 {
                    return Err(SimError::Internal(format!("double join on task {pserial}")));
                }
                p.join_counter -= 1;
                let last = p.join_counter == 0;
                let counter = p.join_counter as u64;
                let core = &mut self.cores[c];
                core.ops.clear();
                core.pos = 0;
                core.body_serial = pserial;
                core.exec_prio = Some(pprio);
                if let Some(f) = frame {
                    core.ops.push(Access::Read(f.start));
                    core.ops.push(Access::Write(f.start, counter));
                }
                core.after = After::Joined { parent: pid, last };
                Ok(())
            }
            NodeKind::HbpCall => {
                let (remaining, starter, next, count) = {
                    let p = self.task(pid);
                    (
                        !p.stages.is_empty(),
                        p.stage_start_core,
                        p.next_stage,
                        p.stage_count,
                    )
                };
                let boundary = if remaining { next } else { count };
                if starter != c {
                    *self.stats.usurpations.entry((pprio, boundary)).or_default() += 1;
                    self.log(c, pserial, TaskEventKind::Usurp);
                }
                if remaining {
                    let p = self.task_mut(pid);
                    p.stage_start_core = c;
                    p.kernel_core = c;
                    self.start_next_stage(c, pid)
                } else {
                    self.resume_tail(c, pid);
                    Ok(())
                }
            }
            k => Err(SimError::Internal(format!(
                "child finished under a {} node",
                k.as_str()
            ))),
        }
    }

    fn find_work(&mut self, c: CoreId) -> Result<(), SimError> {
        if let Some((id, _)) = self.deques[c].pop_bottom() {
            return self.start_task(c, id);
        }
        let core = &mut self.cores[c];
        core.task = None;
        core.exec_prio = None;
        core.ops.clear();
        core.pos = 0;
        core.idle_mark = core.clock;
        match self.cfg.kind {
            SchedulerKind::Pws => {
                core.idle = true;
                self.pws.pending.insert(c, core.clock);
            }
            SchedulerKind::Seq => core.idle = true,
            SchedulerKind::Rws => core.after = After::Steal,
        }
        Ok(())
    }

    fn rws_attempt(&mut self, c: CoreId) -> Result<(), SimError> {
        let cost = self.ms.config().cost.steal_cost;
        let before = self.cores[c].clock;
        let v = if self.p == 1 {
            0
        } else {
            let r = self.rng.gen_range(0..self.p - 1);
            if r >= c {
                r + 1
            } else {
                r
            }
        };
        self.stats.steal_attempts += 1;
        self.stats.steal_overhead[c] += cost;
        let core = &mut self.cores[c];
        self.stats.idle_steal_wait[c] += before - core.idle_mark;
        core.clock = before + cost;
        core.idle_mark = core.clock;
        match self.deques[v].steal_top() {
            Some((id, prio)) => {
                self.record_steal(c, v, id, prio, before);
                self.start_task(c, id)
            }
            None => {
                self.stats.failed_steals += 1;
                self.cores[c].after = After::Steal;
                Ok(())
            }
        }
    }

    fn record_steal(&mut self, thief: CoreId, victim: CoreId, id: TaskId, prio: i64, tick: Tick) {
        self.stats.steals += 1;
        *self.stats.steals_per_priority.entry(prio).or_default() += 1;
        let serial = self.task(id).serial;
        self.task_mut(id).stolen = true;
        if let Some(t) = self.touches.as_mut() {
            t.mark_stolen(serial);
        }
        self.out.steal_log.push(StealRecord {
            tick,
            round: self.pws.round_no,
            priority: prio,
            thief,
            victim,
            task: serial,
            kind: StealKind::Stolen,
        });
        let top = self.stacks[thief].top();
        self.cores[thief]
            .open_extents
            .push(self.out.stolen_extents.len());
        self.out.stolen_extents.push(StolenExtent {
            task: serial,
            size: self.task(id).size,
            core: thief,
            start: top,
            high_water: top,
            from: self.cores[thief].clock,
            to: 0,
        });
        self.log(thief, serial, TaskEventKind::Steal);
    }

    fn next_phase_event(&self) -> Option<Tick> {
        if self.cfg.kind != SchedulerKind::Pws {
            return None;
        }
        if let Some(ph) = &self.pws.phase {
            return Some(ph.end);
        }
        let first = self.pws.pending.values().copied().min()?;
        Some(first.max(self.pws.last_end))
    }

    fn entries(&self) -> Vec<Entry> {
        (0..self.p)
            .map(|c| match self.deques[c].top() {
                Some((task, prio)) => Entry::Head {
                    task,
                    serial: self.task(task).serial,
                    prio,
                },
                None if self.cores[c].busy() => match self.cores[c].exec_prio {
                    Some(e) => Entry::Flagged(e - 1),
                    None => Entry::Flagged(i64::MAX),
                },
                None => Entry::Idle,
            })
            .collect()
    }

    fn phase_event(&mut self, t: Tick) -> Result<(), SimError> {
        match self.pws.phase.take() {
            None => {
                let thieves: Vec<CoreId> = self.pws.pending.keys().copied().collect();
                let snapshot = self.cfg.stress.then(|| self.entries());
                let cost = self.ms.config().cost;
                let duration =
                    self.stats.steps_per_phase as u64 * (cost.sched_interval + cost.miss_cost);
                self.stats.phases += 1;
                self.stats.sched_ticks += duration;
                self.pws.phase = Some(Phase {
                    end: t + duration,
                    thieves,
                    snapshot,
                });
                Ok(())
            }
            Some(ph) => self.end_phase(t, ph),
        }
    }

    fn end_phase(&mut self, t1: Tick, ph: Phase) -> Result<(), SimError> {
        self.pws.last_end = t1;
        let entries = match ph.snapshot {
            Some(s) => s,
            None => self.entries(),
        };
        let any_work = self.deques.iter().any(|d| !d.is_empty());
        for &c in self.pws.pending.keys() {
            let core = &mut self.cores[c];
            let dt = t1.saturating_sub(core.idle_mark);
            if any_work {
                self.stats.idle_steal_wait[c] += dt;
            } else {
                self.stats.idle_upass_wait[c] += dt;
            }
            core.idle_mark = t1;
        }

        let heads_max = |entries: &[Entry]| {
            entries
                .iter()
                .filter_map(|e| match *e {
                    Entry::Head { prio, .. } => Some(prio),
                    Entry::Flagged(b) => Some(b),
                    Entry::Idle => None,
                })
                .max()
        };
        if self.pws.round.is_none() {
            if let Some(d) = heads_max(&entries) {
                self.begin_round(d);
            }
        }
        let mut blockers = false;
        let mut matching: Vec<(CoreId, TaskId, u64, i64)> = Vec::new();
        for _ in 0..3 {
            let Some(d) = self.pws.round else { break };
            blockers = entries
                .iter()
                .any(|e| matches!(*e, Entry::Flagged(b) if b >= d));
            matching = entries
                .iter()
                .enumerate()
                .filter_map(|(v, e)| match *e {
                    Entry::Head { task, serial, prio } if prio == d => {
                        Some((v, task, serial, prio))
                    }
                    _ => None,
                })
                .collect();
            if !matching.is_empty() || blockers {
                break;
            }
            match heads_max(&entries) {
                Some(nd) => {
                    if nd > d {
                        self.stats.violations.round_order += 1;
                    }
                    self.begin_round(nd);
                }
                None => break,
            }
        }

        // Distributed ranking on the steal and task trees.
        let thief_flags: Vec<bool> = (0..self.p).map(|c| ph.thieves.contains(&c)).collect();
        let mut task_flags = vec![false; self.p];
        for m in &matching {
            task_flags[m.0] = true;
        }
        let keys: Vec<Option<i64>> = entries
            .iter()
            .map(|e| match *e {
                Entry::Head { prio, .. } => Some(prio),
                Entry::Flagged(b) => Some(b),
                Entry::Idle => None,
            })
            .collect();
        let s = self.pws.steal_tree.run(&thief_flags, &[]);
        let tr = self.pws.task_tree.run(&task_flags, &keys);
        let steps = 1 + s.up_steps.max(tr.up_steps) + s.down_steps.max(tr.down_steps) + 1;
        if steps != self.stats.steps_per_phase {
            return Err(SimError::Internal(format!(
                "phase took {steps} steps, expected {}",
                self.stats.steps_per_phase
            )));
        }
        let mut thieves_by_rank = vec![usize::MAX; s.total as usize];
        for &c in &ph.thieves {
            thieves_by_rank[s.rank[c] as usize] = c;
        }
        let mut progress = false;
        let cost = self.ms.config().cost.steal_cost;
        for (victim, task, serial, prio) in matching {
            let rank = tr.rank[victim] as usize;
            if rank >= thieves_by_rank.len() {
                break;
            }
            let thief = thieves_by_rank[rank];
            thieves_by_rank[rank] = usize::MAX;
            self.stats.steal_attempts += 1;
            let present = self.deques[victim].top() == Some((task, prio))
                && self.tasks[task]
                    .as_ref()
                    .is_some_and(|t| t.serial == serial);
            if !present {
                self.stats.pseudo_steals += 1;
                *self.stats.pseudo_per_priority.entry(prio).or_default() += 1;
                self.out.steal_log.push(StealRecord {
                    tick: t1,
                    round: self.pws.round_no,
                    priority: prio,
                    thief,
                    victim,
                    task: serial,
                    kind: StealKind::PseudoStolen,
                });
                continue;
            }
            self.deques[victim].steal_top();
            progress = true;
            if self.pws.failure_in_round && prio >= self.pws.round.unwrap_or(i64::MIN) {
                self.stats.violations.steal_after_failure += 1;
            }
            if let Some(last) = self.pws.last_victim_prio[victim] {
                if prio >= last {
                    self.stats.violations.steal_order += 1;
                }
            }
            self.pws.last_victim_prio[victim] = Some(prio);
            self.pws.last_victim_prio[thief] = None;
            self.pws.pending.remove(&thief);
            let core = &mut self.cores[thief];
            core.idle = false;
            core.clock = t1 + cost;
            self.stats.steal_overhead[thief] += cost;
            self.record_steal(thief, victim, task, prio, t1);
            self.start_task(thief, task)?;
            self.heap.push(Reverse((self.cores[thief].clock, thief)));
        }
        let waiting: Vec<CoreId> = thieves_by_rank
            .into_iter()
            .filter(|&c| c != usize::MAX)
            .collect();
        if !waiting.is_empty() {
            self.stats.retry_phases += 1;
            if !blockers {
                for c in waiting {
                    if self.pws.failed_in_round.insert(c) {
                        self.stats.failed_steals += 1;
                        self.stats.steal_attempts += 1;
                        self.pws.failure_in_round = true;
                    }
                }
            }
        }
        if progress || !self.heap.is_empty() {
            self.pws.barren_phases = 0;
        } else {
            self.pws.barren_phases += 1;
            if self.pws.barren_phases > 4 {
                return Err(SimError::Deadlock {
                    tick: t1,
                    detail: format!(
                        "steal phases make no progress (round {:?}, {} pending thieves)",
                        self.pws.round,
                        self.pws.pending.len()
                    ),
                });
            }
        }
        Ok(())
    }

    fn begin_round(&mut self, d: i64) {
        if let Some(old) = self.pws.round {
            if d > old {
                self.stats.violations.round_order += 1;
            }
        }
        self.pws.round = Some(d);
        self.pws.round_no += 1;
        self.stats.rounds.push(d);
        self.pws.failed_in_round.clear();
        self.pws.failure_in_round = false;
    }

    fn finish(mut self) -> RunOutput {
        let end = self.stats.makespan;
        for c in 0..self.p {
            let core = &self.cores[c];
            if core.idle || core.after == After::Steal {
                let dt = end.saturating_sub(core.idle_mark);
                self.stats.idle_upass_wait[c] += dt;
            }
        }
        let distinct: BTreeSet<i64> = self.stats.rounds.iter().copied().collect();
        self.stats.distinct_priorities = distinct.len() as u64;
        if self.cfg.kind == SchedulerKind::Pws {
            let cap = self.p as u64 - 1;
            let mut per: BTreeMap<i64, u64> = self.stats.steals_per_priority.clone();
            for (&k, &v) in &self.stats.pseudo_per_priority {
                *per.entry(k).or_default() += v;
            }
            self.stats.violations.steals_per_priority =
                per.values().filter(|&&v| v > cap).count() as u64;
            let bound = 2 * self.p as u64 * self.stats.distinct_priorities;
            if self.stats.steal_attempts > bound {
                self.stats.violations.attempts_bound = 1;
            }
        }
        let cap = self.p as u64 - 1;
        self.stats.violations.usurpers = self
            .stats
            .usurpations
            .values()
            .filter(|&&v| v > cap)
            .count() as u64;
        self.out.stats = self.stats;
        self.out.touches = self.touches;
        self.out
    }
}
