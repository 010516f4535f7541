use hbpsim::algos::{Algorithm, MapFn};
use hbpsim::memsim::{MachineState, MemConfig};
use hbpsim::metrics::{execute, Experiment, RunRecord};
use hbpsim::sched::{
    self, phase_steps, SchedConfig, SchedulerKind, StealKind, PHASE_STEP_CONSTANT,
};

fn run(alg: Algorithm, sched: SchedulerKind, n: usize, p: usize, seed: u64) -> RunRecord {
    execute(&Experiment::new(alg, sched, n, p, 4096, 32).with_seed(seed)).unwrap()
}

#[test]
fn one_core_pws_and_rws_match_sequential() {
    for alg in [
        Algorithm::Msum,
        Algorithm::PrefixSums,
        Algorithm::Strassen,
        Algorithm::Fft,
    ] {
        let n = if alg == Algorithm::Strassen {
            32
        } else {
            1 << 10
        };
        let seq = run(alg, SchedulerKind::Seq, n, 1, 3);
        for kind in [SchedulerKind::Pws, SchedulerKind::Rws] {
            let r = run(alg, kind, n, 1, 3);
            assert_eq!(r.ms.counters(), seq.ms.counters(), "{alg} {kind:?}");
            assert_eq!(r.out.stats.steals, 0);
            assert_eq!(
                r.out.stats.makespan, seq.out.stats.makespan,
                "{alg} {kind:?}"
            );
        }
    }
}

#[test]
fn runs_are_deterministic() {
    for kind in [SchedulerKind::Pws, SchedulerKind::Rws] {
        let a = run(Algorithm::Strassen, kind, 64, 8, 5);
        let b = run(Algorithm::Strassen, kind, 64, 8, 5);
        assert_eq!(a.ms.counters(), b.ms.counters());
        assert_eq!(a.out.stats, b.out.stats);
        assert_eq!(a.out.steal_log, b.out.steal_log);
    }
}

#[test]
fn large_scan_steals_per_priority() {
    let r = run(Algorithm::Msum, SchedulerKind::Pws, 1 << 20, 4, 1);
    let s = &r.out.stats;
    assert!(s.steals > 0);
    for (&d, &k) in &s.steals_per_priority {
        let pseudo = s.pseudo_per_priority.get(&d).copied().unwrap_or(0);
        assert!(k + pseudo <= 3, "priority {d}: {k} + {pseudo}");
    }
    assert!(s.steal_attempts <= 2 * 4 * s.distinct_priorities);
    assert_eq!(s.violations.total(), 0);
}

#[test]
fn rounds_are_non_increasing() {
    for alg in Algorithm::ALL {
        let n = match alg {
            Algorithm::Msum | Algorithm::PrefixSums | Algorithm::Fft => 1 << 12,
            _ => 64,
        };
        let r = run(alg, SchedulerKind::Pws, n, 8, 2);
        let rounds = &r.out.stats.rounds;
        assert!(rounds.windows(2).all(|w| w[1] <= w[0]), "{alg}: {rounds:?}");
    }
}

#[test]
fn steals_from_one_victim_go_top_down() {
    let r = run(Algorithm::PrefixSums, SchedulerKind::Pws, 1 << 14, 8, 1);
    let mut last: Vec<Option<(u64, i64)>> = vec![None; 8];
    for s in r
        .out
        .steal_log
        .iter()
        .filter(|s| s.kind == StealKind::Stolen)
    {
        if let Some((round, prio)) = last[s.victim] {
            assert!(round != s.round || s.priority <= prio);
        }
        last[s.victim] = Some((s.round, s.priority));
    }
}

#[test]
fn phase_length_is_two_log_p_plus_constant() {
    assert_eq!(phase_steps(8), 2 * 3 + PHASE_STEP_CONSTANT);
    for p in [2usize, 3, 8, 17] {
        let r = run(Algorithm::Msum, SchedulerKind::Pws, 1 << 12, p, 0);
        let lg = (p as u64).next_power_of_two().ilog2();
        assert_eq!(
            r.out.stats.steps_per_phase,
            2 * lg + PHASE_STEP_CONSTANT,
            "p={p}"
        );
    }
}

#[test]
fn scheduler_overhead_accounting() {
    let r = run(Algorithm::MtBi, SchedulerKind::Pws, 128, 8, 0);
    let s = &r.out.stats;
    let cost = r.ms.config().cost;
    let per_phase = s.steps_per_phase as u64 * (cost.sched_interval + cost.miss_cost);
    assert_eq!(s.sched_ticks, s.phases * per_phase);
    assert!(s.phases <= 2 * s.distinct_priorities + s.retry_phases);
}

#[test]
fn atomic_phases_have_no_pseudo_steals() {
    for seed in 0..5 {
        let r = run(Algorithm::PrefixSums, SchedulerKind::Pws, 1 << 12, 8, seed);
        assert_eq!(r.out.stats.pseudo_steals, 0);
    }
}

#[test]
fn stress_mode_keeps_per_priority_bound() {
    let mut pseudo = 0;
    for alg in [Algorithm::Msum, Algorithm::Strassen, Algorithm::Fft] {
        let n = if alg == Algorithm::Strassen {
            64
        } else {
            1 << 12
        };
        for p in [2, 4, 8, 16] {
            let mut e = Experiment::new(alg, SchedulerKind::Pws, n, p, 4096, 32);
            e.stress = true;
            let r = execute(&e).unwrap();
            assert!(r.verification.ok);
            let s = &r.out.stats;
            assert!(s.max_steals_per_priority() < p as u64, "{alg} p={p}");
            assert_eq!(s.violations.total(), 0, "{alg} p={p}: {:?}", s.violations);
            pseudo += s.pseudo_steals;
        }
    }
    assert!(pseudo > 0, "stress mode never produced a pseudo-steal");
}

#[test]
fn rws_steals_at_least_as_often_as_pws() {
    let pws = run(Algorithm::Msum, SchedulerKind::Pws, 1 << 14, 8, 0)
        .out
        .stats
        .steals;
    let mut rws: Vec<u64> = (0..20)
        .map(|seed| {
            run(Algorithm::Msum, SchedulerKind::Rws, 1 << 14, 8, seed)
                .out
                .stats
                .steals
        })
        .collect();
    rws.sort_unstable();
    assert!(rws[10] >= pws, "rws median {} vs pws {pws}", rws[10]);
}

#[test]
fn single_leaf_is_never_stolen() {
    let mut ms = MachineState::new(MemConfig::new(4, 1024, 8)).unwrap();
    let r = ms.alloc(0, 64).unwrap();
    let start = r.start;
    let root = MapFn::boxed("leaf", 1, 64, move |_, cx| {
        for a in start..start + 64 {
            cx.write(a, 1);
        }
    });
    let out = sched::run(&mut ms, root, &SchedConfig::new(SchedulerKind::Pws)).unwrap();
    assert_eq!(out.stats.steals, 0);
    assert_eq!(out.stats.total_usurpations(), 0);
}

#[test]
fn usurpations_bounded_per_boundary() {
    for p in [2usize, 4, 8, 16] {
        let r = run(Algorithm::PrefixSums, SchedulerKind::Pws, 1 << 14, p, 0);
        assert!(r.out.stats.max_usurpations_per_boundary() < p as u64);
    }
}
