use hbpsim::algos::morton::bi;
use hbpsim::algos::{self, matrix, oracle, Algorithm, PrepOpts, Values};
use hbpsim::memsim::{MachineState, MemConfig};
use hbpsim::metrics::{execute, Experiment};
use hbpsim::sched::{self, SchedConfig, SchedulerKind};
use proptest::prelude::*;

const SCHEDS: [(SchedulerKind, usize); 3] = [
    (SchedulerKind::Seq, 1),
    (SchedulerKind::Pws, 4),
    (SchedulerKind::Rws, 4),
];

/// Runs `alg` on explicit inputs under every scheduler and returns the
/// output words, checking that all schedulers agree with the oracle.
fn words(alg: Algorithm, n: usize, a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut outs = Vec::new();
    for (kind, p) in SCHEDS {
        let mut ms = MachineState::new(MemConfig::new(p, 256, 8)).unwrap();
        let (root, inst) = algos::prepare_with(alg, n, &mut ms, PrepOpts::default(), a, b).unwrap();
        sched::run(&mut ms, root, &SchedConfig::new(kind)).unwrap();
        let v = algos::verify(&inst, &ms);
        assert!(v.ok, "{alg} n={n} {kind:?}: {v:?}");
        match algos::read_output(&inst, &ms) {
            Values::Words(w) => outs.push(w),
            Values::Complex(_) => unreachable!(),
        }
    }
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
    outs.pop().unwrap()
}

fn fft(x: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut ms = MachineState::new(MemConfig::new(2, 256, 8)).unwrap();
    let (root, inst) = algos::prepare_fft(x.len(), &mut ms, x.to_vec()).unwrap();
    sched::run(&mut ms, root, &SchedConfig::new(SchedulerKind::Pws)).unwrap();
    assert!(algos::verify(&inst, &ms).ok);
    match algos::read_output(&inst, &ms) {
        Values::Complex(c) => c,
        Values::Words(_) => unreachable!(),
    }
}

fn identity_bi(n: usize) -> Vec<u64> {
    let mut m = vec![0; n * n];
    for i in 0..n {
        m[bi(i, i)] = 1;
    }
    m
}

fn close(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12)
}

#[test]
fn msum_small() {
    assert_eq!(words(Algorithm::Msum, 4, &[1, 2, 3, 4], &[]), vec![10]);
    assert_eq!(words(Algorithm::Msum, 1, &[5], &[]), vec![5]);
}

#[test]
fn prefix_sums_small() {
    assert_eq!(
        words(Algorithm::PrefixSums, 4, &[1, 1, 1, 1], &[]),
        vec![1, 2, 3, 4]
    );
    assert_eq!(words(Algorithm::PrefixSums, 1, &[42], &[]), vec![42]);
    assert_eq!(
        words(Algorithm::PrefixSums, 5, &[1, 2, 3, 4, 5], &[]),
        vec![1, 3, 6, 10, 15]
    );
}

#[test]
fn transpose_small() {
    assert_eq!(
        words(Algorithm::MtBi, 2, &[1, 2, 3, 4], &[]),
        vec![1, 3, 2, 4]
    );
    let id = identity_bi(8);
    assert_eq!(words(Algorithm::MtBi, 8, &id, &[]), id);
}

#[test]
fn rm_to_bi_small() {
    assert_eq!(
        words(Algorithm::RmToBi, 2, &[1, 2, 3, 4], &[]),
        vec![1, 2, 3, 4]
    );
    let rm: Vec<u64> = (0..16).collect();
    let out = words(Algorithm::RmToBi, 4, &rm, &[]);
    // element (1, 0) sits at row-major index 4
    assert_eq!(out[2], 4);
}

#[test]
fn bi_to_rm_small() {
    for alg in [
        Algorithm::BiToRmDirect,
        Algorithm::BiToRmGapped,
        Algorithm::BiToRmFft,
    ] {
        assert_eq!(words(alg, 2, &[1, 2, 3, 4], &[]), vec![1, 2, 3, 4]);
        let b: Vec<u64> = (0..16).collect();
        assert_eq!(words(alg, 4, &b, &[])[4], 2, "{alg}");
    }
}

#[test]
fn layout_roundtrip() {
    for n in [2, 8, 32] {
        let rm: Vec<u64> = (0..(n * n) as u64).map(|x| x * 7 + 1).collect();
        let b = words(Algorithm::RmToBi, n, &rm, &[]);
        for alg in [
            Algorithm::BiToRmDirect,
            Algorithm::BiToRmGapped,
            Algorithm::BiToRmFft,
        ] {
            assert_eq!(words(alg, n, &b, &[]), rm, "{alg} n={n}");
        }
    }
}

#[test]
fn gapped_equals_direct() {
    for n in [4, 64, 256] {
        let a = algos::random_words(n as u64, n * n, true);
        let direct = words(Algorithm::BiToRmDirect, n, &a, &[]);
        assert_eq!(words(Algorithm::BiToRmGapped, n, &a, &[]), direct, "n={n}");
    }
}

#[test]
fn gapped_footprint() {
    assert_eq!(matrix::GapLayout::new(2).footprint(), 4);
    for n in [16, 32, 64, 128, 256, 512, 1024] {
        assert!(matrix::GapLayout::new(n).footprint() <= 2 * n * n, "n={n}");
    }
}

#[test]
fn fft_conversion_matches_direct() {
    for n in [4, 16, 64] {
        let a = algos::random_words(3, n * n, true);
        assert_eq!(
            words(Algorithm::BiToRmFft, n, &a, &[]),
            oracle::bi_to_rm(&a, n),
            "n={n}"
        );
    }
}

#[test]
fn fft_conversion_work_follows_model() {
    let ratios: Vec<f64> = [16usize, 64, 256]
        .iter()
        .map(|&n| {
            let r = execute(&Experiment::new(
                Algorithm::BiToRmFft,
                SchedulerKind::Seq,
                n,
                1,
                1 << 12,
                32,
            ))
            .unwrap();
            let c = r.ms.counters();
            let work = (c.reads[0] + c.writes[0]) as f64;
            let model = (n * n) as f64 * (1.0 + (n as f64).log2().log2());
            work / model
        })
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi <= 2.0 * lo, "{ratios:?}");
}

#[test]
fn matrix_add_small() {
    assert_eq!(words(Algorithm::MatrixAdd, 1, &[3], &[4]), vec![7]);
    let a = algos::random_words(9, 64, true);
    assert_eq!(words(Algorithm::MatrixAdd, 8, &a, &[0; 64]), a);
}

#[test]
fn products_small() {
    let a = oracle::rm_to_bi(&[1, 2, 3, 4], 2);
    let b = oracle::rm_to_bi(&[5, 6, 7, 8], 2);
    for alg in [Algorithm::Strassen, Algorithm::DepthNMm] {
        let c = words(alg, 2, &a, &b);
        assert_eq!(oracle::bi_to_rm(&c, 2), vec![19, 22, 43, 50], "{alg}");
        let m = algos::random_words(4, 64, true);
        assert_eq!(words(alg, 8, &m, &identity_bi(8)), m, "{alg}");
    }
}

#[test]
fn products_above_base_case() {
    for alg in [Algorithm::Strassen, Algorithm::DepthNMm] {
        for n in [16, 64] {
            let a = algos::random_words(n as u64, n * n, true);
            let b = algos::random_words(n as u64 + 1, n * n, true);
            assert_eq!(
                words(alg, n, &a, &b),
                oracle::matmul_bi(&a, &b, n),
                "{alg} n={n}"
            );
        }
    }
}

#[test]
fn fft_small() {
    let impulse = [(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)];
    assert!(close(&fft(&impulse), &[(1.0, 0.0); 4]));
    let ones = [(1.0, 0.0); 4];
    assert!(close(
        &fft(&ones),
        &[(4.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]
    ));
}

#[test]
fn fft_random_against_dft() {
    for n in [2, 8, 32, 1024] {
        let x = algos::random_complex(n as u64, n);
        let got = fft(&x);
        let want = oracle::dft(&x);
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
            .fold(0.0, f64::max);
        assert!(err < algos::FFT_TOLERANCE, "n={n}: {err:e}");
    }
}

#[test]
fn invalid_sizes_rejected() {
    let mut ms = MachineState::new(MemConfig::new(1, 256, 8)).unwrap();
    assert!(algos::prepare(Algorithm::MtBi, 6, 0, &mut ms, PrepOpts::default()).is_err());
    assert!(algos::prepare(Algorithm::Fft, 12, 0, &mut ms, PrepOpts::default()).is_err());
    assert!(algos::prepare(Algorithm::Msum, 0, 0, &mut ms, PrepOpts::default()).is_err());
    assert!(algos::prepare_with(
        Algorithm::MatrixAdd,
        2,
        &mut ms,
        PrepOpts::default(),
        &[1; 4],
        &[1; 3]
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scans_match_oracle(v in prop::collection::vec(any::<u64>(), 1..300)) {
        let n = v.len();
        prop_assert_eq!(words(Algorithm::Msum, n, &v, &[]), vec![oracle::sum(&v)]);
        prop_assert_eq!(words(Algorithm::PrefixSums, n, &v, &[]), oracle::prefix_sums(&v));
    }

    #[test]
    fn transpose_is_an_involution(k in 0u32..5, seed in any::<u64>()) {
        let n = 1usize << k;
        let a = algos::random_words(seed, n * n, false);
        let t = words(Algorithm::MtBi, n, &a, &[]);
        prop_assert_eq!(words(Algorithm::MtBi, n, &t, &[]), a);
    }

    #[test]
    fn limited_access_on_random_runs(alg_i in 0usize..11, p in 1usize..9, seed in 0u64..1000) {
        let alg = Algorithm::ALL[alg_i];
        let n = match alg {
            Algorithm::Msum | Algorithm::PrefixSums | Algorithm::Fft => 256,
            _ => 16,
        };
        let sched = if p == 1 { SchedulerKind::Seq } else { SchedulerKind::Pws };
        let r = execute(&Experiment::new(alg, sched, n, p, 1024, 16).with_seed(seed)).unwrap();
        prop_assert!(r.verification.ok);
        let (w, _) = r.ms.max_writes_per_variable();
        prop_assert!(w <= alg.spec().write_budget && w <= 4);
    }
}
