//! The algorithm suite: scans, matrix transposition and layout conversions,
//! matrix addition and multiplication, and FFT, each built as a job tree
//! over simulated memory, plus reference oracles.

pub mod fft;
pub mod matrix;
pub mod mm;
pub mod morton;
pub mod oracle;
pub mod scan;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compute::{
    ceil_log2, pad_gap, BPDescriptor, Bp, BpKernel, Ctx, Expansion, FTag, HBPDescriptor, Job, LTag,
};
use crate::error::SimError;
use crate::memsim::{Addr, AddrRange, MachineState};
use morton::is_pow2;

/// A BP computation applying `body(i)` at leaf `i`.
pub struct MapFn<F> {
    label: &'static str,
    words: u64,
    body: F,
}

impl<F: Fn(usize, &mut Ctx) + 'static> MapFn<F> {
    pub fn boxed(label: &'static str, n: usize, words: u64, body: F) -> Box<dyn Job> {
        Bp::boxed(MapFn { label, words, body }, n, None)
    }
}

impl MapFn<fn(usize, &mut Ctx)> {
    pub fn levels_for(n: usize) -> u32 {
        ceil_log2(n as u64) + 1
    }
}

impl<F: Fn(usize, &mut Ctx) + 'static> BpKernel for MapFn<F> {
    fn label(&self) -> &'static str {
        self.label
    }

    fn leaf_words(&self) -> u64 {
        self.words
    }

    fn leaf(&self, i: usize, _slot: Option<Addr>, cx: &mut Ctx) {
        (self.body)(i, cx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Msum,
    PrefixSums,
    MtBi,
    RmToBi,
    BiToRmDirect,
    BiToRmGapped,
    BiToRmFft,
    MatrixAdd,
    Strassen,
    DepthNMm,
    Fft,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Algorithm::Msum,
        Algorithm::PrefixSums,
        Algorithm::MtBi,
        Algorithm::RmToBi,
        Algorithm::BiToRmDirect,
        Algorithm::BiToRmGapped,
        Algorithm::BiToRmFft,
        Algorithm::MatrixAdd,
        Algorithm::Strassen,
        Algorithm::DepthNMm,
        Algorithm::Fft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Msum => "msum",
            Algorithm::PrefixSums => "prefix_sums",
            Algorithm::MtBi => "mt_bi",
            Algorithm::RmToBi => "rm_to_bi",
            Algorithm::BiToRmDirect => "bi_to_rm_direct",
            Algorithm::BiToRmGapped => "bi_to_rm_gapped",
            Algorithm::BiToRmFft => "bi_to_rm_fft",
            Algorithm::MatrixAdd => "matrix_add",
            Algorithm::Strassen => "strassen",
            Algorithm::DepthNMm => "depth_n_mm",
            Algorithm::Fft => "fft",
        }
    }

    /// Whether `n` is a matrix side rather than an element count.
    pub fn is_matrix(self) -> bool {
        !matches!(
            self,
            Algorithm::Msum | Algorithm::PrefixSums | Algorithm::Fft
        )
    }

    /// Elements in the input of problem parameter `n`.
    pub fn input_len(self, n: usize) -> usize {
        if self.is_matrix() {
            n * n
        } else {
            n
        }
    }

    pub fn spec(self) -> AlgorithmSpec {
        use Algorithm::*;
        let bp = |f, l| Descriptor::Bp(BPDescriptor::with_tags(f, l));
        let row = |hbp_type, f, l, work, span, q, tall| AlgorithmSpec {
            name: self.name(),
            hbp_type,
            f,
            l,
            work,
            span,
            cache: q,
            write_budget: JOIN_WRITES,
            tall_cache: tall,
            descriptor: Descriptor::Bp(BPDescriptor::with_tags(f, l)),
        };
        let mut s = match self {
            Msum => row(1, FTag::Const, LTag::Const, "n", "log n", "n/B", "none"),
            PrefixSums => row(1, FTag::Const, LTag::Const, "n", "log n", "n/B", "none"),
            MatrixAdd => row(1, FTag::Const, LTag::Const, "n^2", "log n", "n^2/B", "none"),
            MtBi => row(1, FTag::Const, LTag::Const, "n^2", "log n", "n^2/B", "none"),
            RmToBi => row(1, FTag::Sqrt, LTag::Const, "n^2", "log n", "n^2/B", "B^2"),
            BiToRmDirect => row(1, FTag::Sqrt, LTag::Sqrt, "n^2", "log n", "n^2/B", "B^2"),
            BiToRmGapped => row(
                1,
                FTag::Sqrt,
                LTag::Gap,
                "n^2",
                "log n",
                "n^2/B",
                "B^2 log B",
            ),
            BiToRmFft => row(
                2,
                FTag::Sqrt,
                LTag::Const,
                "n^2 log log n",
                "log n",
                "(n^2/B) log_M n",
                "B^2",
            ),
            Strassen => row(
                2,
                FTag::Const,
                LTag::Const,
                "n^lambda",
                "log^2 n",
                "n^lambda/(B M^(lambda/2-1))",
                "B^2",
            ),
            DepthNMm => row(
                2,
                FTag::Const,
                LTag::Const,
                "n^3",
                "n",
                "n^3/(B sqrt M)",
                "B^2",
            ),
            Fft => row(
                2,
                FTag::Sqrt,
                LTag::Const,
                "n log n",
                "log n log log n",
                "(n/B) log_M n",
                "B^2",
            ),
        };
        s.descriptor = match self {
            Msum | MatrixAdd | MtBi | RmToBi | BiToRmDirect => bp(s.f, s.l),
            PrefixSums | BiToRmGapped => Descriptor::BpStages(BPDescriptor::with_tags(s.f, s.l), 2),
            BiToRmFft => Descriptor::Hbp(HBPDescriptor {
                hbp_type: 2,
                rounds: 1,
                fanout: |m| {
                    let side = (m as f64).sqrt() as u64;
                    let s = matrix::conv_sub_side(side as usize) as u64;
                    (side / s) * (side / s)
                },
                child_size: |m| {
                    let s = matrix::conv_sub_side((m as f64).sqrt() as usize) as u64;
                    s * s
                },
                base: (matrix::FFT_CONV_BASE * matrix::FFT_CONV_BASE) as u64,
                linear_space: true,
                declared_f: s.f,
                declared_l: s.l,
            }),
            Strassen => Descriptor::Hbp(HBPDescriptor {
                hbp_type: 2,
                rounds: 1,
                fanout: |_| 7,
                child_size: |m| m / 4,
                base: (mm::MM_BASE * mm::MM_BASE) as u64,
                linear_space: false,
                declared_f: s.f,
                declared_l: s.l,
            }),
            DepthNMm => Descriptor::Hbp(HBPDescriptor {
                hbp_type: 2,
                rounds: 2,
                fanout: |_| 4,
                child_size: |m| m / 4,
                base: (mm::MM_BASE * mm::MM_BASE) as u64,
                linear_space: false,
                declared_f: s.f,
                declared_l: s.l,
            }),
            Fft => Descriptor::Hbp(HBPDescriptor {
                hbp_type: 2,
                rounds: 2,
                fanout: |m| fft::fft_split(m as usize).1 as u64,
                child_size: |m| fft::fft_split(m as usize).0 as u64,
                base: fft::FFT_BASE as u64,
                linear_space: true,
                declared_f: s.f,
                declared_l: s.l,
            }),
        };
        s
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        if s == "scan" {
            return Ok(Algorithm::Msum);
        }
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| SimError::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Descriptor {
    Bp(BPDescriptor),
    /// Sequenced BP stages with no recursive calls.
    BpStages(BPDescriptor, u32),
    Hbp(HBPDescriptor),
}

/// One row of the algorithm table plus the write budget for the
/// limited-access check.
#[derive(Clone, Copy, Debug)]
pub struct AlgorithmSpec {
    pub name: &'static str,
    pub hbp_type: u32,
    pub descriptor: Descriptor,
    pub f: FTag,
    pub l: LTag,
    pub work: &'static str,
    pub span: &'static str,
    pub cache: &'static str,
    /// Maximum writes to any single variable.
    pub write_budget: u32,
    /// Tall-cache requirement M ≥ Γ(B).
    pub tall_cache: &'static str,
}

impl AlgorithmSpec {
    /// Checks the descriptor's structural conditions for size `n`.
    pub fn validate(&self, alg: Algorithm, n: usize) -> Result<(), SimError> {
        match self.descriptor {
            Descriptor::Bp(d) | Descriptor::BpStages(d, _) => {
                d.validate()?;
                d.check_balance(alg.input_len(n))
            }
            Descriptor::Hbp(d) => d.validate(alg.input_len(n) as u64),
        }
    }
}

/// Checks the size restrictions of `alg`.
pub fn check_size(alg: Algorithm, n: usize) -> Result<(), SimError> {
    let bad = |why: &str| Err(SimError::InvalidConfig(format!("{alg}: n = {n}: {why}")));
    if n == 0 {
        return bad("must be at least 1");
    }
    match alg {
        Algorithm::Msum | Algorithm::PrefixSums => Ok(()),
        _ if !is_pow2(n) => bad("must be a power of two"),
        Algorithm::Fft if n < 2 => bad("must be at least 2"),
        _ => Ok(()),
    }
}

/// Input values of a prepared instance.
#[derive(Clone, Debug, PartialEq)]
pub enum Values {
    Words(Vec<u64>),
    Complex(Vec<(f64, f64)>),
}

/// An algorithm instance laid out in simulated memory. Its job tree is
/// returned alongside by the `prepare` functions.
pub struct Instance {
    pub alg: Algorithm,
    pub n: usize,
    pub output: AddrRange,
    pub expected: Values,
}

/// Result of comparing the simulated output with the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub mismatches: u64,
    pub max_abs_err: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PrepOpts {
    /// Route `bi_to_rm_direct` through the gapped intermediate array.
    pub gapped: bool,
}

/// A fork's join counter is written at the fork and at each child's
/// arrival; no other variable in the suite is written more often.
pub const JOIN_WRITES: u32 = 3;

pub const FFT_TOLERANCE: f64 = 1e-9;

/// Seeded input words. Matrix entries are small so products stay readable.
pub fn random_words(seed: u64, len: usize, matrix: bool) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            if matrix {
                rng.gen_range(-100i64..=100) as u64
            } else {
                rng.gen::<u64>()
            }
        })
        .collect()
}

pub fn random_complex(seed: u64, len: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn store_words(ms: &mut MachineState, vals: &[u64]) -> Result<Addr, SimError> {
    let r = ms.alloc(0, vals.len() as u64)?;
    for (i, &v) in vals.iter().enumerate() {
        ms.poke(r.start + i as u64, v);
    }
    Ok(r.start)
}

fn store_complex(ms: &mut MachineState, vals: &[(f64, f64)]) -> Result<Addr, SimError> {
    let r = ms.alloc(0, 2 * vals.len() as u64)?;
    for (i, &(re, im)) in vals.iter().enumerate() {
        ms.poke(r.start + 2 * i as u64, re.to_bits());
        ms.poke(r.start + 2 * i as u64 + 1, im.to_bits());
    }
    Ok(r.start)
}

fn out_range(ms: &mut MachineState, len: usize) -> Result<AddrRange, SimError> {
    let r = ms.alloc(0, len as u64)?;
    Ok(AddrRange {
        start: r.start,
        len: len as u64,
    })
}

/// Lays out random inputs and builds the job tree.
pub fn prepare(
    alg: Algorithm,
    n: usize,
    seed: u64,
    ms: &mut MachineState,
    opts: PrepOpts,
) -> Result<(Box<dyn Job>, Instance), SimError> {
    check_size(alg, n)?;
    if alg == Algorithm::Fft {
        return prepare_fft(n, ms, random_complex(seed, n));
    }
    let vals = random_words(seed, alg.input_len(n), alg.is_matrix());
    let other = random_words(seed ^ 0x9e37_79b9_7f4a_7c15, alg.input_len(n), true);
    prepare_with(alg, n, ms, opts, &vals, &other)
}

/// Builds an instance from explicit inputs. `b` is the second operand of
/// the two-input algorithms and ignored otherwise.
pub fn prepare_with(
    alg: Algorithm,
    n: usize,
    ms: &mut MachineState,
    opts: PrepOpts,
    a: &[u64],
    b: &[u64],
) -> Result<(Box<dyn Job>, Instance), SimError> {
    use Algorithm::*;
    check_size(alg, n)?;
    let len = alg.input_len(n);
    if a.len() != len || (matches!(alg, MatrixAdd | Strassen | DepthNMm) && b.len() != len) {
        return Err(SimError::InvalidConfig(format!(
            "{alg}: expected {len} input words"
        )));
    }
    alg.spec().validate(alg, n)?;
    let src = store_words(ms, a)?;
    let (root, output, expected) = match alg {
        Msum => {
            let out = out_range(ms, 1)?;
            (scan::msum(src, n, out.start), out, vec![oracle::sum(a)])
        }
        PrefixSums => {
            let sums = ms.alloc(0, (2 * n - 1) as u64)?.start;
            let out = out_range(ms, n)?;
            (
                scan::prefix_sums(src, n, sums, out.start),
                out,
                oracle::prefix_sums(a),
            )
        }
        MtBi => {
            let out = out_range(ms, len)?;
            (
                matrix::mt_bi(src, out.start, n),
                out,
                oracle::transpose_bi(a, n),
            )
        }
        RmToBi => {
            let out = out_range(ms, len)?;
            (
                matrix::rm_to_bi(src, out.start, n),
                out,
                oracle::rm_to_bi(a, n),
            )
        }
        BiToRmDirect | BiToRmGapped | BiToRmFft => {
            let out = out_range(ms, len)?;
            let root = if alg == BiToRmFft {
                matrix::bi_to_rm_fft(src, out.start, n)
            } else if alg == BiToRmGapped || opts.gapped {
                let g = matrix::GapLayout::new(n);
                let tmp = ms.alloc(0, g.footprint() as u64)?.start;
                matrix::bi_to_rm_gapped(src, tmp, out.start, n)
            } else {
                matrix::bi_to_rm_direct(src, out.start, n)
            };
            (root, out, oracle::bi_to_rm(a, n))
        }
        MatrixAdd | Strassen | DepthNMm => {
            let src2 = store_words(ms, b)?;
            let out = out_range(ms, len)?;
            let (root, exp) = match alg {
                MatrixAdd => (
                    matrix::matrix_add(src, src2, out.start, len),
                    oracle::add(a, b),
                ),
                Strassen => (
                    mm::strassen(src, src2, out.start, n),
                    oracle::matmul_bi(a, b, n),
                ),
                _ => (
                    mm::depth_n_mm(src, src2, out.start, n),
                    oracle::matmul_bi(a, b, n),
                ),
            };
            (root, out, exp)
        }
        Fft => unreachable!("complex input"),
    };
    let inst = Instance {
        alg,
        n,
        output,
        expected: Values::Words(expected),
    };
    Ok((root, inst))
}

/// Builds an FFT instance over explicit complex input.
pub fn prepare_fft(
    n: usize,
    ms: &mut MachineState,
    x: Vec<(f64, f64)>,
) -> Result<(Box<dyn Job>, Instance), SimError> {
    let (root, mut inst) = layout_fft(n, ms, &x)?;
    inst.expected = Values::Complex(oracle::reference_dft(&x));
    Ok((root, inst))
}

fn layout_fft(
    n: usize,
    ms: &mut MachineState,
    x: &[(f64, f64)],
) -> Result<(Box<dyn Job>, Instance), SimError> {
    check_size(Algorithm::Fft, n)?;
    if x.len() != n {
        return Err(SimError::InvalidConfig(format!("fft: expected {n} inputs")));
    }
    Algorithm::Fft.spec().validate(Algorithm::Fft, n)?;
    let src = store_complex(ms, x)?;
    let mut tw = std::collections::BTreeMap::new();
    for m in fft::sizes(n) {
        tw.insert(m, store_complex(ms, &fft::twiddle_table(m))?);
    }
    let out = out_range(ms, 2 * n)?;
    let inst = Instance {
        alg: Algorithm::Fft,
        n,
        output: out,
        expected: Values::Complex(Vec::new()),
    };
    Ok((fft::fft(src, out.start, n, std::rc::Rc::new(tw)), inst))
}

/// Reads the output back without touching the simulated caches.
pub fn read_output(inst: &Instance, ms: &MachineState) -> Values {
    let w = |i: u64| ms.peek(inst.output.start + i);
    match inst.expected {
        Values::Words(_) => Values::Words((0..inst.output.len).map(w).collect()),
        Values::Complex(_) => Values::Complex(
            (0..inst.output.len / 2)
                .map(|i| (f64::from_bits(w(2 * i)), f64::from_bits(w(2 * i + 1))))
                .collect(),
        ),
    }
}

pub fn verify(inst: &Instance, ms: &MachineState) -> Verification {
    match (&inst.expected, read_output(inst, ms)) {
        (Values::Words(e), Values::Words(got)) => {
            let mismatches = e.iter().zip(&got).filter(|(a, b)| a != b).count() as u64;
            Verification {
                ok: mismatches == 0,
                mismatches,
                max_abs_err: 0.0,
            }
        }
        (Values::Complex(e), Values::Complex(got)) => {
            let errs: Vec<f64> = e
                .iter()
                .zip(&got)
                .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
                .collect();
            let mismatches = errs
                .iter()
                .filter(|&&d| d.is_nan() || d >= FFT_TOLERANCE)
                .count() as u64;
            Verification {
                ok: mismatches == 0,
                mismatches,
                max_abs_err: errs.into_iter().fold(0.0, f64::max),
            }
        }
        _ => unreachable!("output kind follows the instance"),
    }
}

/// Words of stack on the deepest root-to-leaf path of `job`, including
/// padding gaps. The left child of a fork is never smaller than the right.
pub fn stack_path_words(job: &dyn Job, padded: bool) -> u64 {
    let fw = job.frame_words();
    let own = if fw > 0 {
        fw + if padded { pad_gap(job.size()) } else { 0 }
    } else {
        0
    };
    let below = match job.expand(Some(0)) {
        Expansion::Leaf => 0,
        Expansion::Fork(l, r) => {
            stack_path_words(l.as_ref(), padded).max(if l.size() == r.size() {
                0
            } else {
                stack_path_words(r.as_ref(), padded)
            })
        }
        Expansion::Seq(stages) => stages
            .iter()
            .map(|s| stack_path_words(s.as_ref(), padded))
            .max()
            .unwrap_or(0),
    };
    own + below
}

/// Per-core stack arena size for running `alg` at size `n`.
pub fn stack_words(alg: Algorithm, n: usize, padded: bool) -> Result<u64, SimError> {
    check_size(alg, n)?;
    let mut probe = MachineState::new(crate::memsim::MemConfig::new(1, 64, 8))?;
    // Jobs only capture addresses, so a zero-filled input is enough.
    let (root, _) = if alg == Algorithm::Fft {
        layout_fft(n, &mut probe, &vec![(0.0, 0.0); n])?
    } else {
        let z = vec![0; alg.input_len(n)];
        prepare_with(alg, n, &mut probe, PrepOpts::default(), &z, &z)?
    };
    Ok(2 * stack_path_words(root.as_ref(), padded) + 4096)
}
