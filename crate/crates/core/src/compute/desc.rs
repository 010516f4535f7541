use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::job::{Bp, BpKernel, Job};
use crate::error::SimError;
use crate::memsim::Addr;

/// Declared cache-friendliness function f(r).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FTag {
    Const,
    Sqrt,
}

/// Declared block-sharing function L(r).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LTag {
    Const,
    Sqrt,
    /// Zero sharing for large tasks once the output is gapped.
    Gap,
}

impl FTag {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            FTag::Const => 1.0,
            FTag::Sqrt => r.sqrt(),
        }
    }
}

impl LTag {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            LTag::Const | LTag::Gap => 1.0,
            LTag::Sqrt => r.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BPDescriptor {
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub declared_f: FTag,
    pub declared_l: LTag,
    pub padded: bool,
}

impl Default for BPDescriptor {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            c1: 0.5,
            c2: 2.0,
            declared_f: FTag::Const,
            declared_l: LTag::Const,
            padded: false,
        }
    }
}

impl BPDescriptor {
    pub fn with_tags(declared_f: FTag, declared_l: LTag) -> Self {
        Self {
            declared_f,
            declared_l,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.5..1.0).contains(&self.alpha) {
            return Err(SimError::Descriptor(format!(
                "alpha {} outside [1/2, 1)",
                self.alpha
            )));
        }
        if self.alpha != 0.5 {
            return Err(SimError::Descriptor(
                "only alpha = 1/2 splits are generated".into(),
            ));
        }
        if !(self.c1 > 0.0 && self.c1 <= 1.0 && self.c2 >= 1.0) {
            return Err(SimError::Descriptor(format!(
                "need 0 < c1 <= 1 <= c2, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        Ok(())
    }

    /// Checks every level of the halving tree over `n` leaves against
    /// `c1·α^i·n ≤ |τ| ≤ c2·α^i·n`.
    pub fn check_balance(&self, n: usize) -> Result<(), SimError> {
        for (level, sizes) in level_sizes(n).iter().enumerate() {
            let ideal = self.alpha.powi(level as i32) * n as f64;
            for &s in sizes {
                let s = s as f64;
                if s < self.c1 * ideal - 1e-9 || s > self.c2 * ideal + 1e-9 {
                    return Err(SimError::Descriptor(format!(
                        "level {level}: size {s} outside [{}, {}]",
                        self.c1 * ideal,
                        self.c2 * ideal
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Distinct node sizes at each level of the ceiling-split tree over `n` leaves.
pub fn level_sizes(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![n];
    while !cur.is_empty() {
        out.push(cur.clone());
        let mut next: Vec<usize> = cur
            .iter()
            .filter(|&&s| s > 1)
            .flat_map(|&s| [s.div_ceil(2), s / 2])
            .collect();
        next.sort_unstable();
        next.dedup();
        cur = next;
    }
    out
}

/// Builds the root of a BP computation over `n` leaves.
pub fn build_bp<K: BpKernel>(
    desc: &BPDescriptor,
    kernel: K,
    n: usize,
    slot: Option<Addr>,
) -> Result<Box<dyn Job>, SimError> {
    if n == 0 {
        return Err(SimError::Descriptor("BP over an empty input".into()));
    }
    desc.validate()?;
    desc.check_balance(n)?;
    Ok(Box::new(Bp::new(Rc::new(kernel), 0, n, slot)))
}

#[derive(Clone, Copy, Debug)]
pub struct HBPDescriptor {
    pub hbp_type: u32,
    /// Number of sequenced recursive collections c.
    pub rounds: u32,
    /// v(n): number of recursive subproblems per collection.
    pub fanout: fn(u64) -> u64,
    /// s(n): size of each subproblem.
    pub child_size: fn(u64) -> u64,
    /// Sizes at or below this run as a sequential leaf.
    pub base: u64,
    pub linear_space: bool,
    pub declared_f: FTag,
    pub declared_l: LTag,
}

/// One recursive collection: BP stages before, the fan-out of recursive
/// calls, BP stages after.
pub struct HbpRound {
    pub pre: Vec<Box<dyn Job>>,
    pub fan: Box<dyn Job>,
    pub post: Vec<Box<dyn Job>>,
}

impl HBPDescriptor {
    /// Checks that subproblems shrink and the fan-out covers the input to
    /// within a factor of two, at every size down to the base case.
    pub fn validate(&self, n: u64) -> Result<(), SimError> {
        if self.rounds == 0 {
            return Err(SimError::Descriptor(
                "an HBP needs at least one collection".into(),
            ));
        }
        let mut m = n;
        while m > self.base {
            let (v, s) = ((self.fanout)(m), (self.child_size)(m));
            if v == 0 || s == 0 || s >= m {
                return Err(SimError::Descriptor(format!("size {m}: s = {s}, v = {v}")));
            }
            let cover = (v * s) as f64 / m as f64;
            if !(0.5..=2.0).contains(&cover) {
                return Err(SimError::Descriptor(format!(
                    "size {m}: unbalanced collection covering {cover:.2} of the input"
                )));
            }
            m = s;
        }
        Ok(())
    }
}

/// Flattens the collections of one HBP node of size `n` into its stage list.
pub fn build_hbp(
    desc: &HBPDescriptor,
    n: u64,
    rounds: Vec<HbpRound>,
) -> Result<Vec<Box<dyn Job>>, SimError> {
    if rounds.len() as u32 != desc.rounds {
        return Err(SimError::Descriptor(format!(
            "expected {} collections, got {}",
            desc.rounds,
            rounds.len()
        )));
    }
    if n <= desc.base {
        return Err(SimError::Descriptor(format!("size {n} is a base case")));
    }
    let mut stages = Vec::new();
    for r in rounds {
        stages.extend(r.pre);
        stages.push(r.fan);
        stages.extend(r.post);
    }
    Ok(stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::job::Ctx;

    struct Nop;
    impl BpKernel for Nop {
        fn label(&self) -> &'static str {
            "nop"
        }
        fn leaf(&self, _i: usize, _slot: Option<Addr>, _cx: &mut Ctx) {}
    }

    #[test]
    fn halving_sizes_power_of_two() {
        assert_eq!(level_sizes(8), vec![vec![8], vec![4], vec![2], vec![1]]);
        assert_eq!(level_sizes(1), vec![vec![1]]);
    }

    #[test]
    fn odd_split_within_default_constants() {
        let d = BPDescriptor::default();
        assert_eq!(level_sizes(6)[1], vec![3]);
        d.check_balance(6).unwrap();
        for n in 1..300 {
            d.check_balance(n).unwrap();
        }
    }

    #[test]
    fn tight_constants_reject_odd_sizes() {
        let d = BPDescriptor {
            c1: 1.0,
            c2: 1.0,
            ..BPDescriptor::default()
        };
        d.check_balance(16).unwrap();
        assert!(d.check_balance(6).is_err());
        assert!(build_bp(&d, Nop, 5, None).is_err());
    }

    #[test]
    fn bad_alpha_rejected() {
        let d = BPDescriptor {
            alpha: 0.3,
            ..BPDescriptor::default()
        };
        assert!(d.validate().is_err());
    }

    #[test]
    fn hbp_validation() {
        let strassen = HBPDescriptor {
            hbp_type: 2,
            rounds: 1,
            fanout: |_| 7,
            child_size: |m| m / 4,
            base: 64,
            linear_space: true,
            declared_f: FTag::Sqrt,
            declared_l: LTag::Const,
        };
        strassen.validate(1 << 14).unwrap();
        let bad = HBPDescriptor {
            fanout: |_| 1,
            child_size: |m| m / 4,
            ..strassen
        };
        assert!(bad.validate(1 << 14).is_err());
        let no_shrink = HBPDescriptor {
            child_size: |m| m,
            ..strassen
        };
        assert!(no_shrink.validate(1 << 10).is_err());
    }
}
