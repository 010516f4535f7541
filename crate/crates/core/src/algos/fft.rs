//! Six-step FFT over complex values stored as two words (f64 bit patterns).
//! A node of size n = n1·n2 views the input as an n1 × n2 row-major matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::rc::Rc;

use crate::compute::{FanOut, Job, LeafFn, Stages};
use crate::memsim::Addr;

use super::morton::{log2, rect_inv};
use super::MapFn;

pub const FFT_BASE: usize = 4;

/// Split of a size-n transform into n1 × n2 with n1 ≥ n2.
pub fn fft_split(n: usize) -> (usize, usize) {
    let n1 = 1 << log2(n).div_ceil(2);
    (n1, n / n1)
}

pub fn fft_levels(n: usize) -> u32 {
    if n <= FFT_BASE {
        return 1;
    }
    let (n1, n2) = fft_split(n);
    let t = MapFn::levels_for(n);
    1 + 3 * t + FanOut::levels_for(n2, fft_levels(n1)) + FanOut::levels_for(n1, fft_levels(n2))
}

#[derive(Clone, Copy)]
struct Cx {
    re: f64,
    im: f64,
}

impl Cx {
    fn mul(self, o: Cx) -> Cx {
        Cx {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

fn load(cx: &mut crate::compute::Ctx, at: Addr) -> Cx {
    Cx {
        re: cx.read_f64(at),
        im: cx.read_f64(at + 1),
    }
}

fn store(cx: &mut crate::compute::Ctx, at: Addr, v: Cx) {
    cx.write_f64(at, v.re);
    cx.write_f64(at + 1, v.im);
}

/// Twiddle tables keyed by transform size.
pub type Twiddles = Rc<BTreeMap<usize, Addr>>;

/// Transform sizes that occur in the recursion below `n`.
pub fn sizes(n: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut todo = vec![n];
    while let Some(m) = todo.pop() {
        if out.insert(m) && m > FFT_BASE {
            let (n1, n2) = fft_split(m);
            todo.extend([n1, n2]);
        }
    }
    out
}

fn root(j: usize, m: usize) -> (f64, f64) {
    let a = -2.0 * PI * (j % m) as f64 / m as f64;
    (a.cos(), a.sin())
}

/// Table for size `m`: the `m` roots of unity for a base case, otherwise
/// `ω_m^(i2·k1)` stored in the order the twiddle pass visits `(k1, i2)`.
pub fn twiddle_table(m: usize) -> Vec<(f64, f64)> {
    if m <= FFT_BASE {
        return (0..m).map(|j| root(j, m)).collect();
    }
    let (n1, n2) = fft_split(m);
    (0..m)
        .map(|i| {
            let (k1, i2) = rect_inv(i, log2(n1), log2(n2));
            root(i2 * k1, m)
        })
        .collect()
}

/// FFT of `n` complex values at `x` into `out`.
pub fn fft(x: Addr, out: Addr, n: usize, tw: Twiddles) -> Box<dyn Job> {
    let table = tw[&n];
    if n <= FFT_BASE {
        return LeafFn::boxed("fft-base", 4 * n as u64, move |cx| {
            let v: Vec<Cx> = (0..n).map(|i| load(cx, x + 2 * i as u64)).collect();
            for k in 0..n {
                let mut acc = Cx { re: 0.0, im: 0.0 };
                for (i, &vi) in v.iter().enumerate() {
                    let w = load(cx, table + 2 * ((i * k) % n) as u64);
                    let t = vi.mul(w);
                    acc.re += t.re;
                    acc.im += t.im;
                }
                store(cx, out + 2 * k as u64, acc);
            }
        });
    }
    let (n1, n2) = fft_split(n);
    let (b1, b2) = (log2(n1), log2(n2));
    let t = MapFn::levels_for(n);
    let levels = [
        t,
        FanOut::levels_for(n2, fft_levels(n1)),
        t,
        FanOut::levels_for(n1, fft_levels(n2)),
        t,
    ];
    let words = 2 * n as u64;
    Box::new(Stages::new(
        "fft",
        2 * words,
        2 * words,
        &levels,
        move |frame| {
            let a = frame.expect("fft frame");
            let b = a + words;
            let w = |i: usize| 2 * i as u64;
            let (tw1, tw2) = (tw.clone(), tw.clone());
            // a[i2][i1] = x[i1·n2 + i2]
            let t1 = MapFn::boxed("fft-transpose", n, 4, move |i, cx| {
                let (i2, i1) = rect_inv(i, b2, b1);
                let v = load(cx, x + w(i1 * n2 + i2));
                store(cx, a + w(i2 * n1 + i1), v);
            });
            let rows = FanOut::build(
                "fft-rows",
                n2,
                fft_levels(n1),
                4 * n1 as u64,
                Rc::new(move |k| fft(a + w(k * n1), b + w(k * n1), n1, tw1.clone())),
            );
            // c[k1][i2] = b[i2][k1]·ω^(i2·k1), stored over a
            let t2 = MapFn::boxed("fft-twiddle", n, 6, move |i, cx| {
                let (k1, i2) = rect_inv(i, b1, b2);
                let v = load(cx, b + w(i2 * n1 + k1));
                let f = load(cx, table + w(i));
                store(cx, a + w(k1 * n2 + i2), v.mul(f));
            });
            let cols = FanOut::build(
                "fft-cols",
                n1,
                fft_levels(n2),
                4 * n2 as u64,
                Rc::new(move |k| fft(a + w(k * n2), b + w(k * n2), n2, tw2.clone())),
            );
            // out[k1 + n1·k2] = d[k1][k2], d stored over b
            let t3 = MapFn::boxed("fft-transpose", n, 4, move |i, cx| {
                let (k1, k2) = rect_inv(i, b1, b2);
                let v = load(cx, b + w(k1 * n2 + k2));
                store(cx, out + w(k1 + n1 * k2), v);
            });
            vec![t1, rows, t2, cols, t3]
        },
    ))
}
