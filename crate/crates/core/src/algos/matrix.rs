use crate::compute::{FanOut, Job, LeafFn, Stages};
use crate::memsim::Addr;

use super::morton::{bi, bi_inv, log2};
use super::MapFn;

/// Transpose of a BI matrix into a second BI array.
pub fn mt_bi(src: Addr, dst: Addr, n: usize) -> Box<dyn Job> {
    MapFn::boxed("mt-bi", n * n, 2, move |i, cx| {
        let (r, c) = bi_inv(i);
        let v = cx.read(src + i as u64);
        cx.write(dst + bi(c, r) as u64, v);
    })
}

/// Leaf `i` fills BI position `i` from the row-major input.
pub fn rm_to_bi(src: Addr, dst: Addr, n: usize) -> Box<dyn Job> {
    MapFn::boxed("rm-to-bi", n * n, 2, move |i, cx| {
        let (r, c) = bi_inv(i);
        let v = cx.read(src + (r * n + c) as u64);
        cx.write(dst + i as u64, v);
    })
}

/// Leaf `i` reads BI position `i` and writes its row-major cell.
pub fn bi_to_rm_direct(src: Addr, dst: Addr, n: usize) -> Box<dyn Job> {
    MapFn::boxed("bi-to-rm", n * n, 2, move |i, cx| {
        let (r, c) = bi_inv(i);
        let v = cx.read(src + i as u64);
        cx.write(dst + (r * n + c) as u64, v);
    })
}

pub fn matrix_add(a: Addr, b: Addr, c: Addr, len: usize) -> Box<dyn Job> {
    MapFn::boxed("ma", len, 3, move |i, cx| {
        let i = i as u64;
        let v = cx.read(a + i).wrapping_add(cx.read(b + i));
        cx.write(c + i, v);
    })
}

/// Gap inserted after a subarray of side `r`.
pub fn gap(r: usize) -> usize {
    if r < 16 {
        return 0;
    }
    let l = log2(r) as usize;
    r / (l * l)
}

/// Gapped row-major layout: within a row, each aligned span of `2r` columns
/// is two spans of `r` columns separated by a gap of `gap(r)` words.
#[derive(Clone, Debug)]
pub struct GapLayout {
    pub n: usize,
    col: Vec<usize>,
    pub stride: usize,
}

impl GapLayout {
    pub fn new(n: usize) -> Self {
        let mut width = vec![1usize];
        let mut r = 1;
        while r < n {
            width.push(2 * width[width.len() - 1] + gap(r));
            r *= 2;
        }
        let col = (0..n)
            .map(|c| {
                let mut pos = 0;
                let mut r = n;
                let mut k = width.len() - 1;
                while r > 1 {
                    let half = r / 2;
                    k -= 1;
                    if c & half != 0 {
                        pos += width[k] + gap(half);
                    }
                    r = half;
                }
                pos
            })
            .collect();
        let stride = width[width.len() - 1] + if n >= 2 { gap(n / 2) } else { 0 };
        Self { n, col, stride }
    }

    pub fn offset(&self, r: usize, c: usize) -> usize {
        r * self.stride + self.col[c]
    }

    pub fn footprint(&self) -> usize {
        self.n * self.stride
    }
}

/// BI to RM through a gapped intermediate array, then a scan that compacts
/// it into plain RM.
pub fn bi_to_rm_gapped(src: Addr, gapped: Addr, dst: Addr, n: usize) -> Box<dyn Job> {
    let g = std::rc::Rc::new(GapLayout::new(n));
    let levels = MapFn::levels_for(n * n);
    let g2 = g.clone();
    Box::new(Stages::new(
        "bi-to-rm-gapped",
        2 * (n * n) as u64,
        0,
        &[levels, levels],
        move |_| {
            let (g, g2) = (g.clone(), g2.clone());
            vec![
                MapFn::boxed("gap-scatter", n * n, 2, move |i, cx| {
                    let (r, c) = bi_inv(i);
                    let v = cx.read(src + i as u64);
                    cx.write(gapped + g.offset(r, c) as u64, v);
                }),
                MapFn::boxed("gap-compress", n * n, 2, move |j, cx| {
                    let v = cx.read(gapped + g2.offset(j / n, j % n) as u64);
                    cx.write(dst + j as u64, v);
                }),
            ]
        },
    ))
}

/// Sides at or below this convert sequentially.
pub const FFT_CONV_BASE: usize = 4;

/// Subproblem side for the FFT-style conversion of a `side × side` matrix.
pub fn conv_sub_side(side: usize) -> usize {
    1 << log2(side).div_ceil(2)
}

pub fn conv_levels(side: usize) -> u32 {
    if side <= FFT_CONV_BASE {
        return 1;
    }
    let s = conv_sub_side(side);
    let k = (side / s) * (side / s);
    1 + FanOut::levels_for(k, conv_levels(s)) + MapFn::levels_for(side * side)
}

/// BI to RM by converting each of the `(side/s)²` BI chunks recursively into
/// a local array, then copying every RM target from its chunk.
pub fn bi_to_rm_fft(src: Addr, dst: Addr, side: usize) -> Box<dyn Job> {
    let len = side * side;
    if side <= FFT_CONV_BASE {
        return LeafFn::boxed("bi-to-rm-base", 2 * len as u64, move |cx| {
            for i in 0..len {
                let (r, c) = bi_inv(i);
                let v = cx.read(src + i as u64);
                cx.write(dst + (r * side + c) as u64, v);
            }
        });
    }
    let s = conv_sub_side(side);
    let chunks = (side / s) * (side / s);
    let sub = s * s;
    let levels = [
        FanOut::levels_for(chunks, conv_levels(s)),
        MapFn::levels_for(len),
    ];
    Box::new(Stages::new(
        "bi-to-rm-fft",
        2 * len as u64,
        len as u64,
        &levels,
        move |frame| {
            let local = frame.expect("conversion frame");
            let make = std::rc::Rc::new(move |k: usize| {
                let off = (k * sub) as u64;
                bi_to_rm_fft(src + off, local + off, s)
            });
            vec![
                FanOut::build("conv-sub", chunks, conv_levels(s), 2 * sub as u64, make),
                MapFn::boxed("conv-copy", len, 2, move |j, cx| {
                    let (row, col) = (j / side, j % side);
                    let chunk = bi(row / s, col / s);
                    let at = chunk * sub + (row % s) * s + col % s;
                    let v = cx.read(local + at as u64);
                    cx.write(dst + j as u64, v);
                }),
            ]
        },
    ))
}
