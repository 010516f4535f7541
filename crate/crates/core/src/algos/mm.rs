use std::rc::Rc;

use crate::compute::{FanOut, Job, LeafFn, Stages};
use crate::memsim::Addr;

use super::matrix::matrix_add;
use super::morton::bi;
use super::MapFn;

/// Sides at or below this multiply sequentially.
pub const MM_BASE: usize = 8;

fn naive(label: &'static str, a: Addr, b: Addr, c: Addr, n: usize) -> Box<dyn Job> {
    let len = n * n;
    LeafFn::boxed(label, 3 * len as u64, move |cx| {
        let av: Vec<u64> = (0..len).map(|i| cx.read(a + i as u64)).collect();
        let bv: Vec<u64> = (0..len).map(|i| cx.read(b + i as u64)).collect();
        for r in 0..n {
            for col in 0..n {
                let mut s = 0u64;
                for k in 0..n {
                    s = s.wrapping_add(av[bi(r, k)].wrapping_mul(bv[bi(k, col)]));
                }
                cx.write(c + bi(r, col) as u64, s);
            }
        }
    })
}

pub fn strassen_levels(n: usize) -> u32 {
    if n <= MM_BASE {
        return 1;
    }
    let q = n * n / 4;
    1 + 2 * MapFn::levels_for(q) + FanOut::levels_for(7, strassen_levels(n / 2))
}

/// Strassen on BI matrices. Each node allocates 17 quadrant-sized arrays in
/// its frame: the ten operand sums followed by the seven products.
pub fn strassen(a: Addr, b: Addr, c: Addr, n: usize) -> Box<dyn Job> {
    if n <= MM_BASE {
        return naive("strassen-base", a, b, c, n);
    }
    let q = n * n / 4;
    let qw = q as u64;
    let levels = [
        MapFn::levels_for(q),
        FanOut::levels_for(7, strassen_levels(n / 2)),
        MapFn::levels_for(q),
    ];
    Box::new(Stages::new(
        "strassen",
        3 * (n * n) as u64,
        17 * qw,
        &levels,
        move |frame| {
            let l = frame.expect("strassen frame");
            let t = move |k: u64| l + k * qw;
            let pre = MapFn::boxed("strassen-pre", q, 18, move |j, cx| {
                let j = j as u64;
                let [a11, a12, a21, a22] = [0, 1, 2, 3].map(|k| cx.read(a + k * qw + j));
                let [b11, b12, b21, b22] = [0, 1, 2, 3].map(|k| cx.read(b + k * qw + j));
                let sums = [
                    a11.wrapping_add(a22),
                    b11.wrapping_add(b22),
                    a21.wrapping_add(a22),
                    b12.wrapping_sub(b22),
                    b21.wrapping_sub(b11),
                    a11.wrapping_add(a12),
                    a21.wrapping_sub(a11),
                    b11.wrapping_add(b12),
                    a12.wrapping_sub(a22),
                    b21.wrapping_add(b22),
                ];
                for (k, v) in sums.into_iter().enumerate() {
                    cx.write(t(k as u64) + j, v);
                }
            });
            let quad = move |m: Addr, k: u64| m + k * qw;
            let operands: [(Addr, Addr); 7] = [
                (t(0), t(1)),
                (t(2), quad(b, 0)),
                (quad(a, 0), t(3)),
                (quad(a, 3), t(4)),
                (t(5), quad(b, 3)),
                (t(6), t(7)),
                (t(8), t(9)),
            ];
            let fan = FanOut::build(
                "strassen-products",
                7,
                strassen_levels(n / 2),
                3 * qw,
                Rc::new(move |k| strassen(operands[k].0, operands[k].1, t(10 + k as u64), n / 2)),
            );
            let post = MapFn::boxed("strassen-post", q, 11, move |j, cx| {
                let j = j as u64;
                let m = [0, 1, 2, 3, 4, 5, 6].map(|k| cx.read(t(10 + k) + j));
                let c11 = m[0]
                    .wrapping_add(m[3])
                    .wrapping_sub(m[4])
                    .wrapping_add(m[6]);
                let c12 = m[2].wrapping_add(m[4]);
                let c21 = m[1].wrapping_add(m[3]);
                let c22 = m[0]
                    .wrapping_sub(m[1])
                    .wrapping_add(m[2])
                    .wrapping_add(m[5]);
                for (k, v) in [c11, c12, c21, c22].into_iter().enumerate() {
                    cx.write(c + k as u64 * qw + j, v);
                }
            });
            vec![pre, fan, post]
        },
    ))
}

pub fn depth_n_levels(n: usize) -> u32 {
    if n <= MM_BASE {
        return 1;
    }
    let fan = FanOut::levels_for(4, depth_n_levels(n / 2));
    1 + 2 * fan + MapFn::levels_for(n * n)
}

/// Eight-way recursive multiply: two sequenced collections of four products
/// into local arrays X and Y, then C = X + Y.
pub fn depth_n_mm(a: Addr, b: Addr, c: Addr, n: usize) -> Box<dyn Job> {
    if n <= MM_BASE {
        return naive("depth-n-base", a, b, c, n);
    }
    let len = n * n;
    let qw = (len / 4) as u64;
    let fan_levels = FanOut::levels_for(4, depth_n_levels(n / 2));
    let levels = [fan_levels, fan_levels, MapFn::levels_for(len)];
    Box::new(Stages::new(
        "depth-n-mm",
        3 * len as u64,
        2 * len as u64,
        &levels,
        move |frame| {
            let x = frame.expect("mm frame");
            let y = x + len as u64;
            let collection = move |k: u64, out: Addr| {
                FanOut::build(
                    "mm-products",
                    4,
                    depth_n_levels(n / 2),
                    3 * qw,
                    Rc::new(move |i| {
                        let (r, col) = (i as u64 / 2, i as u64 % 2);
                        depth_n_mm(
                            a + (2 * r + k) * qw,
                            b + (2 * k + col) * qw,
                            out + i as u64 * qw,
                            n / 2,
                        )
                    }),
                )
            };
            vec![collection(0, x), collection(1, y), matrix_add(x, y, c, len)]
        },
    ))
}
