//! Plain reference implementations, computed outside the simulator.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::morton::{bi, bi_inv};

pub fn sum(a: &[u64]) -> u64 {
    a.iter().fold(0u64, |s, &x| s.wrapping_add(x))
}

pub fn prefix_sums(a: &[u64]) -> Vec<u64> {
    let mut s = 0u64;
    a.iter()
        .map(|&x| {
            s = s.wrapping_add(x);
            s
        })
        .collect()
}

/// Row-major matrix of side `n` to BI order.
pub fn rm_to_bi(rm: &[u64], n: usize) -> Vec<u64> {
    (0..n * n)
        .map(|i| {
            let (r, c) = bi_inv(i);
            rm[r * n + c]
        })
        .collect()
}

pub fn bi_to_rm(b: &[u64], n: usize) -> Vec<u64> {
    let mut out = vec![0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = b[bi(r, c)];
        }
    }
    out
}

pub fn transpose_bi(b: &[u64], n: usize) -> Vec<u64> {
    let mut out = vec![0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[bi(c, r)] = b[bi(r, c)];
        }
    }
    out
}

pub fn add(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x.wrapping_add(*y)).collect()
}

/// Triple-loop product of two BI matrices, result in BI order.
pub fn matmul_bi(a: &[u64], b: &[u64], n: usize) -> Vec<u64> {
    let ar = bi_to_rm(a, n);
    let br = bi_to_rm(b, n);
    let mut c = vec![0u64; n * n];
    for i in 0..n {
        for k in 0..n {
            let x = ar[i * n + k];
            for j in 0..n {
                c[i * n + j] = c[i * n + j].wrapping_add(x.wrapping_mul(br[k * n + j]));
            }
        }
    }
    rm_to_bi(&c, n)
}

/// Direct O(n²) DFT with forward sign convention.
pub fn dft(x: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = x.len();
    let roots: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let a = -2.0 * PI * j as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .fold((0.0, 0.0), |(re, im), (j, &(xr, xi))| {
                    let (c, s) = roots[(j * k) % n];
                    (re + xr * c - xi * s, im + xr * s + xi * c)
                })
        })
        .collect()
}

/// Reference FFT for sizes where the direct DFT is too slow.
pub fn fft_reference(x: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut buf: Vec<Complex64> = x.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf.into_iter().map(|c| (c.re, c.im)).collect()
}

/// Largest size checked against the direct DFT.
pub const DIRECT_DFT_MAX: usize = 4096;

pub fn reference_dft(x: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if x.len() <= DIRECT_DFT_MAX {
        dft(x)
    } else {
        fft_reference(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(sum(&[1, 2, 3, 4]), 10);
        assert_eq!(prefix_sums(&[1, 1, 1, 1]), vec![1, 2, 3, 4]);
        let a = rm_to_bi(&[1, 2, 3, 4], 2);
        let b = rm_to_bi(&[5, 6, 7, 8], 2);
        assert_eq!(bi_to_rm(&matmul_bi(&a, &b, 2), 2), vec![19, 22, 43, 50]);
    }

    #[test]
    fn reference_agrees_with_direct() {
        let x: Vec<(f64, f64)> = (0..64)
            .map(|i| ((i as f64).sin(), (i * i % 7) as f64))
            .collect();
        let (a, b) = (dft(&x), fft_reference(&x));
        for (p, q) in a.iter().zip(&b) {
            assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
        }
    }

    #[test]
    fn dft_impulse_and_constant() {
        let d = dft(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        assert!(d
            .iter()
            .all(|&(r, i)| (r - 1.0).abs() < 1e-12 && i.abs() < 1e-12));
        let d = dft(&[(1.0, 0.0); 4]);
        assert!((d[0].0 - 4.0).abs() < 1e-12);
        assert!(d[1..]
            .iter()
            .all(|&(r, i)| r.abs() < 1e-12 && i.abs() < 1e-12));
    }
}
