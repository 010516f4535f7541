//! Bit-interleaved (Z-order) indexing. In each interleaved pair the row bit
//! is the more significant one, so quadrants come in TL, TR, BL, BR order.

/// Spreads the low 32 bits of `x` to the even bit positions.
fn spread(mut x: u64) -> u64 {
    x &= 0xffff_ffff;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

fn compact(mut x: u64) -> u64 {
    x &= 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x >> 8)) & 0x0000_ffff_0000_ffff;
    x = (x | (x >> 16)) & 0x0000_0000_ffff_ffff;
    x
}

/// BI index of `(row, col)` in a square matrix.
pub fn bi(row: usize, col: usize) -> usize {
    ((spread(row as u64) << 1) | spread(col as u64)) as usize
}

/// Inverse of [`bi`].
pub fn bi_inv(i: usize) -> (usize, usize) {
    let i = i as u64;
    (compact(i >> 1) as usize, compact(i) as usize)
}

/// Z-order index over a `2^rb × 2^cb` rectangle: the low `2·min(rb, cb)`
/// bits are interleaved, the remaining high bits index the longer side.
pub fn rect_index(row: usize, col: usize, rb: u32, cb: u32) -> usize {
    let m = rb.min(cb);
    let mask = (1usize << m) - 1;
    let low = bi(row & mask, col & mask);
    let high = if rb > cb { row >> m } else { col >> m };
    (high << (2 * m)) | low
}

/// Inverse of [`rect_index`].
pub fn rect_inv(i: usize, rb: u32, cb: u32) -> (usize, usize) {
    let m = rb.min(cb);
    let (r, c) = bi_inv(i & ((1usize << (2 * m)) - 1));
    let high = i >> (2 * m);
    if rb > cb {
        (r | (high << m), c)
    } else {
        (r, c | (high << m))
    }
}

pub fn is_pow2(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

pub fn log2(n: usize) -> u32 {
    debug_assert!(is_pow2(n));
    n.trailing_zeros()
}
