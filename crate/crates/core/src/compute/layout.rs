use super::job::split;

/// In-order index of BP node `[lo, hi)` in an output array of `2n − 1` cells:
/// leaf `i` sits at `2i`, an internal node just before its right subtree.
pub fn inorder_pos(lo: usize, hi: usize) -> usize {
    debug_assert!(hi > lo);
    if hi - lo == 1 {
        2 * lo
    } else {
        2 * split(lo, hi) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LaidOut {
    pub lo: usize,
    pub hi: usize,
    pub depth: u32,
    pub pos: usize,
}

/// Output cell of every node of the BP tree over `n` leaves, in pre-order.
pub fn layout_output(n: usize) -> Vec<LaidOut> {
    let mut out = Vec::with_capacity(2 * n.max(1) - 1);
    let mut stack = vec![(0usize, n, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        out.push(LaidOut {
            lo,
            hi,
            depth,
            pos: inorder_pos(lo, hi),
        });
        if hi - lo > 1 {
            let mid = split(lo, hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    out
}
