use crate::compute::{inorder_pos, split, Bp, BpKernel, Ctx, Job, Stages};
use crate::memsim::Addr;

use super::MapFn;

/// Balanced sum: leaves pass their element up through the parent's frame
/// slot, internal nodes add their two slots.
pub struct Sum {
    pub a: Addr,
}

impl BpKernel for Sum {
    fn label(&self) -> &'static str {
        "msum"
    }

    fn leaf(&self, i: usize, slot: Option<Addr>, cx: &mut Ctx) {
        let v = cx.read(self.a + i as u64);
        if let Some(s) = slot {
            cx.write(s, v);
        }
    }

    fn combine(&self, _lo: usize, _hi: usize, slot: Option<Addr>, cx: &mut Ctx) {
        let f = cx.frame();
        let s = cx.read(f + 1).wrapping_add(cx.read(f + 2));
        if let Some(out) = slot {
            cx.write(out, s);
        }
    }
}

pub fn msum(a: Addr, n: usize, result: Addr) -> Box<dyn Job> {
    Bp::boxed(Sum { a }, n, Some(result))
}

/// Up-sweep: subtree sums stored at the in-order position of each internal
/// node.
struct UpSweep {
    a: Addr,
    sums: Addr,
}

impl BpKernel for UpSweep {
    fn label(&self) -> &'static str {
        "ps-up"
    }

    fn leaf(&self, i: usize, slot: Option<Addr>, cx: &mut Ctx) {
        let v = cx.read(self.a + i as u64);
        if let Some(s) = slot {
            cx.write(s, v);
        }
    }

    fn combine(&self, lo: usize, hi: usize, slot: Option<Addr>, cx: &mut Ctx) {
        let f = cx.frame();
        let s = cx.read(f + 1).wrapping_add(cx.read(f + 2));
        cx.write(self.sums + inorder_pos(lo, hi) as u64, s);
        if let Some(out) = slot {
            cx.write(out, s);
        }
    }
}

/// Down-sweep: each node receives the sum of everything to its left in its
/// slot and hands offsets to its children.
struct DownSweep {
    a: Addr,
    sums: Addr,
    ps: Addr,
}

impl DownSweep {
    fn offset(slot: Option<Addr>, cx: &mut Ctx) -> u64 {
        slot.map_or(0, |s| cx.read(s))
    }
}

impl BpKernel for DownSweep {
    fn label(&self) -> &'static str {
        "ps-down"
    }

    fn leaf(&self, i: usize, slot: Option<Addr>, cx: &mut Ctx) {
        let off = Self::offset(slot, cx);
        let v = cx.read(self.a + i as u64);
        cx.write(self.ps + i as u64, off.wrapping_add(v));
    }

    fn down(&self, lo: usize, hi: usize, slot: Option<Addr>, cx: &mut Ctx) {
        let off = Self::offset(slot, cx);
        let mid = split(lo, hi);
        let left = if mid - lo == 1 {
            cx.read(self.a + lo as u64)
        } else {
            cx.read(self.sums + inorder_pos(lo, mid) as u64)
        };
        let f = cx.frame();
        cx.write(f + 1, off);
        cx.write(f + 2, off.wrapping_add(left));
    }
}

/// Inclusive prefix sums as an up-sweep stage followed by a down-sweep stage.
/// `sums` must hold `2n − 1` words.
pub fn prefix_sums(a: Addr, n: usize, sums: Addr, ps: Addr) -> Box<dyn Job> {
    let levels = Bp::new(std::rc::Rc::new(Sum { a }), 0, n, None).levels();
    Box::new(Stages::new(
        "prefix-sums",
        3 * n as u64,
        0,
        &[levels, levels],
        move |_| {
            vec![
                Bp::boxed(UpSweep { a, sums }, n, None),
                Bp::boxed(DownSweep { a, sums, ps }, n, None),
            ]
        },
    ))
}

/// Copies `n` words; used as the compression scan.
pub fn copy(label: &'static str, src: Addr, dst: Addr, n: usize) -> Box<dyn Job> {
    MapFn::boxed(label, n, 2, move |i, cx| {
        let v = cx.read(src + i as u64);
        cx.write(dst + i as u64, v);
    })
}
