use std::rc::Rc;

use rustc_hash::FxHashMap;

use crate::memsim::{Addr, MachineState, Word};

/// One instrumented memory access of a task body.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Access {
    Read(Addr),
    Write(Addr, Word),
}

impl Access {
    pub fn addr(&self) -> Addr {
        match *self {
            Access::Read(a) | Access::Write(a, _) => a,
        }
    }
}

/// Builds the access list of a task body.
///
/// Values are read from the store when the body is built; the accesses are
/// then replayed one per simulator event. Writes become visible at replay,
/// so a body sees its own earlier writes through the pending map.
pub struct Ctx<'a> {
    mem: &'a MachineState,
    frame: Option<Addr>,
    ops: Vec<Access>,
    pending: FxHashMap<Addr, Word>,
}

impl<'a> Ctx<'a> {
    pub fn new(mem: &'a MachineState, frame: Option<Addr>) -> Self {
        Self {
            mem,
            frame,
            ops: Vec::new(),
            pending: FxHashMap::default(),
        }
    }

    /// Base of the running task's stack frame.
    pub fn frame(&self) -> Addr {
        self.frame
            .expect("task body touched its frame but declared none")
    }

    pub fn read(&mut self, addr: Addr) -> Word {
        self.ops.push(Access::Read(addr));
        match self.pending.get(&addr) {
            Some(&w) => w,
            None => self.mem.peek(addr),
        }
    }

    pub fn write(&mut self, addr: Addr, w: Word) {
        self.ops.push(Access::Write(addr, w));
        self.pending.insert(addr, w);
    }

    pub fn read_i64(&mut self, addr: Addr) -> i64 {
        self.read(addr) as i64
    }

    pub fn write_i64(&mut self, addr: Addr, v: i64) {
        self.write(addr, v as Word);
    }

    pub fn read_f64(&mut self, addr: Addr) -> f64 {
        f64::from_bits(self.read(addr))
    }

    pub fn write_f64(&mut self, addr: Addr, v: f64) {
        self.write(addr, v.to_bits());
    }

    pub fn into_ops(self) -> Vec<Access> {
        self.ops
    }
}

/// How a task continues after its head.
pub enum Expansion {
    Leaf,
    /// Right child goes to the deque, the left child runs next.
    Fork(Box<dyn Job>, Box<dyn Job>),
    /// Stages run one after another.
    Seq(Vec<Box<dyn Job>>),
}

/// A lazily expanded node of a fork-join computation.
pub trait Job {
    fn label(&self) -> &'static str;

    /// Declared size |τ| in words.
    fn size(&self) -> u64;

    /// Number of priority levels spanned by the subtree rooted here.
    fn levels(&self) -> u32 {
        1
    }

    /// Stack words for locals; zero means no frame.
    fn frame_words(&self) -> u64 {
        0
    }

    /// Place fork children at the bottom of this node's band instead of one
    /// level below it, so that every leaf of a fan-out gets the same priority.
    fn align_children(&self) -> bool {
        false
    }

    /// Down-pass work, run before expansion.
    fn head(&self, _cx: &mut Ctx) {}

    fn expand(&self, frame: Option<Addr>) -> Expansion;

    /// Up-pass work, run after all children finished.
    fn tail(&self, _cx: &mut Ctx) {}
}

/// Index split of a BP range: the left part gets the ceiling.
pub fn split(lo: usize, hi: usize) -> usize {
    lo + (hi - lo).div_ceil(2)
}

/// ⌈log2 k⌉ for k ≥ 1.
pub fn ceil_log2(k: u64) -> u32 {
    debug_assert!(k >= 1);
    64 - (k - 1).leading_zeros()
}

/// Node operations of a balanced binary fork tree over `[lo, hi)`.
///
/// Each internal node owns a frame `[join, slot_l, slot_r, locals..]`. A
/// node's `slot` is the word in its parent's frame reserved for it (or the
/// root slot supplied by the caller); kernels use it to pass a value up or
/// down.
pub trait BpKernel: 'static {
    fn label(&self) -> &'static str;

    /// Words accessed per leaf, used for the declared size.
    fn leaf_words(&self) -> u64 {
        1
    }

    fn locals(&self) -> u64 {
        0
    }

    fn leaf(&self, i: usize, slot: Option<Addr>, cx: &mut Ctx);

    fn down(&self, _lo: usize, _hi: usize, _slot: Option<Addr>, _cx: &mut Ctx) {}

    fn combine(&self, _lo: usize, _hi: usize, _slot: Option<Addr>, _cx: &mut Ctx) {}
}

pub struct Bp<K: BpKernel> {
    kernel: Rc<K>,
    lo: usize,
    hi: usize,
    slot: Option<Addr>,
}

impl<K: BpKernel> Bp<K> {
    pub fn new(kernel: Rc<K>, lo: usize, hi: usize, slot: Option<Addr>) -> Self {
        assert!(hi > lo, "empty BP range");
        Self {
            kernel,
            lo,
            hi,
            slot,
        }
    }

    pub fn boxed(kernel: K, n: usize, slot: Option<Addr>) -> Box<dyn Job> {
        Box::new(Self::new(Rc::new(kernel), 0, n, slot))
    }
}

impl<K: BpKernel> Job for Bp<K> {
    fn label(&self) -> &'static str {
        self.kernel.label()
    }

    fn size(&self) -> u64 {
        (self.hi - self.lo) as u64 * self.kernel.leaf_words()
    }

    fn levels(&self) -> u32 {
        ceil_log2((self.hi - self.lo) as u64) + 1
    }

    fn frame_words(&self) -> u64 {
        if self.hi - self.lo == 1 {
            0
        } else {
            3 + self.kernel.locals()
        }
    }

    fn head(&self, cx: &mut Ctx) {
        if self.hi - self.lo == 1 {
            self.kernel.leaf(self.lo, self.slot, cx);
        } else {
            self.kernel.down(self.lo, self.hi, self.slot, cx);
        }
    }

    fn expand(&self, frame: Option<Addr>) -> Expansion {
        if self.hi - self.lo == 1 {
            return Expansion::Leaf;
        }
        let f = frame.expect("BP fork without frame");
        let mid = split(self.lo, self.hi);
        Expansion::Fork(
            Box::new(Bp::new(self.kernel.clone(), self.lo, mid, Some(f + 1))),
            Box::new(Bp::new(self.kernel.clone(), mid, self.hi, Some(f + 2))),
        )
    }

    fn tail(&self, cx: &mut Ctx) {
        if self.hi - self.lo > 1 {
            self.kernel.combine(self.lo, self.hi, self.slot, cx);
        }
    }
}

pub type MakeJob = Rc<dyn Fn(usize) -> Box<dyn Job>>;

/// A BP-like fork tree whose leaves are `v` independent (recursive) jobs.
pub struct FanOut {
    label: &'static str,
    lo: usize,
    hi: usize,
    make: MakeJob,
    child_levels: u32,
    child_size: u64,
}

impl FanOut {
    /// Returns the single child directly when `v == 1`.
    pub fn build(
        label: &'static str,
        v: usize,
        child_levels: u32,
        child_size: u64,
        make: MakeJob,
    ) -> Box<dyn Job> {
        assert!(v >= 1);
        if v == 1 {
            return make(0);
        }
        Box::new(FanOut {
            label,
            lo: 0,
            hi: v,
            make,
            child_levels,
            child_size,
        })
    }

    pub fn levels_for(v: usize, child_levels: u32) -> u32 {
        ceil_log2(v as u64) + child_levels
    }

    fn part(&self, lo: usize, hi: usize) -> Box<dyn Job> {
        if hi - lo == 1 {
            (self.make)(lo)
        } else {
            Box::new(FanOut {
                label: self.label,
                lo,
                hi,
                make: self.make.clone(),
                child_levels: self.child_levels,
                child_size: self.child_size,
            })
        }
    }
}

impl Job for FanOut {
    fn label(&self) -> &'static str {
        self.label
    }

    fn size(&self) -> u64 {
        (self.hi - self.lo) as u64 * self.child_size
    }

    fn levels(&self) -> u32 {
        Self::levels_for(self.hi - self.lo, self.child_levels)
    }

    fn frame_words(&self) -> u64 {
        1
    }

    fn align_children(&self) -> bool {
        true
    }

    /// The smaller part goes left: with aligned priorities the pushed right
    /// part then never ranks below anything the left part pushes.
    fn expand(&self, _frame: Option<Addr>) -> Expansion {
        let mid = self.lo + (self.hi - self.lo) / 2;
        Expansion::Fork(self.part(self.lo, mid), self.part(mid, self.hi))
    }
}

type StageBuilder = Box<dyn Fn(Option<Addr>) -> Vec<Box<dyn Job>>>;

/// Sequenced stages built lazily from the frame address of the node.
pub struct Stages {
    label: &'static str,
    size: u64,
    levels: u32,
    frame_words: u64,
    build: StageBuilder,
}

impl Stages {
    /// `stage_levels` must equal the `levels()` of the stages `build` returns.
    pub fn new(
        label: &'static str,
        size: u64,
        frame_words: u64,
        stage_levels: &[u32],
        build: impl Fn(Option<Addr>) -> Vec<Box<dyn Job>> + 'static,
    ) -> Self {
        Self {
            label,
            size,
            levels: 1 + stage_levels.iter().sum::<u32>(),
            frame_words,
            build: Box::new(build),
        }
    }
}

impl Job for Stages {
    fn label(&self) -> &'static str {
        self.label
    }

    fn size(&self) -> u64 {
        self.size
    }

    fn levels(&self) -> u32 {
        self.levels
    }

    fn frame_words(&self) -> u64 {
        self.frame_words
    }

    fn expand(&self, frame: Option<Addr>) -> Expansion {
        let stages = (self.build)(frame);
        debug_assert_eq!(
            1 + stages.iter().map(|s| s.levels()).sum::<u32>(),
            self.levels,
            "declared stage levels of {} disagree with built stages",
            self.label
        );
        Expansion::Seq(stages)
    }
}

/// A leaf whose whole body is a closure (sequential base cases).
pub struct LeafFn {
    label: &'static str,
    size: u64,
    body: Box<dyn Fn(&mut Ctx)>,
}

impl LeafFn {
    pub fn boxed(
        label: &'static str,
        size: u64,
        body: impl Fn(&mut Ctx) + 'static,
    ) -> Box<dyn Job> {
        Box::new(Self {
            label,
            size,
            body: Box::new(body),
        })
    }
}

impl Job for LeafFn {
    fn label(&self) -> &'static str {
        self.label
    }

    fn size(&self) -> u64 {
        self.size
    }

    fn head(&self, cx: &mut Ctx) {
        (self.body)(cx)
    }

    fn expand(&self, _frame: Option<Addr>) -> Expansion {
        Expansion::Leaf
    }
}

/// Priority of a fork child: one below the parent, or aligned to the bottom
/// of the parent's band when the parent asks for it.
pub fn child_priority(parent_prio: i64, parent_levels: u32, child_levels: u32, align: bool) -> i64 {
    debug_assert!(child_levels < parent_levels);
    if align {
        parent_prio - parent_levels as i64 + child_levels as i64
    } else {
        parent_prio - 1
    }
}

/// Priorities of sequenced stages: consecutive disjoint bands below the parent.
pub fn stage_priorities(parent_prio: i64, stage_levels: &[u32]) -> Vec<i64> {
    let mut top = parent_prio - 1;
    stage_levels
        .iter()
        .map(|&l| {
            let p = top;
            top -= l as i64;
            p
        })
        .collect()
}
