/// Full binary tree over `p` leaves in heap layout (root 1, leaves
/// `p..2p`), evaluated in synchronous steps: one level per step up, one per
/// step down.
#[derive(Clone, Debug)]
pub struct PrefixTree {
    p: usize,
    /// Heap index of the leaf owned by each core, in left-to-right order.
    leaf_of: Vec<usize>,
    height: u32,
    sum: Vec<u64>,
    max: Vec<Option<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixResult {
    /// Exclusive prefix count at each core's leaf (its rank among the
    /// flagged leaves).
    pub rank: Vec<u64>,
    pub total: u64,
    /// Largest key published by any leaf.
    pub max: Option<i64>,
    pub up_steps: u32,
    pub down_steps: u32,
}

impl PrefixTree {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1);
        let mut leaf_of = Vec::with_capacity(p);
        Self::inorder_leaves(1, p, &mut leaf_of);
        let height = leaf_of.iter().map(|&i| Self::depth(i)).max().unwrap_or(0);
        Self {
            p,
            leaf_of,
            height,
            sum: vec![0; 2 * p],
            max: vec![None; 2 * p],
        }
    }

    fn depth(mut i: usize) -> u32 {
        let mut d = 0;
        while i > 1 {
            i /= 2;
            d += 1;
        }
        d
    }

    fn inorder_leaves(i: usize, p: usize, out: &mut Vec<usize>) {
        if i >= p {
            out.push(i);
        } else {
            Self::inorder_leaves(2 * i, p, out);
            Self::inorder_leaves(2 * i + 1, p, out);
        }
    }

    pub fn leaves(&self) -> usize {
        self.p
    }

    pub fn nodes(&self) -> usize {
        2 * self.p - 1
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Runs the up-sweep and down-sweep for one phase. `flag[c]` is core
    /// `c`'s 0/1 entry; `key[c]` an optional value whose maximum is also
    /// gathered on the way up.
    pub fn run(&mut self, flag: &[bool], key: &[Option<i64>]) -> PrefixResult {
        assert_eq!(flag.len(), self.p);
        self.sum.iter_mut().for_each(|s| *s = 0);
        self.max.iter_mut().for_each(|m| *m = None);
        for (c, &leaf) in self.leaf_of.iter().enumerate() {
            self.sum[leaf] = flag[c] as u64;
            self.max[leaf] = key.get(c).copied().flatten();
        }
        // Up: at step s every internal node whose children are ready combines.
        let mut ready: Vec<bool> = (0..2 * self.p).map(|i| i >= self.p).collect();
        let mut up_steps = 0;
        while !ready[1] && self.p > 1 {
            let snapshot = ready.clone();
            for i in 1..self.p {
                if !snapshot[i] && snapshot[2 * i] && snapshot[2 * i + 1] {
                    self.sum[i] = self.sum[2 * i] + self.sum[2 * i + 1];
                    self.max[i] = self.max[2 * i].max(self.max[2 * i + 1]);
                    ready[i] = true;
                }
            }
            up_steps += 1;
        }
        // Down: prefix of everything left of a node, pushed one level per step.
        let mut prefix = vec![0u64; 2 * self.p];
        let mut known = vec![false; 2 * self.p];
        known[1] = true;
        let mut down_steps = 0;
        while self.leaf_of.iter().any(|&l| !known[l]) {
            let snapshot = known.clone();
            for i in 1..self.p {
                if snapshot[i] && !snapshot[2 * i] {
                    prefix[2 * i] = prefix[i];
                    prefix[2 * i + 1] = prefix[i] + self.sum[2 * i];
                    known[2 * i] = true;
                    known[2 * i + 1] = true;
                }
            }
            down_steps += 1;
        }
        PrefixResult {
            rank: self.leaf_of.iter().map(|&l| prefix[l]).collect(),
            total: self.sum[1],
            max: self.max[1],
            up_steps,
            down_steps,
        }
    }
}
