//! Fully associative LRU set of block ids with O(1) touch/insert/remove.

use rustc_hash::FxHashMap;

use super::BlockId;

const NIL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    block: BlockId,
    prev: u32,
    next: u32,
}

/// One core's private cache, tracked at block granularity.
///
/// The head of the intrusive list is the most recently used block, the tail
/// is the eviction victim.
#[derive(Clone, Debug)]
pub struct Lru {
    capacity: usize,
    map: FxHashMap<BlockId, u32>,
    nodes: Vec<Node>,
    free: Vec<u32>,
    head: u32,
    tail: u32,
}

impl Lru {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "cache must hold at least one block");
        Self {
            capacity,
            map: FxHashMap::default(),
            nodes: Vec::with_capacity(capacity.min(1 << 16)),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, block: BlockId) -> bool {
        self.map.contains_key(&block)
    }

    /// Marks `block` most recently used. Returns false if it is not resident.
    pub fn touch(&mut self, block: BlockId) -> bool {
        match self.map.get(&block) {
            Some(&idx) => {
                self.unlink(idx);
                self.push_front(idx);
                true
            }
            None => false,
        }
    }

    /// Installs a block that is not resident, returning the evicted victim if
    /// the cache was full.
    pub fn insert(&mut self, block: BlockId) -> Option<BlockId> {
        debug_assert!(!self.contains(block));
        let victim = if self.map.len() >= self.capacity {
            let t = self.tail;
            let b = self.nodes[t as usize].block;
            self.remove(b);
            Some(b)
        } else {
            None
        };
        let node = Node {
            block,
            prev: NIL,
            next: NIL,
        };
        let idx = match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        self.push_front(idx);
        self.map.insert(block, idx);
        victim
    }

    pub fn remove(&mut self, block: BlockId) -> bool {
        match self.map.remove(&block) {
            Some(idx) => {
                self.unlink(idx);
                self.free.push(idx);
                true
            }
            None => false,
        }
    }

    /// Resident blocks from most to least recently used.
    pub fn order(&self) -> Vec<BlockId> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.head;
        while cur != NIL {
            let n = self.nodes[cur as usize];
            out.push(n.block);
            cur = n.next;
        }
        out
    }

    fn unlink(&mut self, idx: u32) {
        let Node { prev, next, .. } = self.nodes[idx as usize];
        if prev != NIL {
            self.nodes[prev as usize].next = next;
        } else {
            self.head = next;
        }
        if next != NIL {
            self.nodes[next as usize].prev = prev;
        } else {
            self.tail = prev;
        }
    }

    fn push_front(&mut self, idx: u32) {
        self.nodes[idx as usize].prev = NIL;
        self.nodes[idx as usize].next = self.head;
        if self.head != NIL {
            self.nodes[self.head as usize].prev = idx;
        }
        self.head = idx;
        if self.tail == NIL {
            self.tail = idx;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference replayer: a vector kept in recency order.
    fn reference(cap: usize, trace: &[u64]) -> (Vec<u64>, Vec<Option<u64>>) {
        let mut v: Vec<u64> = Vec::new();
        let mut evicted = Vec::new();
        for &b in trace {
            if let Some(pos) = v.iter().position(|&x| x == b) {
                v.remove(pos);
                v.insert(0, b);
                evicted.push(None);
            } else {
                let e = if v.len() >= cap { v.pop() } else { None };
                v.insert(0, b);
                evicted.push(e);
            }
        }
        (v, evicted)
    }

    #[test]
    fn evicts_least_recent() {
        let mut c = Lru::new(2);
        assert_eq!(c.insert(1), None);
        assert_eq!(c.insert(2), None);
        assert!(c.touch(1));
        assert_eq!(c.insert(3), Some(2));
        assert_eq!(c.order(), vec![3, 1]);
    }

    proptest! {
        #[test]
        fn matches_reference_replayer(cap in 1usize..8, trace in prop::collection::vec(0u64..12, 0..200)) {
            let mut c = Lru::new(cap);
            let mut evicted = Vec::new();
            for &b in &trace {
                if c.touch(b) {
                    evicted.push(None);
                } else {
                    evicted.push(c.insert(b));
                }
            }
            let (order, ref_evicted) = reference(cap, &trace);
            prop_assert_eq!(c.order(), order);
            prop_assert_eq!(evicted, ref_evicted);
        }
    }
}
