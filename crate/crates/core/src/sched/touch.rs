use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::compute::NodeKind;
use crate::memsim::BlockId;

/// Static facts about one task, indexed by serial.
#[derive(Clone, Debug, Serialize)]
pub struct TaskInfo {
    pub parent: Option<u64>,
    pub kind: NodeKind,
    pub size: u64,
    pub label: &'static str,
    pub stolen: bool,
    /// Distinct global-arena blocks touched by the task and its descendants.
    pub blocks: u64,
}

/// Block-touch sets of tasks, merged bottom-up as tasks complete.
#[derive(Default)]
pub struct TouchLog {
    pub tasks: Vec<TaskInfo>,
    live: FxHashMap<u64, FxHashSet<BlockId>>,
    /// Serials of the tasks whose own bodies wrote each block.
    pub writers: FxHashMap<BlockId, Vec<u64>>,
}

impl TouchLog {
    pub(crate) fn open(
        &mut self,
        serial: u64,
        parent: Option<u64>,
        size: u64,
        label: &'static str,
    ) {
        debug_assert_eq!(serial as usize, self.tasks.len());
        self.tasks.push(TaskInfo {
            parent,
            kind: NodeKind::Pending,
            size,
            label,
            stolen: false,
            blocks: 0,
        });
        self.live.insert(serial, FxHashSet::default());
    }

    pub(crate) fn touch(&mut self, serial: u64, block: BlockId, write: bool) {
        if let Some(set) = self.live.get_mut(&serial) {
            set.insert(block);
        }
        if write {
            let w = self.writers.entry(block).or_default();
            if w.last() != Some(&serial) {
                w.push(serial);
            }
        }
    }

    pub(crate) fn set_kind(&mut self, serial: u64, kind: NodeKind) {
        self.tasks[serial as usize].kind = kind;
    }

    pub(crate) fn mark_stolen(&mut self, serial: u64) {
        self.tasks[serial as usize].stolen = true;
    }

    pub(crate) fn close(&mut self, serial: u64) {
        let set = self.live.remove(&serial).unwrap_or_default();
        let info = &mut self.tasks[serial as usize];
        info.blocks = set.len() as u64;
        if let Some(parent) = info.parent {
            if let Some(ps) = self.live.get_mut(&parent) {
                if ps.len() < set.len() {
                    let mut set = set;
                    std::mem::swap(ps, &mut set);
                    ps.extend(set);
                } else {
                    ps.extend(set);
                }
            }
        }
    }

    /// Blocks written by a task (or its descendants) that are also written by
    /// a task it may run in parallel with, counted per task serial.
    ///
    /// Two tasks may run in parallel iff their lowest common ancestor is a
    /// fork. For each block, the writers' ancestor paths form a small tree;
    /// a node on it shares the block iff some fork above it has the block
    /// written under its other child.
    pub fn shared_written(&self) -> FxHashMap<u64, u64> {
        let mut shared: FxHashMap<u64, u64> = FxHashMap::default();
        let mut on_tree: FxHashSet<u64> = FxHashSet::default();
        let mut children: FxHashMap<u64, Vec<u64>> = FxHashMap::default();
        for writers in self.writers.values() {
            if writers.len() < 2 {
                continue;
            }
            on_tree.clear();
            children.clear();
            let mut root = None;
            for &w in writers {
                let mut cur = w;
                loop {
                    if !on_tree.insert(cur) {
                        break;
                    }
                    match self.tasks[cur as usize].parent {
                        Some(par) => {
                            children.entry(par).or_default().push(cur);
                            cur = par;
                        }
                        None => {
                            root = Some(cur);
                            break;
                        }
                    }
                }
            }
            let Some(root) = root else { continue };
            let mut stack = vec![(root, false)];
            while let Some((node, inherited)) = stack.pop() {
                if inherited {
                    *shared.entry(node).or_default() += 1;
                }
                let kids = children.get(&node).map(|k| k.as_slice()).unwrap_or(&[]);
                let is_fork = self.tasks[node as usize].kind == NodeKind::BpFork;
                for &k in kids {
                    let sibling_writes = is_fork && kids.len() > 1;
                    stack.push((k, inherited || sibling_writes));
                }
            }
        }
        shared
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_with(kinds: &[(Option<u64>, NodeKind)]) -> TouchLog {
        let mut t = TouchLog::default();
        for (i, &(p, k)) in kinds.iter().enumerate() {
            t.open(i as u64, p, 1, "t");
            t.set_kind(i as u64, k);
        }
        t
    }

    #[test]
    fn fork_siblings_share_but_stages_do_not() {
        // 0 = fork(1, 2); 3 = seq(4, 5)
        let mut t = log_with(&[
            (None, NodeKind::BpFork),
            (Some(0), NodeKind::BpLeaf),
            (Some(0), NodeKind::BpLeaf),
            (None, NodeKind::HbpCall),
            (Some(3), NodeKind::BpLeaf),
            (Some(3), NodeKind::BpLeaf),
        ]);
        t.touch(1, 10, true);
        t.touch(2, 10, true);
        t.touch(4, 20, true);
        t.touch(5, 20, true);
        let s = t.shared_written();
        assert_eq!(s.get(&1), Some(&1));
        assert_eq!(s.get(&2), Some(&1));
        assert_eq!(s.get(&0), None);
        assert_eq!(s.get(&4), None);
        assert_eq!(s.get(&5), None);
    }

    #[test]
    fn sets_merge_upward() {
        let mut t = log_with(&[
            (None, NodeKind::BpFork),
            (Some(0), NodeKind::BpLeaf),
            (Some(0), NodeKind::BpLeaf),
        ]);
        t.touch(1, 1, false);
        t.touch(1, 2, false);
        t.touch(2, 2, true);
        t.touch(2, 3, false);
        t.close(1);
        t.close(2);
        t.close(0);
        assert_eq!(t.tasks[1].blocks, 2);
        assert_eq!(t.tasks[0].blocks, 3);
    }
}
