use super::job::{child_priority, stage_priorities, Expansion, Job};
use super::task::NodeKind;

/// A node of a fully expanded computation tree with its priority.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeled {
    pub parent: Option<usize>,
    pub depth: u32,
    pub priority: i64,
    pub size: u64,
    pub label: &'static str,
    pub kind: NodeKind,
}

/// Priority of the root of a computation.
pub fn root_priority(root: &dyn Job) -> i64 {
    root.levels() as i64 - 1
}

type Pending = (Box<dyn Job>, Option<usize>, u32, i64);

/// Expands `root` completely and labels every node with the priority the
/// runtime would give it. Meant for small instances.
pub fn assign_priorities(root: Box<dyn Job>) -> Vec<Labeled> {
    let mut out = Vec::new();
    let prio = root_priority(root.as_ref());
    let mut work: Vec<Pending> = vec![(root, None, 0, prio)];
    while let Some((job, parent, depth, priority)) = work.pop() {
        let id = out.len();
        let frame = (job.frame_words() > 0).then_some(0);
        let exp = job.expand(frame);
        let kind = match &exp {
            Expansion::Leaf => NodeKind::BpLeaf,
            Expansion::Fork(..) => NodeKind::BpFork,
            Expansion::Seq(_) => NodeKind::HbpCall,
        };
        out.push(Labeled {
            parent,
            depth,
            priority,
            size: job.size(),
            label: job.label(),
            kind,
        });
        match exp {
            Expansion::Leaf => {}
            Expansion::Fork(l, r) => {
                let (pl, align) = (job.levels(), job.align_children());
                let lp = child_priority(priority, pl, l.levels(), align);
                let rp = child_priority(priority, pl, r.levels(), align);
                work.push((r, Some(id), depth + 1, rp));
                work.push((l, Some(id), depth + 1, lp));
            }
            Expansion::Seq(stages) => {
                let levels: Vec<u32> = stages.iter().map(|s| s.levels()).collect();
                let prios = stage_priorities(priority, &levels);
                for (s, p) in stages.into_iter().zip(prios).rev() {
                    work.push((s, Some(id), depth + 1, p));
                }
            }
        }
    }
    out
}
