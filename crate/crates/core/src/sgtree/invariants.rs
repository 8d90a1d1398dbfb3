use std::fmt;

use super::{SgTree, NIL};
use crate::vectorspace::PointId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// A child lies farther than `base^level` from its parent.
    Covering,
    /// Two siblings at level `l` are within `base^l` of each other.
    Separation,
    /// A node with children does not list its own point among them.
    Nesting,
    /// A child is not exactly one level below its parent.
    Leveling,
    /// The cached subtree radius is smaller than the true maximum.
    RadiusUnderestimate,
    /// The cached subtree radius exceeds the geometric covering bound.
    RadiusBound,
    /// A node refers to a storage slot with no ids.
    Multiplicity,
    /// Parent links, slot tops or the size counter disagree with the tree.
    Bookkeeping,
}

/// One broken rule, naming the nodes involved by their first point id and level.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub nodes: Vec<(PointId, i32)>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {:?}: {}", self.kind, self.nodes, self.detail)
    }
}

impl SgTree {
    fn label(&self, n: u32) -> (PointId, i32) {
        let node = &self.nodes[n as usize];
        let id = self
            .slots
            .get(node.slot as usize)
            .and_then(|s| s.ids.first().copied())
            .unwrap_or(PointId::MAX);
        (id, node.level)
    }

    /// Checks every structural invariant. Returns an empty list for a sound
    /// tree. Cost is roughly `O(nodes * depth)` plus the sibling pairs, so it
    /// is meant for tests and debugging.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |kind, nodes: Vec<(PointId, i32)>, detail: String| {
            out.push(Violation { kind, nodes, detail })
        };

        if self.root == NIL {
            if self.len != 0 {
                push(ViolationKind::Bookkeeping, vec![], format!("empty tree reports size {}", self.len));
            }
            return out;
        }
        if self.nodes[self.root as usize].parent != NIL {
            push(ViolationKind::Bookkeeping, vec![self.label(self.root)], "root has a parent".into());
        }

        let mut size = 0usize;
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            let slot = &self.slots[node.slot as usize];
            if slot.ids.is_empty() {
                push(ViolationKind::Multiplicity, vec![self.label(n)], "node without ids".into());
            }
            let parent_slot = (node.parent != NIL).then(|| self.nodes[node.parent as usize].slot);
            if parent_slot != Some(node.slot) {
                size += slot.ids.len();
                if slot.top != n {
                    push(ViolationKind::Bookkeeping, vec![self.label(n)], "slot top does not point at its highest node".into());
                }
            }

            let true_max = self.subtree_max(n);
            if node.max_dist < true_max {
                push(
                    ViolationKind::RadiusUnderestimate,
                    vec![self.label(n)],
                    format!("cached {} < actual {}", node.max_dist, true_max),
                );
            }
            let geometric = self.cover(node.level + 1) / (self.base - 1.0);
            if node.max_dist > geometric * (1.0 + 1e-9) {
                push(
                    ViolationKind::RadiusBound,
                    vec![self.label(n)],
                    format!("cached {} > bound {}", node.max_dist, geometric),
                );
            }

            if node.children.is_empty() {
                continue;
            }
            let own = node
                .children
                .iter()
                .filter(|&&c| self.nodes[c as usize].slot == node.slot)
                .count();
            if own != 1 {
                push(ViolationKind::Nesting, vec![self.label(n)], format!("{own} self-children"));
            }
            let cover = self.cover(node.level);
            let sep = self.cover(node.level - 1);
            let p = self.slot_coords(node.slot);
            for (i, &c) in node.children.iter().enumerate() {
                let child = &self.nodes[c as usize];
                if child.parent != n {
                    push(ViolationKind::Bookkeeping, vec![self.label(n), self.label(c)], "broken parent link".into());
                }
                if child.level != node.level - 1 {
                    push(
                        ViolationKind::Leveling,
                        vec![self.label(n), self.label(c)],
                        format!("child level {} under level {}", child.level, node.level),
                    );
                }
                let d = crate::vectorspace::dist(p, self.slot_coords(child.slot));
                if d > cover {
                    push(
                        ViolationKind::Covering,
                        vec![self.label(n), self.label(c)],
                        format!("distance {d} > {cover}"),
                    );
                }
                for &c2 in &node.children[i + 1..] {
                    let other = &self.nodes[c2 as usize];
                    let ds = crate::vectorspace::dist(
                        self.slot_coords(child.slot),
                        self.slot_coords(other.slot),
                    );
                    if ds <= sep {
                        push(
                            ViolationKind::Separation,
                            vec![self.label(c), self.label(c2)],
                            format!("distance {ds} <= {sep}"),
                        );
                    }
                }
                stack.push(c);
            }
        }
        if size != self.len {
            push(ViolationKind::Bookkeeping, vec![], format!("reachable size {size} != recorded {}", self.len));
        }
        out
    }

    fn subtree_max(&self, n: u32) -> f64 {
        let p = self.slot_coords(self.nodes[n as usize].slot);
        let mut max: f64 = 0.0;
        let mut stack: Vec<u32> = self.nodes[n as usize].children.clone();
        while let Some(c) = stack.pop() {
            let child = &self.nodes[c as usize];
            max = max.max(crate::vectorspace::dist(p, self.slot_coords(child.slot)));
            stack.extend_from_slice(&child.children);
        }
        max
    }
}
