//! BK-tree over entity labels with the case-sensitive Levenshtein metric.
//!
//! Purely an index: query results are defined by the brute-force ranking
//! (edit distance, then `EntityId`), and the tree only prunes the scan.

use std::collections::BTreeMap;

use crate::features::edit_distance;
use crate::kg::EntityId;

#[derive(Debug, Clone)]
pub struct BkEntry {
    pub id: EntityId,
    pub label: String,
    pub geo: bool,
}

#[derive(Debug)]
struct BkNode {
    entry: BkEntry,
    children: BTreeMap<u32, BkNode>,
}

#[derive(Debug, Default)]
pub struct BkTree {
    root: Option<BkNode>,
    len: usize,
}

impl BkTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, entry: BkEntry) {
        self.len += 1;
        let Some(root) = self.root.as_mut() else {
            self.root = Some(BkNode {
                entry,
                children: BTreeMap::new(),
            });
            return;
        };
        let mut node = root;
        loop {
            let d = edit_distance(&node.entry.label, &entry.label);
            match node.children.entry(d) {
                std::collections::btree_map::Entry::Vacant(slot) => {
                    slot.insert(BkNode {
                        entry,
                        children: BTreeMap::new(),
                    });
                    return;
                }
                std::collections::btree_map::Entry::Occupied(slot) => {
                    node = slot.into_mut();
                }
            }
        }
    }

    /// All entries within edit distance `radius` of `target`, in
    /// unspecified order, each paired with its distance.
    pub fn within<'a>(&'a self, target: &str, radius: u32) -> Vec<(u32, &'a BkEntry)> {
        let mut out = Vec::new();
        let mut stack: Vec<&BkNode> = self.root.iter().collect();
        while let Some(node) = stack.pop() {
            let d = edit_distance(&node.entry.label, target);
            if d <= radius {
                out.push((d, &node.entry));
            }
            let lo = d.saturating_sub(radius);
            let hi = d.saturating_add(radius);
            for (_, child) in node.children.range(lo..=hi) {
                stack.push(child);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(label: &str) -> BkEntry {
        BkEntry {
            id: EntityId::new(format!("urn:{label}")).unwrap(),
            label: label.to_string(),
            geo: true,
        }
    }

    #[test]
    fn within_matches_brute_force() {
        let labels = [
            "bath", "Bath", "Bata", "Bach", "Saturnia", "Italy", "UK", "bat", "batch", "math",
        ];
        let mut tree = BkTree::new();
        for l in labels {
            tree.insert(entry(l));
        }
        for radius in 0..6 {
            let mut got: Vec<(u32, String)> = tree
                .within("bath", radius)
                .into_iter()
                .map(|(d, e)| (d, e.label.clone()))
                .collect();
            got.sort();
            let mut want: Vec<(u32, String)> = labels
                .iter()
                .map(|l| (edit_distance(l, "bath"), l.to_string()))
                .filter(|(d, _)| *d <= radius)
                .collect();
            want.sort();
            assert_eq!(got, want, "radius {radius}");
        }
    }
}
