//! Level-order numbered tree with per-node depth and descendant counts.

use std::collections::VecDeque;

use crate::preprocess::CleanDocument;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    /// Tag name, lowercase.
    pub name: String,
    /// Count number: position in a breadth-first, left-to-right walk. Root is 0.
    pub n: usize,
    /// Edge distance from the document root.
    pub depth: usize,
    /// Number of proper descendants.
    pub d: usize,
    pub parent: Option<usize>,
    /// Children, as count numbers, in document order.
    pub children: Vec<usize>,
}

/// Indexed tree; `nodes[k].n == k` for every `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<NodeRecord>,
    source_label: String,
}

impl DomTree {
    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> &NodeRecord {
        &self.nodes[n]
    }

    pub fn root(&self) -> &NodeRecord {
        &self.nodes[0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    /// Proper ancestors of `n`, nearest first.
    pub fn ancestors(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.nodes[n].parent, move |&p| self.nodes[p].parent)
    }

    /// Builds a tree from parent links given in level order: `parents[k]` is
    /// the parent of node `k + 1`. Callers guarantee level order.
    pub(crate) fn from_level_order(names: Vec<String>, parents: &[usize], label: String) -> Self {
        debug_assert_eq!(names.len(), parents.len() + 1);
        let mut nodes: Vec<NodeRecord> = names
            .into_iter()
            .enumerate()
            .map(|(n, name)| NodeRecord {
                name,
                n,
                depth: 0,
                d: 0,
                parent: None,
                children: Vec::new(),
            })
            .collect();
        for (k, &p) in parents.iter().enumerate() {
            let child = k + 1;
            nodes[child].parent = Some(p);
            nodes[child].depth = nodes[p].depth + 1;
            nodes[p].children.push(child);
        }
        accumulate_descendants(&mut nodes);
        DomTree {
            nodes,
            source_label: label,
        }
    }
}

/// Children always carry larger count numbers than their parent, so one
/// reverse sweep settles every subtree before its parent reads it.
fn accumulate_descendants(nodes: &mut [NodeRecord]) {
    for n in (1..nodes.len()).rev() {
        let add = nodes[n].d + 1;
        if let Some(p) = nodes[n].parent {
            nodes[p].d += add;
        }
    }
}

/// Numbers `doc` in level order and measures depth and descendant counts.
pub fn build_tree(doc: &CleanDocument, source_label: impl Into<String>) -> DomTree {
    let mut names = Vec::with_capacity(doc.len());
    let mut parents = Vec::with_capacity(doc.len().saturating_sub(1));
    // (arena id, count number of its parent)
    let mut queue: VecDeque<(usize, Option<usize>)> = VecDeque::new();
    queue.push_back((CleanDocument::ROOT, None));
    while let Some((id, parent)) = queue.pop_front() {
        let n = names.len();
        names.push(doc.name(id).to_owned());
        if let Some(p) = parent {
            parents.push(p);
        }
        for &c in doc.children(id) {
            queue.push_back((c, Some(n)));
        }
    }
    DomTree::from_level_order(names, &parents, source_label.into())
}

pub fn node_count(tree: &DomTree) -> usize {
    tree.node_count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(spec: &[(usize, &str)]) -> CleanDocument {
        // (parent arena id, name), arena ids assigned in order starting at 1
        let mut d = CleanDocument::new();
        for &(p, name) in spec {
            d.push_child(p, name);
        }
        d
    }

    fn five_node() -> DomTree {
        build_tree(
            &doc(&[(0, "html"), (1, "head"), (1, "body"), (3, "p")]),
            "five",
        )
    }

    #[test]
    fn lone_html() {
        let t = build_tree(&doc(&[(0, "html")]), "x");
        assert_eq!(t.node_count(), 2);
        assert_eq!((t.node(0).n, t.node(0).depth, t.node(0).d), (0, 0, 1));
        assert_eq!((t.node(1).n, t.node(1).depth, t.node(1).d), (1, 1, 0));
    }

    #[test]
    fn five_node_numbering() {
        let t = five_node();
        let names: Vec<_> = t.nodes().iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["document", "html", "head", "body", "p"]);
        let depths: Vec<_> = t.nodes().iter().map(|r| r.depth).collect();
        assert_eq!(depths, [0, 1, 2, 2, 3]);
        let ds: Vec<_> = t.nodes().iter().map(|r| r.d).collect();
        assert_eq!(ds, [4, 3, 0, 1, 0]);
        assert_eq!(node_count(&t), 5);
        assert_eq!(t.source_label(), "five");
    }

    #[test]
    fn level_order_crosses_subtrees() {
        // document -> html -> {head -> title, body -> {div, div}}
        let t = build_tree(
            &doc(&[
                (0, "html"),
                (1, "head"),
                (1, "body"),
                (2, "title"),
                (3, "div"),
                (3, "div"),
            ]),
            "",
        );
        let names: Vec<_> = t.nodes().iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            ["document", "html", "head", "body", "title", "div", "div"]
        );
        assert_eq!(t.node(3).children, [5, 6]);
        assert_eq!(t.node(2).children, [4]);
    }

    #[test]
    fn lone_root() {
        let t = build_tree(&CleanDocument::new(), "");
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.root().d, 0);
    }

    #[test]
    fn ancestors_nearest_first() {
        let t = five_node();
        assert_eq!(t.ancestors(4).collect::<Vec<_>>(), [3, 1, 0]);
        assert_eq!(t.ancestors(0).count(), 0);
    }

    #[test]
    fn inserting_early_node_shifts_later_numbers() {
        let before = five_node();
        let after = build_tree(
            &doc(&[(0, "html"), (1, "nav"), (1, "head"), (1, "body"), (4, "p")]),
            "",
        );
        assert_eq!(before.node(2).name, "head");
        assert_eq!(after.node(2).name, "nav");
        assert_eq!(after.node(5).name, "p");
    }
}
