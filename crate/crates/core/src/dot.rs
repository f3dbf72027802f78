//! Graphviz DOT rendering of weighted trees.
//!
//! Vertices are named `n<k>` after their count number. Labels read
//! `A n=N d=D`, optionally followed by ` w=<weight, 4 decimals>`.

use std::fmt::Write;

use crate::dna::WeightedNode;
use crate::tree::DomTree;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DotOptions {
    pub show_weights: bool,
}

pub fn to_dot(tree: &DomTree, weights: &[WeightedNode], options: DotOptions) -> String {
    assert_eq!(
        tree.node_count(),
        weights.len(),
        "weights must align with tree nodes"
    );
    let mut out = String::with_capacity(64 + tree.node_count() * 48);
    out.push_str("digraph hdna {\n");
    out.push_str("  node [shape=box];\n");
    for (rec, w) in tree.nodes().iter().zip(weights) {
        debug_assert_eq!(rec.n, w.triple.n);
        let mut label = format!("{} n={} d={}", rec.name, rec.n, rec.d);
        if options.show_weights {
            let _ = write!(label, " w={:.4}", w.weight);
        }
        let _ = writeln!(out, "  n{} [label=\"{}\"];", rec.n, escape_label(&label));
    }
    // Parents are visited in n order and children are stored in n order.
    for rec in tree.nodes() {
        for &c in &rec.children {
            let _ = writeln!(out, "  n{} -> n{};", rec.n, c);
        }
    }
    out.push_str("}\n");
    out
}

fn escape_label(label: &str) -> String {
    let mut s = String::with_capacity(label.len());
    for ch in label.chars() {
        match ch {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\r' => {}
            c => s.push(c),
        }
    }
    s
}
