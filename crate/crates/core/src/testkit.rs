//! Random skeleton generators for property suites and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::preprocess::CleanDocument;

/// Tag names drawn by the generators; small on purpose so collisions happen.
pub const NAMES: [&str; 8] = ["div", "p", "span", "a", "ul", "li", "section", "td"];

/// Random skeleton with `size` nodes including the document root. Each new
/// element attaches under a uniformly chosen existing node.
pub fn random_document<R: Rng>(rng: &mut R, size: usize) -> CleanDocument {
    let mut doc = CleanDocument::new();
    for _ in 1..size.max(1) {
        let parent = rng.gen_range(0..doc.len());
        let name = NAMES.choose(rng).expect("non-empty");
        doc.push_child(parent, name);
    }
    doc
}

/// Like [`random_document`] but deeper and narrower: parents are biased
/// toward recently created nodes.
pub fn random_deep_document<R: Rng>(rng: &mut R, size: usize) -> CleanDocument {
    let mut doc = CleanDocument::new();
    for _ in 1..size.max(1) {
        let len = doc.len();
        let back = rng.gen_range(0..len.min(4));
        let parent = len - 1 - back;
        let name = NAMES.choose(rng).expect("non-empty");
        doc.push_child(parent, name);
    }
    doc
}

/// Copy of `doc` without the element at arena slot `victim` and its subtree.
pub fn remove_subtree(doc: &CleanDocument, victim: usize) -> CleanDocument {
    assert_ne!(victim, CleanDocument::ROOT, "cannot remove the root");
    let mut out = CleanDocument::new();
    let mut stack: Vec<(usize, usize)> = doc
        .children(CleanDocument::ROOT)
        .iter()
        .rev()
        .map(|&c| (c, CleanDocument::ROOT))
        .collect();
    while let Some((src, parent)) = stack.pop() {
        if src == victim {
            continue;
        }
        let id = out.push_child(parent, doc.name(src));
        stack.extend(doc.children(src).iter().rev().map(|&c| (c, id)));
    }
    out
}

/// Synthetic page markup with roughly `sections * 12` elements plus noise
/// the cleaner has to discard.
pub fn synthetic_page(sections: usize) -> String {
    let mut html = String::from(
        "<!DOCTYPE html><html><head><meta charset=\"utf-8\"><title>t</title>\
         <link rel=\"stylesheet\" href=\"a.css\"><style>p{}</style></head><body>",
    );
    for i in 0..sections {
        html.push_str(&format!(
            "<section id=\"s{i}\"><h2>Heading {i}</h2><!-- c --><div class=\"row\">\
             <p>Text <b>bold</b> <a href=\"/x{i}\">link</a></p><br>\
             <ul><li>a</li><li>b</li><li>c</li></ul>\
             <script>var x = {i};</script><input name=\"q\"></div></section>"
        ));
    }
    html.push_str("</body></html>");
    html
}

/// Reference computations that share no code with the production path.
pub mod oracle {
    use std::collections::BTreeMap;

    use num_rational::Ratio;

    use crate::preprocess::CleanDocument;

    /// Arena ids in level order, built by expanding whole levels at a time.
    pub fn level_order(doc: &CleanDocument) -> Vec<usize> {
        let mut order = Vec::with_capacity(doc.len());
        let mut level = vec![CleanDocument::ROOT];
        while !level.is_empty() {
            let next: Vec<usize> = level
                .iter()
                .flat_map(|&id| doc.children(id).iter().copied())
                .collect();
            order.extend(level);
            level = next;
        }
        order
    }

    /// Parent of every arena id, from a scan over all child lists.
    pub fn parents(doc: &CleanDocument) -> Vec<Option<usize>> {
        let mut parent = vec![None; doc.len()];
        for id in 0..doc.len() {
            for &c in doc.children(id) {
                parent[c] = Some(id);
            }
        }
        parent
    }

    /// Depths of all nodes, walking each root path separately.
    pub fn depths(doc: &CleanDocument) -> Vec<usize> {
        let parent = parents(doc);
        (0..doc.len())
            .map(|id| {
                let mut steps = 0;
                let mut cur = id;
                while let Some(p) = parent[cur] {
                    steps += 1;
                    cur = p;
                }
                steps
            })
            .collect()
    }

    /// Size of the subtree under `id`, counted node by node, minus the node itself.
    pub fn descendant_recount(doc: &CleanDocument, id: usize) -> usize {
        let mut count = 0;
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            count += 1;
            stack.extend_from_slice(doc.children(x));
        }
        count - 1
    }

    /// Exact weight as a fraction; the root keeps its descendant count.
    pub fn rational_weight(d: usize, n: usize, depth: usize) -> Ratio<u128> {
        if n == 0 {
            Ratio::from_integer(d as u128)
        } else {
            Ratio::new(d as u128, n as u128 * depth as u128)
        }
    }

    /// `(name, n, d, weight)` for every node, from the measures above.
    pub fn quads(doc: &CleanDocument) -> Vec<(String, usize, usize, f64)> {
        let depth = depths(doc);
        level_order(doc)
            .into_iter()
            .enumerate()
            .map(|(n, id)| {
                let d = descendant_recount(doc, id);
                let w = rational_weight(d, n, depth[id]);
                (
                    doc.name(id).to_owned(),
                    n,
                    d,
                    *w.numer() as f64 / *w.denom() as f64,
                )
            })
            .collect()
    }

    /// Canonical string assembled with plain formatting (names must not
    /// contain `;` or `%`).
    pub fn canonical(entries: &[(String, usize, usize)]) -> String {
        let body: Vec<String> = entries
            .iter()
            .map(|(a, n, d)| format!("{a}:{n}:{d}"))
            .collect();
        format!("hdna1|{}", body.join(";"))
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct OracleEntry {
        pub n: usize,
        pub status: &'static str,
        pub contribution: f64,
    }

    /// Positional diff recomputed through maps keyed by count number.
    /// Nodes are `(name, n, d, weight)`.
    pub fn diff(
        old: &[(String, usize, usize, f64)],
        new: &[(String, usize, usize, f64)],
    ) -> (Vec<OracleEntry>, f64, f64) {
        let old_map: BTreeMap<usize, &(String, usize, usize, f64)> =
            old.iter().map(|e| (e.1, e)).collect();
        let new_map: BTreeMap<usize, &(String, usize, usize, f64)> =
            new.iter().map(|e| (e.1, e)).collect();
        let mut keys: Vec<usize> = old_map.keys().chain(new_map.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        let mut out = Vec::new();
        for n in keys {
            match (old_map.get(&n), new_map.get(&n)) {
                (Some(o), Some(w)) => {
                    if o.0 != w.0 || o.2 != w.2 {
                        out.push(OracleEntry {
                            n,
                            status: "changed",
                            contribution: o.3,
                        });
                    }
                }
                (Some(o), None) => out.push(OracleEntry {
                    n,
                    status: "removed",
                    contribution: o.3,
                }),
                (None, Some(w)) => out.push(OracleEntry {
                    n,
                    status: "added",
                    contribution: w.3,
                }),
                (None, None) => {}
            }
        }
        let raw: f64 = out.iter().map(|e| e.contribution).sum();
        let total = |v: &[(String, usize, usize, f64)]| -> f64 {
            v.iter().filter(|e| e.1 > 0).map(|e| e.3).sum()
        };
        let scale = total(old).max(total(new));
        let normalized = if scale > 0.0 {
            if raw / scale > 1.0 {
                1.0
            } else {
                raw / scale
            }
        } else if out.is_empty() {
            0.0
        } else {
            1.0
        };
        (out, raw, normalized)
    }
}
