//! Per-node `(D, N, A)` identifiers, structural weights and page fingerprints.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::tree::DomTree;
use crate::CanonicalError;

/// Canonical string format version.
pub const FINGERPRINT_VERSION: &str = "hdna1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DnaTriple {
    pub d: usize,
    pub n: usize,
    pub a: String,
}

impl fmt::Display for DnaTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.d, self.n, self.a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNode {
    pub triple: DnaTriple,
    pub depth: usize,
    pub weight: f64,
}

/// Structural importance of a node: `d / (n * depth)`, and `d` at the root
/// where that quotient is undefined.
pub fn weight(d: usize, n: usize, depth: usize) -> f64 {
    if n == 0 || depth == 0 {
        d as f64
    } else {
        d as f64 / (n as f64 * depth as f64)
    }
}

/// One weighted node per tree node, in count-number order.
pub fn dna_of(tree: &DomTree) -> Vec<WeightedNode> {
    tree.nodes()
        .iter()
        .map(|r| WeightedNode {
            triple: DnaTriple {
                d: r.d,
                n: r.n,
                a: r.name.clone(),
            },
            depth: r.depth,
            weight: weight(r.d, r.n, r.depth),
        })
        .collect()
}

/// Sum of all non-root weights.
pub fn total_weight(nodes: &[WeightedNode]) -> f64 {
    nodes
        .iter()
        .filter(|w| w.triple.n != 0)
        .fold(0.0, |acc, w| acc + w.weight)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub version: String,
    pub entries: Vec<DnaTriple>,
    pub canonical: String,
    pub digest: String,
}

impl Fingerprint {
    /// Rebuilds a fingerprint from its canonical string, checking that the
    /// entries describe a well-formed tree.
    pub fn from_canonical(canonical: &str) -> Result<Self, CanonicalError> {
        let entries = parse_canonical(canonical)?;
        // Shape check; the tree itself is discarded.
        reconstruct_from_entries(&entries, "")?;
        Ok(Fingerprint {
            version: FINGERPRINT_VERSION.to_owned(),
            entries,
            canonical: canonical.to_owned(),
            digest: sha256_hex(canonical),
        })
    }

    /// Recovers the full tree this fingerprint was computed from.
    pub fn to_tree(&self, label: impl Into<String>) -> Result<DomTree, CanonicalError> {
        reconstruct_from_entries(&self.entries, &label.into())
    }
}

pub fn fingerprint(tree: &DomTree) -> Fingerprint {
    let entries: Vec<DnaTriple> = tree
        .nodes()
        .iter()
        .map(|r| DnaTriple {
            d: r.d,
            n: r.n,
            a: r.name.clone(),
        })
        .collect();
    let canonical = render_canonical(&entries);
    let digest = sha256_hex(&canonical);
    Fingerprint {
        version: FINGERPRINT_VERSION.to_owned(),
        entries,
        canonical,
        digest,
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// `hdna1|a:n:d;a:n:d;...` with `%` and `;` in names percent-escaped so
/// entries always split unambiguously.
pub fn render_canonical(entries: &[DnaTriple]) -> String {
    let mut out = String::with_capacity(8 + entries.len() * 12);
    out.push_str(FINGERPRINT_VERSION);
    out.push('|');
    for (i, t) in entries.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        escape_name_into(&t.a, &mut out);
        out.push(':');
        out.push_str(&t.n.to_string());
        out.push(':');
        out.push_str(&t.d.to_string());
    }
    out
}

fn escape_name_into(name: &str, out: &mut String) {
    for ch in name.chars() {
        match ch {
            '%' => out.push_str("%25"),
            ';' => out.push_str("%3B"),
            c => out.push(c),
        }
    }
}

fn unescape_name(raw: &str) -> Result<String, CanonicalError> {
    if !raw.contains('%') {
        return Ok(raw.to_owned());
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(pos) = rest.find('%') {
        out.push_str(&rest[..pos]);
        match rest.get(pos..pos + 3) {
            Some("%25") => out.push('%'),
            Some("%3B") => out.push(';'),
            _ => return Err(CanonicalError::BadEscape(raw.to_owned())),
        }
        rest = &rest[pos + 3..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Splits a canonical string into triples; count numbers must run 0, 1, 2, ...
pub fn parse_canonical(canonical: &str) -> Result<Vec<DnaTriple>, CanonicalError> {
    let body = canonical
        .strip_prefix(FINGERPRINT_VERSION)
        .and_then(|s| s.strip_prefix('|'))
        .ok_or_else(|| {
            CanonicalError::Version(canonical.split('|').next().unwrap_or_default().to_owned())
        })?;
    let mut entries = Vec::new();
    for (expected_n, raw) in body.split(';').enumerate() {
        let mut parts = raw.rsplitn(3, ':');
        let (d, n, name) = match (parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(n), Some(name)) => (d, n, name),
            _ => return Err(CanonicalError::BadEntry(raw.to_owned())),
        };
        let parse_num = |s: &str| -> Result<usize, CanonicalError> {
            if s.is_empty()
                || !s.bytes().all(|b| b.is_ascii_digit())
                || (s.len() > 1 && s.starts_with('0'))
            {
                return Err(CanonicalError::BadEntry(raw.to_owned()));
            }
            s.parse()
                .map_err(|_| CanonicalError::BadEntry(raw.to_owned()))
        };
        let n = parse_num(n)?;
        let d = parse_num(d)?;
        if n != expected_n {
            return Err(CanonicalError::OutOfOrder {
                expected: expected_n,
                found: n,
            });
        }
        entries.push(DnaTriple {
            d,
            n,
            a: unescape_name(name)?,
        });
    }
    Ok(entries)
}

/// Level-order entries with descendant counts determine the tree: each node,
/// taken in queue order, owns the next unclaimed nodes whose subtree sizes
/// add up to its own descendant count.
pub fn reconstruct_from_entries(
    entries: &[DnaTriple],
    label: &str,
) -> Result<DomTree, CanonicalError> {
    if entries.is_empty() {
        return Err(CanonicalError::BadEntry(String::new()));
    }
    let mut parents = Vec::with_capacity(entries.len() - 1);
    let mut next = 1usize;
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    while let Some(n) = queue.pop_front() {
        let mut remaining = entries[n].d;
        while remaining > 0 {
            let child = entries.get(next).ok_or(CanonicalError::Shape { n })?;
            let size = child.d + 1;
            if size > remaining {
                return Err(CanonicalError::Shape { n });
            }
            remaining -= size;
            parents.push(n);
            queue.push_back(next);
            next += 1;
        }
    }
    if next != entries.len() {
        return Err(CanonicalError::Shape { n: next });
    }
    let names = entries.iter().map(|t| t.a.clone()).collect();
    let tree = DomTree::from_level_order(names, &parents, label.to_owned());
    // Level order of the rebuilt tree must agree with the given numbering.
    if tree.nodes().iter().zip(entries).any(|(r, t)| r.d != t.d) {
        return Err(CanonicalError::Shape { n: 0 });
    }
    Ok(tree)
}
