//! Structural fingerprints for HTML pages.
//!
//! A page is parsed, reduced to its element skeleton, and numbered in level
//! order. Every node then carries a `(D, N, A)` triple: descendant count,
//! count number and tag name. Triples chained in count-number order form a
//! canonical string whose SHA-256 digest identifies the page structure, and
//! per-node weights `D / (N * depth)` rank how much a change at that node
//! matters when two pages are compared.
//!
//! ```
//! use hdna_core::{analyze, diff};
//!
//! let old = analyze(&"<div><p>a</p></div>".into(), "old").unwrap();
//! let new = analyze(&"<div></div>".into(), "new").unwrap();
//! assert_ne!(old.fingerprint.digest, new.fingerprint.digest);
//! let report = diff(&old.nodes, &new.nodes);
//! assert!(!report.identical);
//! ```

pub mod batch;
pub mod diff;
pub mod dna;
pub mod dot;
pub mod parse;
pub mod preprocess;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod tree;

use thiserror::Error;

pub use crate::diff::{diff, quick_changed, ChangeEntry, ChangeStatus, DiffReport};
pub use crate::dna::{
    dna_of, fingerprint, total_weight, DnaTriple, Fingerprint, WeightedNode, FINGERPRINT_VERSION,
};
pub use crate::dot::{to_dot, DotOptions};
pub use crate::parse::{parse_html, HtmlNodeKind, HtmlTree, RawHtml};
pub use crate::preprocess::{
    preprocess, remove_tags, strip_attributes, strip_text, CleanDocument, RemovalSet,
    PREPROCESS_VERSION,
};
pub use crate::tree::{build_tree, node_count, DomTree, NodeRecord};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("cannot decode input: unknown charset {label:?} and bytes are not valid UTF-8")]
    CharsetUndecodable { label: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CanonicalError {
    #[error("unsupported fingerprint version {0:?}")]
    Version(String),
    #[error("malformed canonical entry {0:?}")]
    BadEntry(String),
    #[error("malformed escape in name {0:?}")]
    BadEscape(String),
    #[error("count numbers out of order: expected {expected}, found {found}")]
    OutOfOrder { expected: usize, found: usize },
    #[error("descendant counts do not describe a tree (at node {n})")]
    Shape { n: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("fingerprint versions differ: {left} vs {right}")]
    VersionMismatch { left: String, right: String },
}

/// Everything derived from one page.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub tree: DomTree,
    pub nodes: Vec<WeightedNode>,
    pub fingerprint: Fingerprint,
}

impl Analysis {
    pub fn from_tree(tree: DomTree) -> Self {
        let nodes = dna_of(&tree);
        let fingerprint = fingerprint(&tree);
        Analysis {
            tree,
            nodes,
            fingerprint,
        }
    }

    pub fn total_weight(&self) -> f64 {
        total_weight(&self.nodes)
    }

    pub fn to_dot(&self, options: DotOptions) -> String {
        to_dot(&self.tree, &self.nodes, options)
    }
}

/// preprocess → build_tree → weights and fingerprint.
pub fn analyze(
    input: &RawHtml,
    source_label: impl Into<String>,
) -> Result<Analysis, PreprocessError> {
    let doc = preprocess(input)?;
    Ok(Analysis::from_tree(build_tree(&doc, source_label)))
}
