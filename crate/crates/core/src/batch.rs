//! Data-parallel batch helpers.
//!
//! With the `parallel` feature the [`Execution::Parallel`] path fans out on
//! rayon's global pool; without it every batch runs on the calling thread.
//! Results always come back in input order.

use crate::diff::{diff, DiffReport};
use crate::{analyze, Analysis, PreprocessError, RawHtml};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether `Parallel` actually fans out in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Order-preserving map over a slice.
pub fn map_slice<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Runs the whole analysis pipeline on each `(label, page)` pair.
pub fn analyze_all(
    pages: &[(String, RawHtml)],
    exec: Execution,
) -> Vec<Result<Analysis, PreprocessError>> {
    map_slice(pages, exec, |(label, raw)| analyze(raw, label.clone()))
}

/// Diffs each `(old, new)` pair.
pub fn diff_all(pairs: &[(&Analysis, &Analysis)], exec: Execution) -> Vec<DiffReport> {
    map_slice(pairs, exec, |(a, b)| diff(&a.nodes, &b.nodes))
}
