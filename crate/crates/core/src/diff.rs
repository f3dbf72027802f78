//! Positional, weight-aware comparison of two fingerprinted pages.
//!
//! Nodes correspond when they share a count number. An early insertion or
//! deletion therefore shifts every later number and shows up as a cascade
//! of changes; that sensitivity is part of the method.

use serde::{Deserialize, Serialize};

use crate::dna::{total_weight, DnaTriple, Fingerprint, WeightedNode};
use crate::DiffError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeStatus {
    Changed,
    Added,
    Removed,
}

impl ChangeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeStatus::Changed => "changed",
            ChangeStatus::Added => "added",
            ChangeStatus::Removed => "removed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEntry {
    pub n: usize,
    pub status: ChangeStatus,
    pub old: Option<DnaTriple>,
    pub new: Option<DnaTriple>,
    /// Weight on the baseline side when it exists, otherwise on the new side.
    pub weight_contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub entries: Vec<ChangeEntry>,
    pub raw_score: f64,
    pub normalized_score: f64,
    pub identical: bool,
}

/// Cheap change test on digests alone.
pub fn quick_changed(a: &Fingerprint, b: &Fingerprint) -> Result<bool, DiffError> {
    if a.version != b.version {
        return Err(DiffError::VersionMismatch {
            left: a.version.clone(),
            right: b.version.clone(),
        });
    }
    Ok(a.digest != b.digest)
}

/// Compares `old` and `new` node by node, aligned on count number.
pub fn diff(old: &[WeightedNode], new: &[WeightedNode]) -> DiffReport {
    let mut entries = Vec::new();
    let len = old.len().max(new.len());
    for n in 0..len {
        let entry = match (old.get(n), new.get(n)) {
            (Some(o), Some(w)) if o.triple == w.triple => continue,
            (Some(o), Some(w)) => ChangeEntry {
                n,
                status: ChangeStatus::Changed,
                old: Some(o.triple.clone()),
                new: Some(w.triple.clone()),
                weight_contribution: o.weight,
            },
            (Some(o), None) => ChangeEntry {
                n,
                status: ChangeStatus::Removed,
                old: Some(o.triple.clone()),
                new: None,
                weight_contribution: o.weight,
            },
            (None, Some(w)) => ChangeEntry {
                n,
                status: ChangeStatus::Added,
                old: None,
                new: Some(w.triple.clone()),
                weight_contribution: w.weight,
            },
            (None, None) => unreachable!(),
        };
        entries.push(entry);
    }

    let identical = entries.is_empty();
    // fold from +0.0: an empty f64 sum is -0.0
    let raw_score = entries
        .iter()
        .fold(0.0, |acc, e| acc + e.weight_contribution);
    let scale = total_weight(old).max(total_weight(new));
    let normalized_score = if scale > 0.0 {
        (raw_score / scale).min(1.0)
    } else if identical {
        0.0
    } else {
        1.0
    };
    DiffReport {
        entries,
        raw_score,
        normalized_score,
        identical,
    }
}

impl DiffReport {
    /// The `limit` entries with the largest contributions, returned in count-number order.
    pub fn top_entries(&self, limit: usize) -> Vec<ChangeEntry> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            eb.weight_contribution
                .total_cmp(&ea.weight_contribution)
                .then(ea.n.cmp(&eb.n))
        });
        idx.truncate(limit);
        idx.sort_unstable();
        idx.into_iter().map(|i| self.entries[i].clone()).collect()
    }

    /// Plain-text table, one row per entry.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "identical: {}\nraw_score: {:.6}\nnormalized_score: {:.6}\nentries: {}\n",
            self.identical,
            self.raw_score,
            self.normalized_score,
            self.entries.len()
        ));
        if self.entries.is_empty() {
            return out;
        }
        out.push_str(&format!(
            "{:>6}  {:<8}  {:<28}  {:<28}  {:>10}\n",
            "n", "status", "old (d,n,a)", "new (d,n,a)", "weight"
        ));
        let show =
            |t: &Option<DnaTriple>| t.as_ref().map_or_else(|| "-".to_owned(), |t| t.to_string());
        for e in &self.entries {
            out.push_str(&format!(
                "{:>6}  {:<8}  {:<28}  {:<28}  {:>10.4}\n",
                e.n,
                e.status.as_str(),
                show(&e.old),
                show(&e.new),
                e.weight_contribution
            ));
        }
        out
    }
}
