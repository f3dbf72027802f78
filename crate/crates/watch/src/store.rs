//! One JSON baseline per URL in a flat directory, replaced atomically.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Utc};
use hdna_core::dna::sha256_hex;
use hdna_core::{dna_of, total_weight, Analysis, Fingerprint, WeightedNode, PREPROCESS_VERSION};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub url: String,
    pub version: String,
    pub canonical: String,
    pub digest: String,
    /// `(n, weight)` for every node, in count-number order.
    pub weights: Vec<(usize, f64)>,
    pub total_weight: f64,
    pub created_at: DateTime<Utc>,
    pub preprocess_version: String,
}

impl BaselineRecord {
    pub fn from_analysis(
        url: impl Into<String>,
        analysis: &Analysis,
        created_at: DateTime<Utc>,
    ) -> Self {
        let fp = &analysis.fingerprint;
        Self {
            url: url.into(),
            version: fp.version.clone(),
            canonical: fp.canonical.clone(),
            digest: fp.digest.clone(),
            weights: analysis
                .nodes
                .iter()
                .map(|w| (w.triple.n, w.weight))
                .collect(),
            total_weight: analysis.total_weight(),
            created_at,
            preprocess_version: PREPROCESS_VERSION.to_owned(),
        }
    }

    /// The stored fingerprint, reparsed from the canonical string.
    pub fn fingerprint(&self) -> Result<Fingerprint, String> {
        let fp = Fingerprint::from_canonical(&self.canonical).map_err(|e| e.to_string())?;
        if fp.version != self.version {
            return Err(format!(
                "version {:?} does not match canonical",
                self.version
            ));
        }
        if fp.digest != self.digest {
            return Err(format!(
                "digest {} does not match canonical ({})",
                self.digest, fp.digest
            ));
        }
        Ok(fp)
    }

    /// Weighted nodes of the baseline page, rebuilt from the canonical.
    pub fn weighted_nodes(&self) -> Result<Vec<WeightedNode>, String> {
        let tree = self
            .fingerprint()?
            .to_tree(self.url.clone())
            .map_err(|e| e.to_string())?;
        Ok(dna_of(&tree))
    }

    fn verify(&self) -> Result<(), String> {
        let nodes = self.weighted_nodes()?;
        let rebuilt: Vec<(usize, f64)> = nodes.iter().map(|w| (w.triple.n, w.weight)).collect();
        if rebuilt != self.weights {
            return Err("stored weights do not match canonical".into());
        }
        if total_weight(&nodes) != self.total_weight {
            return Err("stored total_weight does not match canonical".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: corrupt baseline: {reason}")]
    CorruptBaseline { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct BaselineStore {
    dir: PathBuf,
}

static TMP_SEQ: AtomicU64 = AtomicU64::new(0);

impl BaselineStore {
    /// Opens (and creates if needed) the store directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `<sha256(url)>.json`: 69 characters, hex only.
    pub fn path_for(&self, url: &str) -> PathBuf {
        self.dir.join(format!("{}.json", sha256_hex(url)))
    }

    pub fn save(&self, record: &BaselineRecord) -> Result<(), StoreError> {
        self.stage(record)?.commit()
    }

    /// Writes `record` to a temporary file next to its final path and syncs
    /// it, without replacing the current baseline yet.
    pub fn stage(&self, record: &BaselineRecord) -> Result<StagedWrite, StoreError> {
        let dest = self.path_for(&record.url);
        let tmp = dest.with_extension(format!(
            "json.{}.{}.tmp",
            std::process::id(),
            TMP_SEQ.fetch_add(1, Ordering::Relaxed)
        ));
        let mut json = serde_json::to_vec_pretty(record).expect("record serializes");
        json.push(b'\n');
        let write = || -> io::Result<()> {
            let mut f = OpenOptions::new().write(true).create_new(true).open(&tmp)?;
            f.write_all(&json)?;
            f.sync_all()
        };
        if let Err(e) = write() {
            let _ = fs::remove_file(&tmp);
            return Err(io_err(&tmp)(e));
        }
        Ok(StagedWrite {
            tmp,
            dest,
            dir: self.dir.clone(),
            done: false,
        })
    }

    pub fn load(&self, url: &str) -> Result<Option<BaselineRecord>, StoreError> {
        let path = self.path_for(url);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let corrupt = |reason: String| StoreError::CorruptBaseline {
            path: path.clone(),
            reason,
        };
        let record: BaselineRecord =
            serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if record.url != url {
            return Err(corrupt(format!("record is for {:?}", record.url)));
        }
        record.verify().map_err(corrupt)?;
        Ok(Some(record))
    }
}

/// A fully written temporary file waiting to replace the live baseline.
/// Dropping it without [`StagedWrite::commit`] removes the temporary file.
#[derive(Debug)]
pub struct StagedWrite {
    tmp: PathBuf,
    dest: PathBuf,
    dir: PathBuf,
    done: bool,
}

impl StagedWrite {
    pub fn temp_path(&self) -> &Path {
        &self.tmp
    }

    pub fn commit(mut self) -> Result<(), StoreError> {
        fs::rename(&self.tmp, &self.dest).map_err(io_err(&self.dest))?;
        self.done = true;
        // Persist the rename itself. Not every platform can open a directory.
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }
}

impl Drop for StagedWrite {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_file(&self.tmp);
        }
    }
}
