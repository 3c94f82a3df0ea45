use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Manifest;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitLabel {
    Train,
    Test,
    Validation,
}

impl SplitLabel {
    pub const ALL: [SplitLabel; 3] = [SplitLabel::Train, SplitLabel::Test, SplitLabel::Validation];

    pub fn name(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Test => "test",
            SplitLabel::Validation => "validation",
        }
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "test" => Ok(SplitLabel::Test),
            "validation" | "val" => Ok(SplitLabel::Validation),
            other => Err(Error::Invalid(format!("unknown split label {other:?}"))),
        }
    }
}

/// Label per manifest entry, indexed by entry id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub labels: Vec<SplitLabel>,
    pub seed: u64,
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.5, 0.4, 0.1];

/// Below this many segments a dataset cannot fill all three splits.
pub const MIN_DATASET_SIZE: usize = 3;

/// Per source dataset (in name order), shuffles the entry ids and takes
/// `round(f_train * n)` for training, `round(f_test * n)` for testing and the
/// rest for validation.
pub fn split(manifest: &Manifest, fractions: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if manifest.is_empty() {
        return Err(Error::Manifest("cannot split an empty manifest".into()));
    }
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let mut by_dataset: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        by_dataset.entry(&e.source_dataset).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![SplitLabel::Train; manifest.len()];
    for (name, mut ids) in by_dataset {
        let n = ids.len();
        if n < MIN_DATASET_SIZE {
            log::warn!("dataset {name:?} has {n} segments; all assigned to train");
            continue;
        }
        ids.shuffle(&mut rng);
        let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
        let n_test = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
        for &id in &ids[n_train..n_train + n_test] {
            labels[id] = SplitLabel::Test;
        }
        for &id in &ids[n_train + n_test..] {
            labels[id] = SplitLabel::Validation;
        }
    }
    Ok(SplitAssignment { labels, seed })
}

#[derive(Serialize, Deserialize)]
struct Row {
    entry_id: usize,
    label: String,
    seed: u64,
}

impl SplitAssignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn ids(&self, label: SplitLabel) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == label)
            .collect()
    }

    pub fn count(&self, label: SplitLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e: csv::Error| Error::Manifest(format!("{}: {e}", path.display()));
        for (entry_id, l) in self.labels.iter().enumerate() {
            w.serialize(Row {
                entry_id,
                label: l.name().into(),
                seed: self.seed,
            })
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a split file; rows may come in any order but must cover every
    /// id from 0 to n - 1 exactly once.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let bad = |msg: String| Error::Manifest(format!("{}: {msg}", path.display()));
        let mut rows = Vec::new();
        let mut seed = None;
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            match seed {
                None => seed = Some(row.seed),
                Some(s) if s != row.seed => return Err(bad("mixed seeds".into())),
                Some(_) => {}
            }
            rows.push((row.entry_id, row.label.parse::<SplitLabel>()?));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(bad("entry ids must be 0..n without gaps or repeats".into()));
        }
        Ok(Self {
            labels: rows.into_iter().map(|r| r.1).collect(),
            seed: seed.unwrap_or(0),
        })
    }
}
