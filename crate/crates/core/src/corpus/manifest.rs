use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Metric;
use crate::{Error, Result};

/// One segment: a record in a `WESEG1` store plus its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub segment_path: PathBuf,
    pub record_index: usize,
    pub source_dataset: String,
    pub pesq: Option<f64>,
    pub polqa: Option<f64>,
    pub stoi: Option<f64>,
}

impl ManifestEntry {
    pub fn target(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Pesq => self.pesq,
            Metric::Polqa => self.polqa,
            Metric::Stoi => self.stoi,
        }
    }

    pub fn set_target(&mut self, metric: Metric, value: Option<f64>) {
        match metric {
            Metric::Pesq => self.pesq = value,
            Metric::Polqa => self.polqa = value,
            Metric::Stoi => self.stoi = value,
        }
    }

    fn validate(&self, line: usize) -> Result<()> {
        for m in Metric::ALL {
            if let Some(v) = self.target(m) {
                if !m.contains(v) {
                    let (lo, hi) = m.range();
                    return Err(Error::Manifest(format!(
                        "line {line}: {m} value {v} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        if self.source_dataset.is_empty() {
            return Err(Error::Manifest(format!(
                "line {line}: empty source_dataset"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    segment_path: String,
    record_index: usize,
    source_dataset: String,
    pesq: Option<f64>,
    polqa: Option<f64>,
    stoi: Option<f64>,
}

pub const MANIFEST_HEADER: [&str; 6] = [
    "segment_path",
    "record_index",
    "source_dataset",
    "pesq",
    "polqa",
    "stoi",
];

/// Ordered list of entries; an entry's id is its position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            e.validate(i + 2)?;
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_metric(&self, metric: Metric) -> bool {
        self.entries.iter().any(|e| e.target(metric).is_some())
    }

    /// Reads a manifest CSV. Relative segment paths are resolved against the
    /// manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::read(file, base)
    }

    pub fn read(reader: impl std::io::Read, base: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Manifest(e.to_string()))?
            .clone();
        if header.iter().ne(MANIFEST_HEADER) {
            return Err(Error::Manifest(format!(
                "header must be {:?}, got {:?}",
                MANIFEST_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Manifest(format!("line {line}: {e}")))?;
            let mut segment_path = PathBuf::from(&row.segment_path);
            if segment_path.is_relative() {
                segment_path = base.join(segment_path);
            }
            let entry = ManifestEntry {
                segment_path,
                record_index: row.record_index,
                source_dataset: row.source_dataset,
                pesq: row.pesq,
                polqa: row.polqa,
                stoi: row.stoi,
            };
            entry.validate(line)?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    /// Writes the manifest. Segment paths under the manifest's directory are
    /// written relative to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(file, base)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, writer: impl std::io::Write, base: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Manifest(e.to_string());
        for e in &self.entries {
            let p = e.segment_path.strip_prefix(base).unwrap_or(&e.segment_path);
            w.serialize(Row {
                segment_path: p.to_string_lossy().into_owned(),
                record_index: e.record_index,
                source_dataset: e.source_dataset.clone(),
                pesq: e.pesq,
                polqa: e.polqa,
                stoi: e.stoi,
            })
            .map_err(csv_err)?;
        }
        if self.entries.is_empty() {
            w.write_record(MANIFEST_HEADER).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Manifest(e.to_string()))
    }
}
