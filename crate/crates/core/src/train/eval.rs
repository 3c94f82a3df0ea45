use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::metrics::{pearson, rmse};
use super::trainer::predict_set;
use crate::corpus::{EntrySet, Metric, SegmentLoader};
use crate::net::Model;
use crate::nn::Scalar;
use crate::{Error, Result};

/// One scored segment, in native units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPair {
    pub entry_id: usize,
    pub dataset: String,
    pub phase_inverted: bool,
    pub target: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub dataset: String,
    pub n: usize,
    /// `None` when predictions or targets are constant (or `n < 2`).
    pub rho: Option<f64>,
    pub rmse: f64,
}

impl GroupMetrics {
    fn of(dataset: &str, pairs: &[&ScoredPair]) -> Result<Self> {
        let p: Vec<f64> = pairs.iter().map(|s| s.prediction).collect();
        let t: Vec<f64> = pairs.iter().map(|s| s.target).collect();
        Ok(Self {
            dataset: dataset.to_string(),
            n: pairs.len(),
            rho: pearson(&p, &t).ok(),
            rmse: rmse(&p, &t)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: Metric,
    /// Per source dataset, in name order.
    pub datasets: Vec<GroupMetrics>,
    /// Recomputed from all pairs pooled.
    pub combined: GroupMetrics,
    pub pairs: Vec<ScoredPair>,
}

pub const COMBINED: &str = "combined";

impl EvalReport {
    pub fn from_pairs(metric: Metric, pairs: Vec<ScoredPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Invalid("nothing to evaluate".into()));
        }
        let mut groups: BTreeMap<&str, Vec<&ScoredPair>> = BTreeMap::new();
        for p in &pairs {
            groups.entry(&p.dataset).or_default().push(p);
        }
        let datasets = groups
            .iter()
            .map(|(name, g)| GroupMetrics::of(name, g))
            .collect::<Result<_>>()?;
        let all: Vec<&ScoredPair> = pairs.iter().collect();
        let combined = GroupMetrics::of(COMBINED, &all)?;
        Ok(Self {
            metric,
            datasets,
            combined,
            pairs,
        })
    }

    /// `dataset,n,rho,rmse` with a final `combined` row.
    pub fn write_metrics(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path.as_ref(), self.datasets.iter().chain([&self.combined]))
    }

    pub fn write_pairs(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path.as_ref(), &self.pairs)
    }

    /// Counts of (prediction bin, target bin) over the metric's native range
    /// split into `bins` equal cells; predictions are clamped into the range.
    pub fn histogram(&self, bins: usize) -> Vec<(usize, usize, usize)> {
        let (lo, hi) = self.metric.range();
        let bins = bins.max(1);
        let bin = |v: f64| {
            let x = (v.clamp(lo, hi) - lo) / (hi - lo);
            ((x * bins as f64) as usize).min(bins - 1)
        };
        let mut counts = vec![0usize; bins * bins];
        for p in &self.pairs {
            counts[bin(p.prediction) * bins + bin(p.target)] += 1;
        }
        (0..bins * bins)
            .map(|i| (i / bins, i % bins, counts[i]))
            .collect()
    }

    pub fn write_histogram(&self, path: impl AsRef<Path>, bins: usize) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            pred_bin: usize,
            target_bin: usize,
            count: usize,
        }
        let rows: Vec<Row> = self
            .histogram(bins)
            .into_iter()
            .map(|(pred_bin, target_bin, count)| Row {
                pred_bin,
                target_bin,
                count,
            })
            .collect();
        write_csv(path.as_ref(), &rows)
    }
}

fn write_csv<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<()> {
    let err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Eval-mode scoring of `set`, unmapped to native units with the model's
/// stored mapper.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    loader: &mut SegmentLoader<'_>,
    set: &EntrySet,
    batch_size: usize,
) -> Result<EvalReport> {
    let manifest = loader.manifest();
    let (pred, target) = predict_set(model, loader, set, model.metric, batch_size)?;
    let pairs = set
        .items
        .iter()
        .zip(pred.iter().zip(&target))
        .map(|(item, (&p, &t))| ScoredPair {
            entry_id: item.entry,
            dataset: manifest.entries[item.entry].source_dataset.clone(),
            phase_inverted: item.phase_inverted,
            target: manifest.entries[item.entry]
                .target(model.metric)
                .unwrap_or_else(|| model.mapper.unmap(t)),
            prediction: model.mapper.unmap(p),
        })
        .collect();
    EvalReport::from_pairs(model.metric, pairs)
}
