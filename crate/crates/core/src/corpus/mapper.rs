use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Target metric a model is trained to emulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Pesq,
    Polqa,
    Stoi,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Pesq, Metric::Polqa, Metric::Stoi];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Pesq => "pesq",
            Metric::Polqa => "polqa",
            Metric::Stoi => "stoi",
        }
    }

    /// Closed range of valid native values.
    pub fn range(self) -> (f64, f64) {
        match self {
            Metric::Pesq | Metric::Polqa => (1.0, 4.5),
            Metric::Stoi => (0.0, 1.0),
        }
    }

    pub fn contains(self, v: f64) -> bool {
        let (lo, hi) = self.range();
        (lo..=hi).contains(&v)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pesq" => Ok(Metric::Pesq),
            "polqa" => Ok(Metric::Polqa),
            "stoi" => Ok(Metric::Stoi),
            other => Err(Error::Invalid(format!("unknown metric {other:?}"))),
        }
    }
}

/// Maps native target values into the network's output space and back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetMapper {
    /// `mapped = (y - center) / half_range`
    Affine { center: f64, half_range: f64 },
    /// `mapped = (y - mean) / std`
    ZScore { mean: f64, std: f64 },
}

impl TargetMapper {
    /// Sends `[1, 4.5]` onto `[-1, 1]`.
    pub const QUALITY: TargetMapper = TargetMapper::Affine {
        center: 2.75,
        half_range: 1.75,
    };

    pub fn map(&self, y: f64) -> f64 {
        match *self {
            TargetMapper::Affine { center, half_range } => (y - center) / half_range,
            TargetMapper::ZScore { mean, std } => (y - mean) / std,
        }
    }

    pub fn unmap(&self, z: f64) -> f64 {
        match *self {
            TargetMapper::Affine { center, half_range } => z * half_range + center,
            TargetMapper::ZScore { mean, std } => z * std + mean,
        }
    }

    /// Native units per mapped unit.
    pub fn native_scale(&self) -> f64 {
        match *self {
            TargetMapper::Affine { half_range, .. } => half_range,
            TargetMapper::ZScore { std, .. } => std,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TargetMapper::Affine { .. } => "affine",
            TargetMapper::ZScore { .. } => "zscore",
        }
    }
}

/// Quality metrics use the fixed range mapping; intelligibility is
/// standardized with the population statistics of the training values.
pub fn fit_mapper(metric: Metric, training_values: &[f64]) -> Result<TargetMapper> {
    match metric {
        Metric::Pesq | Metric::Polqa => Ok(TargetMapper::QUALITY),
        Metric::Stoi => {
            if training_values.len() < 2 {
                return Err(Error::ZeroVariance(
                    "z-score needs at least two training values",
                ));
            }
            if training_values.iter().all(|&v| v == training_values[0]) {
                return Err(Error::ZeroVariance("training targets are constant"));
            }
            let n = training_values.len() as f64;
            let mean = training_values.iter().sum::<f64>() / n;
            let var = training_values
                .iter()
                .map(|v| (v - mean).powi(2))
                .sum::<f64>()
                / n;
            let std = var.sqrt();
            if std.is_nan() || std == 0.0 {
                return Err(Error::ZeroVariance("training targets are constant"));
            }
            Ok(TargetMapper::ZScore { mean, std })
        }
    }
}
