use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{pearson, rmse};
use super::schedule::PlateauScheduler;
use crate::corpus::{batch_plan, EntrySet, Metric, SegmentLoader};
use crate::net::{GroupKind, Model};
use crate::nn::{AdamConfig, AdamState, Exec, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    /// Apply L2 to batch-norm scale/shift and PReLU slopes too (biases are
    /// always regularized with the weights).
    pub l2_on_affine: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub plateau_threshold: f64,
    pub plateau_patience: usize,
    pub lr_decay_factor: f64,
    pub reset_best_on_decay: bool,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Bitwise reproducible runs: logs record zero seconds.
    pub deterministic: bool,
    /// Train on a fresh seeded window of each segment every epoch when the
    /// model input is shorter than a segment. Validation keeps leading windows.
    pub random_crops: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            l2: 1e-5,
            l2_on_affine: true,
            epochs: 30,
            batch_size: 55,
            plateau_threshold: 1e-4,
            plateau_patience: 5,
            lr_decay_factor: 0.1,
            reset_best_on_decay: false,
            adam: AdamConfig::default(),
            seed: 0,
            deterministic: false,
            random_crops: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("lr_decay_factor", self.lr_decay_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("l2", self.l2),
            ("plateau_threshold", self.plateau_threshold),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.plateau_patience == 0 || self.batch_size < 2 || self.epochs == 0 {
            return Err(Error::Config(
                "patience and epochs must be at least 1, batch size at least 2".into(),
            ));
        }
        Ok(())
    }

    fn decays(&self, kind: GroupKind) -> bool {
        match kind {
            GroupKind::Weight | GroupKind::Bias => true,
            GroupKind::BnScale | GroupKind::BnShift | GroupKind::Slope => self.l2_on_affine,
            GroupKind::RunningMean | GroupKind::RunningVar => false,
        }
    }
}

/// One row of the training log. Losses are RMSE in mapped target units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_rmse: f64,
    pub val_rmse: f64,
    /// `None` when validation predictions or targets are constant.
    pub val_rho: Option<f64>,
    pub lr: f64,
    pub seconds: f64,
}

impl EpochLog {
    pub const HEADER: &'static str = "epoch,train_rmse,val_rmse,val_rho,lr,seconds";

    pub fn csv_row(&self) -> String {
        let rho = self.val_rho.map(|r| r.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{:e},{:.3}",
            self.epoch, self.train_rmse, self.val_rmse, rho, self.lr, self.seconds
        )
    }
}

pub fn write_epoch_log(path: impl AsRef<Path>, logs: &[EpochLog]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(EpochLog::HEADER);
    out.push('\n');
    for l in logs {
        out.push_str(&l.csv_row());
        out.push('\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Mapped-space predictions and targets of an eval-mode pass.
pub fn predict_set<T: Scalar>(
    model: &Model<T>,
    loader: &mut SegmentLoader<'_>,
    set: &EntrySet,
    metric: Metric,
    batch_size: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut preds = Vec::with_capacity(set.len());
    let mut targets = Vec::with_capacity(set.len());
    let positions: Vec<usize> = (0..set.len()).collect();
    for chunk in positions.chunks(batch_size.max(1)) {
        let batch = loader.batch::<T>(set, chunk, metric, &model.mapper)?;
        let p = model.predict(&batch.inputs)?;
        preds.extend(p.iter().map(|v| v.f64()));
        targets.extend(batch.targets.iter().map(|v| v.f64()));
    }
    Ok((preds, targets))
}

/// Trains for exactly `config.epochs` epochs and returns one log row per
/// epoch. `on_epoch` sees each row as soon as it is complete.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    loader: &mut SegmentLoader<'_>,
    train_set: &EntrySet,
    val_set: &EntrySet,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    config.validate()?;
    if train_set.len() < 2 {
        return Err(Error::Invalid(
            "training set needs at least two segments".into(),
        ));
    }
    if val_set.is_empty() {
        return Err(Error::Invalid("validation set is empty".into()));
    }
    let metric = model.metric;
    let kinds: Vec<GroupKind> = model.trainable_groups().iter().map(|g| g.1).collect();
    let decay: Vec<bool> = kinds.iter().map(|&k| config.decays(k)).collect();
    let sizes: Vec<usize> = model.trainable_groups().iter().map(|g| g.2).collect();
    let mut adam = AdamState::<T>::new(&sizes, config.adam);
    adam.check_finite = true;
    let mut scheduler = PlateauScheduler::new(
        config.learning_rate,
        config.lr_decay_factor,
        config.plateau_threshold,
        config.plateau_patience,
    )
    .reset_best_on_decay(config.reset_best_on_decay);
    if config.deterministic && model.exec != Exec::Serial {
        log::debug!("deterministic mode: parallel kernels are bitwise identical to serial");
    }

    let mut logs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let lr = scheduler.lr();
        let plan = batch_plan(
            train_set.len(),
            config.batch_size,
            config.seed,
            epoch as u64,
            true,
        )?;
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xd5_0b0e);
        dropout_rng.set_stream(epoch as u64);
        let mut sq_err = Vec::with_capacity(train_set.len());
        if config.random_crops {
            loader.random_crops(Some((config.seed, epoch as u64)));
        }
        for (b, positions) in plan.iter().enumerate() {
            let batch = loader.batch::<T>(train_set, positions, metric, &model.mapper)?;
            let (pred, cache) = model.forward_train(&batch.inputs, &mut dropout_rng)?;
            let n = pred.len() as f64;
            let residual: Vec<f64> = pred
                .iter()
                .zip(&batch.targets)
                .map(|(p, t)| p.f64() - t.f64())
                .collect();
            let loss = residual.iter().map(|r| r * r).sum::<f64>() / n;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            sq_err.extend(residual.iter().map(|r| r * r));
            let d_pred: Vec<T> = residual.iter().map(|r| T::of(2.0 * r / n)).collect();
            let grads = model.backward(&cache, &d_pred)?;
            let grad_refs: Vec<_> = grads.groups.iter().collect();
            let mut params: Vec<_> = model
                .trainable_groups_mut()
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            adam.step(&mut params, &grad_refs, &decay, lr, config.l2)
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::NonFiniteLoss { epoch, batch: b },
                    other => other,
                })?;
        }
        loader.random_crops(None);
        let train_rmse = (super::metrics::pairwise_sum(&sq_err) / sq_err.len() as f64).sqrt();

        let (vp, vt) = predict_set(model, loader, val_set, metric, config.batch_size)?;
        let val_rmse = rmse(&vp, &vt)?;
        if !val_rmse.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: plan.len(),
            });
        }
        let val_rho = pearson(&vp, &vt).ok();
        scheduler.step(val_rmse);
        let seconds = if config.deterministic {
            0.0
        } else {
            start.elapsed().as_secs_f64()
        };
        let log = EpochLog {
            epoch: epoch + 1,
            train_rmse,
            val_rmse,
            val_rho,
            lr,
            seconds,
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}
