/// Validation-plateau learning-rate decay.
///
/// An epoch improves iff its loss is strictly below `best - threshold`. After
/// `patience` consecutive non-improving epochs the rate is multiplied by
/// `factor` and the counter restarts; `best` survives the decay unless
/// `reset_best_on_decay` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    initial_lr: f64,
    factor: f64,
    threshold: f64,
    patience: usize,
    reset_best_on_decay: bool,
    best: f64,
    counter: usize,
    decays: u32,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, factor: f64, threshold: f64, patience: usize) -> Self {
        Self {
            initial_lr,
            factor,
            threshold,
            patience: patience.max(1),
            reset_best_on_decay: false,
            best: f64::INFINITY,
            counter: 0,
            decays: 0,
        }
    }

    pub fn reset_best_on_decay(mut self, reset: bool) -> Self {
        self.reset_best_on_decay = reset;
        self
    }

    pub fn decays(&self) -> u32 {
        self.decays
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Learning rate after the decays so far.
    pub fn lr(&self) -> f64 {
        decayed(self.initial_lr, self.factor, self.decays)
    }

    /// Records one epoch's validation loss; returns true when the rate decayed.
    pub fn step(&mut self, loss: f64) -> bool {
        if loss < self.best - self.threshold {
            self.best = loss;
            self.counter = 0;
            return false;
        }
        self.counter += 1;
        if self.counter < self.patience {
            return false;
        }
        self.counter = 0;
        self.decays += 1;
        if self.reset_best_on_decay {
            self.best = f64::INFINITY;
        }
        true
    }
}

/// `initial * factor^k`. When `factor` is a power of ten the result is the
/// double nearest to the exact decimal, e.g. `1e-4` after two decimal decays
/// is exactly `1e-6`; repeated multiplication would drift.
pub fn decayed(initial: f64, factor: f64, k: u32) -> f64 {
    if k == 0 {
        return initial;
    }
    let f = format!("{factor:e}");
    if let Some(exp) = f.strip_prefix("1e").and_then(|e| e.parse::<i64>().ok()) {
        let lr = format!("{initial:e}");
        if let Some((mantissa, e)) = lr.split_once('e') {
            if let Ok(e) = e.parse::<i64>() {
                let shifted = format!("{mantissa}e{}", e + exp * i64::from(k));
                if let Ok(v) = shifted.parse() {
                    return v;
                }
            }
        }
    }
    initial * factor.powi(k as i32)
}
