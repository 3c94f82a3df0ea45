use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{NetworkConfig, ParamCounts, PoolKind, SectionConfig};
use crate::corpus::{Metric, TargetMapper};
use crate::nn::{
    avgpool1d, avgpool1d_backward, dropout_backward, dropout_forward, kaiming_normal, maxpool1d,
    maxpool1d_backward, BatchNorm, BatchNormCache, BatchNormGrads, Conv1d, ConvGrads, Dense,
    DenseGrads, Exec, MaxPoolIndices, Mode, PRelu, Scalar, Tensor,
};
use crate::{Error, Result};

/// Role of a parameter tensor; decides optimizer treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Weight,
    Bias,
    BnScale,
    BnShift,
    Slope,
    RunningMean,
    RunningVar,
}

impl GroupKind {
    pub fn trainable(self) -> bool {
        !matches!(self, GroupKind::RunningMean | GroupKind::RunningVar)
    }
}

/// Provenance of a model's initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint {
    pub seed: u64,
    pub config_hash: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section<T> {
    pub convs: Vec<Conv1d<T>>,
    /// Normalization between consecutive convolutions (only when enabled).
    pub inner: Vec<(BatchNorm<T>, PRelu<T>)>,
    pub norm: BatchNorm<T>,
    pub act: PRelu<T>,
    pub pool: PoolKind,
    pub pool_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: NetworkConfig,
    pub sections: Vec<Section<T>>,
    /// Dense layers L1..Ln; all but the last are followed by PReLU and dropout.
    pub dense: Vec<Dense<T>>,
    pub dense_acts: Vec<PRelu<T>>,
    pub metric: Metric,
    pub mapper: TargetMapper,
    pub fingerprint: Fingerprint,
    pub exec: Exec,
}

struct SectionCache<T> {
    conv_inputs: Vec<Tensor<T>>,
    inner: Vec<(BatchNormCache<T>, Tensor<T>)>,
    norm: BatchNormCache<T>,
    act_input: Tensor<T>,
    pool: PoolCache,
}

enum PoolCache {
    Average,
    Max(MaxPoolIndices),
}

struct HeadCache<T> {
    dense_inputs: Vec<Tensor<T>>,
    act_inputs: Vec<Tensor<T>>,
    masks: Vec<Tensor<T>>,
}

/// Intermediates retained by a train-mode forward pass.
pub struct ForwardCache<T> {
    mode: Mode,
    batch: usize,
    sections: Vec<SectionCache<T>>,
    head: Option<HeadCache<T>>,
}

impl<T> ForwardCache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }
}

struct SectionGrads<T> {
    convs: Vec<ConvGrads<T>>,
    inner: Vec<(BatchNormGrads<T>, Tensor<T>)>,
    norm: BatchNormGrads<T>,
    slope: Tensor<T>,
}

/// Gradients of every trainable tensor, in [`Model::trainable_groups`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub groups: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn all_zero(&self) -> bool {
        self.groups
            .iter()
            .all(|g| g.data().iter().all(|v| *v == T::zero()))
    }
}

fn config_hash(config: &NetworkConfig) -> u32 {
    let text = format!(
        "{}|{}|{:?}|{}|{}",
        config.input_length,
        config.sections_spec(),
        config.hidden,
        config.dropout_p,
        config.norm_between_convs
    );
    crc32fast::hash(text.as_bytes())
}

impl<T: Scalar> Section<T> {
    fn assemble(
        cfg: &SectionConfig,
        in_channels: usize,
        interleave: bool,
        init: &mut impl FnMut(&[usize], usize) -> Result<Tensor<T>>,
    ) -> Result<Self> {
        let mut convs = Vec::with_capacity(cfg.convs.len());
        let mut inner = Vec::new();
        let mut cin = in_channels;
        for (i, c) in cfg.convs.iter().enumerate() {
            let weight = init(&[c.filters, cin, c.length], c.filters * c.length)?;
            convs.push(Conv1d::new(weight, Tensor::zeros(&[c.filters]))?);
            if interleave && i + 1 < cfg.convs.len() {
                inner.push((BatchNorm::new(c.filters), PRelu::new(c.filters)));
            }
            cin = c.filters;
        }
        Ok(Self {
            convs,
            inner,
            norm: BatchNorm::new(cin),
            act: PRelu::new(cin),
            pool: cfg.pool,
            pool_k: cfg.pool_k,
        })
    }

    fn pool(&self, x: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
        match self.pool {
            PoolKind::Average => Ok((avgpool1d(x, self.pool_k)?, PoolCache::Average)),
            PoolKind::Max => {
                let (y, idx) = maxpool1d(x, self.pool_k)?;
                Ok((y, PoolCache::Max(idx)))
            }
        }
    }

    fn forward_eval(&self, mut h: Tensor<T>, exec: Exec) -> Result<Tensor<T>> {
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(&h, exec)?;
            if let Some((bn, act)) = self.inner.get(i) {
                h = act.forward(&bn.forward_eval(&h, exec)?)?;
            }
        }
        h = self.act.forward(&self.norm.forward_eval(&h, exec)?)?;
        Ok(self.pool(&h)?.0)
    }

    fn forward_train(
        &mut self,
        mut h: Tensor<T>,
        exec: Exec,
    ) -> Result<(Tensor<T>, SectionCache<T>)> {
        let mut conv_inputs = Vec::with_capacity(self.convs.len());
        let mut inner = Vec::with_capacity(self.inner.len());
        for i in 0..self.convs.len() {
            let y = self.convs[i].forward(&h, exec)?;
            conv_inputs.push(h);
            h = y;
            if let Some((bn, act)) = self.inner.get_mut(i) {
                let (y, cache) = bn.forward_train(&h, exec)?;
                h = act.forward(&y)?;
                inner.push((cache, y));
            }
        }
        let (act_input, norm) = self.norm.forward_train(&h, exec)?;
        let h = self.act.forward(&act_input)?;
        let (out, pool) = self.pool(&h)?;
        Ok((
            out,
            SectionCache {
                conv_inputs,
                inner,
                norm,
                act_input,
                pool,
            },
        ))
    }

    fn backward(
        &self,
        cache: &SectionCache<T>,
        dy: &Tensor<T>,
        exec: Exec,
    ) -> Result<(Tensor<T>, SectionGrads<T>)> {
        let d = match &cache.pool {
            PoolCache::Average => avgpool1d_backward(dy, self.pool_k)?,
            PoolCache::Max(idx) => maxpool1d_backward(dy, idx)?,
        };
        let (d, slope) = self.act.backward(&cache.act_input, &d)?;
        let (mut d, norm) = self.norm.backward(&cache.norm, &d, exec)?;
        let mut convs = Vec::with_capacity(self.convs.len());
        let mut inner = Vec::with_capacity(self.inner.len());
        for i in (0..self.convs.len()).rev() {
            if let Some((bn, act)) = self.inner.get(i) {
                let (bn_cache, act_in) = &cache.inner[i];
                let (d1, ds) = act.backward(act_in, &d)?;
                let (d2, bg) = bn.backward(bn_cache, &d1, exec)?;
                inner.push((bg, ds));
                d = d2;
            }
            let (dx, g) = self.convs[i].backward(&cache.conv_inputs[i], &d, exec)?;
            convs.push(g);
            d = dx;
        }
        convs.reverse();
        inner.reverse();
        Ok((
            d,
            SectionGrads {
                convs,
                inner,
                norm,
                slope,
            },
        ))
    }
}

impl<T: Scalar> Model<T> {
    /// Builds and initializes a model: Kaiming fan-out normal weights, zero
    /// biases, unit batch-norm scale, zero shift and PReLU slopes of 0.25.
    pub fn build(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::assemble(config, |shape, fan_out| {
            kaiming_normal(shape, fan_out, &mut rng)
        })?;
        model.fingerprint.seed = seed;
        Ok(model)
    }

    /// Same topology as [`build`](Model::build) with all weights zero.
    pub fn zeroed(config: NetworkConfig) -> Result<Self> {
        Self::assemble(config, |shape, _| Ok(Tensor::zeros(shape)))
    }

    fn assemble(
        config: NetworkConfig,
        mut init: impl FnMut(&[usize], usize) -> Result<Tensor<T>>,
    ) -> Result<Self> {
        config.validate()?;
        let trace = config.trace()?;
        let sections = config
            .sections
            .iter()
            .zip(&trace)
            .map(|(s, t)| Section::assemble(s, t.in_channels, config.norm_between_convs, &mut init))
            .collect::<Result<Vec<_>>>()?;
        let dims = config.dense_dims()?;
        let mut dense = Vec::with_capacity(dims.len());
        let mut dense_acts = Vec::with_capacity(dims.len() - 1);
        for (i, &(di, d_o)) in dims.iter().enumerate() {
            let w = init(&[d_o, di], d_o)?;
            dense.push(Dense::new(w, Tensor::zeros(&[d_o]))?);
            if i + 1 < dims.len() {
                dense_acts.push(PRelu::new(d_o));
            }
        }
        let fingerprint = Fingerprint {
            seed: 0,
            config_hash: config_hash(&config),
        };
        Ok(Self {
            config,
            sections,
            dense,
            dense_acts,
            metric: Metric::Pesq,
            mapper: TargetMapper::QUALITY,
            fingerprint,
            exec: Exec::default(),
        })
    }

    pub fn with_target(mut self, metric: Metric, mapper: TargetMapper) -> Self {
        self.metric = metric;
        self.mapper = mapper;
        self
    }

    pub fn input_length(&self) -> usize {
        self.config.input_length
    }

    fn check_batch(&self, x: &Tensor<T>) -> Result<usize> {
        match *x.shape() {
            [n, 1, l] if l == self.input_length() && n >= 1 => Ok(n),
            _ => Err(Error::Shape(format!(
                "model expects [N, 1, {}], got {:?}",
                self.input_length(),
                x.shape()
            ))),
        }
    }

    /// Eval-mode prediction: running batch-norm statistics, no dropout.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        let n = self.check_batch(x)?;
        let mut h = x.clone();
        for s in &self.sections {
            h = s.forward_eval(h, self.exec)?;
        }
        let flat = h.len() / n;
        let mut h = h.reshape(&[n, flat])?;
        let last = self.dense.len() - 1;
        for (i, layer) in self.dense.iter().enumerate() {
            h = layer.forward(&h, self.exec)?;
            if i < last {
                h = self.dense_acts[i].forward(&h)?;
            }
        }
        Ok(h.into_data())
    }

    /// Section outputs of an eval-mode pass, for shape tracing.
    pub fn section_outputs(&self, x: &Tensor<T>) -> Result<Vec<Vec<usize>>> {
        self.check_batch(x)?;
        let mut h = x.clone();
        let mut shapes = Vec::new();
        for s in &self.sections {
            h = s.forward_eval(h, self.exec)?;
            shapes.push(h.shape().to_vec());
        }
        Ok(shapes)
    }

    /// Train-mode pass: batch statistics (running statistics are updated),
    /// sampled dropout masks, and every intermediate kept for [`backward`].
    ///
    /// [`backward`]: Model::backward
    pub fn forward_train<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor<T>,
        rng: &mut R,
    ) -> Result<(Vec<T>, ForwardCache<T>)> {
        let n = self.check_batch(x)?;
        if n < 2 {
            return Err(Error::Shape(
                "train-mode forward needs at least 2 segments per batch".into(),
            ));
        }
        let exec = self.exec;
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.sections.len());
        for s in &mut self.sections {
            let (y, c) = s.forward_train(h, exec)?;
            caches.push(c);
            h = y;
        }
        let flat = h.len() / n;
        let mut h = h.reshape(&[n, flat])?;
        let p = self.config.dropout_p;
        let last = self.dense.len() - 1;
        let mut head = HeadCache {
            dense_inputs: Vec::with_capacity(self.dense.len()),
            act_inputs: Vec::with_capacity(last),
            masks: Vec::with_capacity(last),
        };
        for i in 0..self.dense.len() {
            let y = self.dense[i].forward(&h, exec)?;
            head.dense_inputs.push(h);
            h = y;
            if i < last {
                let a = self.dense_acts[i].forward(&h)?;
                head.act_inputs.push(h);
                let (d, mask) = dropout_forward(&a, p, Mode::Train, rng)?;
                head.masks
                    .push(mask.expect("train-mode dropout returns a mask"));
                h = d;
            }
        }
        Ok((
            h.into_data(),
            ForwardCache {
                mode: Mode::Train,
                batch: n,
                sections: caches,
                head: Some(head),
            },
        ))
    }

    /// Dispatches on `mode`. Eval mode returns an empty cache that
    /// [`backward`](Model::backward) rejects.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<T>, ForwardCache<T>)> {
        match mode {
            Mode::Train => self.forward_train(x, rng),
            Mode::Eval => {
                let n = self.check_batch(x)?;
                Ok((
                    self.predict(x)?,
                    ForwardCache {
                        mode: Mode::Eval,
                        batch: n,
                        sections: Vec::new(),
                        head: None,
                    },
                ))
            }
        }
    }

    pub fn backward(&self, cache: &ForwardCache<T>, d_pred: &[T]) -> Result<Gradients<T>> {
        let head = match (&cache.head, cache.mode) {
            (Some(h), Mode::Train) => h,
            _ => {
                return Err(Error::Invalid(
                    "backward needs the cache of a train-mode forward".into(),
                ))
            }
        };
        let n = cache.batch;
        if d_pred.len() != n {
            return Err(Error::Shape(format!(
                "{} prediction gradients for a batch of {n}",
                d_pred.len()
            )));
        }
        let exec = self.exec;
        let mut d = Tensor::new(&[n, 1], d_pred.to_vec())?;
        let last = self.dense.len() - 1;
        let mut dense_grads: Vec<DenseGrads<T>> = Vec::with_capacity(self.dense.len());
        let mut slope_grads = Vec::with_capacity(last);
        for i in (0..self.dense.len()).rev() {
            if i < last {
                let dm = dropout_backward(&d, &head.masks[i])?;
                let (da, ds) = self.dense_acts[i].backward(&head.act_inputs[i], &dm)?;
                slope_grads.push(ds);
                d = da;
            }
            let (dx, g) = self.dense[i].backward(&head.dense_inputs[i], &d, exec)?;
            dense_grads.push(g);
            d = dx;
        }
        dense_grads.reverse();
        slope_grads.reverse();

        let last_trace = self
            .sections
            .last()
            .map(|s| s.norm.channels())
            .expect("at least one section");
        let flat = d.len() / n;
        let mut d = d.reshape(&[n, last_trace, flat / last_trace])?;
        let mut section_grads = Vec::with_capacity(self.sections.len());
        for (s, c) in self.sections.iter().zip(&cache.sections).rev() {
            let (dx, g) = s.backward(c, &d, exec)?;
            section_grads.push(g);
            d = dx;
        }
        section_grads.reverse();

        let mut groups = Vec::new();
        for g in section_grads {
            let mut inner = g.inner.into_iter();
            for cg in g.convs {
                groups.push(cg.weight);
                groups.push(cg.bias);
                if let Some((bg, ds)) = inner.next() {
                    groups.push(bg.gamma);
                    groups.push(bg.beta);
                    groups.push(ds);
                }
            }
            groups.push(g.norm.gamma);
            groups.push(g.norm.beta);
            groups.push(g.slope);
        }
        let mut slopes = slope_grads.into_iter();
        for dg in dense_grads {
            groups.push(dg.weight);
            groups.push(dg.bias);
            if let Some(s) = slopes.next() {
                groups.push(s);
            }
        }
        Ok(Gradients { groups })
    }

    /// Visits every serialized tensor in topological order.
    pub fn visit_groups(&self, mut f: impl FnMut(&str, GroupKind, &Tensor<T>)) {
        for (si, s) in self.sections.iter().enumerate() {
            let p = format!("s{}", si + 1);
            for (ci, c) in s.convs.iter().enumerate() {
                f(
                    &format!("{p}.conv{ci}.weight"),
                    GroupKind::Weight,
                    &c.weight,
                );
                f(&format!("{p}.conv{ci}.bias"), GroupKind::Bias, &c.bias);
                if let Some((bn, act)) = s.inner.get(ci) {
                    visit_bn(&format!("{p}.bn{ci}"), bn, &mut f);
                    f(
                        &format!("{p}.prelu{ci}.slope"),
                        GroupKind::Slope,
                        &act.slope,
                    );
                }
            }
            visit_bn(&format!("{p}.bn"), &s.norm, &mut f);
            f(&format!("{p}.prelu.slope"), GroupKind::Slope, &s.act.slope);
        }
        for (li, d) in self.dense.iter().enumerate() {
            let p = format!("l{}", li + 1);
            f(&format!("{p}.weight"), GroupKind::Weight, &d.weight);
            f(&format!("{p}.bias"), GroupKind::Bias, &d.bias);
            if let Some(act) = self.dense_acts.get(li) {
                f(&format!("{p}.prelu.slope"), GroupKind::Slope, &act.slope);
            }
        }
    }

    /// Mutable counterpart of [`visit_groups`](Model::visit_groups), same order.
    pub fn groups_mut(&mut self) -> Vec<(GroupKind, &mut Tensor<T>)> {
        let mut out: Vec<(GroupKind, &mut Tensor<T>)> = Vec::new();
        let acts = &mut self.dense_acts;
        for s in &mut self.sections {
            let mut inner = s.inner.iter_mut();
            for c in &mut s.convs {
                out.push((GroupKind::Weight, &mut c.weight));
                out.push((GroupKind::Bias, &mut c.bias));
                if let Some((bn, act)) = inner.next() {
                    push_bn(bn, &mut out);
                    out.push((GroupKind::Slope, &mut act.slope));
                }
            }
            push_bn(&mut s.norm, &mut out);
            out.push((GroupKind::Slope, &mut s.act.slope));
        }
        let mut acts = acts.iter_mut();
        for d in &mut self.dense {
            out.push((GroupKind::Weight, &mut d.weight));
            out.push((GroupKind::Bias, &mut d.bias));
            if let Some(act) = acts.next() {
                out.push((GroupKind::Slope, &mut act.slope));
            }
        }
        out
    }

    /// Trainable tensors, aligned with [`Gradients::groups`].
    pub fn trainable_groups_mut(&mut self) -> Vec<(GroupKind, &mut Tensor<T>)> {
        self.groups_mut()
            .into_iter()
            .filter(|(k, _)| k.trainable())
            .collect()
    }

    pub fn trainable_groups(&self) -> Vec<(String, GroupKind, usize)> {
        let mut v = Vec::new();
        self.visit_groups(|name, kind, t| {
            if kind.trainable() {
                v.push((name.to_string(), kind, t.len()));
            }
        });
        v
    }

    /// Parameter counts taken from the allocated tensors.
    pub fn count_params(&self) -> ParamCounts {
        let mut rows: Vec<(String, usize)> = Vec::new();
        let mut conv_extractor = 0;
        let mut dense_head = 0;
        let mut first_dense = 0;
        self.visit_groups(|name, kind, t| {
            if !kind.trainable() {
                return;
            }
            let layer = layer_name(name);
            match rows.last_mut() {
                Some((l, n)) if *l == layer => *n += t.len(),
                _ => rows.push((layer.clone(), t.len())),
            }
            if name.starts_with('s') {
                conv_extractor += t.len();
            } else {
                dense_head += t.len();
                if name == "l1.weight" || name == "l1.bias" {
                    first_dense += t.len();
                }
            }
        });
        ParamCounts {
            rows,
            conv_extractor,
            first_dense,
            dense_head,
            total: conv_extractor + dense_head,
        }
    }

    /// Batch-norm running statistics, in topological order.
    pub fn running_stats(&self) -> Vec<Tensor<T>> {
        let mut v = Vec::new();
        self.visit_groups(|_, kind, t| {
            if !kind.trainable() {
                v.push(t.clone());
            }
        });
        v
    }

    /// Converts every tensor to another precision (same topology).
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let bn = |b: &BatchNorm<T>| BatchNorm {
            gamma: b.gamma.cast(),
            beta: b.beta.cast(),
            running_mean: b.running_mean.cast(),
            running_var: b.running_var.cast(),
            momentum: b.momentum,
            epsilon: b.epsilon,
        };
        Model {
            config: self.config.clone(),
            sections: self
                .sections
                .iter()
                .map(|s| Section {
                    convs: s
                        .convs
                        .iter()
                        .map(|c| Conv1d {
                            weight: c.weight.cast(),
                            bias: c.bias.cast(),
                        })
                        .collect(),
                    inner: s
                        .inner
                        .iter()
                        .map(|(b, a)| {
                            (
                                bn(b),
                                PRelu {
                                    slope: a.slope.cast(),
                                },
                            )
                        })
                        .collect(),
                    norm: bn(&s.norm),
                    act: PRelu {
                        slope: s.act.slope.cast(),
                    },
                    pool: s.pool,
                    pool_k: s.pool_k,
                })
                .collect(),
            dense: self
                .dense
                .iter()
                .map(|d| Dense {
                    weight: d.weight.cast(),
                    bias: d.bias.cast(),
                })
                .collect(),
            dense_acts: self
                .dense_acts
                .iter()
                .map(|a| PRelu {
                    slope: a.slope.cast(),
                })
                .collect(),
            metric: self.metric,
            mapper: self.mapper,
            fingerprint: self.fingerprint,
            exec: self.exec,
        }
    }
}

fn layer_name(group: &str) -> String {
    let mut parts: Vec<&str> = group.split('.').collect();
    parts.pop();
    if parts.len() == 1 {
        // dense weights and biases: "l1.weight" -> "l1.dense"
        return format!("{}.dense", parts[0]);
    }
    parts.join(".")
}

fn visit_bn<T: Scalar>(
    prefix: &str,
    bn: &BatchNorm<T>,
    f: &mut impl FnMut(&str, GroupKind, &Tensor<T>),
) {
    f(&format!("{prefix}.gamma"), GroupKind::BnScale, &bn.gamma);
    f(&format!("{prefix}.beta"), GroupKind::BnShift, &bn.beta);
    f(
        &format!("{prefix}.running_mean"),
        GroupKind::RunningMean,
        &bn.running_mean,
    );
    f(
        &format!("{prefix}.running_var"),
        GroupKind::RunningVar,
        &bn.running_var,
    );
}

fn push_bn<'a, T: Scalar>(bn: &'a mut BatchNorm<T>, out: &mut Vec<(GroupKind, &'a mut Tensor<T>)>) {
    out.push((GroupKind::BnScale, &mut bn.gamma));
    out.push((GroupKind::BnShift, &mut bn.beta));
    out.push((GroupKind::RunningMean, &mut bn.running_mean));
    out.push((GroupKind::RunningVar, &mut bn.running_var));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::check_network;
    use crate::net::config::ConvSpec;
    use crate::nn::gradcheck::{random_tensor, Fault};

    fn tiny64() -> Model<f64> {
        Model::build(NetworkConfig::tiny(), 7).unwrap()
    }

    fn batch(n: usize, len: usize, seed: u64) -> Tensor<f64> {
        random_tensor(&[n, 1, len], &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn canonical_tensor_counts() {
        let m = Model::<f32>::build(NetworkConfig::canonical(), 1).unwrap();
        let p = m.count_params();
        assert_eq!(p.conv_extractor, 7_034_432);
        assert_eq!(p.first_dense, 32_768_512);
        assert_eq!(p.total, 40_067_137);
        assert_eq!(p, m.config.param_counts().unwrap());
    }

    #[test]
    fn canonical_section_shapes() {
        let m = Model::<f32>::build(NetworkConfig::canonical(), 1).unwrap();
        let x = batch(1, 24_000, 3).cast::<f32>();
        let shapes = m.section_outputs(&x).unwrap();
        assert_eq!(
            shapes,
            vec![
                vec![1, 192, 6000],
                vec![1, 192, 3000],
                vec![1, 256, 750],
                vec![1, 512, 250],
                vec![1, 512, 125],
            ]
        );
        assert!(m.predict(&batch(1, 23_999, 3).cast()).is_err());
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let a = tiny64();
        assert_eq!(a, tiny64());
        assert_ne!(a, Model::build(NetworkConfig::tiny(), 8).unwrap());
    }

    #[test]
    fn bad_config_fails_assembly() {
        let mut c = NetworkConfig::canonical();
        c.sections[2].pool_k = 5;
        assert!(Model::<f32>::build(c, 0).is_err());
    }

    #[test]
    fn eval_is_pure() {
        let m = tiny64();
        let x = batch(3, 2880, 1);
        let a = m.predict(&x).unwrap();
        assert_eq!(a, m.predict(&x).unwrap());
        let neg = m.predict(&x.map(|v| -v)).unwrap();
        assert_ne!(a, neg);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mut m = tiny64();
        let x = batch(4, 2880, 2);
        m.exec = Exec::Serial;
        let (ps, cs) = m
            .clone()
            .forward_train(&x, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let gs = m.backward(&cs, &[1.0, -1.0, 0.5, 2.0]).unwrap();
        m.exec = Exec::Parallel;
        let (pp, cp) = m
            .clone()
            .forward_train(&x, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let gp = m.backward(&cp, &[1.0, -1.0, 0.5, 2.0]).unwrap();
        assert_eq!(ps, pp);
        assert_eq!(gs, gp);
    }

    #[test]
    fn identical_segments_give_identical_outputs() {
        let mut m = tiny64();
        let one = batch(1, 2880, 4).into_data();
        let x = Tensor::new(&[3, 1, 2880], [one.clone(), one.clone(), one].concat()).unwrap();
        m.config.dropout_p = 0.0;
        let (p, _) = m
            .forward_train(&x, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(p[0], p[1]);
        assert_eq!(p[1], p[2]);
    }

    #[test]
    fn train_forward_updates_running_stats() {
        let mut m = tiny64();
        let before = m.running_stats();
        m.forward_train(&batch(2, 2880, 9), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_ne!(before, m.running_stats());
    }

    #[test]
    fn train_mode_rejects_single_segment() {
        let mut m = tiny64();
        let err = m.forward_train(&batch(1, 2880, 0), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::Shape(_))));
        assert!(m.predict(&batch(1, 2880, 0)).is_ok());
    }

    #[test]
    fn backward_needs_train_cache() {
        let mut m = tiny64();
        let x = batch(2, 2880, 0);
        let (_, cache) = m
            .forward(&x, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(cache.mode(), Mode::Eval);
        assert!(matches!(
            m.backward(&cache, &[1.0, 1.0]),
            Err(Error::Invalid(_))
        ));
        let (_, cache) = m
            .forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert!(matches!(m.backward(&cache, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut m = tiny64();
        let (_, cache) = m
            .forward_train(&batch(3, 2880, 1), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let g = m.backward(&cache, &[0.0; 3]).unwrap();
        assert_eq!(g.groups.len(), m.trainable_groups().len());
        assert!(g.all_zero());
    }

    #[test]
    fn gradient_groups_align_with_parameters() {
        let mut m = tiny64();
        let (_, cache) = m
            .forward_train(&batch(2, 2880, 1), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let g = m.backward(&cache, &[1.0, -1.0]).unwrap();
        let shapes: Vec<Vec<usize>> = m
            .trainable_groups_mut()
            .into_iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect();
        let grad_shapes: Vec<Vec<usize>> = g.groups.iter().map(|t| t.shape().to_vec()).collect();
        assert_eq!(shapes, grad_shapes);
    }

    #[test]
    fn tiny_network_gradients_match_finite_differences() {
        for seed in [1, 2] {
            let report = check_network(&NetworkConfig::tiny(), seed, 3, 16, Fault::None).unwrap();
            assert!(report.passed(1e-4), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn interleaved_network_gradients_match_finite_differences() {
        let mut c = NetworkConfig::tiny();
        c.norm_between_convs = true;
        let report = check_network(&c, 3, 2, 8, Fault::None).unwrap();
        assert!(report.passed(1e-4), "{report:?}");
        let flipped = check_network(&c, 3, 2, 4, Fault::FlipSign).unwrap();
        assert!(flipped.max_rel_error() > 0.1);
    }

    #[test]
    fn negative_slopes_feeding_only_pool_losers_get_no_gradient() {
        // conv (1 filter, identity) -> BN -> PReLU -> max pool k=2: every
        // window pairs a large value with a small one, so after batch norm
        // each negative activation loses its window.
        let config = NetworkConfig {
            input_length: 8,
            sections: vec![SectionConfig {
                convs: vec![ConvSpec {
                    filters: 1,
                    length: 1,
                }],
                pool: PoolKind::Max,
                pool_k: 2,
                l_out: None,
            }],
            hidden: vec![3],
            dropout_p: 0.0,
            norm_between_convs: false,
        };
        let mut m = Model::<f64>::build(config, 0).unwrap();
        m.sections[0].convs[0].weight = Tensor::new(&[1, 1, 1], vec![1.0]).unwrap();
        let x = Tensor::new(
            &[2, 1, 8],
            vec![
                5.0, -1.0, -2.0, 6.0, 4.0, -1.5, -0.5, 7.0, //
                6.0, -2.0, -1.0, 5.0, 7.0, -0.5, -1.5, 4.0,
            ],
        )
        .unwrap();
        let (_, cache) = m
            .forward_train(&x, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let g = m.backward(&cache, &[1.0, -0.7]).unwrap();
        let names = m.trainable_groups();
        let slope = names.iter().position(|n| n.0 == "s1.prelu.slope").unwrap();
        assert_eq!(g.groups[slope].data(), &[0.0]);
        // the positive winners still carry gradient into the dense slope
        let dense_slope = names.iter().position(|n| n.0 == "l1.prelu.slope").unwrap();
        assert!(g.groups[dense_slope].data().iter().any(|v| *v != 0.0));
        let conv_w = names.iter().position(|n| n.0 == "s1.conv0.weight").unwrap();
        assert_ne!(g.groups[conv_w].data()[0], 0.0);
    }

    #[test]
    fn cast_round_trip_preserves_f32_values() {
        let m = Model::<f32>::build(NetworkConfig::tiny(), 3).unwrap();
        assert_eq!(m.cast::<f64>().cast::<f32>(), m);
    }
}
