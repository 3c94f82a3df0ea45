use std::fmt::Write as _;

use crate::dsp::{SAMPLE_RATE, SEGMENT_LEN};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Average,
    Max,
}

impl PoolKind {
    pub fn tag(self) -> &'static str {
        match self {
            PoolKind::Average => "avg",
            PoolKind::Max => "max",
        }
    }
}

/// `C-filters-length`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub filters: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionConfig {
    pub convs: Vec<ConvSpec>,
    pub pool: PoolKind,
    pub pool_k: usize,
    /// Declared output length; assembly fails when the pool chain disagrees.
    pub l_out: Option<usize>,
}

impl SectionConfig {
    pub fn out_channels(&self) -> usize {
        self.convs.last().map_or(0, |c| c.filters)
    }
}

/// Shape and timing seen by one section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionTrace {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Effective input sample rate in Hz.
    pub rate_hz: f64,
    /// Effective sample spacing in ms.
    pub spacing_ms: f64,
    pub l_in: usize,
    pub l_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_length: usize,
    pub sections: Vec<SectionConfig>,
    /// Widths of the hidden dense layers; a final single-output layer follows.
    pub hidden: Vec<usize>,
    pub dropout_p: f64,
    /// Insert batch norm and PReLU between consecutive convolutions of a
    /// section. Off by default: sections run all convolutions back to back.
    pub norm_between_convs: bool,
}

fn section(convs: &[(usize, usize)], pool: PoolKind, pool_k: usize, l_out: usize) -> SectionConfig {
    SectionConfig {
        convs: convs
            .iter()
            .map(|&(filters, length)| ConvSpec { filters, length })
            .collect(),
        pool,
        pool_k,
        l_out: Some(l_out),
    }
}

impl NetworkConfig {
    /// The full-size narrowband network.
    pub fn canonical() -> Self {
        use PoolKind::{Average, Max};
        Self {
            input_length: SEGMENT_LEN,
            sections: vec![
                section(&[(192, 11)], Average, 4, 6000),
                section(&[(192, 7)], Max, 2, 3000),
                section(&[(256, 7)], Max, 4, 750),
                section(&[(512, 7), (512, 7)], Max, 3, 250),
                section(&[(512, 7), (512, 7)], Max, 2, 125),
            ],
            hidden: vec![512, 512],
            dropout_p: 0.5,
            norm_between_convs: false,
        }
    }

    /// Desk-scale variant used by tests and quick experiments: widths / 16
    /// and an input of 2,880 samples (section outputs 720, 360, 90, 30, 15).
    pub fn tiny() -> Self {
        tiny_variant_config(1.0 / 16.0, 0.12).expect("tiny scales are integral")
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let trace = self.trace()?;
        let last = trace
            .last()
            .ok_or_else(|| Error::Config("no sections".into()))?;
        Ok(last.out_channels * last.l_out)
    }

    /// Per-section shapes; fails when a pool size does not divide its input.
    pub fn trace(&self) -> Result<Vec<SectionTrace>> {
        let mut channels = 1;
        let mut len = self.input_length;
        let mut rate = f64::from(SAMPLE_RATE);
        let mut out = Vec::with_capacity(self.sections.len());
        for (i, s) in self.sections.iter().enumerate() {
            if s.convs.is_empty() {
                return Err(Error::Config(format!(
                    "section {} has no convolutions",
                    i + 1
                )));
            }
            if s.convs.iter().any(|c| c.filters == 0 || c.length == 0) {
                return Err(Error::Config(format!(
                    "section {} has an empty convolution",
                    i + 1
                )));
            }
            if s.pool_k == 0 || !len.is_multiple_of(s.pool_k) {
                return Err(Error::Config(format!(
                    "section {}: length {len} is not divisible by pool size {}",
                    i + 1,
                    s.pool_k
                )));
            }
            if let Some(declared) = s.l_out {
                if len / s.pool_k != declared {
                    return Err(Error::Config(format!(
                        "section {}: pool size {} maps {len} samples to {}, not the declared {declared}",
                        i + 1,
                        s.pool_k,
                        len / s.pool_k
                    )));
                }
            }
            let trace = SectionTrace {
                in_channels: channels,
                out_channels: s.out_channels(),
                rate_hz: rate,
                spacing_ms: 1000.0 / rate,
                l_in: len,
                l_out: len / s.pool_k,
            };
            channels = trace.out_channels;
            len = trace.l_out;
            rate /= s.pool_k as f64;
            out.push(trace);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_length == 0 {
            return Err(Error::Config("input length must be positive".into()));
        }
        if self.sections.is_empty() {
            return Err(Error::Config("at least one section is required".into()));
        }
        self.trace()?;
        if self.hidden.contains(&0) {
            return Err(Error::Config("dense widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }

    /// `(d_i, d_o)` for every dense layer, ending with the scalar output.
    pub fn dense_dims(&self) -> Result<Vec<(usize, usize)>> {
        let mut d_in = self.flatten_len()?;
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        for &h in self.hidden.iter().chain(std::iter::once(&1)) {
            dims.push((d_in, h));
            d_in = h;
        }
        Ok(dims)
    }

    /// Compact text form, e.g. `192x11/avg4=6000;...;512x7+512x7/max2=125`;
    /// the `=l_out` suffix is optional.
    pub fn sections_spec(&self) -> String {
        let mut s = String::new();
        for (i, sec) in self.sections.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            for (j, c) in sec.convs.iter().enumerate() {
                if j > 0 {
                    s.push('+');
                }
                let _ = write!(s, "{}x{}", c.filters, c.length);
            }
            let _ = write!(s, "/{}{}", sec.pool.tag(), sec.pool_k);
            if let Some(l) = sec.l_out {
                let _ = write!(s, "={l}");
            }
        }
        s
    }

    pub fn parse_sections(spec: &str) -> Result<Vec<SectionConfig>> {
        let bad = || Error::Config(format!("malformed section spec {spec:?}"));
        spec.split(';')
            .map(|part| {
                let (part, l_out) = match part.split_once('=') {
                    Some((p, l)) => (p, Some(l.parse().map_err(|_| bad())?)),
                    None => (part, None),
                };
                let (convs, pool) = part.split_once('/').ok_or_else(bad)?;
                let convs = convs
                    .split('+')
                    .map(|c| {
                        let (f, l) = c.split_once('x').ok_or_else(bad)?;
                        Ok(ConvSpec {
                            filters: f.parse().map_err(|_| bad())?,
                            length: l.parse().map_err(|_| bad())?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (kind, k) = if let Some(k) = pool.strip_prefix("avg") {
                    (PoolKind::Average, k)
                } else if let Some(k) = pool.strip_prefix("max") {
                    (PoolKind::Max, k)
                } else {
                    return Err(bad());
                };
                Ok(SectionConfig {
                    convs,
                    pool: kind,
                    pool_k: k.parse().map_err(|_| bad())?,
                    l_out,
                })
            })
            .collect()
    }

    pub fn param_counts(&self) -> Result<ParamCounts> {
        self.validate()?;
        let mut rows = Vec::new();
        let mut conv_extractor = 0;
        for (si, (sec, tr)) in self.sections.iter().zip(self.trace()?).enumerate() {
            let mut cin = tr.in_channels;
            for (ci, c) in sec.convs.iter().enumerate() {
                let n = c.filters * cin * c.length + c.filters;
                rows.push((format!("s{}.conv{}", si + 1, ci), n));
                conv_extractor += n;
                if self.norm_between_convs && ci + 1 < sec.convs.len() {
                    rows.push((format!("s{}.bn{}", si + 1, ci), 2 * c.filters));
                    rows.push((format!("s{}.prelu{}", si + 1, ci), c.filters));
                    conv_extractor += 3 * c.filters;
                }
                cin = c.filters;
            }
            let f = sec.out_channels();
            rows.push((format!("s{}.bn", si + 1), 2 * f));
            rows.push((format!("s{}.prelu", si + 1), f));
            conv_extractor += 3 * f;
        }
        let dims = self.dense_dims()?;
        let mut dense = 0;
        let mut first_dense = 0;
        for (li, &(di, d_o)) in dims.iter().enumerate() {
            let n = di * d_o + d_o;
            if li == 0 {
                first_dense = n;
            }
            rows.push((format!("l{}.dense", li + 1), n));
            dense += n;
            if li + 1 < dims.len() {
                rows.push((format!("l{}.prelu", li + 1), d_o));
                dense += d_o;
            }
        }
        Ok(ParamCounts {
            rows,
            conv_extractor,
            first_dense,
            dense_head: dense,
            total: conv_extractor + dense,
        })
    }
}

/// Trainable parameter counts; batch-norm running statistics excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCounts {
    pub rows: Vec<(String, usize)>,
    /// Convolution weights and biases, batch-norm scale and shift, PReLU slopes.
    pub conv_extractor: usize,
    /// Weights and bias of the first dense layer.
    pub first_dense: usize,
    /// All dense layers with their PReLU slopes.
    pub dense_head: usize,
    pub total: usize,
}

fn scaled(value: usize, scale: f64, what: &str) -> Result<usize> {
    let v = value as f64 * scale;
    let r = v.round();
    if r < 1.0 || (v - r).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "{what}: {value} x {scale} = {v} is not a positive integer"
        )));
    }
    Ok(r as usize)
}

/// Same five-section topology with every width multiplied by `width_scale`
/// and the input length by `length_scale`.
pub fn tiny_variant_config(width_scale: f64, length_scale: f64) -> Result<NetworkConfig> {
    let base = NetworkConfig::canonical();
    let sections = base
        .sections
        .iter()
        .map(|s| {
            Ok(SectionConfig {
                convs: s
                    .convs
                    .iter()
                    .map(|c| {
                        Ok(ConvSpec {
                            filters: scaled(c.filters, width_scale, "filters")?,
                            length: c.length,
                        })
                    })
                    .collect::<Result<_>>()?,
                l_out: s
                    .l_out
                    .map(|l| scaled(l, length_scale, "section output"))
                    .transpose()?,
                ..s.clone()
            })
        })
        .collect::<Result<_>>()?;
    let config = NetworkConfig {
        input_length: scaled(base.input_length, length_scale, "input length")?,
        sections,
        hidden: base
            .hidden
            .iter()
            .map(|&h| scaled(h, width_scale, "dense width"))
            .collect::<Result<_>>()?,
        ..base
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_trace() {
        let trace = NetworkConfig::canonical().trace().unwrap();
        let l_out: Vec<usize> = trace.iter().map(|t| t.l_out).collect();
        assert_eq!(l_out, vec![6000, 3000, 750, 250, 125]);
        let l_in: Vec<usize> = trace.iter().map(|t| t.l_in).collect();
        assert_eq!(l_in, vec![24_000, 6000, 3000, 750, 250]);
        let rates: Vec<f64> = trace.iter().map(|t| t.rate_hz).collect();
        assert_eq!(&rates[..4], &[8000.0, 2000.0, 1000.0, 250.0]);
        assert!((rates[4] - 83.333).abs() < 1e-3);
        let spacing: Vec<f64> = trace.iter().map(|t| t.spacing_ms).collect();
        for (s, e) in spacing.iter().zip([0.125, 0.5, 1.0, 4.0, 12.0]) {
            assert!((s - e).abs() < 1e-9);
        }
        for t in &trace {
            assert!((t.spacing_ms - 1000.0 / t.rate_hz).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_dense_chain() {
        let c = NetworkConfig::canonical();
        assert_eq!(c.flatten_len().unwrap(), 64_000);
        assert_eq!(
            c.dense_dims().unwrap(),
            vec![(64_000, 512), (512, 512), (512, 1)]
        );
    }

    #[test]
    fn canonical_counts() {
        let p = NetworkConfig::canonical().param_counts().unwrap();
        assert_eq!(p.conv_extractor, 7_034_432);
        assert_eq!(p.first_dense, 32_768_512);
        assert_eq!(p.total, 40_067_137);
        assert_eq!(p.rows.iter().map(|r| r.1).sum::<usize>(), p.total);
    }

    #[test]
    fn bad_pool_size() {
        let mut c = NetworkConfig::canonical();
        c.sections[2].pool_k = 5;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn tiny_variants() {
        assert!(tiny_variant_config(1.0 / 24.0, 1.0 / 20.0).is_err());
        // integral widths but 1,200 does not survive the pool chain
        assert!(tiny_variant_config(1.0 / 16.0, 1.0 / 20.0).is_err());
        let t = NetworkConfig::tiny();
        let l_out: Vec<usize> = t.trace().unwrap().iter().map(|s| s.l_out).collect();
        assert_eq!(t.input_length, 2880);
        assert_eq!(l_out, vec![720, 360, 90, 30, 15]);
        assert!(t.param_counts().unwrap().total < 100_000);
        assert_eq!(
            tiny_variant_config(1.0, 1.0).unwrap(),
            NetworkConfig::canonical()
        );
    }

    #[test]
    fn section_spec_round_trip() {
        let c = NetworkConfig::canonical();
        let spec = c.sections_spec();
        assert_eq!(
            spec,
            "192x11/avg4=6000;192x7/max2=3000;256x7/max4=750;512x7+512x7/max3=250;512x7+512x7/max2=125"
        );
        assert_eq!(NetworkConfig::parse_sections(&spec).unwrap(), c.sections);
        assert!(NetworkConfig::parse_sections("12x3/min2").is_err());
        let free = NetworkConfig::parse_sections("12x3/max2;4x5+4x5/avg3").unwrap();
        assert_eq!(free[1].l_out, None);
        assert_eq!(free[1].convs.len(), 2);
    }

    #[test]
    fn interleaved_norm_adds_parameters() {
        let mut c = NetworkConfig::canonical();
        c.norm_between_convs = true;
        let p = c.param_counts().unwrap();
        // two sections with one extra BN (2 x 512) and PReLU (512) each
        assert_eq!(p.total, 40_067_137 + 2 * 3 * 512);
    }
}
