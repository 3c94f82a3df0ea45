//! `WENET1` model files.
//!
//! Layout (all integers little endian):
//!
//! ```text
//! magic "WENET1" | version u16 | metadata length u32 | metadata (UTF-8 key=value lines)
//! per tensor, in topological order: element count u32 | f32 values
//! CRC-32 (IEEE) of every preceding byte, u32
//! ```
//!
//! Parameters are always stored as 32-bit floats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::NetworkConfig;
use super::model::{Fingerprint, Model};
use crate::corpus::{Metric, TargetMapper};
use crate::nn::{Scalar, Tensor};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 6] = b"WENET1";
pub const MODEL_VERSION: u16 = 1;

fn metadata<T: Scalar>(model: &Model<T>) -> String {
    let c = &model.config;
    let mut m = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(m, "{k}={v}");
    };
    kv("metric", model.metric.name().into());
    match model.mapper {
        TargetMapper::Affine { center, half_range } => {
            kv("mapping", "affine".into());
            kv("mapping_center", center.to_string());
            kv("mapping_half_range", half_range.to_string());
        }
        TargetMapper::ZScore { mean, std } => {
            kv("mapping", "zscore".into());
            kv("mapping_mean", mean.to_string());
            kv("mapping_std", std.to_string());
        }
    }
    kv("input_length", c.input_length.to_string());
    kv("sections", c.sections_spec());
    kv(
        "hidden",
        c.hidden
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    kv("dropout_p", c.dropout_p.to_string());
    kv("norm_between_convs", c.norm_between_convs.to_string());
    let bn = &model.sections[0].norm;
    kv("bn_momentum", bn.momentum.to_string());
    kv("bn_epsilon", bn.epsilon.to_string());
    kv("seed", model.fingerprint.seed.to_string());
    kv(
        "config_hash",
        format!("{:08x}", model.fingerprint.config_hash),
    );
    m
}

/// Serializes `model` to bytes.
pub fn to_bytes<T: Scalar>(model: &Model<T>) -> Result<Vec<u8>> {
    let meta = metadata(model);
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    let mut overflow = false;
    model.visit_groups(|_, _, t| {
        let Ok(n) = u32::try_from(t.len()) else {
            overflow = true;
            return;
        };
        out.extend_from_slice(&n.to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&(v.f64() as f32).to_le_bytes());
        }
    });
    if overflow {
        return Err(Error::Invalid(
            "tensor too large for the model format".into(),
        ));
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn save<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Model<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .ok_or_else(|| Error::Truncated("length overflow".into()))?;
        let s = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Truncated(format!("need {n} bytes at offset {}", self.pos)))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn field<'a>(meta: &'a BTreeMap<&str, &str>, key: &str) -> Result<&'a str> {
    meta.get(key)
        .copied()
        .ok_or_else(|| Error::Corrupt(format!("metadata lacks {key:?}")))
}

fn parse<V: std::str::FromStr>(meta: &BTreeMap<&str, &str>, key: &str) -> Result<V> {
    field(meta, key)?
        .parse()
        .map_err(|_| Error::Corrupt(format!("metadata {key:?} is malformed")))
}

/// Parses a model. Magic and version are checked before the checksum so that
/// foreign files get a specific error.
pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Model<T>> {
    if bytes.len() < MODEL_MAGIC.len() || &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(Error::BadMagic { expected: "WENET1" });
    }
    if bytes.len() < 8 {
        return Err(Error::Truncated("no version field".into()));
    }
    let version = u16::from_le_bytes([bytes[6], bytes[7]]);
    if version != MODEL_VERSION {
        return Err(Error::Version(version));
    }
    if bytes.len() < 16 {
        return Err(Error::Truncated("no checksum".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut cur = Cursor { buf: body, pos: 8 };
    let meta_len = cur.u32()? as usize;
    let meta_text = std::str::from_utf8(cur.take(meta_len)?)
        .map_err(|_| Error::Corrupt("metadata is not UTF-8".into()))?;
    let meta: BTreeMap<&str, &str> = meta_text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .ok_or_else(|| Error::Corrupt(format!("metadata line {l:?}")))
        })
        .collect::<Result<_>>()?;

    let metric: Metric = field(&meta, "metric")?
        .parse()
        .map_err(|_| Error::Corrupt("unknown metric".into()))?;
    let mapper = match field(&meta, "mapping")? {
        "affine" => TargetMapper::Affine {
            center: parse(&meta, "mapping_center")?,
            half_range: parse(&meta, "mapping_half_range")?,
        },
        "zscore" => TargetMapper::ZScore {
            mean: parse(&meta, "mapping_mean")?,
            std: parse(&meta, "mapping_std")?,
        },
        other => return Err(Error::Corrupt(format!("unknown mapping {other:?}"))),
    };
    let hidden = field(&meta, "hidden")?;
    let hidden = if hidden.is_empty() {
        Vec::new()
    } else {
        hidden
            .split(',')
            .map(|h| h.parse())
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|_| Error::Corrupt("metadata \"hidden\" is malformed".into()))?
    };
    let config = NetworkConfig {
        input_length: parse(&meta, "input_length")?,
        sections: NetworkConfig::parse_sections(field(&meta, "sections")?)
            .map_err(|e| Error::Corrupt(e.to_string()))?,
        hidden,
        dropout_p: parse(&meta, "dropout_p")?,
        norm_between_convs: parse(&meta, "norm_between_convs")?,
    };
    let seed: u64 = parse(&meta, "seed")?;
    let config_hash = u32::from_str_radix(field(&meta, "config_hash")?, 16)
        .map_err(|_| Error::Corrupt("metadata \"config_hash\" is malformed".into()))?;
    let momentum: f64 = parse(&meta, "bn_momentum")?;
    let epsilon: f64 = parse(&meta, "bn_epsilon")?;

    let mut model = Model::<T>::zeroed(config)?.with_target(metric, mapper);
    model.fingerprint = Fingerprint { seed, config_hash };
    for s in &mut model.sections {
        for bn in s.inner.iter_mut().map(|(b, _)| b).chain([&mut s.norm]) {
            bn.momentum = momentum;
            bn.epsilon = epsilon;
        }
    }
    for (_, t) in model.groups_mut() {
        let n = cur.u32()? as usize;
        if n != t.len() {
            return Err(Error::Corrupt(format!(
                "tensor of {n} values where {} expected",
                t.len()
            )));
        }
        let raw = cur.take(4 * n)?;
        let data: Vec<T> = raw
            .chunks_exact(4)
            .map(|b| T::of(f32::from_le_bytes(b.try_into().unwrap()) as f64))
            .collect();
        *t = Tensor::new(t.shape(), data)?;
    }
    if cur.pos != body.len() {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes after the last tensor",
            body.len() - cur.pos
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::random_tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trained_like() -> Model<f32> {
        let mut m = Model::<f32>::build(NetworkConfig::tiny(), 11).unwrap();
        // move running statistics off their initial values
        let x = random_tensor(&[4, 1, 2880], &mut ChaCha8Rng::seed_from_u64(1)).cast();
        m.forward_train(&x, &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap();
        m.with_target(
            Metric::Stoi,
            TargetMapper::ZScore {
                mean: 0.71,
                std: 0.137,
            },
        )
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = trained_like();
        let bytes = to_bytes(&m).unwrap();
        let back: Model<f32> = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back).unwrap(), bytes);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = random_tensor(&[1, 1, 2880], &mut rng).cast::<f32>();
            let a = m.predict(&x).unwrap();
            let b = back.predict(&x).unwrap();
            assert_eq!(a[0].to_bits(), b[0].to_bits());
        }
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&trained_like()).unwrap();
        assert_eq!(&bytes[..6], b"WENET1");
        assert_eq!(u16::from_le_bytes([bytes[6], bytes[7]]), 1);
        let meta_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let meta = std::str::from_utf8(&bytes[12..12 + meta_len]).unwrap();
        assert!(meta.lines().any(|l| l == "metric=stoi"));
        assert!(meta.lines().any(|l| l == "mapping=zscore"));
        assert!(meta.lines().any(|l| l == "seed=11"));
        let first = u32::from_le_bytes(bytes[12 + meta_len..16 + meta_len].try_into().unwrap());
        assert_eq!(first as usize, 12 * 11);
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        assert_eq!(crc32fast::hash(body).to_le_bytes(), crc);
    }

    #[test]
    fn f64_models_store_f32() {
        let m = trained_like();
        let wide: Model<f64> = m.cast();
        assert_eq!(to_bytes(&wide).unwrap(), to_bytes(&m).unwrap());
    }

    #[test]
    fn rejects_damage() {
        let bytes = to_bytes(&trained_like()).unwrap();

        let mut magic = bytes.clone();
        magic[0] = b'X';
        let err = from_bytes::<f32>(&magic).unwrap_err();
        assert!(err.to_string().contains("bad magic"));

        let mut version = bytes.clone();
        version[6] = 2;
        assert!(matches!(
            from_bytes::<f32>(&version),
            Err(Error::Version(2))
        ));

        for cut in [3, 7, 11, 100, bytes.len() / 2, bytes.len() - 1] {
            let err = from_bytes::<f32>(&bytes[..cut]).unwrap_err();
            assert!(
                matches!(
                    err,
                    Error::Truncated(_) | Error::Checksum { .. } | Error::BadMagic { .. }
                ),
                "cut {cut}: {err}"
            );
        }

        let mut flipped = bytes.clone();
        let mid = bytes.len() / 2;
        flipped[mid] ^= 0x01;
        assert!(matches!(
            from_bytes::<f32>(&flipped),
            Err(Error::Checksum { .. })
        ));
    }

    #[test]
    fn save_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.wenet");
        let m = trained_like();
        save(&m, &path).unwrap();
        assert_eq!(load::<f32>(&path).unwrap(), m);
        assert!(matches!(
            load::<f32>(dir.path().join("none")),
            Err(Error::Io { .. })
        ));
    }
}
