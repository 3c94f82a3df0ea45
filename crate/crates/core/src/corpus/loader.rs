use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EntrySet, Manifest, Metric, SetItem, SplitAssignment, TargetMapper};
use crate::dsp::{invert_phase, Segment, StoreReader, StoreWriter, SEGMENT_LEN};
use crate::nn::{Scalar, Tensor};
use crate::{Error, Result};

/// Network inputs with mapped targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub inputs: Tensor<T>,
    pub targets: Vec<T>,
    pub items: Vec<SetItem>,
}

/// Reads segments through one open reader per store file.
///
/// Inputs shorter than a full segment (desk-scale models) take the leading
/// `input_length` samples, or a seeded random window while
/// [`random_crops`](SegmentLoader::random_crops) is active.
pub struct SegmentLoader<'a> {
    manifest: &'a Manifest,
    input_length: usize,
    readers: HashMap<PathBuf, StoreReader>,
    cache: Option<HashMap<usize, Vec<f32>>>,
    crops: Option<(u64, u64)>,
}

impl<'a> SegmentLoader<'a> {
    pub fn new(manifest: &'a Manifest, input_length: usize) -> Result<Self> {
        if input_length == 0 || input_length > SEGMENT_LEN {
            return Err(Error::Config(format!(
                "input length {input_length} outside 1..={SEGMENT_LEN}"
            )));
        }
        Ok(Self {
            manifest,
            input_length,
            readers: HashMap::new(),
            cache: None,
            crops: None,
        })
    }

    /// Keeps every loaded input in memory.
    pub fn cached(mut self) -> Self {
        self.cache = Some(HashMap::new());
        self
    }

    pub fn manifest(&self) -> &'a Manifest {
        self.manifest
    }

    pub fn segment(&mut self, entry: usize) -> Result<Segment> {
        let e = self
            .manifest
            .entries
            .get(entry)
            .ok_or_else(|| Error::Invalid(format!("no manifest entry {entry}")))?;
        let reader = match self.readers.get_mut(&e.segment_path) {
            Some(r) => r,
            None => {
                let r = StoreReader::open(&e.segment_path)?;
                self.readers.entry(e.segment_path.clone()).or_insert(r)
            }
        };
        reader.read(e.record_index)
    }

    /// Crops every input at an offset drawn from `(seed, epoch, entry)`, so
    /// the window is independent of batch order. `None` restores leading
    /// windows.
    pub fn random_crops(&mut self, crops: Option<(u64, u64)>) {
        self.crops = crops;
    }

    fn offset(&self, entry: usize, len: usize) -> usize {
        let slack = len.saturating_sub(self.input_length);
        match self.crops {
            Some((seed, epoch)) if slack > 0 => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0c20_9a11);
                rng.set_stream((epoch << 32) ^ entry as u64);
                rng.gen_range(0..=slack)
            }
            _ => 0,
        }
    }

    fn samples(&mut self, entry: usize) -> Result<Vec<f32>> {
        let full = match self.cache.as_ref().and_then(|c| c.get(&entry)) {
            Some(v) => v.clone(),
            None => {
                let s = self.segment(entry)?.samples;
                if let Some(c) = self.cache.as_mut() {
                    c.insert(entry, s.clone());
                }
                s
            }
        };
        let start = self.offset(entry, full.len());
        Ok(full[start..start + self.input_length].to_vec())
    }

    /// One input, phase inverted as the item requests.
    pub fn input(&mut self, item: SetItem) -> Result<Vec<f32>> {
        let mut s = self.samples(item.entry)?;
        if item.phase_inverted {
            s.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(s)
    }

    pub fn mapped_target(
        &self,
        entry: usize,
        metric: Metric,
        mapper: &TargetMapper,
    ) -> Result<f64> {
        self.manifest.entries[entry]
            .target(metric)
            .map(|y| mapper.map(y))
            .ok_or(Error::MissingTarget {
                metric: metric.name().into(),
                entry,
            })
    }

    pub fn batch<T: Scalar>(
        &mut self,
        set: &EntrySet,
        positions: &[usize],
        metric: Metric,
        mapper: &TargetMapper,
    ) -> Result<Batch<T>> {
        let mut data = Vec::with_capacity(positions.len() * self.input_length);
        let mut targets = Vec::with_capacity(positions.len());
        let mut items = Vec::with_capacity(positions.len());
        for &p in positions {
            let item = set.items[p];
            data.extend(self.input(item)?.into_iter().map(|v| T::of(f64::from(v))));
            targets.push(T::of(self.mapped_target(item.entry, metric, mapper)?));
            items.push(item);
        }
        Ok(Batch {
            inputs: Tensor::new(&[positions.len(), 1, self.input_length], data)?,
            targets,
            items,
        })
    }

    /// Inputs only, for prediction.
    pub fn inputs<T: Scalar>(&mut self, items: &[SetItem]) -> Result<Tensor<T>> {
        let mut data = Vec::with_capacity(items.len() * self.input_length);
        for &item in items {
            data.extend(self.input(item)?.into_iter().map(|v| T::of(f64::from(v))));
        }
        Tensor::new(&[items.len(), 1, self.input_length], data)
    }
}

/// Writes an augmented corpus: every entry followed (after all originals) by
/// a phase-inverted copy with the same targets and split label.
pub fn write_ipa_corpus(
    manifest: &Manifest,
    split: &SplitAssignment,
    store: &Path,
) -> Result<(Manifest, SplitAssignment)> {
    if split.len() != manifest.len() {
        return Err(Error::Manifest(format!(
            "split has {} labels for {} entries",
            split.len(),
            manifest.len()
        )));
    }
    let mut loader = SegmentLoader::new(manifest, SEGMENT_LEN)?;
    let mut writer = StoreWriter::create(store)?;
    let mut entries = Vec::with_capacity(2 * manifest.len());
    for pass in [false, true] {
        for (i, e) in manifest.entries.iter().enumerate() {
            let seg = loader.segment(i)?;
            if seg.phase_inverted {
                return Err(Error::IpaAlreadyApplied);
            }
            let seg = if pass { invert_phase(&seg) } else { seg };
            let record_index = writer.push(&seg)?;
            entries.push(super::ManifestEntry {
                segment_path: store.to_path_buf(),
                record_index,
                ..e.clone()
            });
        }
    }
    writer.finish()?;
    let mut labels = split.labels.clone();
    labels.extend_from_slice(&split.labels);
    Ok((
        Manifest { entries },
        SplitAssignment {
            labels,
            seed: split.seed,
        },
    ))
}
