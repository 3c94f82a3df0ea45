use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SplitAssignment, SplitLabel};
use crate::{Error, Result};

/// A reference to a manifest entry, optionally phase inverted on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetItem {
    pub entry: usize,
    pub phase_inverted: bool,
}

/// The entries of one split, possibly augmented.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EntrySet {
    pub items: Vec<SetItem>,
    ipa: bool,
}

impl EntrySet {
    pub fn from_ids(ids: impl IntoIterator<Item = usize>) -> Self {
        Self {
            items: ids
                .into_iter()
                .map(|entry| SetItem {
                    entry,
                    phase_inverted: false,
                })
                .collect(),
            ipa: false,
        }
    }

    pub fn from_split(split: &SplitAssignment, label: SplitLabel) -> Self {
        Self::from_ids(split.ids(label))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ipa_applied(&self) -> bool {
        self.ipa
    }

    /// Inverse phase augmentation: the set followed by a phase-inverted twin
    /// of every item. Rejected on an already augmented set.
    pub fn apply_ipa(&self) -> Result<Self> {
        if self.ipa || self.items.iter().any(|i| i.phase_inverted) {
            return Err(Error::IpaAlreadyApplied);
        }
        let twins = self.items.iter().map(|i| SetItem {
            phase_inverted: true,
            ..*i
        });
        Ok(Self {
            items: self.items.iter().copied().chain(twins).collect(),
            ipa: true,
        })
    }
}

/// Batch composition for one epoch: positions into `set.items`, reshuffled
/// per `(seed, epoch)`. A trailing short batch is kept unless it has a single
/// element and `drop_singleton` is set (batch norm needs two).
pub fn batch_plan(
    len: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    drop_singleton: bool,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if len == 0 {
        return Err(Error::Invalid("cannot batch an empty set".into()));
    }
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if drop_singleton && batches.last().is_some_and(|b| b.len() == 1) {
        batches.pop();
    }
    Ok(batches)
}
