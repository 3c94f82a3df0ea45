//! Corpus handling: manifests, splits, augmentation, target mapping and batching.

mod loader;
mod manifest;
mod mapper;
mod set;
mod split;
pub mod synth;

pub use loader::{write_ipa_corpus, Batch, SegmentLoader};
pub use manifest::{Manifest, ManifestEntry, MANIFEST_HEADER};
pub use mapper::{fit_mapper, Metric, TargetMapper};
pub use set::{batch_plan, EntrySet, SetItem};
pub use split::{split, SplitAssignment, SplitLabel, DEFAULT_FRACTIONS, MIN_DATASET_SIZE};
