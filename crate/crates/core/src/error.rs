use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed RIFF/WAVE file: {0}")]
    MalformedWav(String),

    #[error("unsupported channel count {0} (mono only)")]
    UnsupportedChannels(u16),

    #[error("unsupported sample format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported sample rate {0} Hz (8000 Hz only)")]
    UnsupportedSampleRate(u32),

    #[error("sample {index} out of range: {value}")]
    SampleOutOfRange { index: usize, value: f32 },

    #[error("empty clip")]
    EmptyClip,

    #[error("silent input: no active frames")]
    Silent,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {0}")]
    Version(u16),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("missing {metric} target for entry {entry}")]
    MissingTarget { metric: String, entry: usize },

    #[error("inverse phase augmentation already applied")]
    IpaAlreadyApplied,

    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from numerics rather than from data or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::NonFiniteLoss { .. } | Error::ZeroVariance(_)
        )
    }
}
