//! `WESEG1` segment store.
//!
//! Layout: the 6-byte magic, then records back to back. A record is the
//! source id (u16 LE byte length + UTF-8), `offset_ms` (u16 LE),
//! `activity_factor` and `gain_applied_db` (f32 LE), `phase_inverted`
//! (one byte, 0 or 1) and 24,000 f32 LE samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{Segment, SEGMENT_LEN};
use crate::{Error, Result};

pub const SEGMENT_MAGIC: &[u8; 6] = b"WESEG1";

const FIXED_RECORD_BYTES: u64 = 2 + 4 + 4 + 1 + 4 * SEGMENT_LEN as u64;

pub struct StoreWriter {
    out: BufWriter<File>,
    path: PathBuf,
    count: usize,
}

impl StoreWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(SEGMENT_MAGIC)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            out,
            path,
            count: 0,
        })
    }

    /// Appends a record and returns its index.
    pub fn push(&mut self, segment: &Segment) -> Result<usize> {
        if segment.samples.len() != SEGMENT_LEN {
            return Err(Error::Shape(format!(
                "segment has {} samples",
                segment.samples.len()
            )));
        }
        let id = segment.source_id.as_bytes();
        let id_len = u16::try_from(id.len())
            .map_err(|_| Error::Invalid("source id longer than 65535 bytes".into()))?;
        let mut buf = Vec::with_capacity(2 + id.len() + FIXED_RECORD_BYTES as usize);
        buf.extend_from_slice(&id_len.to_le_bytes());
        buf.extend_from_slice(id);
        buf.extend_from_slice(&segment.offset_ms.to_le_bytes());
        buf.extend_from_slice(&segment.activity_factor.to_le_bytes());
        buf.extend_from_slice(&segment.gain_applied_db.to_le_bytes());
        buf.push(u8::from(segment.phase_inverted));
        for s in &segment.samples {
            buf.extend_from_slice(&s.to_le_bytes());
        }
        self.out
            .write_all(&buf)
            .map_err(|e| Error::io(&self.path, e))?;
        self.count += 1;
        Ok(self.count - 1)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.count)
    }
}

/// Random access over a store; the record index is built on open.
pub struct StoreReader {
    reader: BufReader<File>,
    path: PathBuf,
    offsets: Vec<u64>,
}

impl StoreReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let total = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut reader = BufReader::new(file);
        let mut magic = [0u8; 6];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::Truncated(format!("{}: missing magic", path.display())))?;
        if &magic != SEGMENT_MAGIC {
            return Err(Error::BadMagic { expected: "WESEG1" });
        }
        let mut offsets = Vec::new();
        let mut pos = SEGMENT_MAGIC.len() as u64;
        while pos < total {
            let mut len = [0u8; 2];
            reader.read_exact(&mut len).map_err(|_| {
                Error::Truncated(format!("{}: record {}", path.display(), offsets.len()))
            })?;
            let next = pos + 2 + u64::from(u16::from_le_bytes(len)) + FIXED_RECORD_BYTES;
            if next > total {
                return Err(Error::Truncated(format!(
                    "{}: record {} ends past end of file",
                    path.display(),
                    offsets.len()
                )));
            }
            offsets.push(pos);
            reader
                .seek(SeekFrom::Start(next))
                .map_err(|e| Error::io(&path, e))?;
            pos = next;
        }
        Ok(Self {
            reader,
            path,
            offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read(&mut self, index: usize) -> Result<Segment> {
        let &offset = self.offsets.get(index).ok_or_else(|| {
            Error::Invalid(format!(
                "{}: record {index} out of range ({} records)",
                self.path.display(),
                self.offsets.len()
            ))
        })?;
        let path = &self.path;
        let io = |e| Error::io(path, e);
        self.reader.seek(SeekFrom::Start(offset)).map_err(io)?;
        let mut len = [0u8; 2];
        self.reader.read_exact(&mut len).map_err(io)?;
        let mut rest =
            vec![0u8; usize::from(u16::from_le_bytes(len)) + FIXED_RECORD_BYTES as usize];
        self.reader.read_exact(&mut rest).map_err(io)?;

        let id_len = usize::from(u16::from_le_bytes(len));
        let source_id = String::from_utf8(rest[..id_len].to_vec())
            .map_err(|_| Error::Corrupt(format!("record {index}: source id is not UTF-8")))?;
        let body = &rest[id_len..];
        let le_f32 = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        let offset_ms = u16::from_le_bytes([body[0], body[1]]);
        let activity_factor = le_f32(&body[2..6]);
        let gain_applied_db = le_f32(&body[6..10]);
        let phase_inverted = match body[10] {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Corrupt(format!(
                    "record {index}: phase flag {other}"
                )))
            }
        };
        let samples = body[11..].chunks_exact(4).map(le_f32).collect();
        Ok(Segment {
            samples,
            activity_factor,
            gain_applied_db,
            offset_ms,
            source_id,
            phase_inverted,
        })
    }
}

pub fn write_store(path: impl AsRef<Path>, segments: &[Segment]) -> Result<()> {
    let mut w = StoreWriter::create(path)?;
    for s in segments {
        w.push(s)?;
    }
    w.finish().map(|_| ())
}

pub fn read_store(path: impl AsRef<Path>) -> Result<Vec<Segment>> {
    let mut r = StoreReader::open(path)?;
    (0..r.len()).map(|i| r.read(i)).collect()
}
