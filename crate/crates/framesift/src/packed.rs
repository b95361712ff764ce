//! The packed dataset container: a single file holding per-video sampling
//! results with keyed random access.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header   25 bytes:
//!   magic         5   "FSPK1"
//!   index_offset  u64 byte offset of the committed index section
//!   index_count   u64 number of index entries
//!   header_crc    u32 crc32 of the two u64 fields
//! records  each: [crc32 u32][payload bytes], crc over the payload
//! index    index_count entries, sorted by id:
//!   id_len  u16, id bytes (UTF-8), offset u64, length u64, kind u8
//!   followed by a u32 crc32 over all entry bytes
//! ```
//!
//! The writer appends records after the committed index (never over it) and
//! commits by writing a fresh index at the end, then patching the header
//! pointer. A crash therefore leaves the previously committed index intact:
//! the file stays readable up to the last committed entry, and superseded
//! index blocks become dead space that the next resume reclaims from the
//! tail. Lookup is a binary search over the in-memory index.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use thiserror::Error;

pub const PACKED_MAGIC: &[u8; 5] = b"FSPK1";
const HEADER_LEN: u64 = 25;

#[derive(Debug, Error)]
pub enum PackError {
    #[error("bad magic: expected \"FSPK1\"")]
    BadMagic,
    #[error("corrupt header")]
    CorruptHeader,
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("unknown id {0:?}")]
    UnknownId(String),
    #[error("corrupt record {id:?}: checksum mismatch")]
    CorruptRecord { id: String },
    #[error("corrupt record {id:?}: extends past end of file")]
    TruncatedRecord { id: String },
    #[error("id {0:?} already present")]
    DuplicateId(String),
    #[error("id is {0} bytes; the format caps ids at 65535")]
    IdTooLong(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// What a record's payload holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    /// Selected feature rows (f32 matrix slice).
    FeatureRows,
    /// Selected frame image files, stored verbatim.
    FrameImages,
}

impl PayloadKind {
    fn to_byte(self) -> u8 {
        match self {
            PayloadKind::FeatureRows => 0,
            PayloadKind::FrameImages => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self, PackError> {
        match b {
            0 => Ok(PayloadKind::FeatureRows),
            1 => Ok(PayloadKind::FrameImages),
            other => Err(PackError::CorruptIndex(format!("unknown payload kind {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
struct IndexEntry {
    offset: u64,
    length: u64,
    kind: PayloadKind,
}

fn read_header(file: &mut File) -> Result<(u64, u64), PackError> {
    let mut header = [0u8; HEADER_LEN as usize];
    file.seek(SeekFrom::Start(0))?;
    file.read_exact(&mut header).map_err(|_| PackError::CorruptHeader)?;
    if &header[..5] != PACKED_MAGIC {
        return Err(PackError::BadMagic);
    }
    let crc = u32::from_le_bytes(header[21..25].try_into().unwrap());
    if crc32fast::hash(&header[5..21]) != crc {
        return Err(PackError::CorruptHeader);
    }
    let index_offset = u64::from_le_bytes(header[5..13].try_into().unwrap());
    let index_count = u64::from_le_bytes(header[13..21].try_into().unwrap());
    Ok((index_offset, index_count))
}

fn write_header(file: &mut File, index_offset: u64, index_count: u64) -> Result<(), PackError> {
    let mut header = [0u8; HEADER_LEN as usize];
    header[..5].copy_from_slice(PACKED_MAGIC);
    header[5..13].copy_from_slice(&index_offset.to_le_bytes());
    header[13..21].copy_from_slice(&index_count.to_le_bytes());
    let crc = crc32fast::hash(&header[5..21]);
    header[21..25].copy_from_slice(&crc.to_le_bytes());
    file.seek(SeekFrom::Start(0))?;
    file.write_all(&header)?;
    Ok(())
}

fn encode_index(index: &BTreeMap<String, IndexEntry>) -> Vec<u8> {
    let mut out = Vec::new();
    for (id, entry) in index {
        out.extend_from_slice(&(id.len() as u16).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        out.extend_from_slice(&entry.offset.to_le_bytes());
        out.extend_from_slice(&entry.length.to_le_bytes());
        out.push(entry.kind.to_byte());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_index(file: &mut File, offset: u64, count: u64) -> Result<(BTreeMap<String, IndexEntry>, u64), PackError> {
    file.seek(SeekFrom::Start(offset))?;
    let mut index = BTreeMap::new();
    let mut raw = Vec::new();
    let bad = |msg: &str| PackError::CorruptIndex(msg.to_string());
    let read_bytes = |file: &mut File, raw: &mut Vec<u8>, n: usize| -> Result<Vec<u8>, PackError> {
        let mut buf = vec![0u8; n];
        file.read_exact(&mut buf).map_err(|_| bad("truncated"))?;
        raw.extend_from_slice(&buf);
        Ok(buf)
    };
    for _ in 0..count {
        let id_len = u16::from_le_bytes(read_bytes(file, &mut raw, 2)?.try_into().unwrap()) as usize;
        let id_bytes = read_bytes(file, &mut raw, id_len)?;
        let id = String::from_utf8(id_bytes).map_err(|_| bad("id not UTF-8"))?;
        let rec_offset = u64::from_le_bytes(read_bytes(file, &mut raw, 8)?.try_into().unwrap());
        let length = u64::from_le_bytes(read_bytes(file, &mut raw, 8)?.try_into().unwrap());
        let kind = PayloadKind::from_byte(read_bytes(file, &mut raw, 1)?[0])?;
        index.insert(id, IndexEntry { offset: rec_offset, length, kind });
    }
    let mut crc_buf = [0u8; 4];
    file.read_exact(&mut crc_buf).map_err(|_| bad("missing checksum"))?;
    if crc32fast::hash(&raw) != u32::from_le_bytes(crc_buf) {
        return Err(bad("checksum mismatch"));
    }
    let end = offset + raw.len() as u64 + 4;
    Ok((index, end))
}

fn read_record(file: &mut File, id: &str, entry: &IndexEntry) -> Result<Vec<u8>, PackError> {
    let total = 4 + entry.length as usize;
    let mut buf = vec![0u8; total];
    file.seek(SeekFrom::Start(entry.offset))?;
    file.read_exact(&mut buf)
        .map_err(|_| PackError::TruncatedRecord { id: id.to_string() })?;
    let stored_crc = u32::from_le_bytes(buf[..4].try_into().unwrap());
    let payload = buf.split_off(4);
    if crc32fast::hash(&payload) != stored_crc {
        return Err(PackError::CorruptRecord { id: id.to_string() });
    }
    Ok(payload)
}

/// Append-side handle. Every `append` is committed immediately: the record
/// is durable (readable by a fresh [`PackedReader`]) as soon as the call
/// returns.
#[derive(Debug)]
pub struct PackedWriter {
    file: File,
    index: BTreeMap<String, IndexEntry>,
    /// Where the next record goes: end of the committed index.
    append_at: u64,
}

impl PackedWriter {
    /// Creates a new, empty container (truncates any existing file).
    pub fn create(path: &Path) -> Result<Self, PackError> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)?;
        let index = BTreeMap::new();
        let index_bytes = encode_index(&index);
        file.seek(SeekFrom::Start(HEADER_LEN))?;
        file.write_all(&index_bytes)?;
        write_header(&mut file, HEADER_LEN, 0)?;
        let append_at = HEADER_LEN + index_bytes.len() as u64;
        Ok(Self { file, index, append_at })
    }

    /// Opens an existing container for appending, or creates it. Unreferenced
    /// bytes past the committed index (a crashed writer's tail) are trimmed.
    pub fn open_resume(path: &Path) -> Result<Self, PackError> {
        if !path.exists() {
            return Self::create(path);
        }
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        let (index_offset, index_count) = read_header(&mut file)?;
        let (index, index_end) = read_index(&mut file, index_offset, index_count)?;
        file.set_len(index_end)?;
        Ok(Self { file, index, append_at: index_end })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Appends one record and commits the index.
    pub fn append(&mut self, id: &str, kind: PayloadKind, payload: &[u8]) -> Result<(), PackError> {
        if id.len() > u16::MAX as usize {
            return Err(PackError::IdTooLong(id.len()));
        }
        if self.index.contains_key(id) {
            return Err(PackError::DuplicateId(id.to_string()));
        }
        let offset = self.append_at;
        self.file.seek(SeekFrom::Start(offset))?;
        self.file.write_all(&crc32fast::hash(payload).to_le_bytes())?;
        self.file.write_all(payload)?;
        self.index.insert(
            id.to_string(),
            IndexEntry { offset, length: payload.len() as u64, kind },
        );
        let index_offset = offset + 4 + payload.len() as u64;
        let index_bytes = encode_index(&self.index);
        self.file.write_all(&index_bytes)?;
        self.file.flush()?;
        write_header(&mut self.file, index_offset, self.index.len() as u64)?;
        self.file.flush()?;
        self.append_at = index_offset + index_bytes.len() as u64;
        Ok(())
    }
}

/// Read-side handle with O(log n) id lookup.
#[derive(Debug)]
pub struct PackedReader {
    file: File,
    index: BTreeMap<String, IndexEntry>,
}

impl PackedReader {
    pub fn open(path: &Path) -> Result<Self, PackError> {
        let mut file = OpenOptions::new().read(true).open(path)?;
        let (index_offset, index_count) = read_header(&mut file)?;
        let (index, _) = read_index(&mut file, index_offset, index_count)?;
        Ok(Self { file, index })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Ids in sorted order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// Fetches one record's payload, verifying its checksum.
    pub fn get(&mut self, id: &str) -> Result<(PayloadKind, Vec<u8>), PackError> {
        let entry = self
            .index
            .get(id)
            .ok_or_else(|| PackError::UnknownId(id.to_string()))?
            .clone();
        let payload = read_record(&mut self.file, id, &entry)?;
        Ok((entry.kind, payload))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_path(dir: &tempfile::TempDir, name: &str) -> std::path::PathBuf {
        dir.path().join(name)
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = temp_path(&dir, "data.fspk");
        let mut writer = PackedWriter::create(&path).unwrap();
        writer.append("vid-b", PayloadKind::FeatureRows, b"BBBB").unwrap();
        writer.append("vid-a", PayloadKind::FrameImages, &[0u8, 255, 7]).unwrap();
        drop(writer);

        let mut reader = PackedReader::open(&path).unwrap();
        assert_eq!(reader.len(), 2);
        assert_eq!(reader.ids().collect::<Vec<_>>(), vec!["vid-a", "vid-b"]);
        let (kind, payload) = reader.get("vid-a").unwrap();
        assert_eq!(kind, PayloadKind::FrameImages);
        assert_eq!(payload, vec![0u8, 255, 7]);
        let (kind, payload) = reader.get("vid-b").unwrap();
        assert_eq!(kind, PayloadKind::FeatureRows);
        assert_eq!(payload, b"BBBB");
    }

    #[test]
    fn unknown_id_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = temp_path(&dir, "data.fspk");
        let mut writer = PackedWriter::create(&path).unwrap();
        writer.append("a", PayloadKind::FeatureRows, b"x").unwrap();
        drop(writer);
        let mut reader = PackedReader::open(&path).unwrap();
        assert!(matches!(reader.get("b"), Err(PackError::UnknownId(_))));
    }

    #[test]
    fn flipped_payload_byte_is_caught() {
        let dir = tempfile::tempdir().unwrap();
        let path = temp_path(&dir, "data.fspk");
        let mut writer = PackedWriter::create(&path).unwrap();
        writer.append("a", PayloadKind::FeatureRows, b"hello world").unwrap();
        drop(writer);

        // Payload starts after header + empty index (4 bytes crc) + record crc.
        let mut bytes = std::fs::read(&path).unwrap();
        let payload_start = (HEADER_LEN + 4 + 4) as usize;
        bytes[payload_start + 3] ^= 0x40;
        std::fs::write(&path, bytes).unwrap();

        let mut reader = PackedReader::open(&path).unwrap();
        assert!(matches!(reader.get("a"), Err(PackError::CorruptRecord { .. })));
    }

    #[test]
    fn resume_skips_existing_and_preserves_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = temp_path(&dir, "data.fspk");
        let mut writer = PackedWriter::create(&path).unwrap();
        writer.append("a", PayloadKind::FeatureRows, b"one").unwrap();
        writer.append("b", PayloadKind::FeatureRows, b"two").unwrap();
        drop(writer);
        let before = std::fs::read(&path).unwrap();

        let writer = PackedWriter::open_resume(&path).unwrap();
        assert!(writer.contains("a") && writer.contains("b"));
        drop(writer);
        assert_eq!(std::fs::read(&path).unwrap(), before);
    }

    #[test]
    fn duplicate_append_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = temp_path(&dir, "data.fspk");
        let mut writer = PackedWriter::create(&path).unwrap();
        writer.append("a", PayloadKind::FeatureRows, b"one").unwrap();
        assert!(matches!(
            writer.append("a", PayloadKind::FeatureRows, b"again"),
            Err(PackError::DuplicateId(_))
        ));
    }

    #[test]
    fn crash_tail_is_ignored_and_reclaimed() {
        let dir = tempfile::tempdir().unwrap();
        let path = temp_path(&dir, "data.fspk");
        let mut writer = PackedWriter::create(&path).unwrap();
        writer.append("a", PayloadKind::FeatureRows, b"safe").unwrap();
        drop(writer);
        let committed = std::fs::read(&path).unwrap();

        // Simulate a writer killed mid-append: a partial record after the
        // committed index, header still pointing at the old index.
        let mut torn = committed.clone();
        torn.extend_from_slice(&[0xde, 0xad, 0xbe, 0xef, 0x01]);
        std::fs::write(&path, &torn).unwrap();

        let mut reader = PackedReader::open(&path).unwrap();
        assert_eq!(reader.len(), 1);
        assert_eq!(reader.get("a").unwrap().1, b"safe");

        // Resume trims the tail and continues cleanly.
        let mut writer = PackedWriter::open_resume(&path).unwrap();
        writer.append("b", PayloadKind::FeatureRows, b"after crash").unwrap();
        drop(writer);
        let mut reader = PackedReader::open(&path).unwrap();
        assert_eq!(reader.get("a").unwrap().1, b"safe");
        assert_eq!(reader.get("b").unwrap().1, b"after crash");
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = temp_path(&dir, "data.fspk");
        std::fs::write(&path, b"NOTPK-----------------------------").unwrap();
        assert!(matches!(PackedReader::open(&path), Err(PackError::BadMagic)));
    }
}
