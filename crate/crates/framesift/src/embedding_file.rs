//! The on-disk embedding format, so any upstream encoder can feed the
//! samplers.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   5 bytes   "FSEM1"
//! T       u32       frame count, >= 1
//! d       u32       feature dimension, >= 1
//! payload T*d f32   row-major feature matrix
//! id_len  u8        byte length of the video id
//! id      id_len    UTF-8 video id
//! ```
//!
//! Values are f32 on disk and f64 in computation. `write` then `read` (and
//! the reverse) are bit-exact identities.

use std::path::Path;

use thiserror::Error;

use crate::features::FrameFeatures;

pub const EMBEDDING_MAGIC: &[u8; 5] = b"FSEM1";

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingFileError {
    #[error("bad magic: expected \"FSEM1\"")]
    BadMagic,
    #[error("truncated payload: need {needed} bytes, have {available}")]
    TruncatedPayload { needed: usize, available: usize },
    #[error("zero dimension: T={t}, d={d}")]
    ZeroDimension { t: u32, d: u32 },
    #[error("{0} trailing bytes after the video id")]
    TrailingBytes(usize),
    #[error("video id is not valid UTF-8")]
    InvalidId,
    #[error("video id is {0} bytes; the format caps ids at 255")]
    IdTooLong(usize),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("matrix of {t}x{d} frames does not fit the format's u32 header")]
    TooLarge { t: usize, d: usize },
    #[error("io: {0}")]
    Io(String),
}

/// Serializes features to the on-disk layout. Values are narrowed to f32.
pub fn write_embedding_bytes(features: &FrameFeatures) -> Result<Vec<u8>, EmbeddingFileError> {
    let t = features.frame_count();
    let d = features.dim();
    if t > u32::MAX as usize || d > u32::MAX as usize {
        return Err(EmbeddingFileError::TooLarge { t, d });
    }
    let id = features.video_id().as_bytes();
    if id.len() > u8::MAX as usize {
        return Err(EmbeddingFileError::IdTooLong(id.len()));
    }
    let mut out = Vec::with_capacity(5 + 8 + 4 * t * d + 1 + id.len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for row in features.rows() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.push(id.len() as u8);
    out.extend_from_slice(id);
    Ok(out)
}

/// Parses the on-disk layout back into features. Strict: the buffer must
/// contain exactly one record, nothing more.
pub fn read_embedding_bytes(bytes: &[u8]) -> Result<FrameFeatures, EmbeddingFileError> {
    let need = |needed: usize, available: usize| EmbeddingFileError::TruncatedPayload { needed, available };
    if bytes.len() < 5 {
        return Err(need(5, bytes.len()));
    }
    if &bytes[..5] != EMBEDDING_MAGIC {
        return Err(EmbeddingFileError::BadMagic);
    }
    if bytes.len() < 13 {
        return Err(need(13, bytes.len()));
    }
    let t = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    let d = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
    if t == 0 || d == 0 {
        return Err(EmbeddingFileError::ZeroDimension { t, d });
    }
    let payload_len = (t as usize)
        .checked_mul(d as usize)
        .and_then(|n| n.checked_mul(4))
        .ok_or(EmbeddingFileError::TooLarge { t: t as usize, d: d as usize })?;
    let id_len_at = 13 + payload_len;
    if bytes.len() < id_len_at + 1 {
        return Err(need(id_len_at + 1, bytes.len()));
    }
    let id_len = bytes[id_len_at] as usize;
    let id_end = id_len_at + 1 + id_len;
    if bytes.len() < id_end {
        return Err(need(id_end, bytes.len()));
    }
    if bytes.len() > id_end {
        return Err(EmbeddingFileError::TrailingBytes(bytes.len() - id_end));
    }
    let id = std::str::from_utf8(&bytes[id_len_at + 1..id_end])
        .map_err(|_| EmbeddingFileError::InvalidId)?;

    let dim = d as usize;
    let mut data = Vec::with_capacity(t as usize * dim);
    for (i, chunk) in bytes[13..id_len_at].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        if !v.is_finite() {
            return Err(EmbeddingFileError::NonFinite { row: i / dim, col: i % dim });
        }
        data.push(v);
    }
    // Shape and finiteness were checked above, so construction cannot fail.
    Ok(FrameFeatures::from_flat(id, t as usize, dim, data).expect("validated"))
}

pub fn write_embedding_file(features: &FrameFeatures, path: &Path) -> Result<(), EmbeddingFileError> {
    let bytes = write_embedding_bytes(features)?;
    std::fs::write(path, bytes).map_err(|e| EmbeddingFileError::Io(e.to_string()))
}

pub fn read_embedding_file(path: &Path) -> Result<FrameFeatures, EmbeddingFileError> {
    let bytes = std::fs::read(path).map_err(|e| EmbeddingFileError::Io(e.to_string()))?;
    read_embedding_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_record_is_eighteen_bytes_plus_id() {
        let feats = FrameFeatures::from_rows("v", vec![vec![0.0]]).unwrap();
        let bytes = write_embedding_bytes(&feats).unwrap();
        assert_eq!(bytes.len(), 18 + 1);
        let back = read_embedding_bytes(&bytes).unwrap();
        assert_eq!(back, feats);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let feats = FrameFeatures::from_rows("v", vec![vec![0.0]]).unwrap();
        let mut bytes = write_embedding_bytes(&feats).unwrap();
        bytes[..5].copy_from_slice(b"XXXX1");
        assert_eq!(read_embedding_bytes(&bytes), Err(EmbeddingFileError::BadMagic));
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(EMBEDDING_MAGIC);
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.push(0);
        assert!(matches!(
            read_embedding_bytes(&bytes),
            Err(EmbeddingFileError::ZeroDimension { .. })
        ));
    }

    #[test]
    fn truncation_is_reported() {
        let feats = FrameFeatures::from_rows("video-7", vec![vec![1.0, 2.0]; 3]).unwrap();
        let bytes = write_embedding_bytes(&feats).unwrap();
        for cut in [3, 9, 14, bytes.len() - 1] {
            assert!(matches!(
                read_embedding_bytes(&bytes[..cut]),
                Err(EmbeddingFileError::TruncatedPayload { .. })
            ));
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let feats = FrameFeatures::from_rows("v", vec![vec![0.5]]).unwrap();
        let mut bytes = write_embedding_bytes(&feats).unwrap();
        bytes.push(0);
        assert_eq!(read_embedding_bytes(&bytes), Err(EmbeddingFileError::TrailingBytes(1)));
    }

    #[test]
    fn long_ids_are_rejected_on_write() {
        let feats = FrameFeatures::from_rows("x".repeat(300), vec![vec![0.0]]).unwrap();
        assert_eq!(write_embedding_bytes(&feats), Err(EmbeddingFileError::IdTooLong(300)));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            t in 1usize..9,
            d in 1usize..6,
            seed in any::<u64>(),
            id in "[a-zA-Z0-9_-]{0,24}",
        ) {
            // f32-representable values so disk narrowing is lossless.
            let mut rng = crate::rng::SplitMix64::new(seed);
            let rows: Vec<Vec<f64>> = (0..t)
                .map(|_| (0..d).map(|_| {
                    let raw = (rng.next_u64() % 2000) as f64 / 500.0 - 2.0;
                    (raw as f32) as f64
                }).collect())
                .collect();
            let feats = FrameFeatures::from_rows(id, rows).unwrap();
            let bytes = write_embedding_bytes(&feats).unwrap();
            let back = read_embedding_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &feats);
            // And write(read(bytes)) reproduces the bytes.
            let bytes2 = write_embedding_bytes(&back).unwrap();
            prop_assert_eq!(bytes2, bytes);
        }
    }
}
