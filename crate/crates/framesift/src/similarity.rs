//! Frame-to-frame cosine similarity.

use thiserror::Error;

use crate::features::FrameFeatures;

/// Norms below this are treated as zero vectors.
const NORM_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("similarity matrix must be square: {rows} rows of {cols} values")]
    NotSquare { rows: usize, cols: usize },
    #[error("similarity matrix must have at least one row")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteInput { row: usize, col: usize },
    #[error("matrix not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
}

/// Symmetric T x T matrix of pairwise frame similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps an externally computed matrix, checking that it is square,
    /// finite, and symmetric to 1e-9.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, SimilarityError> {
        let size = rows.len();
        if size == 0 {
            return Err(SimilarityError::Empty);
        }
        let mut data = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(SimilarityError::NotSquare { rows: size, cols: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(SimilarityError::NonFiniteInput { row: i, col: j });
                }
                data.push(v);
            }
        }
        let m = Self { size, data };
        for i in 0..size {
            for j in (i + 1)..size {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-9 {
                    return Err(SimilarityError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(m)
    }

    /// Number of frames T.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }
}

/// Cosine similarity between every pair of feature rows.
///
/// A row whose norm falls below 1e-12 gets similarity 0 to everything and 1
/// to itself, so degenerate frames keep the matrix well-defined. Entries are
/// evaluated in a fixed sequential order; results do not depend on thread
/// count anywhere in this crate.
pub fn cosine_similarity_matrix(features: &FrameFeatures) -> SimilarityMatrix {
    let t = features.frame_count();
    let norms: Vec<f64> = features
        .rows()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut data = vec![0.0; t * t];
    for i in 0..t {
        data[i * t + i] = 1.0;
        let row_i = features.row(i);
        for j in (i + 1)..t {
            let value = if norms[i] < NORM_EPSILON || norms[j] < NORM_EPSILON {
                0.0
            } else {
                let dot: f64 = row_i.iter().zip(features.row(j)).map(|(a, b)| a * b).sum();
                dot / (norms[i] * norms[j])
            };
            data[i * t + j] = value;
            data[j * t + i] = value;
        }
    }
    SimilarityMatrix { size: t, data }
}
