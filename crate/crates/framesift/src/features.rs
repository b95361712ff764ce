//! Per-frame feature vectors and the lightweight featurizers that produce
//! them from raw frames.
//!
//! The samplers only ever see a `FrameFeatures` matrix, so any upstream
//! encoder can feed them. The built-in featurizers are deterministic
//! desk-scale stand-ins for a neural vision encoder: block means and
//! grayscale histograms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRows { row: usize, got: usize, expected: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("timestamps must be {0}")]
    BadTimestamps(&'static str),
    #[error("pixel buffer length {got} does not match {width}x{height}x{channels}")]
    BadPixelCount { got: usize, width: usize, height: usize, channels: usize },
    #[error("channels must be 1 or 3, got {0}")]
    BadChannels(usize),
    #[error("pixel value {0} outside [0, 1]")]
    PixelOutOfRange(f64),
    #[error("zero-sized frame")]
    EmptyFrame,
    #[error("grid {grid} too fine for a {width}x{height} frame")]
    GridTooFine { grid: usize, width: usize, height: usize },
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
}

/// Feature vectors for one video: a T x d row-major matrix where row `t` is
/// the embedding of frame `t`, frames in temporal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    video_id: String,
    frame_count: usize,
    dim: usize,
    data: Vec<f64>,
    frame_timestamps: Option<Vec<f64>>,
}

impl FrameFeatures {
    /// Builds a validated feature matrix from per-frame rows.
    pub fn from_rows(video_id: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(FeatureError::EmptyMatrix);
        }
        let dim = rows[0].len();
        let frame_count = rows.len();
        let mut data = Vec::with_capacity(frame_count * dim);
        for (row_idx, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(FeatureError::RaggedRows {
                    row: row_idx,
                    got: row.len(),
                    expected: dim,
                });
            }
            for (col, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(FeatureError::NonFiniteInput { row: row_idx, col });
                }
                data.push(v);
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            frame_count,
            dim,
            data,
            frame_timestamps: None,
        })
    }

    /// Builds from a flat row-major buffer of `frame_count * dim` values.
    pub fn from_flat(
        video_id: impl Into<String>,
        frame_count: usize,
        dim: usize,
        data: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        if frame_count == 0 || dim == 0 {
            return Err(FeatureError::EmptyMatrix);
        }
        if data.len() != frame_count * dim {
            return Err(FeatureError::RaggedRows {
                row: 0,
                got: data.len(),
                expected: frame_count * dim,
            });
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(FeatureError::NonFiniteInput { row: i / dim, col: i % dim });
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            frame_count,
            dim,
            data,
            frame_timestamps: None,
        })
    }

    /// Attaches per-frame timestamps in seconds. They must be non-negative
    /// and non-decreasing, one per frame.
    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self, FeatureError> {
        if timestamps.len() != self.frame_count {
            return Err(FeatureError::BadTimestamps("one per frame"));
        }
        if timestamps.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(FeatureError::BadTimestamps("finite and non-negative"));
        }
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(FeatureError::BadTimestamps("non-decreasing"));
        }
        self.frame_timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    /// Number of frames T.
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    /// Feature dimension d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.frame_timestamps.as_deref()
    }

    /// Multiplies one row in place by a positive scalar. Cosine similarity is
    /// invariant under this, which the scale-invariance tests exercise.
    pub fn scale_row(&mut self, t: usize, factor: f64) {
        assert!(factor.is_finite() && factor > 0.0, "factor must be positive");
        for v in &mut self.data[t * self.dim..(t + 1) * self.dim] {
            *v *= factor;
        }
    }
}

/// A decoded frame: row-major pixels in `[0, 1]`, 1 (luma) or 3 (RGB)
/// channels, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl RawFrame {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self, FeatureError> {
        if width == 0 || height == 0 {
            return Err(FeatureError::EmptyFrame);
        }
        if channels != 1 && channels != 3 {
            return Err(FeatureError::BadChannels(channels));
        }
        if pixels.len() != width * height * channels {
            return Err(FeatureError::BadPixelCount {
                got: pixels.len(),
                width,
                height,
                channels,
            });
        }
        if let Some(&bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(FeatureError::PixelOutOfRange(bad));
        }
        Ok(Self { width, height, channels, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn pixel(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Rec. 601 luminance; identity for single-channel frames.
    fn luminance(&self, x: usize, y: usize) -> f64 {
        if self.channels == 1 {
            self.pixel(x, y, 0)
        } else {
            0.299 * self.pixel(x, y, 0) + 0.587 * self.pixel(x, y, 1) + 0.114 * self.pixel(x, y, 2)
        }
    }
}

/// Mean pixel value per cell of a `g x g` grid, per channel.
///
/// Output length is `g * g * channels`, ordered cell-major with the channel
/// varying fastest: index = `(cell_row * g + cell_col) * channels + c`.
/// Cells partition the frame into `floor(width/g)`-wide columns and
/// `floor(height/g)`-tall rows; remainder pixels join the last cell row or
/// column so every pixel contributes.
pub fn blockmean_features(frame: &RawFrame, grid: usize) -> Result<Vec<f64>, FeatureError> {
    if grid == 0 || grid > frame.width.min(frame.height) {
        return Err(FeatureError::GridTooFine {
            grid,
            width: frame.width,
            height: frame.height,
        });
    }
    let cell_w = frame.width / grid;
    let cell_h = frame.height / grid;
    let mut out = vec![0.0; grid * grid * frame.channels];
    for cell_row in 0..grid {
        let y0 = cell_row * cell_h;
        let y1 = if cell_row + 1 == grid { frame.height } else { y0 + cell_h };
        for cell_col in 0..grid {
            let x0 = cell_col * cell_w;
            let x1 = if cell_col + 1 == grid { frame.width } else { x0 + cell_w };
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            for c in 0..frame.channels {
                let mut sum = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += frame.pixel(x, y, c);
                    }
                }
                out[(cell_row * grid + cell_col) * frame.channels + c] = sum / count;
            }
        }
    }
    Ok(out)
}

/// L1-normalized luminance histogram with `bins` bins over `[0, 1]`.
///
/// Bin `k` covers `[k/bins, (k+1)/bins)`; the last bin is closed so a value
/// of exactly 1.0 lands in it.
pub fn grayscale_histogram(frame: &RawFrame, bins: usize) -> Result<Vec<f64>, FeatureError> {
    if bins < 2 {
        return Err(FeatureError::TooFewBins(bins));
    }
    let mut counts = vec![0usize; bins];
    for y in 0..frame.height {
        for x in 0..frame.width {
            let v = frame.luminance(x, y);
            let k = ((v * bins as f64).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    let total = (frame.width * frame.height) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Which built-in featurizer turns raw frames into feature rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Featurizer {
    BlockMean { grid: usize },
    Histogram { bins: usize },
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer::BlockMean { grid: 4 }
    }
}

impl Featurizer {
    pub fn apply(&self, frame: &RawFrame) -> Result<Vec<f64>, FeatureError> {
        match *self {
            Featurizer::BlockMean { grid } => blockmean_features(frame, grid),
            Featurizer::Histogram { bins } => grayscale_histogram(frame, bins),
        }
    }
}
