//! Synthetic labeled corpora: planted-scene videos with known ground truth,
//! used to measure what the samplers actually select.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FrameFeatures;
use crate::rng::mix64;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("embedding dim {dim} too small for {scenes} orthogonal scene centroids")]
    DimTooSmall { dim: usize, scenes: usize },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// Scene length distribution, drawn per video per scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameCountDist {
    Fixed(usize),
    UniformRange { min: usize, max: usize },
}

impl FrameCountDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match *self {
            FrameCountDist::Fixed(n) => n,
            FrameCountDist::UniformRange { min, max } => {
                Uniform::new_inclusive(min, max).expect("validated range").sample(rng)
            }
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let ok = match *self {
            FrameCountDist::Fixed(n) => n >= 1,
            FrameCountDist::UniformRange { min, max } => min >= 1 && min <= max,
        };
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidSpec(format!("bad frames_per_scene {self:?}")))
        }
    }
}

/// Recipe for a deterministic labeled corpus.
///
/// Each video is `scene_count` static segments joined by
/// `transition_length` linearly interpolated frames. Scene centroids are
/// orthogonal unit vectors (the standard basis), which needs
/// `dim >= scene_count`. Gaussian noise of `noise_std` per coordinate is
/// added to every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub scene_count: usize,
    pub frames_per_scene: FrameCountDist,
    #[serde(default)]
    pub transition_length: usize,
    #[serde(default)]
    pub noise_std: f64,
    pub dim: usize,
    pub corpus_size: usize,
    pub seed: u64,
    /// When set, scene 0 absorbs this fraction of each video's scene frames
    /// and the rest share the remainder equally: a "dominant scene" corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominant_scene_fraction: Option<f64>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.scene_count < 1 {
            return Err(SynthError::InvalidSpec("scene_count must be >= 1".into()));
        }
        if self.corpus_size < 1 {
            return Err(SynthError::InvalidSpec("corpus_size must be >= 1".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(SynthError::InvalidSpec("noise_std must be >= 0".into()));
        }
        self.frames_per_scene.validate()?;
        if self.dim < self.scene_count {
            return Err(SynthError::DimTooSmall { dim: self.dim, scenes: self.scene_count });
        }
        if let Some(f) = self.dominant_scene_fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(SynthError::InvalidSpec("dominant_scene_fraction must be in [0,1)".into()));
            }
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::InvalidSpec(format!("{}: {e}", path.display())))?;
        let spec: SyntheticSpec = serde_json::from_str(&text)
            .map_err(|e| SynthError::InvalidSpec(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// A generated video plus its ground-truth labels: scene index per frame,
/// -1 for transition frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVideo {
    pub features: FrameFeatures,
    pub labels: Vec<i64>,
}

impl LabeledVideo {
    pub fn frame_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of distinct planted scenes.
    pub fn scene_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l >= 0).collect::<std::collections::BTreeSet<_>>().len()
    }
}

fn scene_lengths(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = spec.scene_count;
    let base = spec.frames_per_scene.sample(rng);
    match spec.dominant_scene_fraction {
        None => (0..k).map(|_| spec.frames_per_scene.sample(rng)).collect(),
        Some(fraction) if k == 1 => {
            let _ = fraction;
            vec![base]
        }
        Some(fraction) => {
            // One long scene, the rest split the remainder evenly.
            let total = base * k;
            let dominant = ((total as f64 * fraction).round() as usize).clamp(1, total - (k - 1));
            let rest = total - dominant;
            let mut lengths = vec![dominant];
            for i in 0..k - 1 {
                let lo = rest * i / (k - 1);
                let hi = rest * (i + 1) / (k - 1);
                lengths.push((hi - lo).max(1));
            }
            lengths
        }
    }
}

/// Generates the corpus. Deterministic: the same spec (seed included) yields
/// the same videos, independent of thread count or platform.
pub fn gen_corpus(spec: &SyntheticSpec) -> Result<Vec<LabeledVideo>, SynthError> {
    spec.validate()?;
    let noise = if spec.noise_std > 0.0 {
        Some(Normal::new(0.0, spec.noise_std).expect("validated std"))
    } else {
        None
    };
    let mut corpus = Vec::with_capacity(spec.corpus_size);
    for v in 0..spec.corpus_size {
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(spec.seed ^ (v as u64)));
        let lengths = scene_lengths(spec, &mut rng);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<i64> = Vec::new();
        let mut push_frame = |centroid: &dyn Fn(usize) -> f64, label: i64, rng: &mut ChaCha8Rng| {
            let mut row = Vec::with_capacity(spec.dim);
            for c in 0..spec.dim {
                let mut value = centroid(c);
                if let Some(n) = &noise {
                    value += n.sample(rng);
                }
                row.push(value);
            }
            rows.push(row);
            labels.push(label);
        };
        for (scene, &len) in lengths.iter().enumerate() {
            for _ in 0..len {
                push_frame(&|c| if c == scene { 1.0 } else { 0.0 }, scene as i64, &mut rng);
            }
            if scene + 1 < lengths.len() {
                for j in 1..=spec.transition_length {
                    let alpha = j as f64 / (spec.transition_length + 1) as f64;
                    push_frame(
                        &|c| {
                            if c == scene {
                                1.0 - alpha
                            } else if c == scene + 1 {
                                alpha
                            } else {
                                0.0
                            }
                        },
                        -1,
                        &mut rng,
                    );
                }
            }
        }
        let features = FrameFeatures::from_rows(format!("synth-{v:05}"), rows)
            .expect("generated rows are finite and rectangular");
        corpus.push(LabeledVideo { features, labels });
    }
    Ok(corpus)
}
