//! framesift — offline keyframe sampling for image--text video pipelines.
//!
//! Videos are reduced to a handful of representative frames before a
//! downstream image--text model ever sees them. Two samplers do the real
//! work:
//!
//! - **Most Dominant Frames** ([`mdf`]): question-agnostic. Frames are scored
//!   by how similar they are to their temporal neighbors inside an adaptive
//!   window, then picked greedily under a minimum-spacing constraint with a
//!   top-N fallback when spacing cannot be met.
//! - **Most Implied Frames** ([`mif`]): question-aware. A uniform pre-sample
//!   of frames is captioned upstream, each caption is scored against the
//!   question, and the top-N scoring frames win.
//!
//! Around them sit uniform/random [`baselines`], a manifest-driven batch
//! [`pipeline`] that persists results into a packed random-access container,
//! and a synthetic [`bench`] harness that checks scene coverage and
//! success-rate behavior at desk scale.

pub mod baselines;
pub mod bench;
pub mod config;
pub mod embedding_file;
pub mod features;
pub mod frame_dir;
pub mod manifest;
pub mod mdf;
pub mod mif;
pub mod packed;
pub mod pipeline;
pub mod rng;
pub mod scorer;
pub mod selection;
pub mod similarity;
pub mod synth;

pub use config::{derive_window, ConfigFile, DomMode, InvalidConfig, SamplingConfig, TieBreak};
pub use features::{
    blockmean_features, grayscale_histogram, FeatureError, Featurizer, FrameFeatures, RawFrame,
};
pub use selection::SampleSelection;
pub use similarity::{cosine_similarity_matrix, SimilarityMatrix};
