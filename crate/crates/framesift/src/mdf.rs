//! Most Dominant Frames: greedy spaced selection over a windowed-similarity
//! dominance profile.
//!
//! Each frame gets a dominance value — the sum of its cosine similarities to
//! every frame within `W` steps, self included. High dominance marks frames
//! where the video moves slowest. Selection repeatedly takes the most
//! dominant remaining frame and knocks out everything closer than `W` to it;
//! if the candidate pool runs dry before N frames are chosen, the remaining
//! slots are filled by dominance rank alone and the selection is marked as a
//! spacing failure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{derive_window, DomMode, InvalidConfig, SamplingConfig};
use crate::features::FrameFeatures;
use crate::selection::SampleSelection;
use crate::similarity::{cosine_similarity_matrix, SimilarityMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum MdfError {
    #[error(transparent)]
    InvalidConfig(#[from] InvalidConfig),
    #[error("video too short: {frames} frames, need at least {needed}")]
    VideoTooShort { frames: usize, needed: usize },
    #[error("window must be positive")]
    WindowNonPositive,
}

/// Per-frame dominance values together with the window that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomProfile {
    pub values: Vec<f64>,
    pub window: usize,
    pub mode: DomMode,
}

/// Dominance of every frame: the windowed similarity sum
/// `sum(S[t][t'] for t' in [t-W, t+W])` truncated at the video boundary,
/// self term included, divided by the number of in-range terms in
/// [`DomMode::Mean`].
///
/// Terms are accumulated in ascending `t'` order so results are reproducible
/// bit for bit.
pub fn dom_profile(s: &SimilarityMatrix, window: usize, mode: DomMode) -> Result<DomProfile, MdfError> {
    if window == 0 {
        return Err(MdfError::WindowNonPositive);
    }
    let t_count = s.size();
    let mut values = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let lo = t.saturating_sub(window);
        let hi = (t + window).min(t_count - 1);
        let mut sum = 0.0;
        for t_prime in lo..=hi {
            sum += s.get(t, t_prime);
        }
        values.push(match mode {
            DomMode::RawSum => sum,
            DomMode::Mean => sum / (hi - lo + 1) as f64,
        });
    }
    Ok(DomProfile { values, window, mode })
}

/// Samples N spaced frames from precomputed features.
pub fn mdf_select(features: &FrameFeatures, config: &SamplingConfig) -> Result<SampleSelection, MdfError> {
    config.validate()?;
    let s = cosine_similarity_matrix(features);
    mdf_select_from_similarity(&s, config)
}

/// Samples N spaced frames from a precomputed similarity matrix.
///
/// The pick loop is equivalent to re-scanning for the dominance argmax at
/// every step (ties to the lowest index): frames are visited once in
/// (dominance desc, index asc) order, and a frame is taken unless an earlier
/// pick already excluded it. Exclusions only grow, so the first non-excluded
/// frame in that order *is* the argmax of the remaining candidate set.
pub fn mdf_select_from_similarity(
    s: &SimilarityMatrix,
    config: &SamplingConfig,
) -> Result<SampleSelection, MdfError> {
    config.validate()?;
    let t_count = s.size();
    let n = config.frames_per_video;
    if t_count < n {
        return Err(MdfError::VideoTooShort { frames: t_count, needed: n });
    }
    let window = derive_window(t_count, config);
    let profile = dom_profile(s, window, config.dom_mode)?;
    let dom = &profile.values;

    let mut by_dom: Vec<usize> = (0..t_count).collect();
    by_dom.sort_by(|&a, &b| dom[b].total_cmp(&dom[a]).then(a.cmp(&b)));

    let mut excluded = vec![false; t_count];
    let mut selected = vec![false; t_count];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for &t in &by_dom {
        if order.len() == n {
            break;
        }
        if excluded[t] {
            continue;
        }
        order.push(t);
        selected[t] = true;
        let lo = t.saturating_sub(window - 1);
        let hi = (t + window - 1).min(t_count - 1);
        for e in &mut excluded[lo..=hi] {
            *e = true;
        }
    }
    let success = order.len() == n;
    if !success {
        // Spacing failed: fill the remaining slots by dominance rank alone.
        for &t in &by_dom {
            if order.len() == n {
                break;
            }
            if !selected[t] {
                order.push(t);
                selected[t] = true;
            }
        }
    }

    let mut indices = order.clone();
    indices.sort_unstable();
    Ok(SampleSelection {
        indices,
        success,
        selection_order: order,
        profile: profile.values,
        window: Some(window),
    })
}
