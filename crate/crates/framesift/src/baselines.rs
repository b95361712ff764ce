//! Heuristic samplers: uniform center-of-bin and seeded random.

use thiserror::Error;

use crate::rng::SplitMix64;
use crate::selection::SampleSelection;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("not enough frames: need {needed}, video has {available}")]
    NotEnoughFrames { needed: usize, available: usize },
    #[error("frame count must be >= 1")]
    EmptyVideo,
}

/// Center-of-bin uniform indices: `index_i = floor((i + 0.5) * T / N)`.
///
/// Computed as `(2i + 1) * T / (2N)` in integer arithmetic, which is exact.
/// Strictly increasing for `N <= T`, and never pins frame 0 unless the bins
/// are narrow enough to force it.
pub fn uniform_indices(frame_count: usize, n: usize) -> Result<Vec<usize>, BaselineError> {
    if frame_count == 0 {
        return Err(BaselineError::EmptyVideo);
    }
    if n < 1 || n > frame_count {
        return Err(BaselineError::NotEnoughFrames { needed: n.max(1), available: frame_count });
    }
    Ok((0..n)
        .map(|i| {
            let idx = ((2 * i as u64 + 1) * frame_count as u64) / (2 * n as u64);
            (idx as usize).min(frame_count - 1)
        })
        .collect())
}

/// Uniform baseline sampler.
pub fn uniform_select(frame_count: usize, n: usize) -> Result<SampleSelection, BaselineError> {
    let indices = uniform_indices(frame_count, n)?;
    Ok(SampleSelection {
        selection_order: indices.clone(),
        indices,
        success: true,
        profile: vec![0.0; frame_count],
        window: None,
    })
}

/// Random baseline sampler: N distinct indices without replacement.
///
/// Uses a partial Fisher-Yates shuffle of `0..T` driven by [`SplitMix64`]
/// seeded with `seed`, so the draw is bit-identical across platforms and
/// releases. `selection_order` preserves the draw order.
pub fn random_select(frame_count: usize, n: usize, seed: u64) -> Result<SampleSelection, BaselineError> {
    if frame_count == 0 {
        return Err(BaselineError::EmptyVideo);
    }
    if n < 1 || n > frame_count {
        return Err(BaselineError::NotEnoughFrames { needed: n.max(1), available: frame_count });
    }
    let mut rng = SplitMix64::new(seed);
    let mut pool: Vec<usize> = (0..frame_count).collect();
    for i in 0..n {
        let j = i + rng.next_below((frame_count - i) as u64) as usize;
        pool.swap(i, j);
    }
    let order = pool[..n].to_vec();
    let mut indices = order.clone();
    indices.sort_unstable();
    Ok(SampleSelection {
        indices,
        success: true,
        selection_order: order,
        profile: vec![0.0; frame_count],
        window: None,
    })
}
