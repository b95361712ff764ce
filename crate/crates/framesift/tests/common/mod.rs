//! Shared test helpers, most importantly the deliberately naive reference
//! implementation of the spaced greedy sampler. It recomputes the dominance
//! argmax by a full scan at every step and maintains an explicit candidate
//! set, sharing no code with the library's selection path.

use framesift::config::{derive_window, DomMode, SamplingConfig};
use framesift::selection::SampleSelection;
use framesift::similarity::SimilarityMatrix;
use framesift::FrameFeatures;

/// Step-by-step reference sampler. Panics on inputs the library would
/// reject; use only on valid instances.
pub fn naive_mdf_reference(s: &SimilarityMatrix, config: &SamplingConfig) -> SampleSelection {
    let t_count = s.size();
    let n = config.frames_per_video;
    assert!(t_count >= n, "reference expects T >= N");
    let window = derive_window(t_count, config);

    // Dominance by direct summation, ascending neighbor order.
    let mut dom = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let mut sum = 0.0;
        let mut terms = 0usize;
        for t_prime in 0..t_count {
            let gap = t.abs_diff(t_prime);
            if gap <= window {
                sum += s.get(t, t_prime);
                terms += 1;
            }
        }
        dom.push(match config.dom_mode {
            DomMode::RawSum => sum,
            DomMode::Mean => sum / terms as f64,
        });
    }

    // Greedy loop with an explicit candidate set and full-scan argmax.
    let mut candidates: Vec<usize> = (0..t_count).collect();
    let mut order: Vec<usize> = Vec::new();
    while order.len() < n && !candidates.is_empty() {
        let mut best = candidates[0];
        for &c in &candidates {
            if dom[c] > dom[best] {
                best = c;
            }
        }
        order.push(best);
        candidates.retain(|&c| c.abs_diff(best) >= window);
    }
    let success = order.len() == n;
    if !success {
        // Fill remaining slots by dominance rank over unselected frames.
        let mut rest: Vec<usize> = (0..t_count).filter(|i| !order.contains(i)).collect();
        rest.sort_by(|&a, &b| dom[b].total_cmp(&dom[a]).then(a.cmp(&b)));
        for idx in rest {
            if order.len() == n {
                break;
            }
            order.push(idx);
        }
    }

    let mut indices = order.clone();
    indices.sort_unstable();
    SampleSelection {
        indices,
        success,
        selection_order: order,
        profile: dom,
        window: Some(window),
    }
}

/// Deterministic random feature matrix for randomized comparisons.
pub fn random_features(id: &str, t: usize, d: usize, seed: u64) -> FrameFeatures {
    let mut rng = framesift::rng::SplitMix64::new(seed);
    let rows = (0..t)
        .map(|_| {
            (0..d)
                .map(|_| (rng.next_u64() % 20001) as f64 / 10000.0 - 1.0)
                .collect()
        })
        .collect();
    FrameFeatures::from_rows(id, rows).unwrap()
}
