//! The result record every sampler produces.

use serde::{Deserialize, Serialize};

/// Frames chosen from one video, plus enough context to audit the choice.
///
/// `indices` is always sorted ascending; `selection_order` holds the same
/// indices in the order the sampler picked them. `profile` carries the
/// per-frame value the sampler ranked by: the dominance value for the spaced
/// sampler (length T), the matching score for the question-aware sampler
/// (length T', in pre-sample order), and all zeros for the heuristics.
/// `window` is the derived spacing W and is present only for the spaced
/// sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSelection {
    pub indices: Vec<usize>,
    pub success: bool,
    pub selection_order: Vec<usize>,
    pub profile: Vec<f64>,
    pub window: Option<usize>,
}

impl SampleSelection {
    /// True iff every pair of selected indices is at least `w` apart.
    pub fn satisfies_spacing(&self, w: usize) -> bool {
        self.indices
            .windows(2)
            .all(|pair| pair[1] - pair[0] >= w)
    }
}
