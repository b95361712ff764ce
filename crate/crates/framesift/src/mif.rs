//! Most Implied Frames: question-aware top-N selection over
//! question--caption matching scores.
//!
//! Long videos are first reduced to a small uniform pre-sample. An external
//! captioner describes each pre-sampled frame and an external grader scores
//! each caption against the question; this module starts at those scores.
//! For every question the N highest-scoring pre-sampled frames are kept, so
//! two questions on the same video usually select different frames.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::uniform_indices;
use crate::selection::SampleSelection;

#[derive(Debug, Error, PartialEq)]
pub enum MifError {
    #[error("bad pre-sample count: T'={t_prime} for T={t}")]
    BadCount { t: usize, t_prime: usize },
    #[error("not enough frames: need {needed}, group has {available}")]
    NotEnoughFrames { needed: usize, available: usize },
    #[error("no scores for video {video_id:?}, question {question_id:?}")]
    MissingGroup { video_id: String, question_id: String },
    #[error("scores for video {video_id:?}, question {question_id:?} do not cover pre-sampled frame {frame_index}")]
    IncompleteGroup { video_id: String, question_id: String, frame_index: usize },
    #[error("duplicate score for video {video_id:?}, question {question_id:?}, frame {frame_index}")]
    DuplicateEntry { video_id: String, question_id: String, frame_index: usize },
    #[error("frame {frame_index} of video {video_id:?} is not in the pre-sampled set")]
    FrameNotPresampled { video_id: String, frame_index: usize },
    #[error("non-finite score for video {video_id:?}, question {question_id:?}, frame {frame_index}")]
    NonFiniteScore { video_id: String, question_id: String, frame_index: usize },
    #[error("pre-sample for video {0:?} must be non-empty, sorted and distinct")]
    BadPresample(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// One matching score, as stored in score files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub video_id: String,
    pub question_id: String,
    pub frame_index: usize,
    pub score: f64,
}

/// One generated frame description, as stored in caption files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub video_id: String,
    pub frame_index: usize,
    pub caption: String,
}

/// One question, as stored in question files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub video_id: String,
    pub question_id: String,
    pub question: String,
}

/// Uniform pre-sample of `t_prime` indices from a `t`-frame video:
/// `index_i = floor((i + 0.5) * T / T')`, strictly increasing.
pub fn presample_uniform(t: usize, t_prime: usize) -> Result<Vec<usize>, MifError> {
    if t_prime < 1 || t_prime > t {
        return Err(MifError::BadCount { t, t_prime });
    }
    Ok(uniform_indices(t, t_prime).expect("bounds checked"))
}

/// Positions of the `n` largest scores, ties to the lowest position,
/// returned sorted ascending.
pub fn topk_by_score(scores: &[f64], n: usize) -> Result<Vec<usize>, MifError> {
    if n > scores.len() {
        return Err(MifError::NotEnoughFrames { needed: n, available: scores.len() });
    }
    let mut positions: Vec<usize> = (0..scores.len()).collect();
    positions.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut top = positions[..n].to_vec();
    top.sort_unstable();
    Ok(top)
}

/// Matching scores keyed by (video, question, frame), plus each video's
/// pre-sampled frame list.
///
/// Entries live in ordered maps, so lookups and iteration are independent of
/// insertion order. Every (video, question) group must cover the video's
/// pre-sampled frames exactly — [`ScoreTable::select`] rejects anything
/// less.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    presample: BTreeMap<String, Vec<usize>>,
    groups: BTreeMap<(String, String), BTreeMap<usize, f64>>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares the pre-sampled frame indices of a video. Must be sorted,
    /// distinct and non-empty; scores for the video must land inside it.
    pub fn set_presample(&mut self, video_id: impl Into<String>, indices: Vec<usize>) -> Result<(), MifError> {
        let video_id = video_id.into();
        if indices.is_empty() || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MifError::BadPresample(video_id));
        }
        self.presample.insert(video_id, indices);
        Ok(())
    }

    pub fn insert(
        &mut self,
        video_id: impl Into<String>,
        question_id: impl Into<String>,
        frame_index: usize,
        score: f64,
    ) -> Result<(), MifError> {
        let video_id = video_id.into();
        let question_id = question_id.into();
        if !score.is_finite() {
            return Err(MifError::NonFiniteScore { video_id, question_id, frame_index });
        }
        if let Some(pre) = self.presample.get(&video_id) {
            if pre.binary_search(&frame_index).is_err() {
                return Err(MifError::FrameNotPresampled { video_id, frame_index });
            }
        }
        let group = self.groups.entry((video_id.clone(), question_id.clone())).or_default();
        if group.insert(frame_index, score).is_some() {
            return Err(MifError::DuplicateEntry { video_id, question_id, frame_index });
        }
        Ok(())
    }

    /// Builds a table from raw records, inferring each video's pre-sampled
    /// set as the union of frame indices seen for that video.
    pub fn from_records(records: &[ScoreRecord]) -> Result<Self, MifError> {
        let mut table = Self::new();
        let mut seen: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for r in records {
            seen.entry(&r.video_id).or_default().insert(r.frame_index);
        }
        for (video_id, frames) in seen {
            table.set_presample(video_id, frames.into_iter().collect())?;
        }
        for r in records {
            table.insert(&r.video_id, &r.question_id, r.frame_index, r.score)?;
        }
        Ok(table)
    }

    pub fn load_score_file(path: &Path) -> Result<Self, MifError> {
        let records = read_jsonl::<ScoreRecord>(path)?;
        Self::from_records(&records)
    }

    pub fn presample_of(&self, video_id: &str) -> Option<&[usize]> {
        self.presample.get(video_id).map(Vec::as_slice)
    }

    pub fn videos(&self) -> impl Iterator<Item = &str> {
        self.presample.keys().map(String::as_str)
    }

    pub fn questions_for<'a>(&'a self, video_id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.groups
            .range((video_id.to_string(), String::new())..)
            .take_while(move |((v, _), _)| v == video_id)
            .map(|((_, q), _)| q.as_str())
    }

    /// Flattens the table back into records, in canonical
    /// (video, question, frame) order.
    pub fn to_records(&self) -> Vec<ScoreRecord> {
        self.groups
            .iter()
            .flat_map(|((video_id, question_id), group)| {
                group.iter().map(move |(&frame_index, &score)| ScoreRecord {
                    video_id: video_id.clone(),
                    question_id: question_id.clone(),
                    frame_index,
                    score,
                })
            })
            .collect()
    }

    /// Writes the table as one JSON record per line, canonical order.
    pub fn write_score_file(&self, path: &Path) -> Result<(), MifError> {
        let mut out = String::new();
        for record in self.to_records() {
            out.push_str(&serde_json::to_string(&record).expect("serializable"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| MifError::Io(e.to_string()))
    }

    /// Top-N frames for one question. The profile carries the group's scores
    /// in pre-sample order; `selection_order` ranks the chosen frames by
    /// descending score.
    pub fn select(&self, video_id: &str, question_id: &str, n: usize) -> Result<SampleSelection, MifError> {
        let missing = || MifError::MissingGroup {
            video_id: video_id.to_string(),
            question_id: question_id.to_string(),
        };
        let pre = self.presample.get(video_id).ok_or_else(missing)?;
        let group = self
            .groups
            .get(&(video_id.to_string(), question_id.to_string()))
            .ok_or_else(missing)?;
        let mut scores = Vec::with_capacity(pre.len());
        for &frame in pre {
            let score = group.get(&frame).ok_or(MifError::IncompleteGroup {
                video_id: video_id.to_string(),
                question_id: question_id.to_string(),
                frame_index: frame,
            })?;
            scores.push(*score);
        }
        let positions = topk_by_score(&scores, n)?;
        let indices: Vec<usize> = positions.iter().map(|&p| pre[p]).collect();
        let mut ranked = positions.clone();
        ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(SampleSelection {
            indices,
            success: true,
            selection_order: ranked.into_iter().map(|p| pre[p]).collect(),
            profile: scores,
            window: None,
        })
    }
}

/// Convenience wrapper over [`ScoreTable::select`].
pub fn mif_select(
    table: &ScoreTable,
    video_id: &str,
    question_id: &str,
    n: usize,
) -> Result<SampleSelection, MifError> {
    table.select(video_id, question_id, n)
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, MifError> {
    let text = std::fs::read_to_string(path).map_err(|e| MifError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| MifError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_caption_file(path: &Path) -> Result<Vec<CaptionRecord>, MifError> {
    read_jsonl(path)
}

pub fn load_question_file(path: &Path) -> Result<Vec<QuestionRecord>, MifError> {
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn presample_sixteen_of_thirtytwo() {
        let expected: Vec<usize> = (0..16).map(|i| 2 * i + 1).collect();
        assert_eq!(presample_uniform(32, 16).unwrap(), expected);
    }

    #[test]
    fn presample_identity_coverage() {
        assert_eq!(presample_uniform(5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn presample_three_of_ten() {
        assert_eq!(presample_uniform(10, 3).unwrap(), vec![1, 5, 8]);
    }

    #[test]
    fn presample_rejects_bad_counts() {
        assert_eq!(presample_uniform(4, 5), Err(MifError::BadCount { t: 4, t_prime: 5 }));
        assert_eq!(presample_uniform(4, 0), Err(MifError::BadCount { t: 4, t_prime: 0 }));
    }

    #[test]
    fn topk_takes_both_tied_maxima() {
        assert_eq!(topk_by_score(&[0.1, 0.9, 0.5, 0.9], 2).unwrap(), vec![1, 3]);
    }

    #[test]
    fn topk_tie_goes_to_lowest_index() {
        assert_eq!(topk_by_score(&[0.9, 0.9, 0.1], 1).unwrap(), vec![0]);
    }

    #[test]
    fn topk_rejects_short_input() {
        assert_eq!(
            topk_by_score(&[1.0], 2),
            Err(MifError::NotEnoughFrames { needed: 2, available: 1 })
        );
    }

    /// Crafted 16-frame score rows reproducing the published per-question
    /// selection pattern: Q1 picks {3,9,11,12,13,14}, Q2 picks
    /// {6,8,9,10,11,13} (0-based).
    pub(crate) fn table_four_fixture() -> ScoreTable {
        let mut q1 = vec![0.05; 16];
        for (rank, &frame) in [12, 3, 13, 9, 11, 14].iter().enumerate() {
            q1[frame] = 0.9 - 0.1 * rank as f64;
        }
        let mut q2 = vec![0.04; 16];
        for (rank, &frame) in [9, 6, 10, 8, 13, 11].iter().enumerate() {
            q2[frame] = 0.85 - 0.1 * rank as f64;
        }
        let mut table = ScoreTable::new();
        table.set_presample("puppy", (0..16).collect()).unwrap();
        for (frame, &s) in q1.iter().enumerate() {
            table.insert("puppy", "q1", frame, s).unwrap();
        }
        for (frame, &s) in q2.iter().enumerate() {
            table.insert("puppy", "q2", frame, s).unwrap();
        }
        table
    }

    #[test]
    fn crafted_scores_reproduce_published_selections() {
        let table = table_four_fixture();
        let q1 = table.select("puppy", "q1", 6).unwrap();
        let q2 = table.select("puppy", "q2", 6).unwrap();
        assert_eq!(q1.indices, vec![3, 9, 11, 12, 13, 14]);
        assert_eq!(q2.indices, vec![6, 8, 9, 10, 11, 13]);
        assert_ne!(q1.indices, q2.indices);
        // Highest score first in the recorded rank order.
        assert_eq!(q1.selection_order[0], 12);
    }

    #[test]
    fn equal_scores_take_first_presampled_frames() {
        let mut table = ScoreTable::new();
        table.set_presample("v", vec![1, 5, 8, 12]).unwrap();
        for frame in [1, 5, 8, 12] {
            table.insert("v", "q", frame, 0.5).unwrap();
        }
        let sel = table.select("v", "q", 3).unwrap();
        assert_eq!(sel.indices, vec![1, 5, 8]);
        assert!(sel.success);
    }

    #[test]
    fn missing_group_is_reported() {
        let table = table_four_fixture();
        assert!(matches!(
            table.select("puppy", "q3", 6),
            Err(MifError::MissingGroup { .. })
        ));
        assert!(matches!(
            table.select("kitten", "q1", 6),
            Err(MifError::MissingGroup { .. })
        ));
    }

    #[test]
    fn incomplete_group_is_reported() {
        let mut table = ScoreTable::new();
        table.set_presample("v", vec![0, 2, 4]).unwrap();
        table.insert("v", "q", 0, 0.1).unwrap();
        table.insert("v", "q", 4, 0.2).unwrap();
        assert_eq!(
            table.select("v", "q", 2),
            Err(MifError::IncompleteGroup {
                video_id: "v".into(),
                question_id: "q".into(),
                frame_index: 2
            })
        );
    }

    #[test]
    fn duplicates_and_unsampled_frames_are_rejected() {
        let mut table = ScoreTable::new();
        table.set_presample("v", vec![0, 2]).unwrap();
        table.insert("v", "q", 0, 0.1).unwrap();
        assert!(matches!(
            table.insert("v", "q", 0, 0.3),
            Err(MifError::DuplicateEntry { .. })
        ));
        assert!(matches!(
            table.insert("v", "q", 1, 0.3),
            Err(MifError::FrameNotPresampled { .. })
        ));
        assert!(matches!(
            table.insert("v", "q", 2, f64::NAN),
            Err(MifError::NonFiniteScore { .. })
        ));
    }

    #[test]
    fn from_records_infers_presample_and_rejects_ragged_groups() {
        let rec = |q: &str, frame: usize, score: f64| ScoreRecord {
            video_id: "v".into(),
            question_id: q.into(),
            frame_index: frame,
            score,
        };
        // q2 lacks frame 4, which q1 establishes as pre-sampled.
        let table = ScoreTable::from_records(&[
            rec("q1", 0, 0.3),
            rec("q1", 4, 0.1),
            rec("q2", 0, 0.9),
        ])
        .unwrap();
        assert_eq!(table.presample_of("v").unwrap(), &[0, 4]);
        assert!(table.select("v", "q1", 1).is_ok());
        assert!(matches!(
            table.select("v", "q2", 1),
            Err(MifError::IncompleteGroup { .. })
        ));
    }

    #[test]
    fn selection_ignores_record_storage_order() {
        let mut forward = ScoreTable::new();
        let mut backward = ScoreTable::new();
        forward.set_presample("v", vec![0, 1, 2, 3]).unwrap();
        backward.set_presample("v", vec![0, 1, 2, 3]).unwrap();
        let scores = [0.4, 0.9, 0.1, 0.9];
        for f in 0..4 {
            forward.insert("v", "q", f, scores[f]).unwrap();
        }
        for f in (0..4).rev() {
            backward.insert("v", "q", f, scores[f]).unwrap();
        }
        assert_eq!(
            forward.select("v", "q", 2).unwrap(),
            backward.select("v", "q", 2).unwrap()
        );
    }

    proptest! {
        #[test]
        fn topk_matches_stable_sort_oracle(
            scores in proptest::collection::vec(-1e6f64..1e6, 1..64),
            n in 0usize..16,
        ) {
            prop_assume!(n <= scores.len());
            // Oracle: stable descending sort by (score, -index), take N,
            // report positions sorted.
            let mut ranked: Vec<usize> = (0..scores.len()).collect();
            ranked.sort_by(|&a, &b| {
                scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b))
            });
            let mut expected = ranked[..n].to_vec();
            expected.sort_unstable();
            prop_assert_eq!(topk_by_score(&scores, n).unwrap(), expected);
        }
    }
}
