//! Question--caption score acquisition: the transport around an external
//! grader model.
//!
//! Scores come from an HTTP endpoint (`POST /score`), from a deterministic
//! mock used by tests, or from a cache of earlier responses keyed by content
//! hash — rerunning a dataset never re-queries the grader for a pair it has
//! already scored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mif::{CaptionRecord, MifError, QuestionRecord, ScoreTable};
use crate::rng::{fnv1a64, mix64};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer unavailable after {attempts} attempts: {last_error}")]
    ScorerUnavailable { attempts: u32, last_error: String },
    #[error("malformed scorer response: {0}")]
    MalformedResponse(String),
    #[error("caption file has no captions for video {0:?}")]
    NoCaptions(String),
    #[error("duplicate caption for video {video_id:?}, frame {frame_index}")]
    DuplicateCaption { video_id: String, frame_index: usize },
    #[error(transparent)]
    Table(#[from] MifError),
    #[error("cache file {path}: {message}")]
    Cache { path: String, message: String },
}

/// Anything that can grade a question--caption pair.
pub trait Scorer: Sync {
    fn score(&self, question: &str, caption: &str) -> Result<f64, ScorerError>;
}

/// Deterministic pseudo-scorer for tests and offline demos.
///
/// The score is a pure function of (seed, question, caption):
/// `mix64(fnv1a64(seed_le || question || 0xff || caption)) / 2^64`,
/// yielding values in `[0, 1)` that are stable across platforms.
#[derive(Debug, Clone)]
pub struct MockScorer {
    seed: u64,
}

impl MockScorer {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl Scorer for MockScorer {
    fn score(&self, question: &str, caption: &str) -> Result<f64, ScorerError> {
        let mut bytes = Vec::with_capacity(9 + question.len() + caption.len());
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        bytes.extend_from_slice(question.as_bytes());
        bytes.push(0xff);
        bytes.extend_from_slice(caption.as_bytes());
        Ok(mix64(fnv1a64(&bytes)) as f64 / 2f64.powi(64))
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    question: &'a str,
    caption: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: serde_json::Value,
}

/// HTTP grader client: `POST {base_url}/score` with
/// `{"question":…, "caption":…}`, expecting `{"score": <finite number>}`.
///
/// Transport failures and non-2xx statuses are retried with exponential
/// backoff; a well-formed reply carrying a non-numeric or non-finite score
/// fails immediately as [`ScorerError::MalformedResponse`].
#[derive(Debug, Clone)]
pub struct HttpScorer {
    endpoint: String,
    timeout: Duration,
    retries: u32,
    backoff: Duration,
}

impl HttpScorer {
    pub fn new(base_url: &str) -> Self {
        let trimmed = base_url.trim_end_matches('/');
        let endpoint = if trimmed.ends_with("/score") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/score")
        };
        Self {
            endpoint,
            timeout: Duration::from_secs(10),
            retries: 3,
            backoff: Duration::from_millis(100),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Number of attempts after the first (total attempts = retries + 1).
    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    /// Initial backoff delay; doubles after every failed attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, question: &str, caption: &str) -> Result<f64, AttemptError> {
        let mut response = ureq::post(&self.endpoint)
            .config()
            .timeout_global(Some(self.timeout))
            .build()
            .send_json(ScoreRequest { question, caption })
            .map_err(|e| AttemptError::Retryable(e.to_string()))?;
        let parsed: ScoreResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| AttemptError::Fatal(format!("not a score object: {e}")))?;
        match parsed.score.as_f64() {
            Some(v) if v.is_finite() => Ok(v),
            Some(v) => Err(AttemptError::Fatal(format!("non-finite score {v}"))),
            None => Err(AttemptError::Fatal(format!("non-numeric score {}", parsed.score))),
        }
    }
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
}

impl Scorer for HttpScorer {
    fn score(&self, question: &str, caption: &str) -> Result<f64, ScorerError> {
        let mut delay = self.backoff;
        let attempts = self.retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            match self.attempt(question, caption) {
                Ok(score) => return Ok(score),
                Err(AttemptError::Fatal(msg)) => return Err(ScorerError::MalformedResponse(msg)),
                Err(AttemptError::Retryable(msg)) => last_error = msg,
            }
            if attempt + 1 < attempts {
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
        }
        Err(ScorerError::ScorerUnavailable { attempts, last_error })
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    q: String,
    c: String,
    score: f64,
}

/// Persistent response cache keyed by `(sha256(question), sha256(caption))`.
///
/// Stored as one JSON record per line. A warm cache satisfies repeat pairs
/// without touching the endpoint at all.
#[derive(Debug, Default)]
pub struct ScoreCache {
    entries: BTreeMap<(String, String), f64>,
    path: Option<PathBuf>,
}

fn content_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl ScoreCache {
    /// In-memory cache with no backing file.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or prepares to create) a file-backed cache.
    pub fn open(path: &Path) -> Result<Self, ScorerError> {
        let mut cache = Self { entries: BTreeMap::new(), path: Some(path.to_path_buf()) };
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| ScorerError::Cache {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: CacheLine = serde_json::from_str(line).map_err(|e| ScorerError::Cache {
                    path: path.display().to_string(),
                    message: format!("line {}: {e}", idx + 1),
                })?;
                cache.entries.insert((parsed.q, parsed.c), parsed.score);
            }
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, question: &str, caption: &str) -> Option<f64> {
        self.entries.get(&(content_hash(question), content_hash(caption))).copied()
    }

    pub fn put(&mut self, question: &str, caption: &str, score: f64) {
        self.entries.insert((content_hash(question), content_hash(caption)), score);
    }

    /// Writes the whole cache back to its file, canonical key order.
    pub fn save(&self) -> Result<(), ScorerError> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut out = String::new();
        for ((q, c), &score) in &self.entries {
            let line = CacheLine { q: q.clone(), c: c.clone(), score };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| ScorerError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// How many pairs `fetch_scores` may have in flight at once.
pub const DEFAULT_CONCURRENCY: usize = 4;

/// Statistics from one fetch run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FetchStats {
    pub pairs_total: usize,
    pub pairs_from_cache: usize,
    pub pairs_fetched: usize,
}

/// Grades every (question, caption) pair of each video and assembles the
/// score table.
///
/// Each video's pre-sampled set is the sorted list of its caption frame
/// indices. Cached pairs are served without a request; the rest are fetched
/// with at most `concurrency` requests in flight. The table itself is built
/// single-threaded afterwards, so its contents are independent of response
/// arrival order.
pub fn fetch_scores(
    questions: &[QuestionRecord],
    captions: &[CaptionRecord],
    scorer: &dyn Scorer,
    cache: &mut ScoreCache,
    concurrency: usize,
) -> Result<(ScoreTable, FetchStats), ScorerError> {
    let concurrency = concurrency.max(1);

    // Group captions per video, sorted by frame index.
    let mut per_video: BTreeMap<&str, BTreeMap<usize, &str>> = BTreeMap::new();
    for c in captions {
        let video = per_video.entry(c.video_id.as_str()).or_default();
        if video.insert(c.frame_index, c.caption.as_str()).is_some() {
            return Err(ScorerError::DuplicateCaption {
                video_id: c.video_id.clone(),
                frame_index: c.frame_index,
            });
        }
    }

    // Work list: every (question, caption) pair, in deterministic order.
    struct Pair<'a> {
        video_id: &'a str,
        question_id: &'a str,
        question: &'a str,
        frame_index: usize,
        caption: &'a str,
    }
    let mut pairs = Vec::new();
    for q in questions {
        let frames = per_video
            .get(q.video_id.as_str())
            .ok_or_else(|| ScorerError::NoCaptions(q.video_id.clone()))?;
        for (&frame_index, &caption) in frames {
            pairs.push(Pair {
                video_id: &q.video_id,
                question_id: &q.question_id,
                question: &q.question,
                frame_index,
                caption,
            });
        }
    }

    let mut stats = FetchStats { pairs_total: pairs.len(), ..Default::default() };
    let mut scores: Vec<Option<f64>> = pairs.iter().map(|p| cache.get(p.question, p.caption)).collect();
    stats.pairs_from_cache = scores.iter().flatten().count();

    let pending: Vec<usize> = (0..pairs.len()).filter(|&i| scores[i].is_none()).collect();
    stats.pairs_fetched = pending.len();
    if !pending.is_empty() {
        let next = AtomicUsize::new(0);
        let fetched: Mutex<Vec<(usize, Result<f64, ScorerError>)>> = Mutex::new(Vec::new());
        let workers = concurrency.min(pending.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let slot = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&pair_idx) = pending.get(slot) else { break };
                    let pair = &pairs[pair_idx];
                    let result = scorer.score(pair.question, pair.caption);
                    fetched.lock().unwrap().push((pair_idx, result));
                });
            }
        });
        for (pair_idx, result) in fetched.into_inner().unwrap() {
            let score = result?;
            let pair = &pairs[pair_idx];
            cache.put(pair.question, pair.caption, score);
            scores[pair_idx] = Some(score);
        }
    }
    cache.save()?;

    let mut table = ScoreTable::new();
    for (video_id, frames) in &per_video {
        table.set_presample(*video_id, frames.keys().copied().collect())?;
    }
    for (pair, score) in pairs.iter().zip(&scores) {
        table.insert(pair.video_id, pair.question_id, pair.frame_index, score.expect("resolved"))?;
    }
    Ok((table, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn question(v: &str, q: &str, text: &str) -> QuestionRecord {
        QuestionRecord { video_id: v.into(), question_id: q.into(), question: text.into() }
    }

    fn caption(v: &str, frame: usize, text: &str) -> CaptionRecord {
        CaptionRecord { video_id: v.into(), frame_index: frame, caption: text.into() }
    }

    #[test]
    fn mock_scorer_is_deterministic_and_bounded() {
        let scorer = MockScorer::new(42);
        let a = scorer.score("what is shown?", "a dog").unwrap();
        let b = scorer.score("what is shown?", "a dog").unwrap();
        assert_eq!(a, b);
        assert!((0.0..1.0).contains(&a));
        let c = scorer.score("what is shown?", "a cat").unwrap();
        assert_ne!(a, c);
        // Different seeds disagree.
        assert_ne!(a, MockScorer::new(43).score("what is shown?", "a dog").unwrap());
    }

    #[test]
    fn fetch_builds_reproducible_table() {
        let questions = vec![question("v1", "q1", "who?"), question("v1", "q2", "where?")];
        let captions = vec![caption("v1", 1, "a dog"), caption("v1", 5, "a park")];
        let scorer = MockScorer::new(7);

        let mut cache_a = ScoreCache::in_memory();
        let (table_a, stats_a) = fetch_scores(&questions, &captions, &scorer, &mut cache_a, 4).unwrap();
        let mut cache_b = ScoreCache::in_memory();
        let (table_b, _) = fetch_scores(&questions, &captions, &scorer, &mut cache_b, 1).unwrap();

        assert_eq!(table_a, table_b);
        assert_eq!(stats_a.pairs_total, 4);
        assert_eq!(stats_a.pairs_fetched, 4);
        assert_eq!(table_a.presample_of("v1").unwrap(), &[1, 5]);
        // Byte-identical serialized form on rerun.
        let lines_a: Vec<String> =
            table_a.to_records().iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        let lines_b: Vec<String> =
            table_b.to_records().iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        assert_eq!(lines_a, lines_b);
    }

    #[test]
    fn warm_cache_needs_no_scorer() {
        struct FailingScorer;
        impl Scorer for FailingScorer {
            fn score(&self, _: &str, _: &str) -> Result<f64, ScorerError> {
                Err(ScorerError::ScorerUnavailable { attempts: 1, last_error: "down".into() })
            }
        }
        let questions = vec![question("v1", "q1", "who?")];
        let captions = vec![caption("v1", 0, "a dog"), caption("v1", 3, "a ball")];

        let mut cache = ScoreCache::in_memory();
        let mock = MockScorer::new(9);
        let (warm_table, _) = fetch_scores(&questions, &captions, &mock, &mut cache, 2).unwrap();

        // Endpoint down, cache warm: same table, zero fetches.
        let (cold_table, stats) = fetch_scores(&questions, &captions, &FailingScorer, &mut cache, 2).unwrap();
        assert_eq!(warm_table, cold_table);
        assert_eq!(stats.pairs_fetched, 0);
        assert_eq!(stats.pairs_from_cache, 2);
    }

    #[test]
    fn cache_round_trips_through_its_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut cache = ScoreCache::open(&path).unwrap();
        cache.put("who?", "a dog", 0.625);
        cache.save().unwrap();

        let reloaded = ScoreCache::open(&path).unwrap();
        assert_eq!(reloaded.len(), 1);
        assert_eq!(reloaded.get("who?", "a dog"), Some(0.625));
        assert_eq!(reloaded.get("who?", "a cat"), None);
    }

    #[test]
    fn missing_captions_for_a_question_video_fail() {
        let questions = vec![question("v2", "q1", "who?")];
        let captions = vec![caption("v1", 0, "a dog")];
        let mut cache = ScoreCache::in_memory();
        let err = fetch_scores(&questions, &captions, &MockScorer::new(1), &mut cache, 2).unwrap_err();
        assert!(matches!(err, ScorerError::NoCaptions(v) if v == "v2"));
    }

    #[test]
    fn duplicate_captions_fail() {
        let questions = vec![question("v1", "q1", "who?")];
        let captions = vec![caption("v1", 0, "a dog"), caption("v1", 0, "a cat")];
        let mut cache = ScoreCache::in_memory();
        let err = fetch_scores(&questions, &captions, &MockScorer::new(1), &mut cache, 2).unwrap_err();
        assert!(matches!(err, ScorerError::DuplicateCaption { .. }));
    }
}
