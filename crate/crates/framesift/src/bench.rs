//! Desk-scale harness: runs samplers over labeled synthetic corpora and
//! reports scene coverage, redundancy and spacing success rates.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{random_select, uniform_select};
use crate::config::SamplingConfig;
use crate::mdf::mdf_select;
use crate::pipeline::SamplerKind;
use crate::rng::{fnv1a64, mix64};
use crate::selection::SampleSelection;
use crate::synth::LabeledVideo;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("video {video_id:?}: {message}")]
    Sampler { video_id: String, message: String },
    #[error("sampler {0:?} is not benchable (needs external scores)")]
    Unsupported(&'static str),
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("bad lambda grid {0:?}: expected start:end:step with step > 0")]
    BadGrid(String),
    #[error("io: {0}")]
    Io(String),
}

/// Fraction of planted scenes hit by a selection: distinct non-transition
/// labels among the selected frames over `min(N, K)`. Transition frames
/// (label -1) never count toward coverage.
pub fn scene_coverage(indices: &[usize], labels: &[i64]) -> f64 {
    let scene_total = labels
        .iter()
        .filter(|&&l| l >= 0)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let denom = indices.len().min(scene_total);
    if denom == 0 {
        return 0.0;
    }
    let hit = indices
        .iter()
        .map(|&i| labels[i])
        .filter(|&l| l >= 0)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    hit as f64 / denom as f64
}

/// Crowding measure: the largest number of selected frames landing in a
/// single scene, over N. Transition frames belong to no scene.
pub fn scene_redundancy(indices: &[usize], labels: &[i64]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let mut per_scene = std::collections::BTreeMap::new();
    for &i in indices {
        if labels[i] >= 0 {
            *per_scene.entry(labels[i]).or_insert(0usize) += 1;
        }
    }
    per_scene.values().copied().max().unwrap_or(0) as f64 / indices.len() as f64
}

/// One aggregate row of a bench run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub sampler: SamplerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub videos: usize,
    pub mean_coverage: f64,
    pub mean_redundancy: f64,
    pub r_success: f64,
}

/// Aggregated harness output plus a fingerprint of the corpus it ran on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub corpus_fingerprint: String,
    pub rows: Vec<BenchRow>,
    /// Smallest grid lambda with every video spacing-successful, when a
    /// sweep ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_full_success_lambda: Option<f64>,
}

/// Content hash of a labeled corpus (first 16 hex chars of SHA-256 over
/// dims, ids, labels and feature bits).
pub fn corpus_fingerprint(corpus: &[LabeledVideo]) -> String {
    let mut hasher = Sha256::new();
    for video in corpus {
        hasher.update(video.features.video_id().as_bytes());
        hasher.update((video.features.dim() as u64).to_le_bytes());
        for &label in &video.labels {
            hasher.update(label.to_le_bytes());
        }
        for row in video.features.rows() {
            for &v in row {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
    }
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn run_sampler(
    sampler: SamplerKind,
    video: &LabeledVideo,
    config: &SamplingConfig,
    seed: u64,
) -> Result<SampleSelection, BenchError> {
    let n = config.frames_per_video;
    let t = video.frame_count();
    let fail = |message: String| BenchError::Sampler {
        video_id: video.features.video_id().to_string(),
        message,
    };
    match sampler {
        SamplerKind::Mdf => mdf_select(&video.features, config).map_err(|e| fail(e.to_string())),
        SamplerKind::Uniform => uniform_select(t, n).map_err(|e| fail(e.to_string())),
        SamplerKind::Random => {
            let video_seed = mix64(seed ^ fnv1a64(video.features.video_id().as_bytes()));
            random_select(t, n, video_seed).map_err(|e| fail(e.to_string()))
        }
        SamplerKind::Mif => Err(BenchError::Unsupported("mif")),
    }
}

/// Runs one sampler over the whole corpus and aggregates the metrics.
/// Per-video evaluation is parallel; the aggregate is order-independent
/// (means over videos in corpus order).
pub fn eval_sampler(
    sampler: SamplerKind,
    corpus: &[LabeledVideo],
    config: &SamplingConfig,
    seed: u64,
) -> Result<BenchRow, BenchError> {
    let per_video: Vec<(f64, f64, bool)> = corpus
        .par_iter()
        .map(|video| {
            let sel = run_sampler(sampler, video, config, seed)?;
            Ok((
                scene_coverage(&sel.indices, &video.labels),
                scene_redundancy(&sel.indices, &video.labels),
                sel.success,
            ))
        })
        .collect::<Result<_, BenchError>>()?;
    let n = per_video.len();
    let successes = per_video.iter().filter(|(_, _, s)| *s).count();
    Ok(BenchRow {
        sampler,
        lambda: matches!(sampler, SamplerKind::Mdf).then_some(config.lambda),
        videos: n,
        mean_coverage: per_video.iter().map(|(c, _, _)| c).sum::<f64>() / n as f64,
        mean_redundancy: per_video.iter().map(|(_, r, _)| r).sum::<f64>() / n as f64,
        r_success: successes as f64 / n as f64,
    })
}

/// Sweeps the spaced sampler across a lambda grid: one row per lambda, plus
/// the smallest lambda achieving 100% spacing success.
pub fn sweep_lambda(
    corpus: &[LabeledVideo],
    base: &SamplingConfig,
    grid: &[f64],
) -> Result<BenchReport, BenchError> {
    if grid.is_empty() {
        return Err(BenchError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let config = base.clone().with_lambda(lambda);
        rows.push(eval_sampler(SamplerKind::Mdf, corpus, &config, 0)?);
    }
    let min_full = rows
        .iter()
        .find(|row| row.r_success == 1.0)
        .and_then(|row| row.lambda);
    Ok(BenchReport {
        corpus_fingerprint: corpus_fingerprint(corpus),
        rows,
        min_full_success_lambda: min_full,
    })
}

/// Runs several samplers at one configuration for side-by-side comparison.
pub fn compare_samplers(
    corpus: &[LabeledVideo],
    samplers: &[SamplerKind],
    config: &SamplingConfig,
    seed: u64,
) -> Result<BenchReport, BenchError> {
    let rows = samplers
        .iter()
        .map(|&s| eval_sampler(s, corpus, config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchReport {
        corpus_fingerprint: corpus_fingerprint(corpus),
        rows,
        min_full_success_lambda: None,
    })
}

/// Parses a `start:end:step` lambda grid, inclusive of the endpoint (within
/// half a step). Values are snapped to 1e-9 so grid points print cleanly.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<f64>, BenchError> {
    let bad = || BenchError::BadGrid(text.to_string());
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [single] => vec![single.trim().parse::<f64>().map_err(|_| bad())?],
        [start, end, step] => {
            let start: f64 = start.trim().parse().map_err(|_| bad())?;
            let end: f64 = end.trim().parse().map_err(|_| bad())?;
            let step: f64 = step.trim().parse().map_err(|_| bad())?;
            if !(step > 0.0 && end >= start) {
                return Err(bad());
            }
            let count = ((end - start) / step + 0.5).floor() as usize + 1;
            (0..count)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .filter(|&l| l <= end + step * 1e-6)
                .collect()
        }
        _ => return Err(bad()),
    };
    if grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(bad());
    }
    Ok(grid)
}

/// Stable CSV encoding of a report. Columns:
/// `sampler,lambda,videos,mean_coverage,mean_redundancy,r_success,corpus_fingerprint`.
pub fn report_to_csv(report: &BenchReport) -> String {
    let mut out = String::from("sampler,lambda,videos,mean_coverage,mean_redundancy,r_success,corpus_fingerprint\n");
    for row in &report.rows {
        let lambda = row.lambda.map(|l| format!("{l:.6}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{}\n",
            row.sampler.name(),
            lambda,
            row.videos,
            row.mean_coverage,
            row.mean_redundancy,
            row.r_success,
            report.corpus_fingerprint,
        ));
    }
    out
}

pub fn write_csv(report: &BenchReport, path: &Path) -> Result<(), BenchError> {
    std::fs::write(path, report_to_csv(report)).map_err(|e| BenchError::Io(e.to_string()))
}

/// Spearman rank correlation with ties ranked by order of appearance, so a
/// non-decreasing series scores exactly 1. This is the monotonicity gauge
/// used for success-rate curves, where long saturated stretches of identical
/// values are expected and should not read as disorder.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "series must have equal length");
    let n = xs.len();
    if n < 2 {
        return 1.0;
    }
    let ordinal_ranks = |vals: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let mut ranks = vec![0.0; vals.len()];
        for (rank, &idx) in order.iter().enumerate() {
            ranks[idx] = rank as f64;
        }
        ranks
    };
    let rx = ordinal_ranks(xs);
    let ry = ordinal_ranks(ys);
    let mean = (n as f64 - 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..n {
        cov += (rx[i] - mean) * (ry[i] - mean);
        var_x += (rx[i] - mean).powi(2);
        var_y += (ry[i] - mean).powi(2);
    }
    cov / (var_x.sqrt() * var_y.sqrt())
}
