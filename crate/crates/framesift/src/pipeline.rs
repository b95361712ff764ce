//! Manifest-driven batch sampling: every video sampled once, results packed
//! into the container, per-video failures isolated.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{random_select, uniform_select};
use crate::config::SamplingConfig;
use crate::embedding_file::read_embedding_file;
use crate::features::{Featurizer, FrameFeatures};
use crate::frame_dir::{featurize_frame_dir, list_frame_files};
use crate::manifest::{DatasetManifest, ManifestError, ManifestRecord};
use crate::mdf::mdf_select;
use crate::mif::ScoreTable;
use crate::packed::{PackError, PackedReader, PackedWriter, PayloadKind};
use crate::rng::{fnv1a64, mix64};
use crate::selection::SampleSelection;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error("sampler {0} requires a score table (--scores)")]
    MissingScores(String),
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("unknown sampler {0:?}")]
    UnknownSampler(String),
}

/// Which sampler the batch runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Mdf,
    Mif,
    Uniform,
    Random,
}

impl SamplerKind {
    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        match s {
            "mdf" => Ok(SamplerKind::Mdf),
            "mif" => Ok(SamplerKind::Mif),
            "uniform" => Ok(SamplerKind::Uniform),
            "random" => Ok(SamplerKind::Random),
            other => Err(PipelineError::UnknownSampler(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Mdf => "mdf",
            SamplerKind::Mif => "mif",
            SamplerKind::Uniform => "uniform",
            SamplerKind::Random => "random",
        }
    }
}

/// Batch options. `workers` bounds the sampling pool; container appends are
/// serialized by the caller thread regardless.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub sampler: SamplerKind,
    pub config: SamplingConfig,
    pub featurizer: Featurizer,
    /// Base seed for the random baseline; each video derives its own stream
    /// from `mix64(seed ^ fnv1a64(video_id))`.
    pub seed: u64,
    pub workers: usize,
    pub scores: Option<ScoreTable>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            sampler: SamplerKind::Uniform,
            config: SamplingConfig::default(),
            featurizer: Featurizer::default(),
            seed: 0,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            scores: None,
        }
    }
}

/// One selection stored in a packed record. The heuristic and dominance
/// samplers store a single entry with no question id; the question-aware
/// sampler stores one entry per question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub question_id: Option<String>,
    pub selection: SampleSelection,
}

/// JSON head of a packed record payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadMeta {
    pub video_id: String,
    pub sampler: SamplerKind,
    pub entries: Vec<SelectionEntry>,
    /// Frame indices whose data follows, sorted ascending: the union of all
    /// entries' selections.
    pub stored_indices: Vec<usize>,
}

/// Frame data stored alongside the selections.
#[derive(Debug, Clone, PartialEq)]
pub enum PayloadData {
    /// One f32 feature row per stored index.
    FeatureRows { dim: usize, rows: Vec<Vec<f32>> },
    /// One verbatim image file per stored index.
    FrameImages { images: Vec<Vec<u8>> },
}

impl PayloadData {
    pub fn kind(&self) -> PayloadKind {
        match self {
            PayloadData::FeatureRows { .. } => PayloadKind::FeatureRows,
            PayloadData::FrameImages { .. } => PayloadKind::FrameImages,
        }
    }
}

/// A decoded packed record: selections plus the stored frame data.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedPayload {
    pub meta: PayloadMeta,
    pub data: PayloadData,
}

impl PackedPayload {
    /// Binary layout: `[u32 json_len][meta JSON][data]` where data is
    /// `[u32 rows][u32 dim][rows*dim f32]` for feature rows and
    /// `[u32 count]([u32 len][bytes])*` for frame images, little-endian.
    pub fn encode(&self) -> Vec<u8> {
        let json = serde_json::to_vec(&self.meta).expect("serializable");
        let mut out = Vec::with_capacity(4 + json.len());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        match &self.data {
            PayloadData::FeatureRows { dim, rows } => {
                out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
                out.extend_from_slice(&(*dim as u32).to_le_bytes());
                for row in rows {
                    for v in row {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
            PayloadData::FrameImages { images } => {
                out.extend_from_slice(&(images.len() as u32).to_le_bytes());
                for img in images {
                    out.extend_from_slice(&(img.len() as u32).to_le_bytes());
                    out.extend_from_slice(img);
                }
            }
        }
        out
    }

    pub fn decode(kind: PayloadKind, bytes: &[u8]) -> Result<Self, PipelineError> {
        struct Cursor<'a> {
            bytes: &'a [u8],
            at: usize,
        }
        impl<'a> Cursor<'a> {
            fn take(&mut self, n: usize) -> Result<&'a [u8], PipelineError> {
                let end = self
                    .at
                    .checked_add(n)
                    .filter(|&e| e <= self.bytes.len())
                    .ok_or_else(|| PipelineError::CorruptPayload("truncated".into()))?;
                let slice = &self.bytes[self.at..end];
                self.at = end;
                Ok(slice)
            }
            fn take_u32(&mut self) -> Result<u32, PipelineError> {
                Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
            }
        }
        let corrupt = |msg: String| PipelineError::CorruptPayload(msg);
        let mut cur = Cursor { bytes, at: 0 };
        let json_len = cur.take_u32()? as usize;
        let meta: PayloadMeta = serde_json::from_slice(cur.take(json_len)?)
            .map_err(|e| corrupt(format!("meta: {e}")))?;
        let data = match kind {
            PayloadKind::FeatureRows => {
                let row_count = cur.take_u32()? as usize;
                let dim = cur.take_u32()? as usize;
                let mut rows = Vec::with_capacity(row_count);
                for _ in 0..row_count {
                    let raw = cur.take(dim.checked_mul(4).ok_or_else(|| corrupt("bad dim".into()))?)?;
                    rows.push(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect());
                }
                PayloadData::FeatureRows { dim, rows }
            }
            PayloadKind::FrameImages => {
                let count = cur.take_u32()? as usize;
                let mut images = Vec::with_capacity(count.min(4096));
                for _ in 0..count {
                    let len = cur.take_u32()? as usize;
                    images.push(cur.take(len)?.to_vec());
                }
                PayloadData::FrameImages { images }
            }
        };
        if cur.at != bytes.len() {
            return Err(corrupt("trailing bytes".into()));
        }
        Ok(Self { meta, data })
    }
}

/// Fetches and decodes one video's stored record.
pub fn read_packed(path: &Path, video_id: &str) -> Result<PackedPayload, PipelineError> {
    let mut reader = PackedReader::open(path)?;
    let (kind, bytes) = reader.get(video_id)?;
    PackedPayload::decode(kind, &bytes)
}

/// Outcome for one manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoStatus {
    Sampled,
    Skipped,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video_id: String,
    pub status: VideoStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Run summary, assembled in manifest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sampler: SamplerKind,
    pub videos_total: usize,
    pub sampled: usize,
    pub skipped: usize,
    pub errors: usize,
    /// How many times a sampler actually ran in this process. Zero on a
    /// rerun over complete output: the once-per-dataset economy.
    pub sampler_invocations: usize,
    pub n_success: usize,
    pub n_outcomes: usize,
    /// `n_success / n_outcomes` over this run's sampled videos.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_success: Option<f64>,
    pub wall_time_seconds: f64,
    pub per_video: Vec<VideoReport>,
}

impl RunReport {
    pub fn write_json(&self, path: &Path) -> Result<(), std::io::Error> {
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        std::fs::write(path, text)
    }
}

struct ProcessedVideo {
    payload: PackedPayload,
    success: bool,
    window: Option<usize>,
}

enum SourceData {
    Features(FrameFeatures),
    Frames { features: FrameFeatures, files: Vec<std::path::PathBuf> },
}

fn load_source(record: &ManifestRecord, featurizer: Featurizer) -> Result<SourceData, String> {
    if record.source.is_dir() {
        let files = list_frame_files(&record.source).map_err(|e| e.to_string())?;
        let features = featurize_frame_dir(&record.source, featurizer).map_err(|e| e.to_string())?;
        Ok(SourceData::Frames { features, files })
    } else {
        let features = read_embedding_file(&record.source).map_err(|e| e.to_string())?;
        Ok(SourceData::Features(features))
    }
}

fn sample_video(
    record: &ManifestRecord,
    features: &FrameFeatures,
    options: &PipelineOptions,
) -> Result<Vec<SelectionEntry>, String> {
    let frame_count = features.frame_count();
    let n = options.config.frames_per_video;
    let single = |selection: SampleSelection| vec![SelectionEntry { question_id: None, selection }];
    match options.sampler {
        SamplerKind::Mdf => Ok(single(mdf_select(features, &options.config).map_err(|e| e.to_string())?)),
        SamplerKind::Uniform => Ok(single(uniform_select(frame_count, n).map_err(|e| e.to_string())?)),
        SamplerKind::Random => {
            let seed = mix64(options.seed ^ fnv1a64(record.video_id.as_bytes()));
            Ok(single(random_select(frame_count, n, seed).map_err(|e| e.to_string())?))
        }
        SamplerKind::Mif => {
            let table = options.scores.as_ref().expect("checked before dispatch");
            let question_ids: Vec<String> = match &record.questions {
                Some(qs) => qs.clone(),
                None => table.questions_for(&record.video_id).map(String::from).collect(),
            };
            if question_ids.is_empty() {
                return Err(format!("no questions for video {:?} in score table", record.video_id));
            }
            if let Some(pre) = table.presample_of(&record.video_id) {
                if let Some(&out_of_range) = pre.iter().find(|&&i| i >= frame_count) {
                    return Err(format!(
                        "pre-sampled frame {out_of_range} out of range for {frame_count}-frame video"
                    ));
                }
            }
            let mut entries = Vec::with_capacity(question_ids.len());
            for q in question_ids {
                let selection = table.select(&record.video_id, &q, n).map_err(|e| e.to_string())?;
                entries.push(SelectionEntry { question_id: Some(q), selection });
            }
            Ok(entries)
        }
    }
}

fn process_video(record: &ManifestRecord, options: &PipelineOptions) -> Result<ProcessedVideo, String> {
    let source = load_source(record, options.featurizer)?;
    let features = match &source {
        SourceData::Features(f) => f,
        SourceData::Frames { features, .. } => features,
    };
    if features.frame_count() != record.frame_count {
        return Err(format!(
            "frame_count mismatch: manifest says {}, source has {}",
            record.frame_count,
            features.frame_count()
        ));
    }
    let entries = sample_video(record, features, options)?;
    let mut stored: Vec<usize> = entries
        .iter()
        .flat_map(|e| e.selection.indices.iter().copied())
        .collect();
    stored.sort_unstable();
    stored.dedup();

    let data = match &source {
        SourceData::Features(f) => PayloadData::FeatureRows {
            dim: f.dim(),
            rows: stored.iter().map(|&t| f.row(t).iter().map(|&v| v as f32).collect()).collect(),
        },
        SourceData::Frames { files, .. } => {
            let mut images = Vec::with_capacity(stored.len());
            for &t in &stored {
                images.push(std::fs::read(&files[t]).map_err(|e| format!("{}: {e}", files[t].display()))?);
            }
            PayloadData::FrameImages { images }
        }
    };
    let success = entries.iter().all(|e| e.selection.success);
    let window = entries.first().and_then(|e| e.selection.window);
    Ok(ProcessedVideo {
        payload: PackedPayload {
            meta: PayloadMeta {
                video_id: record.video_id.clone(),
                sampler: options.sampler,
                entries,
                stored_indices: stored,
            },
            data,
        },
        success,
        window,
    })
}

/// Samples every manifest video not already in the output container and
/// appends the results. Per-video failures are recorded in the report and do
/// not abort the batch; container I/O failures do.
pub fn process_manifest(
    manifest: &DatasetManifest,
    options: &PipelineOptions,
    out_path: &Path,
) -> Result<RunReport, PipelineError> {
    if options.sampler == SamplerKind::Mif && options.scores.is_none() {
        return Err(PipelineError::MissingScores(options.sampler.name().into()));
    }
    let start = Instant::now();
    let mut writer = PackedWriter::open_resume(out_path)?;

    enum Slot {
        Skipped,
        Done(Box<ProcessedVideo>),
        Failed(String),
    }
    let mut slots: Vec<Option<Slot>> = Vec::with_capacity(manifest.len());
    let mut jobs: Vec<usize> = Vec::new();
    for (idx, record) in manifest.records().iter().enumerate() {
        if writer.contains(&record.video_id) {
            slots.push(Some(Slot::Skipped));
        } else {
            slots.push(None);
            jobs.push(idx);
        }
    }

    let invocations = AtomicUsize::new(0);
    if !jobs.is_empty() {
        let workers = options.workers.max(1).min(jobs.len());
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, Result<ProcessedVideo, String>)>();
        let records = manifest.records();
        let mut append_error: Option<PackError> = None;
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let next = &next;
                let jobs = &jobs;
                let invocations = &invocations;
                scope.spawn(move || loop {
                    let slot = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&idx) = jobs.get(slot) else { break };
                    invocations.fetch_add(1, Ordering::Relaxed);
                    let result = process_video(&records[idx], options);
                    if tx.send((idx, result)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for (idx, result) in rx {
                match result {
                    Ok(done) => {
                        let bytes = done.payload.encode();
                        let kind = done.payload.data.kind();
                        match writer.append(&records[idx].video_id, kind, &bytes) {
                            Ok(()) => slots[idx] = Some(Slot::Done(Box::new(done))),
                            Err(e) => {
                                append_error = Some(e);
                                break;
                            }
                        }
                    }
                    Err(message) => slots[idx] = Some(Slot::Failed(message)),
                }
            }
        });
        if let Some(e) = append_error {
            return Err(e.into());
        }
    }

    let mut report = RunReport {
        sampler: options.sampler,
        videos_total: manifest.len(),
        sampled: 0,
        skipped: 0,
        errors: 0,
        sampler_invocations: invocations.load(Ordering::Relaxed),
        n_success: 0,
        n_outcomes: 0,
        r_success: None,
        wall_time_seconds: 0.0,
        per_video: Vec::with_capacity(manifest.len()),
    };
    for (record, slot) in manifest.records().iter().zip(slots) {
        let video_id = record.video_id.clone();
        match slot.expect("every slot resolved") {
            Slot::Skipped => {
                report.skipped += 1;
                report.per_video.push(VideoReport {
                    video_id,
                    status: VideoStatus::Skipped,
                    success: None,
                    window: None,
                    error: None,
                });
            }
            Slot::Done(done) => {
                report.sampled += 1;
                report.n_outcomes += 1;
                if done.success {
                    report.n_success += 1;
                }
                report.per_video.push(VideoReport {
                    video_id,
                    status: VideoStatus::Sampled,
                    success: Some(done.success),
                    window: done.window,
                    error: None,
                });
            }
            Slot::Failed(message) => {
                report.errors += 1;
                report.per_video.push(VideoReport {
                    video_id,
                    status: VideoStatus::Error,
                    success: None,
                    window: None,
                    error: Some(message),
                });
            }
        }
    }
    if report.n_outcomes > 0 {
        report.r_success = Some(report.n_success as f64 / report.n_outcomes as f64);
    }
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
