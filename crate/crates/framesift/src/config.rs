//! Sampler configuration and the adaptive window rule shared by every sampler.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How the windowed similarity sum is aggregated into a dominance value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomMode {
    /// Plain sum of similarities over the window.
    ///
    /// Frames near the video boundary see a truncated window and therefore
    /// systematically smaller sums.
    RawSum,
    /// Sum divided by the number of in-range terms.
    Mean,
}

impl fmt::Display for DomMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomMode::RawSum => write!(f, "raw_sum"),
            DomMode::Mean => write!(f, "mean"),
        }
    }
}

/// Tie-break policy for equal scores. There is a single policy; it is named
/// so that emitted selections record which rule produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    LowestIndex,
}

/// Sampler parameters: N frames per video, the width-adjusting rate, the
/// dominance aggregation mode, and a floor for the derived window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub frames_per_video: usize,
    pub lambda: f64,
    pub dom_mode: DomMode,
    pub tie_break: TieBreak,
    pub min_window: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            frames_per_video: 6,
            lambda: 2.5,
            dom_mode: DomMode::Mean,
            tie_break: TieBreak::LowestIndex,
            min_window: 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid config: {field}: {reason}")]
pub struct InvalidConfig {
    pub field: &'static str,
    pub reason: String,
}

impl InvalidConfig {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

impl SamplingConfig {
    /// Checks every invariant; returns the first violation.
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        if self.frames_per_video < 1 {
            return Err(InvalidConfig::new("frames_per_video", "must be >= 1"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(InvalidConfig::new("lambda", "must be a finite positive real"));
        }
        if self.min_window < 1 {
            return Err(InvalidConfig::new("min_window", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_frames(mut self, n: usize) -> Self {
        self.frames_per_video = n;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_dom_mode(mut self, mode: DomMode) -> Self {
        self.dom_mode = mode;
        self
    }
}

/// Adaptive window for a video of `video_length` frames:
/// `W = max(min_window, floor(L / (lambda * N)))`.
///
/// The quotient is floored and clamped so a short video never collapses the
/// spacing constraint to zero. Pure and deterministic.
pub fn derive_window(video_length: usize, config: &SamplingConfig) -> usize {
    let raw = (video_length as f64) / (config.lambda * config.frames_per_video as f64);
    let floored = raw.floor() as usize;
    floored.max(config.min_window)
}

/// Parsed contents of a flat `key = value` config file.
///
/// Recognized keys are exactly `frames_per_video`, `lambda`, `dom_mode` and
/// `min_window`. Blank lines and `#` comments are ignored; unknown keys are
/// rejected so typos do not silently fall back to defaults. Every field is
/// optional — callers overlay the file onto a base config, and CLI flags
/// overlay both.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub frames_per_video: Option<usize>,
    pub lambda: Option<f64>,
    pub dom_mode: Option<DomMode>,
    pub min_window: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, InvalidConfig> {
        let mut out = ConfigFile::default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                InvalidConfig::new("file", format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "frames_per_video" => {
                    let n = value.parse::<usize>().map_err(|_| {
                        InvalidConfig::new("frames_per_video", format!("not an integer: {value:?}"))
                    })?;
                    out.frames_per_video = Some(n);
                }
                "lambda" => {
                    let l = value.parse::<f64>().map_err(|_| {
                        InvalidConfig::new("lambda", format!("not a number: {value:?}"))
                    })?;
                    out.lambda = Some(l);
                }
                "dom_mode" => {
                    out.dom_mode = Some(match value {
                        "mean" => DomMode::Mean,
                        "raw_sum" => DomMode::RawSum,
                        other => {
                            return Err(InvalidConfig::new(
                                "dom_mode",
                                format!("expected `mean` or `raw_sum`, got {other:?}"),
                            ))
                        }
                    });
                }
                "min_window" => {
                    let w = value.parse::<usize>().map_err(|_| {
                        InvalidConfig::new("min_window", format!("not an integer: {value:?}"))
                    })?;
                    out.min_window = Some(w);
                }
                other => {
                    return Err(InvalidConfig::new(
                        "file",
                        format!("line {}: unknown key {other:?}", lineno + 1),
                    ))
                }
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, InvalidConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InvalidConfig::new("file", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Overlays the file's values onto `base` (file wins where present).
    pub fn apply(&self, base: SamplingConfig) -> SamplingConfig {
        SamplingConfig {
            frames_per_video: self.frames_per_video.unwrap_or(base.frames_per_video),
            lambda: self.lambda.unwrap_or(base.lambda),
            dom_mode: self.dom_mode.unwrap_or(base.dom_mode),
            min_window: self.min_window.unwrap_or(base.min_window),
            tie_break: base.tie_break,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, lambda: f64) -> SamplingConfig {
        SamplingConfig::default().with_frames(n).with_lambda(lambda)
    }

    #[test]
    fn derive_window_exact_quotient() {
        assert_eq!(derive_window(96, &cfg(6, 2.0)), 8);
    }

    #[test]
    fn derive_window_clamps_to_min_window() {
        // floor(10 / 13.8) = 0, clamped up.
        assert_eq!(derive_window(10, &cfg(6, 2.3)), 1);
    }

    #[test]
    fn derive_window_long_video() {
        assert_eq!(derive_window(3000, &cfg(6, 2.5)), 200);
    }

    #[test]
    fn validate_accepts_paper_settings() {
        assert!(cfg(6, 2.5).validate().is_ok());
        assert!(cfg(3, 2.3).validate().is_ok());
        assert!(cfg(3, 2.7).validate().is_ok());
    }

    #[test]
    fn validate_rejects_zero_frames() {
        let err = cfg(0, 2.5).validate().unwrap_err();
        assert_eq!(err.field, "frames_per_video");
    }

    #[test]
    fn validate_rejects_nonpositive_lambda() {
        assert_eq!(cfg(3, 0.0).validate().unwrap_err().field, "lambda");
        assert_eq!(cfg(3, -1.0).validate().unwrap_err().field, "lambda");
        assert_eq!(cfg(3, f64::NAN).validate().unwrap_err().field, "lambda");
    }

    #[test]
    fn validate_rejects_zero_min_window() {
        let mut c = cfg(3, 2.5);
        c.min_window = 0;
        assert_eq!(c.validate().unwrap_err().field, "min_window");
    }

    #[test]
    fn config_file_parse_and_apply() {
        let file = ConfigFile::parse(
            "# sampler settings\nframes_per_video = 3\nlambda = 2.3\n\ndom_mode = raw_sum\nmin_window = 2\n",
        )
        .unwrap();
        let cfg = file.apply(SamplingConfig::default());
        assert_eq!(cfg.frames_per_video, 3);
        assert_eq!(cfg.lambda, 2.3);
        assert_eq!(cfg.dom_mode, DomMode::RawSum);
        assert_eq!(cfg.min_window, 2);
    }

    #[test]
    fn config_file_partial_keeps_base() {
        let file = ConfigFile::parse("lambda = 2.7\n").unwrap();
        let cfg = file.apply(SamplingConfig::default());
        assert_eq!(cfg.lambda, 2.7);
        assert_eq!(cfg.frames_per_video, 6);
        assert_eq!(cfg.dom_mode, DomMode::Mean);
    }

    #[test]
    fn config_file_rejects_unknown_key() {
        assert!(ConfigFile::parse("window = 4\n").is_err());
    }

    #[test]
    fn config_file_rejects_bad_value() {
        assert!(ConfigFile::parse("lambda = fast\n").is_err());
        assert!(ConfigFile::parse("dom_mode = median\n").is_err());
    }

    #[test]
    fn config_serde_round_trip() {
        let c = cfg(3, 2.7);
        let json = serde_json::to_string(&c).unwrap();
        let back: SamplingConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
