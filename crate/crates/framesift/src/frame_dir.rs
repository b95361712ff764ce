//! Ingestion of extracted frames from disk: one directory per video,
//! lexicographically ordered filenames defining temporal order.

use std::path::{Path, PathBuf};

use image::DynamicImage;
use thiserror::Error;

use crate::features::{Featurizer, FrameFeatures, RawFrame};

const FRAME_EXTENSIONS: &[&str] = &["png", "ppm", "pgm", "pbm", "pnm"];

#[derive(Debug, Error)]
pub enum FrameDirError {
    #[error("cannot read directory {0}: {1}")]
    Unreadable(PathBuf, String),
    #[error("no PNG/PPM frames in {0}")]
    NoFrames(PathBuf),
    #[error("cannot decode {0}: {1}")]
    Decode(PathBuf, String),
    #[error("{path}: {source}")]
    Featurize {
        path: PathBuf,
        source: crate::features::FeatureError,
    },
    #[error(transparent)]
    Features(#[from] crate::features::FeatureError),
}

/// Lists the frame image files of a video directory in temporal order
/// (lexicographic by filename). Non-image files are ignored.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>, FrameDirError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| FrameDirError::Unreadable(dir.to_path_buf(), e.to_string()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| {
            path.is_file()
                && path
                    .extension()
                    .and_then(|ext| ext.to_str())
                    .map(|ext| FRAME_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()))
                    .unwrap_or(false)
        })
        .collect();
    if files.is_empty() {
        return Err(FrameDirError::NoFrames(dir.to_path_buf()));
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn to_raw_frame(img: &DynamicImage) -> Result<RawFrame, FrameDirError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let grayscale = matches!(
        img,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_)
    );
    let raw = if grayscale {
        let luma = img.to_luma8();
        let pixels = luma.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect();
        RawFrame::new(w, h, 1, pixels)?
    } else {
        let rgb = img.to_rgb8();
        let pixels = rgb
            .pixels()
            .flat_map(|p| p.0.into_iter().map(|v| f64::from(v) / 255.0))
            .collect();
        RawFrame::new(w, h, 3, pixels)?
    };
    Ok(raw)
}

/// Decodes one frame image into a [`RawFrame`].
pub fn load_frame(path: &Path) -> Result<RawFrame, FrameDirError> {
    let img = image::open(path).map_err(|e| FrameDirError::Decode(path.to_path_buf(), e.to_string()))?;
    to_raw_frame(&img)
}

/// Featurizes every frame in a directory into a feature matrix.
///
/// The video id is the directory name.
pub fn featurize_frame_dir(dir: &Path, featurizer: Featurizer) -> Result<FrameFeatures, FrameDirError> {
    let files = list_frame_files(dir)?;
    let mut rows = Vec::with_capacity(files.len());
    for path in &files {
        let frame = load_frame(path)?;
        let row = featurizer
            .apply(&frame)
            .map_err(|source| FrameDirError::Featurize { path: path.clone(), source })?;
        rows.push(row);
    }
    let video_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("video")
        .to_string();
    Ok(FrameFeatures::from_rows(video_id, rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, RgbImage};

    fn write_gray_png(path: &Path, value: u8, side: u32) {
        let img = GrayImage::from_pixel(side, side, image::Luma([value]));
        img.save(path).unwrap();
    }

    #[test]
    fn frames_load_in_lexicographic_order() {
        let dir = tempfile::tempdir().unwrap();
        // Written out of order on purpose.
        write_gray_png(&dir.path().join("frame_0002.png"), 128, 4);
        write_gray_png(&dir.path().join("frame_0000.png"), 0, 4);
        write_gray_png(&dir.path().join("frame_0001.png"), 255, 4);
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

        let feats = featurize_frame_dir(dir.path(), Featurizer::BlockMean { grid: 1 }).unwrap();
        assert_eq!(feats.frame_count(), 3);
        assert_eq!(feats.dim(), 1);
        assert_eq!(feats.row(0)[0], 0.0);
        assert_eq!(feats.row(1)[0], 1.0);
        assert!((feats.row(2)[0] - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn ppm_frames_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::from_pixel(3, 3, image::Rgb([255, 0, 0]));
        img.save(dir.path().join("a.ppm")).unwrap();
        let feats = featurize_frame_dir(dir.path(), Featurizer::BlockMean { grid: 1 }).unwrap();
        assert_eq!(feats.dim(), 3);
        assert_eq!(feats.row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            featurize_frame_dir(dir.path(), Featurizer::default()),
            Err(FrameDirError::NoFrames(_))
        ));
    }

    #[test]
    fn video_id_is_directory_name() {
        let dir = tempfile::tempdir().unwrap();
        let video_dir = dir.path().join("video-42");
        std::fs::create_dir(&video_dir).unwrap();
        write_gray_png(&video_dir.join("f0.png"), 10, 4);
        let feats = featurize_frame_dir(&video_dir, Featurizer::BlockMean { grid: 2 }).unwrap();
        assert_eq!(feats.video_id(), "video-42");
        assert_eq!(feats.dim(), 4);
    }
}
