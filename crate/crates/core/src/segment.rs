//! Overlapping candidate windows, their network encoding, and export of the
//! windows the classifier accepts.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{
    encode_png, kernel_id, load_quantized, window_origins, ImagingError, QuantizedImage, Rect,
    SyntheticGroundTruth,
};
use crate::nn::{Dataset, NnError, TrainedModel};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("unknown segment label {0:?} (expected Valid or Invalid)")]
    UnknownLabel(String),
    #[error("segment {0} has no label")]
    Unlabeled(String),
    #[error("segment {0} is listed in the labels but not in the manifest")]
    UnknownSegment(String),
    #[error("feature dims {w}x{h} give {} inputs but the model expects {expected}", w * h)]
    InputDims { w: usize, h: usize, expected: usize },
    #[error("invalid window configuration: {0}")]
    Config(String),
    #[error("output directory {path} is not writable: {source}")]
    OutputDir {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SegmentError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub window: (usize, usize),
    pub stride: (usize, usize),
}

impl WindowConfig {
    /// Window with a half-window stride.
    pub fn new(window: (usize, usize)) -> Self {
        Self {
            window,
            stride: ((window.0 / 2).max(1), (window.1 / 2).max(1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.window;
        let (sx, sy) = self.stride;
        if w == 0 || h == 0 || sx == 0 || sy == 0 {
            return Err(SegmentError::Config(format!(
                "window {w}x{h} and stride ({sx}, {sy}) must be positive"
            )));
        }
        Ok(())
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self::new((32, 32))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentLabel {
    Valid,
    Invalid,
}

impl SegmentLabel {
    pub fn is_valid(self) -> bool {
        self == SegmentLabel::Valid
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentLabel::Valid => "Valid",
            SegmentLabel::Invalid => "Invalid",
        })
    }
}

impl FromStr for SegmentLabel {
    type Err = SegmentError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "valid" => Ok(SegmentLabel::Valid),
            "invalid" => Ok(SegmentLabel::Invalid),
            _ => Err(SegmentError::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: String,
    pub rect: Rect,
    pub levels: usize,
    pub pixels: Vec<u8>,
    pub label: Option<SegmentLabel>,
    pub score: Option<f64>,
}

impl Segment {
    pub fn to_image(&self) -> QuantizedImage {
        QuantizedImage::new(self.rect.width, self.rect.height, self.levels, self.pixels.clone())
            .expect("segment pixels come from a quantized image")
    }
}

/// `s` followed by the kernel id of the window rectangle.
pub fn segment_id(rect: Rect) -> String {
    format!("s{}", kernel_id(rect))
}

pub fn slide_windows(img: &QuantizedImage, cfg: &WindowConfig) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let (w, h) = cfg.window;
    Ok(window_origins((img.width(), img.height()), cfg.window, cfg.stride)?
        .into_iter()
        .map(|(x, y)| {
            let rect = Rect::new(x, y, w, h);
            Segment {
                id: segment_id(rect),
                rect,
                levels: img.levels(),
                pixels: img.crop(rect),
                label: None,
                score: None,
            }
        })
        .collect())
}

/// Nearest-neighbour resample to `dims`, then ink intensity
/// `1 - level / (L - 1)` per pixel, row-major.
pub fn to_feature_vector(s: &Segment, dims: (usize, usize)) -> Vec<f64> {
    let (dw, dh) = dims;
    let (sw, sh) = (s.rect.width, s.rect.height);
    let top = (s.levels - 1) as f64;
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let sy = y * sh / dh;
        for x in 0..dw {
            let sx = x * sw / dw;
            out.push(1.0 - s.pixels[sy * sw + sx] as f64 / top);
        }
    }
    out
}

/// Ground-truth label of a window: valid when it fully contains a glyph,
/// invalid when it touches none, and `None` for partial glyphs.
pub fn label_from_ground_truth(rect: &Rect, gt: &SyntheticGroundTruth) -> Option<SegmentLabel> {
    if gt.glyph_boxes.iter().any(|g| rect.contains_rect(g)) {
        Some(SegmentLabel::Valid)
    } else if gt.touches_glyph(rect) {
        None
    } else {
        Some(SegmentLabel::Invalid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDataset {
    segments: Vec<Segment>,
}

impl SegmentDataset {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if let Some(s) = segments.iter().find(|s| s.label.is_none()) {
            return Err(SegmentError::Unlabeled(s.id.clone()));
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `(valid, invalid)` counts.
    pub fn balance(&self) -> (usize, usize) {
        let valid = self
            .segments
            .iter()
            .filter(|s| s.label == Some(SegmentLabel::Valid))
            .count();
        (valid, self.segments.len() - valid)
    }

    pub fn to_dataset(&self, dims: (usize, usize)) -> Result<Dataset> {
        let ids = self.segments.iter().map(|s| s.id.clone()).collect();
        let rows = self
            .segments
            .par_iter()
            .map(|s| to_feature_vector(s, dims))
            .collect();
        let labels = self
            .segments
            .iter()
            .map(|s| s.label.is_some_and(SegmentLabel::is_valid))
            .collect();
        Ok(Dataset::new(ids, rows, labels)?)
    }
}

/// Scores every segment, writes `{id}.png` plus a manifest for those scoring
/// at least `threshold`, and returns them in input order.
pub fn extract_valid(
    segments: &[Segment],
    model: &TrainedModel,
    threshold: f64,
    dims: (usize, usize),
    out_dir: &Path,
) -> Result<Vec<Segment>> {
    ensure_writable(out_dir)?;
    if dims.0 * dims.1 != model.input_size() {
        return Err(SegmentError::InputDims {
            w: dims.0,
            h: dims.1,
            expected: model.input_size(),
        });
    }
    let scores = segments
        .par_iter()
        .map(|s| model.score(&to_feature_vector(s, dims)))
        .collect::<Result<Vec<_>, _>>()?;

    let valid: Vec<Segment> = segments
        .iter()
        .zip(scores)
        .filter(|(_, score)| *score >= threshold)
        .map(|(s, score)| Segment {
            label: Some(SegmentLabel::Valid),
            score: Some(score),
            ..s.clone()
        })
        .collect();
    write_segment_dir(&valid, out_dir)?;
    Ok(valid)
}

fn ensure_writable(dir: &Path) -> Result<()> {
    let probe = || -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".write-probe");
        std::fs::write(&path, b"")?;
        std::fs::remove_file(path)
    };
    probe().map_err(|source| SegmentError::OutputDir {
        path: dir.display().to_string(),
        source,
    })
}

/// Writes every segment as `{id}.png` plus `manifest.csv`.
pub fn write_segment_dir(segments: &[Segment], dir: &Path) -> Result<()> {
    ensure_writable(dir)?;
    for s in segments {
        std::fs::write(dir.join(format!("{}.png", s.id)), encode_png(&s.to_image().to_gray())?)?;
    }
    let file = std::fs::File::create(dir.join(MANIFEST_FILE))?;
    write_manifest(segments, std::io::BufWriter::new(file))
}

pub fn write_manifest<W: Write>(segments: &[Segment], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["segment_id", "x", "y", "w", "h", "score"])?;
    for s in segments {
        let r = s.rect;
        w.write_record([
            s.id.clone(),
            r.x.to_string(),
            r.y.to_string(),
            r.width.to_string(),
            r.height.to_string(),
            s.score.map(|v| format!("{v:.16e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestRow {
    pub segment_id: String,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub score: Option<f64>,
}

pub fn read_manifest<R: Read>(input: R) -> Result<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_labels<W: Write>(labels: &[(String, SegmentLabel)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["segment_id", "label"])?;
    for (id, label) in labels {
        w.write_record([id.clone(), label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels<R: Read>(input: R) -> Result<Vec<(String, SegmentLabel)>> {
    #[derive(Deserialize)]
    struct Row {
        segment_id: String,
        label: String,
    }
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok((row.segment_id, row.label.parse()?))
        })
        .collect()
}

/// Loads the crops listed in `dir/manifest.csv`.
pub fn load_segment_dir(dir: &Path, levels: usize) -> Result<Vec<Segment>> {
    let rows = read_manifest(std::fs::File::open(dir.join(MANIFEST_FILE))?)?;
    rows.into_iter()
        .map(|row| {
            let img = load_quantized(&dir.join(format!("{}.png", row.segment_id)), levels)?;
            let rect = Rect::new(row.x, row.y, row.w, row.h);
            if (img.width(), img.height()) != (rect.width, rect.height) {
                return Err(SegmentError::Config(format!(
                    "crop {} is {}x{} but the manifest says {}x{}",
                    row.segment_id,
                    img.width(),
                    img.height(),
                    rect.width,
                    rect.height
                )));
            }
            Ok(Segment {
                id: row.segment_id,
                rect,
                levels,
                pixels: img.pixels().to_vec(),
                label: None,
                score: row.score,
            })
        })
        .collect()
}

/// Attaches labels by id. Segments without a label are dropped; a label for
/// an unknown id is an error.
pub fn apply_labels(
    segments: Vec<Segment>,
    labels: &[(String, SegmentLabel)],
) -> Result<SegmentDataset> {
    let mut by_id: HashMap<&str, SegmentLabel> = HashMap::new();
    for (id, label) in labels {
        by_id.insert(id.as_str(), *label);
    }
    for (id, _) in labels {
        if !segments.iter().any(|s| &s.id == id) {
            return Err(SegmentError::UnknownSegment(id.clone()));
        }
    }
    SegmentDataset::new(
        segments
            .into_iter()
            .filter_map(|s| {
                let label = *by_id.get(s.id.as_str())?;
                Some(Segment {
                    label: Some(label),
                    ..s
                })
            })
            .collect(),
    )
}
