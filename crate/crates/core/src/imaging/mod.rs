//! Raster types, luma conversion, gray-level quantization and kernel tiling.
//!
//! Every texture computation in this crate works on a [`QuantizedImage`]: a
//! grid of gray-level indices in `[0, levels)`. Kernels and windows are value
//! snapshots of a rectangular sub-grid, identified by a stable string id.

mod synth;

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};
use thiserror::Error;

pub use synth::{
    render_synthetic, NoiseConfig, NoiseKind, SynthConfig, SyntheticGroundTruth,
    GLYPH_BEARING_MIN_INK,
};

/// Default number of gray levels used for co-occurrence statistics.
pub const DEFAULT_LEVELS: usize = 16;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values but {width}x{height} needs {expected}")]
    BufferSize {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("gray-level count must be within 2..=256, got {0}")]
    InvalidLevels(usize),
    #[error("pixel level {level} at index {index} is out of range for {levels} levels")]
    LevelOutOfRange {
        index: usize,
        level: u8,
        levels: usize,
    },
    #[error("kernel {kernel_w}x{kernel_h} does not fit inside image {image_w}x{image_h}")]
    KernelTooLarge {
        kernel_w: usize,
        kernel_h: usize,
        image_w: usize,
        image_h: usize,
    },
    #[error("kernel dimensions must be at least 1x1, got {0}x{1}")]
    EmptyKernel(usize, usize),
    #[error("stride must be at least 1 in both directions, got ({0}, {1})")]
    InvalidStride(usize, usize),
    #[error("invalid synthetic configuration: {0}")]
    SynthConfig(String),
    #[error("canvas holds {capacity} glyph cells but {requested} glyphs were requested")]
    CanvasTooSmall { requested: usize, capacity: usize },
    #[error("failed to read image {path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("failed to encode PNG: {0}")]
    Encode(#[source] image::ImageError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ImagingError> = std::result::Result<T, E>;

/// Axis-aligned rectangle in pixel coordinates, half-open on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn right(&self) -> usize {
        self.x + self.width
    }

    pub fn bottom(&self) -> usize {
        self.y + self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x0 < x1 && y0 < y1).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.intersection(other).is_some()
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Grid of gray-level indices, every value strictly below `levels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedImage {
    width: usize,
    height: usize,
    levels: usize,
    pixels: Vec<u8>,
}

impl QuantizedImage {
    pub fn new(width: usize, height: usize, levels: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        check_levels(levels)?;
        if let Some((index, &level)) = pixels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= levels)
        {
            return Err(ImagingError::LevelOutOfRange {
                index,
                level,
                levels,
            });
        }
        Ok(Self {
            width,
            height,
            levels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, levels: usize, level: u8) -> Result<Self> {
        Self::new(width, height, levels, vec![level; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Panics when `level >= levels` or the coordinate is outside the image.
    pub fn set(&mut self, x: usize, y: usize, level: u8) {
        assert!((level as usize) < self.levels, "level {level} >= {}", self.levels);
        self.pixels[y * self.width + x] = level;
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    /// Copies the sub-grid `rect`, which must lie inside the image.
    pub fn crop(&self, rect: Rect) -> Vec<u8> {
        assert!(self.bounds().contains_rect(&rect), "crop {rect:?} outside image");
        let mut out = Vec::with_capacity(rect.area());
        for y in rect.y..rect.bottom() {
            let row = y * self.width;
            out.extend_from_slice(&self.pixels[row + rect.x..row + rect.right()]);
        }
        out
    }

    /// Maps levels back onto the full 8-bit range for display and PNG export.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|&l| level_to_intensity(l, self.levels))
                .collect(),
        }
    }
}

/// A value snapshot of a rectangular region of a [`QuantizedImage`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    id: String,
    rect: Rect,
    levels: usize,
    pixels: Vec<u8>,
}

impl Kernel {
    /// Builds a kernel directly from a level grid; used for hand-made test patterns.
    pub fn from_grid(width: usize, height: usize, levels: usize, pixels: Vec<u8>) -> Result<Self> {
        let img = QuantizedImage::new(width, height, levels, pixels)?;
        Ok(Self::extract(&img, img.bounds()))
    }

    pub(crate) fn extract(img: &QuantizedImage, rect: Rect) -> Self {
        Self {
            id: kernel_id(rect),
            rect,
            levels: img.levels,
            pixels: img.crop(rect),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn origin(&self) -> (usize, usize) {
        (self.rect.x, self.rect.y)
    }

    pub fn width(&self) -> usize {
        self.rect.width
    }

    pub fn height(&self) -> usize {
        self.rect.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Level at kernel-local coordinates.
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.rect.width + x]
    }

    pub fn to_image(&self) -> QuantizedImage {
        QuantizedImage {
            width: self.rect.width,
            height: self.rect.height,
            levels: self.levels,
            pixels: self.pixels.clone(),
        }
    }
}

/// Stable id of the form `x{x}y{y}w{w}h{h}`.
pub fn kernel_id(rect: Rect) -> String {
    format!("x{}y{}w{}h{}", rect.x, rect.y, rect.width, rect.height)
}

/// BT.601 luma, rounded and clamped to `[0, 255]`.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let [r, g, b] = rgb.map(f64::from);
    (0.299 * r + 0.587 * g + 0.114 * b).round().clamp(0.0, 255.0) as u8
}

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().copied().map(luma).collect(),
    }
}

/// `floor(intensity * levels / 256)`.
pub fn quantize_intensity(intensity: u8, levels: usize) -> u8 {
    (intensity as usize * levels / 256) as u8
}

/// Display mapping: level 0 is black and `levels - 1` is white. The evenly
/// spread value is clamped into the level's own bin so that
/// `quantize_intensity(level_to_intensity(l, L), L) == l` for every `L`.
pub fn level_to_intensity(level: u8, levels: usize) -> u8 {
    let l = level as usize;
    let spread = (l as f64 * 255.0 / (levels - 1) as f64).round() as usize;
    let lo = (l * 256).div_ceil(levels);
    let hi = ((l + 1) * 256).div_ceil(levels) - 1;
    spread.clamp(lo, hi) as u8
}

pub fn quantize(img: &GrayImage, levels: usize) -> Result<QuantizedImage> {
    check_levels(levels)?;
    Ok(QuantizedImage {
        width: img.width,
        height: img.height,
        levels,
        pixels: img
            .pixels
            .iter()
            .map(|&v| quantize_intensity(v, levels))
            .collect(),
    })
}

/// Top-left corners of every placement of a `size` window stepping by
/// `stride`, row-major. Placements that would cross the right or bottom edge
/// are skipped.
pub fn window_origins(
    image: (usize, usize),
    size: (usize, usize),
    stride: (usize, usize),
) -> Result<Vec<(usize, usize)>> {
    let (iw, ih) = image;
    let (w, h) = size;
    if w == 0 || h == 0 {
        return Err(ImagingError::EmptyKernel(w, h));
    }
    if stride.0 == 0 || stride.1 == 0 {
        return Err(ImagingError::InvalidStride(stride.0, stride.1));
    }
    if w > iw || h > ih {
        return Err(ImagingError::KernelTooLarge {
            kernel_w: w,
            kernel_h: h,
            image_w: iw,
            image_h: ih,
        });
    }
    let xs: Vec<usize> = (0..=iw - w).step_by(stride.0).collect();
    Ok((0..=ih - h)
        .step_by(stride.1)
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect())
}

pub fn tile_kernels(
    img: &QuantizedImage,
    size: (usize, usize),
    stride: (usize, usize),
) -> Result<Vec<Kernel>> {
    Ok(window_origins((img.width, img.height), size, stride)?
        .into_iter()
        .map(|(x, y)| Kernel::extract(img, Rect::new(x, y, size.0, size.1)))
        .collect())
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let decoded = image::open(path).map_err(|source| ImagingError::Decode {
        path: path.display().to_string(),
        source,
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RgbImage::new(w, h, pixels)
}

/// Loads a PNG or JPEG and runs luma conversion plus quantization.
pub fn load_quantized(path: &Path, levels: usize) -> Result<QuantizedImage> {
    quantize(&to_grayscale(&load_rgb(path)?), levels)
}

/// Encodes an 8-bit grayscale PNG with fixed encoder settings so the output
/// bytes depend only on the pixels.
pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    PngEncoder::new_with_quality(&mut buf, CompressionType::Default, FilterType::Adaptive)
        .write_image(
            &img.pixels,
            img.width as u32,
            img.height as u32,
            ExtendedColorType::L8,
        )
        .map_err(ImagingError::Encode)?;
    Ok(buf.into_inner())
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyImage { width, height });
    }
    if len != width * height {
        return Err(ImagingError::BufferSize {
            width,
            height,
            expected: width * height,
            actual: len,
        });
    }
    Ok(())
}

fn check_levels(levels: usize) -> Result<()> {
    if (2..=256).contains(&levels) {
        Ok(())
    } else {
        Err(ImagingError::InvalidLevels(levels))
    }
}
