//! Seeded generator of inscription-like test pages with exact ground truth.
//!
//! Glyphs are thick-stroked line drawings placed one per grid cell. Noise is
//! confined to whole tiles of a kernel lattice that no glyph touches, so every
//! noise tile is a pure-noise kernel by construction.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{kernel_id, quantize, GrayImage, ImagingError, QuantizedImage, Rect, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub glyph_count: usize,
    /// Side of the square box each glyph is drawn into.
    pub glyph_size: usize,
    /// Glyphs occupy distinct cells of a `cell_size` grid.
    pub cell_size: usize,
    pub stroke_width: usize,
    pub background: u8,
    pub ink: u8,
    pub noise: NoiseConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 320,
            height: 320,
            levels: super::DEFAULT_LEVELS,
            glyph_count: 40,
            glyph_size: 20,
            cell_size: 32,
            stroke_width: 3,
            background: 230,
            ink: 40,
            noise: NoiseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    /// Probability that a glyph-free tile receives noise.
    pub density: f64,
    pub tile_size: usize,
    /// Speck centres per tile pixel.
    pub coverage: f64,
    pub min_intensity: u8,
    pub max_intensity: u8,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Speckle { max_radius: 1.0 },
            density: 0.5,
            tile_size: 20,
            coverage: 0.08,
            min_intensity: 30,
            max_intensity: 130,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseKind {
    /// Small round pits, radius drawn uniformly from `[0, max_radius]`.
    Speckle { max_radius: f64 },
    /// Independent per-pixel darkening: every tile pixel is a speck.
    Grain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGroundTruth {
    /// Ids of pure-noise kernels on the `kernel_size` tiling lattice.
    pub noise_kernel_ids: BTreeSet<String>,
    /// Tight ink bounding box of every glyph.
    pub glyph_boxes: Vec<Rect>,
    /// Fraction of glyph ink pixels in every lattice kernel that touches a
    /// glyph box.
    pub glyph_ink: BTreeMap<String, f64>,
    pub kernel_size: usize,
}

/// Smallest glyph ink fraction for a kernel to count as glyph-bearing. Below
/// it the kernel only grazes a stroke and is texturally a speck.
pub const GLYPH_BEARING_MIN_INK: f64 = 0.05;

impl SyntheticGroundTruth {
    pub fn is_noise_kernel(&self, id: &str) -> bool {
        self.noise_kernel_ids.contains(id)
    }

    pub fn touches_glyph(&self, rect: &Rect) -> bool {
        self.glyph_boxes.iter().any(|g| g.intersects(rect))
    }

    pub fn is_glyph_bearing(&self, id: &str) -> bool {
        self.glyph_ink
            .get(id)
            .is_some_and(|&f| f >= GLYPH_BEARING_MIN_INK)
    }
}

type Stroke = &'static [(f64, f64)];

/// Connected stroke drawings in the unit square, y pointing down.
const GLYPHS: &[&[Stroke]] = &[
    &[&[(0.5, 0.0), (0.5, 1.0)], &[(0.0, 0.5), (1.0, 0.5)]],
    &[&[
        (0.0, 1.0),
        (0.0, 0.3),
        (0.15, 0.05),
        (0.5, 0.0),
        (0.85, 0.05),
        (1.0, 0.3),
        (1.0, 1.0),
    ]],
    &[&[(0.0, 1.0), (0.5, 0.0), (1.0, 1.0)]],
    &[&[(0.1, 0.0), (0.1, 1.0), (0.9, 1.0)]],
    &[&[
        (0.5, 0.0),
        (0.85, 0.15),
        (1.0, 0.5),
        (0.85, 0.85),
        (0.5, 1.0),
        (0.15, 0.85),
        (0.0, 0.5),
        (0.15, 0.15),
        (0.5, 0.0),
    ]],
    &[
        &[(0.5, 0.0), (0.5, 1.0)],
        &[
            (0.5, 0.2),
            (0.8, 0.3),
            (0.9, 0.5),
            (0.8, 0.7),
            (0.5, 0.8),
            (0.2, 0.7),
            (0.1, 0.5),
            (0.2, 0.3),
            (0.5, 0.2),
        ],
    ],
    &[&[(0.0, 0.0), (1.0, 0.0)], &[(0.5, 0.0), (0.5, 1.0)]],
    &[
        &[(0.9, 0.0), (0.1, 0.0), (0.1, 1.0), (0.9, 1.0)],
        &[(0.1, 0.5), (0.7, 0.5)],
    ],
    &[&[
        (0.2, 1.0),
        (0.2, 0.0),
        (0.7, 0.0),
        (0.9, 0.25),
        (0.7, 0.5),
        (0.2, 0.5),
    ]],
    &[&[(0.0, 0.0), (0.0, 0.7), (0.5, 1.0), (1.0, 0.7), (1.0, 0.0)]],
    &[&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]],
    &[
        &[(0.1, 0.0), (0.1, 1.0)],
        &[(0.9, 0.0), (0.9, 1.0)],
        &[(0.1, 0.5), (0.9, 0.5)],
    ],
];

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ImagingError::SynthConfig(msg));
        if self.width == 0 || self.height == 0 {
            return Err(ImagingError::EmptyImage {
                width: self.width,
                height: self.height,
            });
        }
        if !(2..=256).contains(&self.levels) {
            return Err(ImagingError::InvalidLevels(self.levels));
        }
        if self.stroke_width == 0 || self.glyph_size <= self.stroke_width {
            return bad(format!(
                "glyph_size {} must exceed stroke_width {} (>= 1)",
                self.glyph_size, self.stroke_width
            ));
        }
        if self.glyph_size > self.cell_size {
            return bad(format!(
                "glyph_size {} exceeds cell_size {}",
                self.glyph_size, self.cell_size
            ));
        }
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.density) || !(0.0..=1.0).contains(&n.coverage) {
            return bad(format!(
                "noise density {} and coverage {} must lie in [0, 1]",
                n.density, n.coverage
            ));
        }
        if n.tile_size == 0 || n.tile_size > self.width.min(self.height) {
            return bad(format!("noise tile_size {} does not fit the canvas", n.tile_size));
        }
        if n.min_intensity > n.max_intensity {
            return bad("noise min_intensity exceeds max_intensity".into());
        }
        if let NoiseKind::Speckle { max_radius } = n.kind {
            if !(max_radius >= 0.0 && max_radius.is_finite()) {
                return bad(format!("speckle max_radius {max_radius} must be >= 0"));
            }
        }
        Ok(())
    }

    fn cell_grid(&self) -> (usize, usize) {
        (self.width / self.cell_size, self.height / self.cell_size)
    }
}

/// Renders a page. Pure function of `(cfg, seed)`.
pub fn render_synthetic(
    cfg: &SynthConfig,
    seed: u64,
) -> Result<(QuantizedImage, SyntheticGroundTruth)> {
    cfg.validate()?;
    let (cols, rows) = cfg.cell_grid();
    let capacity = cols * rows;
    if cfg.glyph_count > capacity {
        return Err(ImagingError::CanvasTooSmall {
            requested: cfg.glyph_count,
            capacity,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut canvas = vec![cfg.background; cfg.width * cfg.height];

    let mut cells: Vec<usize> = (0..capacity).collect();
    cells.shuffle(&mut rng);
    let mut chosen = cells[..cfg.glyph_count].to_vec();
    chosen.sort_unstable();

    let slack = cfg.cell_size - cfg.glyph_size;
    let mut glyph_boxes = Vec::with_capacity(cfg.glyph_count);
    for cell in chosen {
        let jx = rng.random_range(0..=slack);
        let jy = rng.random_range(0..=slack);
        let origin = (
            (cell % cols) * cfg.cell_size + jx,
            (cell / cols) * cfg.cell_size + jy,
        );
        let shape = GLYPHS[rng.random_range(0..GLYPHS.len())];
        let bbox = draw_glyph(&mut canvas, cfg, origin, shape);
        glyph_boxes.push(bbox);
    }

    let tile = cfg.noise.tile_size;
    let mut noise_kernel_ids = BTreeSet::new();
    let mut glyph_ink = BTreeMap::new();
    for ty in (0..=cfg.height - tile).step_by(tile) {
        for tx in (0..=cfg.width - tile).step_by(tile) {
            let rect = Rect::new(tx, ty, tile, tile);
            if glyph_boxes.iter().any(|g| g.intersects(&rect)) {
                let ink = (ty..ty + tile)
                    .flat_map(|y| (tx..tx + tile).map(move |x| (x, y)))
                    .filter(|&(x, y)| canvas[y * cfg.width + x] == cfg.ink)
                    .count();
                glyph_ink.insert(kernel_id(rect), ink as f64 / (tile * tile) as f64);
                continue;
            }
            // Draw unconditionally so the stream does not depend on density.
            let roll: f64 = rng.random();
            if roll < cfg.noise.density && draw_noise(&mut canvas, cfg, rect, &mut rng) {
                noise_kernel_ids.insert(kernel_id(rect));
            }
        }
    }

    let gray = GrayImage::new(cfg.width, cfg.height, canvas)?;
    let img = quantize(&gray, cfg.levels)?;
    Ok((
        img,
        SyntheticGroundTruth {
            noise_kernel_ids,
            glyph_boxes,
            glyph_ink,
            kernel_size: tile,
        },
    ))
}

/// Returns the tight bounding box of the painted ink.
fn draw_glyph(
    canvas: &mut [u8],
    cfg: &SynthConfig,
    origin: (usize, usize),
    strokes: &[Stroke],
) -> Rect {
    let radius = cfg.stroke_width as f64 / 2.0;
    let margin = radius.floor();
    let span = (cfg.glyph_size - 1) as f64 - 2.0 * margin;
    let to_px = |(u, v): (f64, f64)| {
        (
            origin.0 as f64 + margin + u * span,
            origin.1 as f64 + margin + v * span,
        )
    };
    let segments: Vec<_> = strokes
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (to_px(w[0]), to_px(w[1]))))
        .collect();

    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in origin.1..origin.1 + cfg.glyph_size {
        for x in origin.0..origin.0 + cfg.glyph_size {
            let p = (x as f64, y as f64);
            if segments
                .iter()
                .any(|&(a, b)| segment_distance(p, a, b) <= radius)
            {
                canvas[y * cfg.width + x] = cfg.ink;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

/// Paints noise clipped to `rect`; false if nothing was painted.
fn draw_noise(canvas: &mut [u8], cfg: &SynthConfig, rect: Rect, rng: &mut ChaCha8Rng) -> bool {
    let n = &cfg.noise;
    let mut painted = false;
    let shade = |rng: &mut ChaCha8Rng| rng.random_range(n.min_intensity..=n.max_intensity);
    match n.kind {
        NoiseKind::Grain => {
            for y in rect.y..rect.bottom() {
                for x in rect.x..rect.right() {
                    canvas[y * cfg.width + x] = shade(rng);
                }
            }
            painted = true;
        }
        NoiseKind::Speckle { max_radius } => {
            let count = (n.coverage * rect.area() as f64).round() as usize;
            for _ in 0..count {
                let cx = rng.random_range(rect.x..rect.right()) as isize;
                let cy = rng.random_range(rect.y..rect.bottom()) as isize;
                let r = rng.random::<f64>() * max_radius;
                let value = shade(rng);
                let reach = r.floor() as isize;
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        if ((dx * dx + dy * dy) as f64) > r * r {
                            continue;
                        }
                        let (x, y) = (cx + dx, cy + dy);
                        if x < rect.x as isize
                            || y < rect.y as isize
                            || x >= rect.right() as isize
                            || y >= rect.bottom() as isize
                        {
                            continue;
                        }
                        canvas[y as usize * cfg.width + x as usize] = value;
                        painted = true;
                    }
                }
            }
        }
    }
    painted
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}
