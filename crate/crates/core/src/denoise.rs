//! MCC dictionary and kernel-replacement denoising.
//!
//! A human labels a few hundred kernels into four classes. The labeled MCC
//! values give each class a value range, and every kernel of a new image is
//! classified against those ranges. Kernels that land in a replaced class are
//! painted over.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::haralick::{kernel_features_with, HaralickError, HaralickOptions, MccMode};
use crate::imaging::{
    tile_kernels, ImagingError, Kernel, QuantizedImage, Rect, SyntheticGroundTruth,
};

pub const DICTIONARY_FORMAT: u32 = 1;

/// Side of the square painted over a flagged kernel in [`FillMode::Box10x10`].
pub const FILL_BOX: usize = 10;

#[derive(Debug, Error)]
pub enum DenoiseError {
    #[error("dictionary requires labeled observations")]
    EmptyDictionary,
    #[error("observation {kernel_id} has non-finite MCC {mcc}")]
    NonFinite { kernel_id: String, mcc: f64 },
    #[error("unknown kernel class {0:?}")]
    UnknownClass(String),
    #[error("dictionary format {found} is not supported (expected {expected})")]
    Format { found: u32, expected: u32 },
    #[error("dictionary ranges do not match its observations")]
    InconsistentRanges,
    #[error("invalid denoise configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Haralick(#[from] HaralickError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DenoiseError> = std::result::Result<T, E>;

/// Manual kernel classes, ordered from pure noise to pure text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelClass {
    Noise,
    MostlyNoise,
    MostlyText,
    Text,
}

impl KernelClass {
    pub const ALL: [KernelClass; 4] = [
        KernelClass::Noise,
        KernelClass::MostlyNoise,
        KernelClass::MostlyText,
        KernelClass::Text,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelClass::Noise => "Noise",
            KernelClass::MostlyNoise => "MostlyNoise",
            KernelClass::MostlyText => "MostlyText",
            KernelClass::Text => "Text",
        }
    }
}

impl fmt::Display for KernelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelClass {
    type Err = DenoiseError;

    /// Accepts `MostlyNoise`, `Mostly Noise`, `mostly_noise`, `mostly-noise`...
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "noise" => Ok(KernelClass::Noise),
            "mostlynoise" => Ok(KernelClass::MostlyNoise),
            "mostlytext" => Ok(KernelClass::MostlyText),
            "text" => Ok(KernelClass::Text),
            _ => Err(DenoiseError::UnknownClass(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub kernel_id: String,
    pub mcc: f64,
    pub class: KernelClass,
}

impl Observation {
    pub fn new(kernel_id: impl Into<String>, mcc: f64, class: KernelClass) -> Self {
        Self {
            kernel_id: kernel_id.into(),
            mcc,
            class,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRange {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

impl ClassRange {
    pub fn contains(&self, value: f64) -> bool {
        self.min <= value && value <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDictionary {
    observations: Vec<Observation>,
    ranges: BTreeMap<KernelClass, ClassRange>,
}

#[derive(Serialize, Deserialize)]
struct DictionaryFile {
    format: u32,
    #[serde(flatten)]
    dictionary: NoiseDictionary,
}

pub fn build_dictionary(labeled: Vec<Observation>) -> Result<NoiseDictionary> {
    if labeled.is_empty() {
        return Err(DenoiseError::EmptyDictionary);
    }
    if let Some(bad) = labeled.iter().find(|o| !o.mcc.is_finite()) {
        return Err(DenoiseError::NonFinite {
            kernel_id: bad.kernel_id.clone(),
            mcc: bad.mcc,
        });
    }
    let ranges = derive_ranges(&labeled);
    Ok(NoiseDictionary {
        observations: labeled,
        ranges,
    })
}

fn derive_ranges(observations: &[Observation]) -> BTreeMap<KernelClass, ClassRange> {
    let mut ranges = BTreeMap::new();
    for class in KernelClass::ALL {
        let values: Vec<f64> = observations
            .iter()
            .filter(|o| o.class == class)
            .map(|o| o.mcc)
            .collect();
        if values.is_empty() {
            continue;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Guard the mean against rounding outside [min, max].
        let mean = (values.iter().sum::<f64>() / values.len() as f64).clamp(min, max);
        ranges.insert(
            class,
            ClassRange {
                min,
                max,
                mean,
                count: values.len(),
            },
        );
    }
    ranges
}

impl NoiseDictionary {
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn ranges(&self) -> &BTreeMap<KernelClass, ClassRange> {
        &self.ranges
    }

    pub fn range(&self, class: KernelClass) -> Option<&ClassRange> {
        self.ranges.get(&class)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DictionaryFile {
            format: DICTIONARY_FORMAT,
            dictionary: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("format").and_then(|f| f.as_u64()).unwrap_or(0) as u32;
        if found != DICTIONARY_FORMAT {
            return Err(DenoiseError::Format {
                found,
                expected: DICTIONARY_FORMAT,
            });
        }
        let file: DictionaryFile = serde_json::from_value(value)?;
        let rebuilt = build_dictionary(file.dictionary.observations)?;
        if rebuilt.ranges != file.dictionary.ranges {
            return Err(DenoiseError::InconsistentRanges);
        }
        Ok(rebuilt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Scatter export, one `mcc,class` row per observation.
    pub fn write_scatter_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mcc", "class"])?;
        for o in &self.observations {
            w.write_record([format!("{:.16e}", o.mcc), o.class.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads `kernel_id,mcc,class` label exports.
pub fn read_labels_csv<R: Read>(input: R) -> Result<Vec<Observation>> {
    #[derive(Deserialize)]
    struct Row {
        kernel_id: String,
        mcc: f64,
        class: String,
    }
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(Observation {
                kernel_id: row.kernel_id,
                mcc: row.mcc,
                class: row.class.parse()?,
            })
        })
        .collect()
}

pub fn write_labels_csv<W: Write>(observations: &[Observation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kernel_id", "mcc", "class"])?;
    for o in observations {
        w.write_record([o.kernel_id.clone(), format!("{:.16e}", o.mcc), o.class.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Stand-in for a human labeler on synthetic pages: a seeded sample of up to
/// `per_class` pure-noise kernels labeled Noise and as many glyph-bearing
/// kernels labeled Text, returned in input order. Other kernels stay
/// unlabeled.
pub fn sample_labels_from_ground_truth<'a>(
    kernels: impl IntoIterator<Item = (&'a str, f64)>,
    truth: &SyntheticGroundTruth,
    per_class: usize,
    seed: u64,
) -> Vec<Observation> {
    let kernels: Vec<(&str, f64)> = kernels.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |class: KernelClass, wanted: &dyn Fn(&str) -> bool| {
        let mut idx: Vec<usize> = (0..kernels.len()).filter(|&i| wanted(kernels[i].0)).collect();
        idx.shuffle(&mut rng);
        idx.truncate(per_class);
        idx.into_iter().map(move |i| (i, class)).collect::<Vec<_>>()
    };
    let mut chosen = pick(KernelClass::Noise, &|id| truth.is_noise_kernel(id));
    chosen.extend(pick(KernelClass::Text, &|id| truth.is_glyph_bearing(id)));
    chosen.sort_unstable_by_key(|&(i, _)| i);
    chosen
        .into_iter()
        .map(|(i, class)| Observation::new(kernels[i].0, kernels[i].1, class))
        .collect()
}

/// A value inside exactly one class range takes that class. Otherwise the
/// nearest class mean wins, among the containing ranges when several overlap
/// and among all classes when none does. Ties go to the larger count, then to
/// the earlier class.
pub fn classify_mcc(value: f64, dict: &NoiseDictionary) -> KernelClass {
    let containing: Vec<_> = dict
        .ranges
        .iter()
        .filter(|(_, r)| r.contains(value))
        .collect();
    let candidates = if containing.is_empty() {
        dict.ranges.iter().collect()
    } else {
        containing
    };
    candidates
        .into_iter()
        .min_by(|(ca, a), (cb, b)| {
            (value - a.mean)
                .abs()
                .total_cmp(&(value - b.mean).abs())
                .then(b.count.cmp(&a.count))
                .then(ca.cmp(cb))
        })
        .map(|(c, _)| *c)
        .expect("dictionary has at least one class")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillMode {
    /// Centered 10x10 block inside the flagged kernel.
    #[default]
    #[serde(rename = "box_10x10")]
    Box10x10,
    FullKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub kernel_size: (usize, usize),
    pub replace_classes: BTreeSet<KernelClass>,
    pub fill_mode: FillMode,
    pub fill_level: u8,
    #[serde(default)]
    pub mcc_mode: MccMode,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            kernel_size: (20, 20),
            replace_classes: BTreeSet::from([KernelClass::Noise]),
            fill_mode: FillMode::Box10x10,
            fill_level: 0,
            mcc_mode: MccMode::Eigenvalue,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replace_classes.is_empty() {
            return Err(DenoiseError::Config("replace_classes must not be empty".into()));
        }
        let (w, h) = self.kernel_size;
        if w < 2 || h < 2 {
            return Err(DenoiseError::Config(format!(
                "kernel {w}x{h} admits no diagonal pixel pairs"
            )));
        }
        if self.fill_mode == FillMode::Box10x10 && (w < FILL_BOX || h < FILL_BOX) {
            return Err(DenoiseError::Config(format!(
                "fill box {FILL_BOX}x{FILL_BOX} exceeds kernel {w}x{h}"
            )));
        }
        Ok(())
    }

    pub fn haralick_options(&self) -> HaralickOptions {
        HaralickOptions {
            mcc_mode: self.mcc_mode,
            ..HaralickOptions::default()
        }
    }

    /// Region painted when the kernel at `kernel` is flagged.
    pub fn fill_rect(&self, kernel: Rect) -> Rect {
        match self.fill_mode {
            FillMode::FullKernel => kernel,
            FillMode::Box10x10 => Rect::new(
                kernel.x + (kernel.width - FILL_BOX) / 2,
                kernel.y + (kernel.height - FILL_BOX) / 2,
                FILL_BOX,
                FILL_BOX,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAssessment {
    pub kernel_id: String,
    pub rect: Rect,
    pub mcc: f64,
    pub class: KernelClass,
    pub replaced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseResult {
    pub image: QuantizedImage,
    pub mask: Vec<KernelAssessment>,
    pub replaced_count: usize,
}

impl DenoiseResult {
    pub fn write_mask_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kernel_id", "mcc", "class", "replaced"])?;
        for a in &self.mask {
            w.write_record([
                a.kernel_id.clone(),
                format!("{:.16e}", a.mcc),
                a.class.to_string(),
                a.replaced.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Averaged-direction MCC for every kernel, in input order.
pub fn kernel_mccs(kernels: &[Kernel], opts: &HaralickOptions) -> Result<Vec<f64>> {
    kernels
        .par_iter()
        .map(|k| Ok(kernel_features_with(k, opts)?.mcc()))
        .collect()
}

pub fn denoise(
    img: &QuantizedImage,
    dict: &NoiseDictionary,
    cfg: &DenoiseConfig,
) -> Result<DenoiseResult> {
    cfg.validate()?;
    if cfg.fill_level as usize >= img.levels() {
        return Err(DenoiseError::Config(format!(
            "fill_level {} is not below the image's {} levels",
            cfg.fill_level,
            img.levels()
        )));
    }
    let kernels = tile_kernels(img, cfg.kernel_size, cfg.kernel_size)?;
    let mccs = kernel_mccs(&kernels, &cfg.haralick_options())?;

    let mut image = img.clone();
    let mut mask = Vec::with_capacity(kernels.len());
    for (kernel, mcc) in kernels.iter().zip(mccs) {
        let class = classify_mcc(mcc, dict);
        let replaced = cfg.replace_classes.contains(&class);
        if replaced {
            let fill = cfg.fill_rect(kernel.rect());
            for y in fill.y..fill.bottom() {
                for x in fill.x..fill.right() {
                    image.set(x, y, cfg.fill_level);
                }
            }
        }
        mask.push(KernelAssessment {
            kernel_id: kernel.id().to_string(),
            rect: kernel.rect(),
            mcc,
            class,
            replaced,
        });
    }
    let replaced_count = mask.iter().filter(|a| a.replaced).count();
    Ok(DenoiseResult {
        image,
        mask,
        replaced_count,
    })
}
