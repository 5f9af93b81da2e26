//! The pipeline configuration file.
//!
//! Every seed is a required key, so a run can always be replayed from its
//! config alone. Everything else has a default.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use epigraph::denoise::DenoiseConfig;
use epigraph::imaging::SynthConfig;
use epigraph::nn::{Architecture, TrainConfig};
use epigraph::segment::WindowConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub synth: SynthSection,
    pub features: FeatureSection,
    #[serde(default)]
    pub denoise: DenoiseConfig,
    #[serde(default)]
    pub windows: WindowConfig,
    #[serde(default)]
    pub network: NetworkSection,
    pub train: TrainConfig,
    #[serde(default)]
    pub segment: SegmentSection,
    #[serde(default)]
    pub paths: PathSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub seed: u64,
    #[serde(default)]
    pub page: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    /// Gray levels used when loading any image.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Kernel step; the kernel size is `denoise.kernel_size`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<(usize, usize)>,
    /// Kernels per class sampled when labels come from ground truth.
    #[serde(default = "default_labels_per_class")]
    pub labels_per_class: usize,
    pub label_seed: u64,
}

fn default_levels() -> usize {
    epigraph::imaging::DEFAULT_LEVELS
}

fn default_labels_per_class() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Windows are resampled to this size before entering the network.
    pub input_dims: (usize, usize),
    pub hidden: Vec<usize>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            input_dims: (16, 16),
            hidden: vec![64],
        }
    }
}

impl NetworkSection {
    pub fn architecture(&self) -> Result<Architecture> {
        let mut layers = vec![self.input_dims.0 * self.input_dims.1];
        layers.extend(&self.hidden);
        layers.push(1);
        Ok(Architecture::new(layers)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSection {
    pub threshold: f64,
}

impl Default for SegmentSection {
    fn default() -> Self {
        Self {
            threshold: epigraph::nn::DECISION_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSection {
    pub session_dir: PathBuf,
    /// Commands write to `<output_dir>/<command>` unless `--out` is given.
    pub output_dir: PathBuf,
}

impl Default for PathSection {
    fn default() -> Self {
        Self {
            session_dir: PathBuf::from("session"),
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl PipelineConfig {
    /// Defaults for a synthetic run, with explicit seeds.
    pub fn example(seed: u64) -> Self {
        Self {
            synth: SynthSection {
                seed,
                page: SynthConfig {
                    width: 640,
                    height: 640,
                    glyph_count: 160,
                    ..SynthConfig::default()
                },
            },
            features: FeatureSection {
                levels: default_levels(),
                stride: None,
                labels_per_class: default_labels_per_class(),
                label_seed: seed,
            },
            denoise: DenoiseConfig::default(),
            windows: WindowConfig::default(),
            network: NetworkSection::default(),
            train: TrainConfig::with_seed(seed),
            segment: SegmentSection::default(),
            paths: PathSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid pipeline config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical serialization, so comments and key order in
    /// the source file do not change it.
    pub fn hash(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn kernel_stride(&self) -> (usize, usize) {
        self.features.stride.unwrap_or(self.denoise.kernel_size)
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.features.levels;
        ensure!(
            (2..=256).contains(&levels),
            "features.levels must lie in 2..=256, got {levels}"
        );
        ensure!(
            self.synth.page.levels == levels,
            "synth.page.levels ({}) must equal features.levels ({levels})",
            self.synth.page.levels
        );
        self.synth.page.validate()?;
        self.denoise.validate()?;
        if self.denoise.fill_level as usize >= levels {
            bail!(
                "denoise.fill_level {} must be below features.levels {levels}",
                self.denoise.fill_level
            );
        }
        let (sx, sy) = self.kernel_stride();
        ensure!(sx > 0 && sy > 0, "features.stride must be positive");
        self.windows.validate()?;
        let (w, h) = self.network.input_dims;
        ensure!(w > 0 && h > 0, "network.input_dims must be positive");
        self.network.architecture()?;
        self.train.validate()?;
        let t = self.segment.threshold;
        ensure!(
            (0.0..=1.0).contains(&t),
            "segment.threshold must lie in [0, 1], got {t}"
        );
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let cfg = PipelineConfig::example(3);
        let text = cfg.to_toml().unwrap();
        let back = PipelineConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn minimal_file_needs_only_seeds() {
        let cfg = PipelineConfig::parse(
            "[synth]\nseed = 1\n[features]\nlabel_seed = 2\n[train]\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.train.iterations, 2000);
        assert_eq!(cfg.network.architecture().unwrap().layer_sizes(), [256, 64, 1]);
        let round = PipelineConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn missing_seed_is_rejected() {
        let err = PipelineConfig::parse("[synth]\nseed = 1\n[features]\nlabel_seed = 2\n[train]\n")
            .unwrap_err();
        assert!(format!("{err:#}").contains("seed"), "{err:#}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut cfg = PipelineConfig::example(0);
        cfg.segment.threshold = 1.5;
        assert!(PipelineConfig::parse(&cfg.to_toml().unwrap()).is_err());
        let mut cfg = PipelineConfig::example(0);
        cfg.denoise.fill_level = 16;
        assert!(PipelineConfig::parse(&cfg.to_toml().unwrap()).is_err());
        assert!(PipelineConfig::parse("[bogus]\n").is_err());
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = PipelineConfig::parse("[synth]\nseed = 1\n[features]\nlabel_seed = 2\n[train]\nseed = 3\n").unwrap();
        let b = PipelineConfig::parse("# comment\n[train]\nseed=3\n[features]\nlabel_seed=2\n[synth]\nseed=1\n").unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    }
}
