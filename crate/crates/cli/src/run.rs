//! `run.json`: what a command read and under which configuration. No
//! timestamps or absolute paths, so identical runs produce identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, PipelineConfig};

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Serialize)]
struct InputRecord {
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    inputs: Vec<InputRecord>,
    parameters: &'a BTreeMap<String, String>,
}

pub struct RunManifest {
    command: &'static str,
    inputs: Vec<PathBuf>,
    parameters: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn parameter(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn write(&self, cfg: &PipelineConfig, out_dir: &Path) -> Result<()> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                let bytes =
                    std::fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
                Ok(InputRecord {
                    name: p
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    sha256: hex(&Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let record = RunRecord {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: cfg.hash()?,
            inputs,
            parameters: &self.parameters,
        };
        let mut text = serde_json::to_string_pretty(&record)?;
        text.push('\n');
        std::fs::write(out_dir.join(RUN_FILE), text)?;
        Ok(())
    }
}
