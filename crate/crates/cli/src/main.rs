use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod run;

use commands::EvalSplit;
use config::PipelineConfig;
use epigraph::haralick::MccMode;

/// Texture-based de-noising and character segmentation of inscription images.
#[derive(Debug, Parser)]
#[command(name = "epigraph", version)]
struct Cli {
    /// Pipeline configuration (TOML). Required by every command except
    /// `init-config` and `label-serve`.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print a complete configuration with the given seed.
    InitConfig {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a synthetic page and its ground truth.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `synth.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-kernel texture features of an image.
    Features {
        image: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write kernel labels sampled from synthetic ground truth.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Also create a kernel labeling session in this directory.
        #[arg(long)]
        session: Option<PathBuf>,
        /// Use the second-largest entry of Q instead of its eigenvalue
        /// (overrides `denoise.mcc_mode`).
        #[arg(long)]
        mcc_literal: bool,
    },
    /// Serve a labeling session on localhost.
    LabelServe {
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value_t = 8077)]
        port: u16,
        /// Static front-end files served at `/`.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Build the noise dictionary from labeled kernels.
    BuildDict {
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace kernels the dictionary classifies as noise.
    Denoise {
        image: PathBuf,
        dictionary: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the second-largest entry of Q instead of its eigenvalue
        /// (overrides `denoise.mcc_mode`).
        #[arg(long)]
        mcc_literal: bool,
    },
    /// Cut overlapping candidate windows.
    Windows {
        image: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write window labels derived from synthetic ground truth.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Also create a segment labeling session in this directory.
        #[arg(long)]
        session: Option<PathBuf>,
    },
    /// Train the window classifier on a labeled `windows` directory.
    Train {
        dataset: PathBuf,
        /// Defaults to `<dataset>/labels.csv`.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `train.iterations`.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Export the windows of an image that the model accepts.
    Segment {
        image: PathBuf,
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `segment.threshold`.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Accuracy of a model on a labeled `windows` directory.
    Evaluate {
        model: PathBuf,
        dataset: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = EvalSplit::Test)]
        split: EvalSplit,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig> {
    let path = path.context("this command needs --config <file>; `epigraph init-config` prints one")?;
    std::fs::metadata(path).with_context(|| format!("missing config {}", path.display()))?;
    PipelineConfig::load(path)
}

fn with_mcc_literal(mut cfg: PipelineConfig, literal: bool) -> PipelineConfig {
    if literal {
        cfg.denoise.mcc_mode = MccMode::LiteralEntry;
    }
    cfg
}

fn run(cli: Cli) -> Result<()> {
    let cfg = || load_config(cli.config.as_ref());
    match cli.command {
        Command::InitConfig { seed } => {
            print!("{}", PipelineConfig::example(seed).to_toml()?);
        }
        Command::LabelServe {
            session,
            port,
            assets,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(epigraph_label_api::serve(&session, port, assets))?;
        }
        Command::Synth { out, seed } => {
            let cfg = cfg()?;
            let out = commands::out_dir(&cfg, out, "synth")?;
            commands::synth(&cfg, &out, seed)?;
        }
        Command::Features {
            image,
            out,
            ground_truth,
            session,
            mcc_literal,
        } => {
            let cfg = with_mcc_literal(cfg()?, mcc_literal);
            let out = commands::out_dir(&cfg, out, "features")?;
            commands::features(&cfg, &image, &out, ground_truth.as_deref(), session.as_deref())?;
        }
        Command::BuildDict { labels, out } => {
            let cfg = cfg()?;
            let out = commands::out_dir(&cfg, out, "build-dict")?;
            commands::build_dict(&cfg, &labels, &out)?;
        }
        Command::Denoise {
            image,
            dictionary,
            out,
            mcc_literal,
        } => {
            let cfg = with_mcc_literal(cfg()?, mcc_literal);
            let out = commands::out_dir(&cfg, out, "denoise")?;
            commands::denoise_cmd(&cfg, &image, &dictionary, &out)?;
        }
        Command::Windows {
            image,
            out,
            ground_truth,
            session,
        } => {
            let cfg = cfg()?;
            let out = commands::out_dir(&cfg, out, "windows")?;
            commands::windows(&cfg, &image, &out, ground_truth.as_deref(), session.as_deref())?;
        }
        Command::Train {
            dataset,
            labels,
            out,
            iterations,
        } => {
            let cfg = cfg()?;
            let out = commands::out_dir(&cfg, out, "train")?;
            commands::train_cmd(&cfg, &dataset, labels.as_deref(), &out, iterations)?;
        }
        Command::Segment {
            image,
            model,
            out,
            threshold,
        } => {
            let cfg = cfg()?;
            let out = commands::out_dir(&cfg, out, "segment")?;
            commands::segment_cmd(&cfg, &image, &model, &out, threshold)?;
        }
        Command::Evaluate {
            model,
            dataset,
            labels,
            split,
            out,
        } => {
            let cfg = cfg()?;
            let out = commands::out_dir(&cfg, out, "evaluate")?;
            commands::evaluate_cmd(&cfg, &model, &dataset, labels.as_deref(), split, &out)?;
        }
    }
    Ok(())
}

/// 2 when an I/O failure is anywhere in the chain, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<std::io::Error>()) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
