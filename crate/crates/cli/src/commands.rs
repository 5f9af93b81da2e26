use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use epigraph::denoise::{
    build_dictionary, denoise, read_labels_csv, sample_labels_from_ground_truth, write_labels_csv,
    NoiseDictionary,
};
use epigraph::haralick::{features_for_kernels, write_features_csv, HaralickOptions};
use epigraph::imaging::{
    encode_png, load_quantized, render_synthetic, save_png, tile_kernels, QuantizedImage,
    SyntheticGroundTruth,
};
use epigraph::nn::{
    evaluate, init_network, load_model, save_model, split_dataset, train, Dataset, Evaluation,
};
use epigraph::segment::{
    apply_labels, extract_valid, label_from_ground_truth, load_segment_dir, read_labels,
    slide_windows, write_labels, write_segment_dir, MANIFEST_FILE,
};
use epigraph_label_api::{NewTask, Session, TaskKind, TaskMeta};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::run::RunManifest;

pub const PAGE_FILE: &str = "page.png";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const KERNEL_LABELS_FILE: &str = "kernel_labels.csv";
pub const DICTIONARY_FILE: &str = "dictionary.json";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const DENOISED_FILE: &str = "denoised.png";
pub const MASK_FILE: &str = "mask.csv";
pub const SEGMENT_LABELS_FILE: &str = "labels.csv";
pub const MODEL_FILE: &str = "model.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const REPORT_FILE: &str = "report.json";
pub const EVALUATION_FILE: &str = "evaluation.json";

/// Resolves and creates the output directory of one command.
pub fn out_dir(cfg: &PipelineConfig, explicit: Option<PathBuf>, command: &str) -> Result<PathBuf> {
    let dir = explicit.unwrap_or_else(|| cfg.paths.output_dir.join(command));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

/// Fails with an I/O error naming the path when an input is missing.
fn require(path: &Path) -> Result<()> {
    std::fs::metadata(path).with_context(|| format!("missing input {}", path.display()))?;
    Ok(())
}

fn load_image(cfg: &PipelineConfig, path: &Path) -> Result<QuantizedImage> {
    require(path)?;
    Ok(load_quantized(path, cfg.features.levels)?)
}

fn load_ground_truth(path: &Path) -> Result<SyntheticGroundTruth> {
    require(path)?;
    let text = std::fs::read(path)?;
    serde_json::from_slice(&text).with_context(|| format!("invalid ground truth {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn csv_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn synth(cfg: &PipelineConfig, out: &Path, seed: Option<u64>) -> Result<()> {
    let seed = seed.unwrap_or(cfg.synth.seed);
    let (img, truth) = render_synthetic(&cfg.synth.page, seed)?;
    save_png(&img.to_gray(), &out.join(PAGE_FILE))?;
    write_json(&truth, &out.join(GROUND_TRUTH_FILE))?;
    RunManifest::new("synth").parameter("seed", seed).write(cfg, out)?;
    println!(
        "{}x{} page with {} glyphs and {} noise kernels",
        img.width(),
        img.height(),
        truth.glyph_boxes.len(),
        truth.noise_kernel_ids.len()
    );
    Ok(())
}

pub fn features(
    cfg: &PipelineConfig,
    image: &Path,
    out: &Path,
    ground_truth: Option<&Path>,
    session: Option<&Path>,
) -> Result<()> {
    let img = load_image(cfg, image)?;
    let kernels = tile_kernels(&img, cfg.denoise.kernel_size, cfg.kernel_stride())?;
    let opts = HaralickOptions {
        mcc_mode: cfg.denoise.mcc_mode,
        ..HaralickOptions::default()
    };
    let feats = features_for_kernels(&kernels, &opts)?;
    write_features_csv(
        csv_file(&out.join(FEATURES_FILE))?,
        kernels.iter().map(|k| k.id()).zip(&feats),
    )?;

    let mut run = RunManifest::new("features");
    run.input(image);
    if let Some(gt_path) = ground_truth {
        let truth = load_ground_truth(gt_path)?;
        let labels = sample_labels_from_ground_truth(
            kernels.iter().map(|k| k.id()).zip(feats.iter().map(|f| f.mcc())),
            &truth,
            cfg.features.labels_per_class,
            cfg.features.label_seed,
        );
        write_labels_csv(&labels, csv_file(&out.join(KERNEL_LABELS_FILE))?)?;
        run.input(gt_path);
        println!("{} kernels labeled from ground truth", labels.len());
    }
    if let Some(dir) = session {
        let tasks = kernels
            .iter()
            .zip(&feats)
            .map(|(k, f)| {
                Ok(NewTask {
                    meta: TaskMeta {
                        id: k.id().to_string(),
                        kind: TaskKind::Kernel,
                        mcc: Some(f.mcc()),
                    },
                    png: encode_png(&k.to_image().to_gray())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Session::create(dir, tasks)?;
        println!("labeling session written to {}", dir.display());
    }
    run.write(cfg, out)?;
    println!("{} kernels", kernels.len());
    Ok(())
}

pub fn build_dict(cfg: &PipelineConfig, labels: &Path, out: &Path) -> Result<()> {
    require(labels)?;
    let observations = read_labels_csv(std::fs::File::open(labels)?)
        .with_context(|| format!("invalid labels {}", labels.display()))?;
    let dict = build_dictionary(observations)?;
    dict.save(&out.join(DICTIONARY_FILE))?;
    dict.write_scatter_csv(csv_file(&out.join(SCATTER_FILE))?)?;
    RunManifest::new("build-dict").input(labels).write(cfg, out)?;
    for (class, r) in dict.ranges() {
        println!(
            "{class}: [{:.5}, {:.5}] mean {:.5} ({} kernels)",
            r.min, r.max, r.mean, r.count
        );
    }
    Ok(())
}

pub fn denoise_cmd(cfg: &PipelineConfig, image: &Path, dict_path: &Path, out: &Path) -> Result<()> {
    let img = load_image(cfg, image)?;
    require(dict_path)?;
    let dict = NoiseDictionary::load(dict_path)?;
    let result = denoise(&img, &dict, &cfg.denoise)?;
    save_png(&result.image.to_gray(), &out.join(DENOISED_FILE))?;
    result.write_mask_csv(csv_file(&out.join(MASK_FILE))?)?;
    RunManifest::new("denoise")
        .input(image)
        .input(dict_path)
        .write(cfg, out)?;
    println!("{} of {} kernels replaced", result.replaced_count, result.mask.len());
    Ok(())
}

pub fn windows(
    cfg: &PipelineConfig,
    image: &Path,
    out: &Path,
    ground_truth: Option<&Path>,
    session: Option<&Path>,
) -> Result<()> {
    let img = load_image(cfg, image)?;
    let segments = slide_windows(&img, &cfg.windows)?;
    write_segment_dir(&segments, out)?;

    let mut run = RunManifest::new("windows");
    run.input(image);
    if let Some(gt_path) = ground_truth {
        let truth = load_ground_truth(gt_path)?;
        let labels: Vec<_> = segments
            .iter()
            .filter_map(|s| Some((s.id.clone(), label_from_ground_truth(&s.rect, &truth)?)))
            .collect();
        write_labels(&labels, csv_file(&out.join(SEGMENT_LABELS_FILE))?)?;
        run.input(gt_path);
        println!("{} windows labeled from ground truth", labels.len());
    }
    if let Some(dir) = session {
        let tasks = segments
            .iter()
            .map(|s| {
                Ok(NewTask {
                    meta: TaskMeta {
                        id: s.id.clone(),
                        kind: TaskKind::Segment,
                        mcc: None,
                    },
                    png: encode_png(&s.to_image().to_gray())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Session::create(dir, tasks)?;
        println!("labeling session written to {}", dir.display());
    }
    run.write(cfg, out)?;
    println!("{} windows", segments.len());
    Ok(())
}

/// Labeled windows of a `windows` output directory as network inputs.
fn load_dataset(cfg: &PipelineConfig, dir: &Path, labels: Option<&Path>) -> Result<(Dataset, PathBuf)> {
    require(&dir.join(MANIFEST_FILE))?;
    let labels = labels
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(SEGMENT_LABELS_FILE));
    require(&labels)?;
    let segments = load_segment_dir(dir, cfg.features.levels)?;
    let labels_list = read_labels(std::fs::File::open(&labels)?)
        .with_context(|| format!("invalid labels {}", labels.display()))?;
    let ds = apply_labels(segments, &labels_list)?;
    Ok((ds.to_dataset(cfg.network.input_dims)?, labels))
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    train_size: usize,
    test_size: usize,
    iterations: usize,
    initial_cost: f64,
    final_cost: f64,
    train_accuracy: f64,
    test_accuracy: f64,
    warnings: Vec<String>,
}

pub fn train_cmd(
    cfg: &PipelineConfig,
    dataset: &Path,
    labels: Option<&Path>,
    out: &Path,
    iterations: Option<usize>,
) -> Result<()> {
    let mut train_cfg = cfg.train.clone();
    if let Some(n) = iterations {
        train_cfg.iterations = n;
    }
    train_cfg.validate()?;
    let (data, labels_path) = load_dataset(cfg, dataset, labels)?;
    let split = split_dataset(&data, train_cfg.split_ratio, train_cfg.seed)?;
    for w in split.warnings() {
        eprintln!("warning: {w}");
    }
    let arch = cfg.network.architecture()?;
    let (model, mut report) = train(init_network(&arch, &train_cfg), &split.train, &train_cfg)?;
    let test = evaluate(&model, &split.test)?;
    report.test_accuracy = Some(test.accuracy);

    save_model(&model, &out.join(MODEL_FILE))?;
    report.write_curve_csv(csv_file(&out.join(CURVE_FILE))?)?;
    let costs = &report.cost_per_iteration;
    write_json(
        &TrainSummary {
            train_size: split.train.len(),
            test_size: split.test.len(),
            iterations: costs.len(),
            initial_cost: costs[0],
            final_cost: costs[costs.len() - 1],
            train_accuracy: report.train_accuracy,
            test_accuracy: test.accuracy,
            warnings: split.warnings(),
        },
        &out.join(REPORT_FILE),
    )?;
    RunManifest::new("train")
        .input(&dataset.join(MANIFEST_FILE))
        .input(&labels_path)
        .parameter("iterations", train_cfg.iterations)
        .write(cfg, out)?;
    println!(
        "cost {:.6} -> {:.6}; train accuracy {:.4}; test accuracy {:.4}",
        costs[0],
        costs[costs.len() - 1],
        report.train_accuracy,
        test.accuracy
    );
    Ok(())
}

pub fn segment_cmd(
    cfg: &PipelineConfig,
    image: &Path,
    model_path: &Path,
    out: &Path,
    threshold: Option<f64>,
) -> Result<()> {
    let threshold = threshold.unwrap_or(cfg.segment.threshold);
    ensure!(
        (0.0..=1.0).contains(&threshold),
        "threshold must lie in [0, 1], got {threshold}"
    );
    let img = load_image(cfg, image)?;
    require(model_path)?;
    let model = load_model(model_path)?;
    let segments = slide_windows(&img, &cfg.windows)?;
    let valid = extract_valid(&segments, &model, threshold, cfg.network.input_dims, out)?;
    RunManifest::new("segment")
        .input(image)
        .input(model_path)
        .parameter("threshold", threshold)
        .write(cfg, out)?;
    println!("{} of {} windows accepted", valid.len(), segments.len());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalSplit {
    /// The held-out part of the seeded split used by `train`.
    Test,
    All,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    split: &'static str,
    samples: usize,
    #[serde(flatten)]
    evaluation: Evaluation,
}

pub fn evaluate_cmd(
    cfg: &PipelineConfig,
    model_path: &Path,
    dataset: &Path,
    labels: Option<&Path>,
    split: EvalSplit,
    out: &Path,
) -> Result<()> {
    require(model_path)?;
    let model = load_model(model_path)?;
    let (data, labels_path) = load_dataset(cfg, dataset, labels)?;
    let (name, data) = match split {
        EvalSplit::All => ("all", data),
        EvalSplit::Test => (
            "test",
            split_dataset(&data, cfg.train.split_ratio, cfg.train.seed)?.test,
        ),
    };
    let evaluation = evaluate(&model, &data)?;
    write_json(
        &EvalReport {
            split: name,
            samples: data.len(),
            evaluation,
        },
        &out.join(EVALUATION_FILE),
    )?;
    RunManifest::new("evaluate")
        .input(model_path)
        .input(&dataset.join(MANIFEST_FILE))
        .input(&labels_path)
        .parameter("split", name)
        .write(cfg, out)?;
    println!(
        "accuracy {:.4} on {} {name} samples (tp {}, fp {}, tn {}, fn {})",
        evaluation.accuracy,
        data.len(),
        evaluation.true_positive,
        evaluation.false_positive,
        evaluation.true_negative,
        evaluation.false_negative
    );
    Ok(())
}
