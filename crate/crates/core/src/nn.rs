//! Feed-forward binary classifier trained by full-batch gradient descent.
//!
//! Hidden layers use ReLU, the single output unit a sigmoid, and the loss is
//! mean binary cross-entropy. Weight matrices are stored `fan_out x fan_in`,
//! so a layer computes `z = W a + b`.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub const MODEL_FORMAT: u32 = 1;

/// Constant used by [`InitMode::Constant09`].
pub const CONSTANT_INIT_WEIGHT: f64 = 0.9;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("architecture needs an input layer, at least one hidden layer and a single output unit, got {0:?}")]
    Architecture(Vec<usize>),
    #[error("input has {actual} values but the network expects {expected}")]
    InputSize { expected: usize, actual: usize },
    #[error("layer {layer}: parameter shape {actual:?} does not chain, expected {expected:?}")]
    Shape {
        layer: usize,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("dataset has {0} samples, need at least 2 to split")]
    TooFewSamples(usize),
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("divergence: cost is not finite at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model format {found} is not supported (this build reads format {supported})")]
    Version { found: u64, supported: u32 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

/// Passes NaN through so a diverged network is reported rather than masked.
pub fn relu(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        x
    }
}

/// Subgradient of ReLU, taken as 0 at the kink.
fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `target`, evaluated
/// without forming the probability.
pub fn bce_from_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Architecture {
    layer_sizes: Vec<usize>,
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 3
            || layer_sizes.contains(&0)
            || layer_sizes.last() != Some(&1)
        {
            return Err(NnError::Architecture(layer_sizes));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }
}

impl TryFrom<Vec<usize>> for Architecture {
    type Error = NnError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Architecture> for Vec<usize> {
    fn from(a: Architecture) -> Self {
        a.layer_sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitMode {
    /// Every weight 0.9, every bias 0.
    #[serde(rename = "constant_0_9")]
    Constant09,
    /// Glorot-uniform weights from a seeded stream, biases 0.
    #[default]
    #[serde(rename = "seeded_uniform")]
    SeededUniform,
}

fn default_iterations() -> usize {
    2000
}

fn default_learning_rate() -> f64 {
    0.01
}

fn default_split_ratio() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub init_mode: InitMode,
    /// Drives both weight initialization and the train/test shuffle.
    pub seed: u64,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            iterations: default_iterations(),
            learning_rate: default_learning_rate(),
            init_mode: InitMode::default(),
            seed,
            split_ratio: default_split_ratio(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(NnError::Config("iterations must be at least 1".into()));
        }
        // Zero is allowed: it freezes the weights.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(NnError::Config(format!(
                "split_ratio must lie strictly between 0 and 1, got {}",
                self.split_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Per-layer values from one forward pass. `post[0]` is the input;
/// `pre[l]` and `post[l + 1]` belong to weight layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub pre: Vec<Array1<f64>>,
    pub post: Vec<Array1<f64>>,
}

impl Activations {
    pub fn output(&self) -> f64 {
        self.post.last().expect("output layer")[0]
    }

    pub fn logit(&self) -> f64 {
        self.pre.last().expect("output layer")[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Network {
    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.len() < 2 || weights.len() != biases.len() {
            return Err(NnError::Architecture(
                weights.iter().map(|w| w.nrows()).collect(),
            ));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if l > 0 && w.ncols() != weights[l - 1].nrows() {
                return Err(NnError::Shape {
                    layer: l,
                    expected: (w.nrows(), weights[l - 1].nrows()),
                    actual: w.dim(),
                });
            }
            if b.len() != w.nrows() {
                return Err(NnError::Shape {
                    layer: l,
                    expected: (w.nrows(), 1),
                    actual: (b.len(), 1),
                });
            }
        }
        let net = Self { weights, biases };
        Architecture::new(net.layer_sizes())?;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.weights[0].ncols())
            .chain(self.weights.iter().map(|w| w.nrows()))
            .collect()
    }

    pub fn input_size(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    fn is_output(&self, layer: usize) -> bool {
        layer + 1 == self.weights.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Activations> {
        if x.len() != self.input_size() {
            return Err(NnError::InputSize {
                expected: self.input_size(),
                actual: x.len(),
            });
        }
        let mut post = vec![Array1::from(x.to_vec())];
        let mut pre = Vec::with_capacity(self.weights.len());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w.dot(post.last().expect("input")) + b;
            let a = if self.is_output(l) {
                z.mapv(sigmoid)
            } else {
                z.mapv(relu)
            };
            pre.push(z);
            post.push(a);
        }
        Ok(Activations { pre, post })
    }

    /// Gradients of the cross-entropy of one sample. `target` is 0 or 1.
    pub fn backward(&self, acts: &Activations, target: f64) -> Gradients {
        let n = self.weights.len();
        let mut dw = Vec::with_capacity(n);
        let mut db = Vec::with_capacity(n);
        // d(loss)/d(logit) for sigmoid + cross-entropy.
        let mut delta = Array1::from(vec![acts.output() - target]);
        for l in (0..n).rev() {
            let a_in = &acts.post[l];
            let outer = delta
                .view()
                .insert_axis(Axis(1))
                .dot(&a_in.view().insert_axis(Axis(0)));
            dw.push(outer);
            db.push(delta.clone());
            if l > 0 {
                delta = self.weights[l].t().dot(&delta) * acts.pre[l - 1].mapv(relu_grad);
            }
        }
        dw.reverse();
        db.reverse();
        Gradients {
            weights: dw,
            biases: db,
        }
    }

    pub fn loss(&self, x: &[f64], target: f64) -> Result<f64> {
        Ok(bce_from_logit(self.forward(x)?.logit(), target))
    }

    /// Row-wise forward pass over a batch; returns `(pre, post)` per layer
    /// with `post[0] = inputs`.
    fn forward_batch(&self, inputs: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut post = vec![inputs.clone()];
        let mut pre = Vec::with_capacity(self.weights.len());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = post.last().expect("input").dot(&w.t()) + b;
            let a = if self.is_output(l) {
                z.mapv(sigmoid)
            } else {
                z.mapv(relu)
            };
            pre.push(z);
            post.push(a);
        }
        (pre, post)
    }

    pub fn scores(&self, inputs: &Array2<f64>) -> Result<Array1<f64>> {
        if inputs.ncols() != self.input_size() {
            return Err(NnError::InputSize {
                expected: self.input_size(),
                actual: inputs.ncols(),
            });
        }
        let (_, post) = self.forward_batch(inputs);
        Ok(post.last().expect("output").column(0).to_owned())
    }
}

pub fn init_network(arch: &Architecture, cfg: &TrainConfig) -> Network {
    let sizes = arch.layer_sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights = sizes
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            match cfg.init_mode {
                InitMode::Constant09 => Array2::from_elem((fan_out, fan_in), CONSTANT_INIT_WEIGHT),
                InitMode::SeededUniform => {
                    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-s..=s))
                }
            }
        })
        .collect();
    let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
    Network { weights, biases }
}

/// Feature rows with binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    inputs: Array2<f64>,
    targets: Array1<f64>,
}

impl Dataset {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        if rows.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        if ids.len() != rows.len() || labels.len() != rows.len() {
            return Err(NnError::Config(format!(
                "{} ids, {} rows and {} labels do not line up",
                ids.len(),
                rows.len(),
                labels.len()
            )));
        }
        let dim = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(NnError::InputSize {
                expected: dim,
                actual: bad.len(),
            });
        }
        let inputs = Array2::from_shape_vec((rows.len(), dim), rows.concat())
            .expect("row lengths checked");
        let targets = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        Ok(Self {
            ids,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &Array1<f64> {
        &self.targets
    }

    pub fn label(&self, i: usize) -> bool {
        self.targets[i] > 0.5
    }

    /// `(positives, negatives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.targets.iter().filter(|&&t| t > 0.5).count();
        (pos, self.len() - pos)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            inputs: self.inputs.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

impl Split {
    /// Human-readable notes for splits that lost a class.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, ds) in [("train", &self.train), ("test", &self.test)] {
            let (pos, neg) = ds.class_counts();
            if pos == 0 || neg == 0 {
                out.push(format!(
                    "{name} split has {pos} positive and {neg} negative samples"
                ));
            }
        }
        out
    }
}

/// Seeded shuffle, then the first `round(ratio * N)` samples train. The
/// count is clamped so that neither side is empty.
pub fn split_dataset(ds: &Dataset, ratio: f64, seed: u64) -> Result<Split> {
    let n = ds.len();
    if n < 2 {
        return Err(NnError::TooFewSamples(n));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(NnError::Config(format!(
            "split ratio must lie strictly between 0 and 1, got {ratio}"
        )));
    }
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Split {
        train: ds.subset(&order[..n_train]),
        test: ds.subset(&order[n_train..]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub cost_per_iteration: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

impl TrainingReport {
    pub fn write_curve_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,cost")?;
        for (i, c) in self.cost_per_iteration.iter().enumerate() {
            writeln!(out, "{},{c:.16e}", i + 1)?;
        }
        Ok(())
    }
}

/// A network that finished training; scores are `P(valid)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
}

impl TrainedModel {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.network.forward(x)?.output())
    }

    pub fn input_size(&self) -> usize {
        self.network.input_size()
    }
}

pub fn train(mut net: Network, data: &Dataset, cfg: &TrainConfig) -> Result<(TrainedModel, TrainingReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if data.dim() != net.input_size() {
        return Err(NnError::InputSize {
            expected: net.input_size(),
            actual: data.dim(),
        });
    }
    let (pos, neg) = data.class_counts();
    if pos == 0 || neg == 0 {
        return Err(NnError::SingleClass);
    }

    let n = data.len() as f64;
    let targets = data.targets().view().insert_axis(Axis(1));
    let mut costs = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let (pre, post) = net.forward_batch(data.inputs());
        let logits = pre.last().expect("output").column(0);
        let cost = logits
            .iter()
            .zip(data.targets())
            .map(|(&z, &t)| bce_from_logit(z, t))
            .sum::<f64>()
            / n;
        if !cost.is_finite() {
            return Err(NnError::Divergence { iteration });
        }
        costs.push(cost);

        let mut delta = (post.last().expect("output") - &targets) / n;
        for l in (0..net.weights.len()).rev() {
            let dw = delta.t().dot(&post[l]);
            let db = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&net.weights[l]) * pre[l - 1].mapv(relu_grad);
            }
            net.weights[l].scaled_add(-cfg.learning_rate, &dw);
            net.biases[l].scaled_add(-cfg.learning_rate, &db);
        }
    }

    let model = TrainedModel { network: net };
    let train_accuracy = evaluate(&model, data)?.accuracy;
    Ok((
        model,
        TrainingReport {
            cost_per_iteration: costs,
            train_accuracy,
            test_accuracy: None,
        },
    ))
}

/// Decision threshold applied to the sigmoid output.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

pub fn evaluate(model: &TrainedModel, ds: &Dataset) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let scores = model.network.scores(ds.inputs())?;
    let mut e = Evaluation {
        accuracy: 0.0,
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for (i, &s) in scores.iter().enumerate() {
        match (s >= DECISION_THRESHOLD, ds.label(i)) {
            (true, true) => e.true_positive += 1,
            (true, false) => e.false_positive += 1,
            (false, false) => e.true_negative += 1,
            (false, true) => e.false_negative += 1,
        }
    }
    e.accuracy = (e.true_positive + e.true_negative) as f64 / ds.len() as f64;
    Ok(e)
}

/// Serializes a float slice with 17 significant digits.
struct Sig17<'a>(&'a [f64]);

impl Serialize for Sig17<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::{Error, SerializeSeq};
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for v in self.0 {
            let raw = serde_json::value::RawValue::from_string(format!("{v:.16e}"))
                .map_err(S::Error::custom)?;
            seq.serialize_element(&raw)?;
        }
        seq.end()
    }
}

#[derive(Serialize)]
struct ModelFileOut<'a> {
    format: u32,
    layers: Vec<usize>,
    weights: Vec<Sig17<'a>>,
    biases: Vec<Sig17<'a>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFileIn {
    #[allow(dead_code)]
    format: u32,
    layers: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    let net = &model.network;
    let all = net.weights.iter().flatten().chain(net.biases.iter().flatten());
    if all.clone().any(|v| !v.is_finite()) {
        return Err(NnError::Malformed("network holds non-finite parameters".into()));
    }
    let file = ModelFileOut {
        format: MODEL_FORMAT,
        layers: net.layer_sizes(),
        weights: net
            .weights
            .iter()
            .map(|w| Sig17(w.as_slice().expect("standard layout")))
            .collect(),
        biases: net
            .biases
            .iter()
            .map(|b| Sig17(b.as_slice().expect("standard layout")))
            .collect(),
    };
    serde_json::to_string(&file).map_err(|e| NnError::Malformed(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| NnError::Malformed(e.to_string()))?;
    let found = value
        .get("format")
        .and_then(|f| f.as_u64())
        .ok_or_else(|| NnError::Malformed("missing \"format\"".into()))?;
    if found != MODEL_FORMAT as u64 {
        return Err(NnError::Version {
            found,
            supported: MODEL_FORMAT,
        });
    }
    let file: ModelFileIn =
        serde_json::from_value(value).map_err(|e| NnError::Malformed(e.to_string()))?;
    let arch = Architecture::new(file.layers.clone())?;
    let sizes = arch.layer_sizes();
    if file.weights.len() != sizes.len() - 1 || file.biases.len() != sizes.len() - 1 {
        return Err(NnError::Malformed(format!(
            "{} layers need {} weight and bias arrays",
            sizes.len(),
            sizes.len() - 1
        )));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, (w, b)) in file.weights.into_iter().zip(file.biases).enumerate() {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let w = Array2::from_shape_vec((fan_out, fan_in), w).map_err(|_| {
            NnError::Malformed(format!("layer {l} weights are not {fan_out}x{fan_in}"))
        })?;
        if b.len() != fan_out {
            return Err(NnError::Malformed(format!(
                "layer {l} has {} biases, expected {fan_out}",
                b.len()
            )));
        }
        weights.push(w);
        biases.push(Array1::from(b));
    }
    Ok(TrainedModel {
        network: Network::from_parts(weights, biases)?,
    })
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)? + "\n")?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_net(w1: f64, w2: f64) -> Network {
        Network::from_parts(
            vec![array![[w1]], array![[w2]]],
            vec![array![0.0], array![0.0]],
        )
        .unwrap()
    }

    #[test]
    fn relu_values() {
        assert_eq!(relu(-2.0), 0.0);
        assert_eq!(relu(0.0), 0.0);
        assert_eq!(relu(3.5), 3.5);
    }

    #[test]
    fn architecture_validation() {
        assert!(Architecture::new(vec![4, 1]).is_err());
        assert!(Architecture::new(vec![4, 0, 1]).is_err());
        assert!(Architecture::new(vec![4, 3, 2]).is_err());
        assert!(Architecture::new(vec![4, 3, 2, 1]).is_ok());
    }

    #[test]
    fn constant_init() {
        let arch = Architecture::new(vec![4, 3, 1]).unwrap();
        let cfg = TrainConfig {
            init_mode: InitMode::Constant09,
            ..TrainConfig::with_seed(0)
        };
        let net = init_network(&arch, &cfg);
        let weights: Vec<f64> = net.weights().iter().flatten().copied().collect();
        assert_eq!(weights.len(), 15);
        assert!(weights.iter().all(|&w| w == 0.9));
        let biases: Vec<f64> = net.biases().iter().flatten().copied().collect();
        assert_eq!(biases, vec![0.0; 4]);
    }

    #[test]
    fn seeded_init_is_deterministic_and_bounded() {
        let arch = Architecture::new(vec![400, 64, 1]).unwrap();
        let cfg = TrainConfig::with_seed(11);
        let a = init_network(&arch, &cfg);
        assert_eq!(a, init_network(&arch, &cfg));
        assert_ne!(a, init_network(&arch, &TrainConfig::with_seed(12)));
        assert_eq!(a.weights()[0].dim(), (64, 400));
        assert_eq!(a.weights()[1].dim(), (1, 64));
        let s = (6.0f64 / 464.0).sqrt();
        assert!(a.weights()[0].iter().all(|w| w.abs() <= s));
    }

    #[test]
    fn forward_examples() {
        let acts = tiny_net(1.0, 1.0).forward(&[-5.0]).unwrap();
        assert_eq!(acts.post[1][0], 0.0);
        assert_eq!(acts.output(), 0.5);

        assert_eq!(tiny_net(0.0, 0.0).forward(&[3.0]).unwrap().output(), 0.5);

        for x in [-1e6, -3.0, 0.0, 2.0, 1e6] {
            let out = tiny_net(0.7, -1.3).forward(&[x]).unwrap().output();
            assert!((0.0..=1.0).contains(&out));
        }
    }

    #[test]
    fn forward_rejects_wrong_input_size() {
        let err = tiny_net(1.0, 1.0).forward(&[1.0, 2.0]).unwrap_err();
        assert_eq!(err.to_string(), "input has 2 values but the network expects 1");
    }

    #[test]
    fn shape_chaining_is_enforced() {
        let err = Network::from_parts(
            vec![Array2::zeros((3, 4)), Array2::zeros((1, 2))],
            vec![Array1::zeros(3), Array1::zeros(1)],
        )
        .unwrap_err();
        assert!(matches!(err, NnError::Shape { layer: 1, .. }));
        let err = Network::from_parts(
            vec![Array2::zeros((3, 4)), Array2::zeros((1, 3))],
            vec![Array1::zeros(2), Array1::zeros(1)],
        )
        .unwrap_err();
        assert!(matches!(err, NnError::Shape { layer: 0, .. }));
    }

    #[test]
    fn saturated_correct_prediction_has_vanishing_gradient() {
        let net = tiny_net(1.0, 50.0);
        let acts = net.forward(&[1.0]).unwrap();
        let g = net.backward(&acts, 1.0);
        for v in g.weights.iter().flatten().chain(g.biases.iter().flatten()) {
            assert!(v.abs() < 1e-18, "{v}");
        }
    }

    #[test]
    fn inactive_hidden_unit_has_zero_incoming_gradient() {
        let net = Network::from_parts(
            vec![array![[1.0, 1.0], [-1.0, -1.0]], array![[0.5, 0.5]]],
            vec![array![0.0, 0.0], array![0.0]],
        )
        .unwrap();
        let acts = net.forward(&[1.0, 2.0]).unwrap();
        assert!(acts.pre[0][1] < 0.0);
        let g = net.backward(&acts, 0.0);
        assert_eq!(g.weights[0].row(1).to_vec(), vec![0.0, 0.0]);
        assert_eq!(g.biases[0][1], 0.0);
        assert!(g.weights[0].row(0).iter().all(|&v| v != 0.0));
    }

    fn ds(rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Dataset {
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        Dataset::new(ids, rows, labels).unwrap()
    }

    #[test]
    fn split_sizes() {
        let d = ds((0..100).map(|i| vec![i as f64]).collect(), (0..100).map(|i| i % 2 == 0).collect());
        let s = split_dataset(&d, 0.8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (80, 20));
        assert_eq!(s, split_dataset(&d, 0.8, 1).unwrap());
        assert_ne!(s, split_dataset(&d, 0.8, 2).unwrap());

        let d = ds((0..5).map(|i| vec![i as f64]).collect(), vec![true, false, true, false, true]);
        let s = split_dataset(&d, 0.8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (4, 1));
        // The single test sample is one class, so a warning is raised.
        assert_eq!(s.warnings().len(), 1);

        let one = ds(vec![vec![0.0]], vec![true]);
        assert!(matches!(split_dataset(&one, 0.8, 1), Err(NnError::TooFewSamples(1))));
    }

    #[test]
    fn zero_learning_rate_freezes_the_network() {
        let d = ds(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]], vec![true, false, true]);
        let arch = Architecture::new(vec![2, 3, 1]).unwrap();
        let cfg = TrainConfig {
            iterations: 10,
            learning_rate: 0.0,
            ..TrainConfig::with_seed(4)
        };
        let net = init_network(&arch, &cfg);
        let (model, report) = train(net.clone(), &d, &cfg).unwrap();
        assert_eq!(model.network, net);
        assert_eq!(report.cost_per_iteration.len(), 10);
        assert!(report
            .cost_per_iteration
            .iter()
            .all(|&c| c == report.cost_per_iteration[0]));
    }

    #[test]
    fn training_requires_both_classes() {
        let d = ds(vec![vec![0.0], vec![1.0]], vec![true, true]);
        let arch = Architecture::new(vec![1, 2, 1]).unwrap();
        let cfg = TrainConfig::with_seed(0);
        assert!(matches!(
            train(init_network(&arch, &cfg), &d, &cfg),
            Err(NnError::SingleClass)
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let d = ds(vec![vec![1.0], vec![-1.0]], vec![true, false]);
        let net = Network::from_parts(
            vec![array![[f64::NAN]], array![[1.0]]],
            vec![array![0.0], array![0.0]],
        )
        .unwrap();
        let err = train(net, &d, &TrainConfig::with_seed(0)).unwrap_err();
        assert_eq!(err.to_string(), "divergence: cost is not finite at iteration 0");
    }

    #[test]
    fn evaluation_examples() {
        let d = ds(
            vec![vec![1.0], vec![2.0], vec![-1.0], vec![-2.0]],
            vec![true, true, false, false],
        );
        let perfect = TrainedModel {
            network: tiny_net(1.0, 100.0),
        };
        // Negative inputs give hidden 0 and score 0.5, counted as valid.
        let e = evaluate(&perfect, &d).unwrap();
        assert_eq!(e.accuracy, 0.5);
        let shifted = TrainedModel {
            network: Network::from_parts(
                vec![array![[1.0]], array![[100.0]]],
                vec![array![0.0], array![-1.0]],
            )
            .unwrap(),
        };
        assert_eq!(evaluate(&shifted, &d).unwrap().accuracy, 1.0);

        let constant = TrainedModel {
            network: tiny_net(0.0, 0.0),
        };
        let e = evaluate(&constant, &d).unwrap();
        assert_eq!(e.accuracy, 0.5);
        assert_eq!((e.true_positive, e.false_positive), (2, 2));
    }

    #[test]
    fn model_json_round_trip() {
        let arch = Architecture::new(vec![5, 4, 3, 1]).unwrap();
        let model = TrainedModel {
            network: init_network(&arch, &TrainConfig::with_seed(9)),
        };
        let json = model_to_json(&model).unwrap();
        assert!(json.starts_with("{\"format\":1,\"layers\":[5,4,3,1],\"weights\":[["));
        let back = model_from_json(&json).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn model_load_errors() {
        let arch = Architecture::new(vec![2, 2, 1]).unwrap();
        let model = TrainedModel {
            network: init_network(&arch, &TrainConfig::with_seed(1)),
        };
        let json = model_to_json(&model).unwrap();
        assert!(matches!(
            model_from_json(&json[..json.len() / 2]),
            Err(NnError::Malformed(_))
        ));
        let future = json.replacen("\"format\":1", "\"format\":7", 1);
        let err = model_from_json(&future).unwrap_err();
        assert_eq!(
            err.to_string(),
            "model format 7 is not supported (this build reads format 1)"
        );
        let wrong = json.replacen("[2,2,1]", "[3,2,1]", 1);
        assert!(matches!(model_from_json(&wrong), Err(NnError::Malformed(_))));
    }

    #[test]
    fn curve_csv_rows() {
        let r = TrainingReport {
            cost_per_iteration: vec![0.7, 0.6],
            train_accuracy: 1.0,
            test_accuracy: None,
        };
        let mut buf = Vec::new();
        r.write_curve_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("iteration,cost\n1,"));
    }
}
