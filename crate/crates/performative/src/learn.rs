//! Trainable classifiers and the training loop.
//!
//! Models are real-valued scorers — a linear map or a rectified-linear MLP
//! with at most two hidden layers — decided by `sign(score)` with
//! `sign(0) = +1`. Training is seeded mini-batch gradient descent (SGD or
//! Adam) on either the standard logistic loss or the performative surrogate,
//! with an optional reduce-on-plateau learning-rate schedule, and is
//! bit-reproducible for a fixed seed.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::drift::PerCoefficients;
use crate::risk::{logistic_phi, logistic_phi_grad, per, SurrogateLoss};
use crate::seeded::{salt, shuffled_indices, stream};
use crate::Label;

#[derive(Clone, Debug, PartialEq)]
pub enum LearnError {
    EmptyDataset,
    /// The training loss became NaN or infinite.
    NonFiniteLoss {
        epoch: usize,
    },
    DimensionMismatch {
        expected: usize,
        got: usize,
    },
    BadConfig(String),
    CheckpointFormat(String),
    Io(String),
}

impl fmt::Display for LearnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnError::EmptyDataset => write!(f, "empty dataset"),
            LearnError::NonFiniteLoss { epoch } => {
                write!(f, "training loss diverged at epoch {epoch}")
            }
            LearnError::DimensionMismatch { expected, got } => {
                write!(f, "input has {got} features, model expects {expected}")
            }
            LearnError::BadConfig(msg) => write!(f, "bad training config: {msg}"),
            LearnError::CheckpointFormat(msg) => write!(f, "bad checkpoint: {msg}"),
            LearnError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for LearnError {}

/// Model shape: linear, or an MLP with rectified-linear hidden layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Architecture {
    Linear { inputs: usize },
    Mlp { inputs: usize, hidden: Vec<usize> },
}

impl Architecture {
    /// Layer widths from input to the scalar output.
    fn dims(&self) -> Vec<usize> {
        match self {
            Architecture::Linear { inputs } => vec![*inputs, 1],
            Architecture::Mlp { inputs, hidden } => {
                let mut d = vec![*inputs];
                d.extend_from_slice(hidden);
                d.push(1);
                d
            }
        }
    }

    pub fn inputs(&self) -> usize {
        match self {
            Architecture::Linear { inputs } => *inputs,
            Architecture::Mlp { inputs, .. } => *inputs,
        }
    }

    /// Total parameter count (weights and biases).
    pub fn param_count(&self) -> usize {
        let dims = self.dims();
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// A scorer with parameters laid out layer by layer: the weight matrix
/// (row-major, `out x in`) followed by the bias vector of each layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    arch: Architecture,
    params: Vec<f64>,
}

impl Classifier {
    /// Seeded initialization: every parameter of a layer is drawn uniformly
    /// from `[-sqrt(6 / (fan_in + fan_out)), +sqrt(...)]`.
    pub fn init(arch: Architecture, seed: u64) -> Classifier {
        let mut rng = stream(seed, salt::TRAIN_INIT);
        let dims = arch.dims();
        let mut params = Vec::with_capacity(arch.param_count());
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out + fan_out {
                params.push(rng.gen_range(-limit..=limit));
            }
        }
        Classifier { arch, params }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Classifier, LearnError> {
        if params.len() != arch.param_count() {
            return Err(LearnError::BadConfig(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                params.len()
            )));
        }
        Ok(Classifier { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Raw score. Panics on dimension mismatch.
    pub fn score(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.arch.inputs(), "feature dimension");
        let dims = self.arch.dims();
        let mut act: Vec<f64> = x.to_vec();
        let mut offset = 0;
        for (l, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases =
                &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let mut next = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let mut z = biases[o];
                for (wi, ai) in row.iter().zip(&act) {
                    z += wi * ai;
                }
                next[o] = if l + 2 < dims.len() { z.max(0.0) } else { z };
            }
            act = next;
            offset += fan_in * fan_out + fan_out;
        }
        act[0]
    }

    /// Decision `sign(score)`, with `sign(0) = +1`.
    pub fn decide(&self, x: &[f64]) -> Label {
        Label::from_score(self.score(x))
    }

    pub fn decisions(&self, xs: &[Vec<f64>]) -> Vec<Label> {
        xs.iter().map(|x| self.decide(x)).collect()
    }

    /// Forward pass caching post-activation values per layer (input first).
    fn forward_cache(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let dims = self.arch.dims();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(dims.len());
        acts.push(x.to_vec());
        let mut offset = 0;
        for (l, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases =
                &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let prev = acts.last().unwrap();
            let mut next = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let mut z = biases[o];
                for (wi, ai) in row.iter().zip(prev) {
                    z += wi * ai;
                }
                next[o] = if l + 2 < dims.len() { z.max(0.0) } else { z };
            }
            acts.push(next);
            offset += fan_in * fan_out + fan_out;
        }
        acts
    }

    /// Accumulates `dscore * dscore/dparams` into `grad` for one sample.
    fn backprop(&self, acts: &[Vec<f64>], dscore: f64, grad: &mut [f64]) {
        let dims = self.arch.dims();
        let n_layers = dims.len() - 1;
        let mut layer_offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in dims.windows(2) {
            layer_offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        // delta = dloss/d(post-activation of current layer)
        let mut delta = vec![dscore];
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let base = layer_offsets[l];
            let weights = &self.params[base..base + fan_in * fan_out];
            let below = &acts[l];
            let here = &acts[l + 1];
            let mut prev_delta = vec![0.0; fan_in];
            for o in 0..fan_out {
                // hidden layers are rectified: gradient passes where output > 0
                let dz = if l + 1 < n_layers {
                    if here[o] > 0.0 {
                        delta[o]
                    } else {
                        0.0
                    }
                } else {
                    delta[o]
                };
                if dz == 0.0 {
                    continue;
                }
                let row_base = base + o * fan_in;
                for i in 0..fan_in {
                    grad[row_base + i] += dz * below[i];
                    prev_delta[i] += dz * weights[o * fan_in + i];
                }
                grad[base + fan_in * fan_out + o] += dz;
            }
            delta = prev_delta;
        }
    }
}

/// Training objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LossSpec {
    /// Standard logistic loss `phi(y * score)`.
    Logistic,
    /// Performative surrogate with the given coefficients.
    Surrogate(PerCoefficients),
}

impl LossSpec {
    /// Loss and derivative with respect to the score.
    #[inline]
    pub fn eval(&self, score: f64, y: Label) -> (f64, f64) {
        match self {
            LossSpec::Logistic => {
                let m = y.value() * score;
                (logistic_phi(m), y.value() * logistic_phi_grad(m))
            }
            LossSpec::Surrogate(c) => SurrogateLoss::new(*c).loss_and_grad(score, y),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    /// Adam with decay rates 0.9 / 0.999 and epsilon 1e-8.
    Adam,
}

/// Reduce-on-plateau schedule: after `patience` consecutive epochs without a
/// relative improvement of the monitored training loss beyond `threshold`,
/// the learning rate is multiplied by `factor`, never below `min_lr`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    pub min_lr: f64,
}

impl Default for PlateauSchedule {
    fn default() -> Self {
        PlateauSchedule {
            factor: 0.9,
            patience: 5,
            threshold: 1e-4,
            min_lr: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub schedule: Option<PlateauSchedule>,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty coefficient applied to weights (biases excluded).
    pub l2: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Logistic-loss defaults used by the synthetic protocol: SGD at 0.01,
    /// plateau 0.9/5, 25 epochs, batch 32.
    pub fn synthetic_default(seed: u64) -> TrainConfig {
        TrainConfig {
            loss: LossSpec::Logistic,
            optimizer: Optimizer::Sgd,
            learning_rate: 0.01,
            schedule: Some(PlateauSchedule::default()),
            epochs: 25,
            batch_size: 32,
            l2: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), LearnError> {
        if self.epochs == 0 {
            return Err(LearnError::BadConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(LearnError::BadConfig("batch size must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(LearnError::BadConfig(
                "learning rate must be positive".into(),
            ));
        }
        if let Some(s) = &self.schedule {
            if !(s.factor > 0.0 && s.factor < 1.0) {
                return Err(LearnError::BadConfig(
                    "plateau factor must lie in (0, 1)".into(),
                ));
            }
        }
        if self.l2 < 0.0 {
            return Err(LearnError::BadConfig("l2 must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A trained model with its per-epoch loss and learning-rate traces.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub classifier: Classifier,
    pub loss_trace: Vec<f64>,
    pub lr_trace: Vec<f64>,
}

/// Mean objective (data loss plus L2 weight penalty) over the given rows.
pub fn batch_objective(
    model: &Classifier,
    xs: &[Vec<f64>],
    ys: &[Label],
    loss: &LossSpec,
    l2: f64,
) -> f64 {
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        total += loss.eval(model.score(x), y).0;
    }
    total / xs.len() as f64 + l2 * weight_squares(model)
}

/// Gradient of [`batch_objective`] with respect to all parameters.
pub fn batch_gradient(
    model: &Classifier,
    xs: &[Vec<f64>],
    ys: &[Label],
    loss: &LossSpec,
    l2: f64,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.params.len()];
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let acts = model.forward_cache(x);
        let score = acts.last().unwrap()[0];
        let (v, dscore) = loss.eval(score, y);
        total += v;
        model.backprop(&acts, dscore, &mut grad);
    }
    let inv = 1.0 / xs.len() as f64;
    for g in &mut grad {
        *g *= inv;
    }
    if l2 > 0.0 {
        add_weight_penalty_grad(model, l2, &mut grad);
    }
    (total * inv + l2 * weight_squares(model), grad)
}

fn weight_squares(model: &Classifier) -> f64 {
    let dims = model.arch.dims();
    let mut offset = 0;
    let mut sum = 0.0;
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        for k in 0..fan_in * fan_out {
            sum += model.params[offset + k] * model.params[offset + k];
        }
        offset += fan_in * fan_out + fan_out;
    }
    sum
}

fn add_weight_penalty_grad(model: &Classifier, l2: f64, grad: &mut [f64]) {
    let dims = model.arch.dims();
    let mut offset = 0;
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        for k in 0..fan_in * fan_out {
            grad[offset + k] += 2.0 * l2 * model.params[offset + k];
        }
        offset += fan_in * fan_out + fan_out;
    }
}

/// Trains a model by seeded mini-batch gradient descent. The full index set
/// is reshuffled each epoch; the final partial batch is kept. Identical
/// seeds yield bit-identical models and traces.
pub fn train(
    ds: &Dataset,
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<TrainedModel, LearnError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    if ds.dim() != arch.inputs() {
        return Err(LearnError::DimensionMismatch {
            expected: arch.inputs(),
            got: ds.dim(),
        });
    }
    if ds.features.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(LearnError::BadConfig("features must be finite".into()));
    }

    let mut model = Classifier::init(arch, cfg.seed);
    let n_params = model.params.len();
    let mut shuffle_rng = stream(cfg.seed, salt::TRAIN_SHUFFLE);
    let n = ds.len();

    // Adam state
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut step_count = 0u32;
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    let mut lr = cfg.learning_rate;
    let mut best_loss = f64::INFINITY;
    let mut stall = 0usize;
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut lr_trace = Vec::with_capacity(cfg.epochs);

    let mut grad = vec![0.0; n_params];
    for epoch in 0..cfg.epochs {
        let order = shuffled_indices(n, &mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in chunk {
                let acts = model.forward_cache(&ds.features[i]);
                let score = acts.last().unwrap()[0];
                let (val, dscore) = cfg.loss.eval(score, ds.labels[i]);
                batch_loss += val;
                model.backprop(&acts, dscore, &mut grad);
            }
            let inv = 1.0 / chunk.len() as f64;
            for g in grad.iter_mut() {
                *g *= inv;
            }
            if cfg.l2 > 0.0 {
                batch_loss += chunk.len() as f64 * cfg.l2 * weight_squares(&model);
                add_weight_penalty_grad(&model, cfg.l2, &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(LearnError::NonFiniteLoss { epoch });
            }
            epoch_loss += batch_loss;
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in model.params.iter_mut().zip(&grad) {
                        *p -= lr * g;
                    }
                }
                Optimizer::Adam => {
                    step_count += 1;
                    let bc1 = 1.0 - BETA1.powi(step_count as i32);
                    let bc2 = 1.0 - BETA2.powi(step_count as i32);
                    for k in 0..n_params {
                        m[k] = BETA1 * m[k] + (1.0 - BETA1) * grad[k];
                        v[k] = BETA2 * v[k] + (1.0 - BETA2) * grad[k] * grad[k];
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        model.params[k] -= lr * m_hat / (v_hat.sqrt() + EPS);
                    }
                }
            }
        }
        let epoch_mean = epoch_loss / n as f64;
        loss_trace.push(epoch_mean);
        lr_trace.push(lr);
        if let Some(s) = &cfg.schedule {
            if epoch_mean < best_loss * (1.0 - s.threshold) {
                best_loss = epoch_mean;
                stall = 0;
            } else {
                stall += 1;
                if stall >= s.patience {
                    lr = (lr * s.factor).max(s.min_lr);
                    stall = 0;
                }
            }
        }
    }
    Ok(TrainedModel {
        classifier: model,
        loss_trace,
        lr_trace,
    })
}

/// Fraction of rows whose decision equals the label.
pub fn evaluate(model: &Classifier, ds: &Dataset) -> Result<f64, LearnError> {
    if ds.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let hits = ds
        .features
        .iter()
        .zip(&ds.labels)
        .filter(|(x, &y)| model.decide(x) == y)
        .count();
    Ok(hits as f64 / ds.len() as f64)
}

/// Exact empirical-risk minimization over an explicit finite hypothesis
/// list, each given as its decision table over the sample. Returns the index
/// of the minimizer (ties to the lowest index) and its risk estimate.
pub fn erm_finite(
    tables: &[Vec<Label>],
    labels: &[Label],
    coeffs: &PerCoefficients,
) -> Result<(usize, f64), LearnError> {
    if tables.is_empty() {
        return Err(LearnError::BadConfig("empty hypothesis list".into()));
    }
    let mut best = (0usize, f64::INFINITY);
    for (k, table) in tables.iter().enumerate() {
        assert_eq!(table.len(), labels.len(), "decision table length");
        let pairs: Vec<(Label, Label)> = table.iter().zip(labels).map(|(&d, &y)| (d, y)).collect();
        let risk = per(&pairs, coeffs).map_err(|_| LearnError::EmptyDataset)?;
        if risk < best.1 {
            best = (k, risk);
        }
    }
    Ok(best)
}

/// Writes a checkpoint in the flat named-array text format:
///
/// ```text
/// performative-model v1
/// arch linear 2            (or: arch mlp <inputs> <hidden...>)
/// layer0.weight <count> <values...>
/// layer0.bias <count> <values...>
/// ...
/// ```
pub fn save_checkpoint(model: &Classifier, path: &Path) -> Result<(), LearnError> {
    std::fs::write(path, checkpoint_string(model)).map_err(|e| LearnError::Io(e.to_string()))
}

pub fn checkpoint_string(model: &Classifier) -> String {
    let mut out = String::from("performative-model v1\n");
    match &model.arch {
        Architecture::Linear { inputs } => out.push_str(&format!("arch linear {inputs}\n")),
        Architecture::Mlp { inputs, hidden } => {
            out.push_str(&format!("arch mlp {inputs}"));
            for h in hidden {
                out.push_str(&format!(" {h}"));
            }
            out.push('\n');
        }
    }
    let dims = model.arch.dims();
    let mut offset = 0;
    for (l, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = &model.params[offset..offset + fan_in * fan_out];
        let biases = &model.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        out.push_str(&format!("layer{l}.weight {}", weights.len()));
        for v in weights {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
        out.push_str(&format!("layer{l}.bias {}", biases.len()));
        for v in biases {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
        offset += fan_in * fan_out + fan_out;
    }
    out
}

pub fn load_checkpoint(path: &Path) -> Result<Classifier, LearnError> {
    let text = std::fs::read_to_string(path).map_err(|e| LearnError::Io(e.to_string()))?;
    parse_checkpoint(&text)
}

pub fn parse_checkpoint(text: &str) -> Result<Classifier, LearnError> {
    let mut lines = text.lines();
    let magic = lines
        .next()
        .ok_or_else(|| LearnError::CheckpointFormat("empty file".into()))?;
    if magic.trim() != "performative-model v1" {
        return Err(LearnError::CheckpointFormat(format!(
            "bad magic line: {magic}"
        )));
    }
    let arch_line = lines
        .next()
        .ok_or_else(|| LearnError::CheckpointFormat("missing arch line".into()))?;
    let mut parts = arch_line.split_whitespace();
    if parts.next() != Some("arch") {
        return Err(LearnError::CheckpointFormat("expected arch line".into()));
    }
    let kind = parts
        .next()
        .ok_or_else(|| LearnError::CheckpointFormat("missing arch kind".into()))?;
    let nums: Vec<usize> = parts
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| LearnError::CheckpointFormat("bad arch size".into()))
        })
        .collect::<Result<_, _>>()?;
    let arch = match kind {
        "linear" if nums.len() == 1 => Architecture::Linear { inputs: nums[0] },
        "mlp" if !nums.is_empty() => Architecture::Mlp {
            inputs: nums[0],
            hidden: nums[1..].to_vec(),
        },
        _ => {
            return Err(LearnError::CheckpointFormat(format!(
                "bad arch: {arch_line}"
            )))
        }
    };
    let mut params = Vec::with_capacity(arch.param_count());
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let _name = tok
            .next()
            .ok_or_else(|| LearnError::CheckpointFormat("bad array line".into()))?;
        let count: usize = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| LearnError::CheckpointFormat("bad array count".into()))?;
        let vals: Vec<f64> = tok
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| LearnError::CheckpointFormat("bad value".into()))
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != count {
            return Err(LearnError::CheckpointFormat(format!(
                "array declares {count} values, has {}",
                vals.len()
            )));
        }
        params.extend(vals);
    }
    Classifier::from_params(arch, params)
}
