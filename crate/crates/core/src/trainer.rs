//! Fully connected classifiers and capture of hidden-neuron activations.
//!
//! Hidden layer `l` computes `a = leaky(bn(x·W + b))`, with batchnorm only
//! in the batchnorm variant and inverted dropout on `a` only while training
//! the dropout variant. The output layer is affine; training minimises the
//! mean softmax cross-entropy with Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::Dataset;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model expects {expected} input features, data has {found}")]
    InputMismatch { expected: usize, found: usize },
    #[error("model has {classes} classes but data contains label {label}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("non-finite activation of neuron {neuron} on datum {datum}")]
    NonFiniteActivation { neuron: usize, datum: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Regularizer {
    #[default]
    None,
    Dropout {
        rate: f64,
    },
    Batchnorm,
}

impl Regularizer {
    /// Group tag used in dendrograms: 0 vanilla, 1 dropout, 2 batchnorm.
    pub fn group_tag(&self) -> usize {
        match self {
            Regularizer::None => 0,
            Regularizer::Dropout { .. } => 1,
            Regularizer::Batchnorm => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub regularizer: Regularizer,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, num_classes: usize, regularizer: Regularizer) -> Self {
        Self { input_dim, hidden, num_classes, regularizer }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidArchitecture(m));
        if self.input_dim == 0 || self.num_classes == 0 {
            return bad("input dimension and class count must be at least 1".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden widths must be non-empty and at least 1, got {:?}", self.hidden));
        }
        if let Regularizer::Dropout { rate } = self.regularizer {
            if !(rate > 0.0 && rate < 1.0) {
                return bad(format!("dropout rate {rate} outside (0, 1)"));
            }
        }
        Ok(())
    }

    /// Total hidden neurons `n`.
    pub fn hidden_neurons(&self) -> usize {
        self.hidden.iter().sum()
    }

    /// `(fan_in, fan_out)` of every affine layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.num_classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub leaky_slope: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            batch_size: 64,
            epochs: 100,
            leaky_slope: 0.01,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.leaky_slope >= 0.0) {
            return bad("leaky slope must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("Adam betas must lie in [0, 1) and eps must be positive");
        }
        Ok(())
    }
}

/// Weights are stored `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

impl<T: Scalar> BatchNormParams<T> {
    fn new(width: usize) -> Self {
        Self {
            gamma: vec![T::one(); width],
            beta: vec![T::zero(); width],
            running_mean: vec![T::zero(); width],
            running_var: vec![T::one(); width],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub arch: Architecture,
    /// One per hidden layer, then the output layer.
    pub layers: Vec<DenseLayer<T>>,
    /// One per hidden layer in the batchnorm variant, empty otherwise.
    pub batchnorm: Vec<BatchNormParams<T>>,
}

/// Gradients shaped like the trainable parameters of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<DenseLayer<T>>,
    pub gamma: Vec<Vec<T>>,
    pub beta: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Flat views in the order of [`ModelParams::trainable_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(&l.bias);
        }
        for (g, b) in self.gamma.iter().zip(&self.beta) {
            out.push(g);
            out.push(b);
        }
        out
    }
}

/// Per-layer values kept for backpropagation.
struct LayerCache<T> {
    input: Matrix<T>,
    xhat: Option<Matrix<T>>,
    inv_std: Vec<T>,
    batch_var: Vec<T>,
    batch_mean: Vec<T>,
    /// input to the leaky ReLU
    pre_act: Matrix<T>,
    mask: Option<Matrix<T>>,
}

struct ForwardPass<T> {
    hidden: Vec<LayerCache<T>>,
    last_hidden: Matrix<T>,
    logits: Matrix<T>,
}

#[inline]
fn leaky<T: Scalar>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        slope * x
    }
}

fn add_bias<T: Scalar>(m: &mut Matrix<T>, bias: &[T]) {
    for i in 0..m.rows() {
        for (v, &b) in m.row_mut(i).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn column_sums<T: Scalar>(m: &Matrix<T>) -> Vec<T> {
    let mut out = vec![T::zero(); m.cols()];
    for i in 0..m.rows() {
        for (o, &v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

/// Mean cross-entropy of softmax(logits) and its gradient w.r.t. the logits.
fn softmax_cross_entropy<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> (T, Matrix<T>) {
    let b = T::from_usize_lossy(logits.rows());
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = T::zero();
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = sum.ln() + max;
        loss += log_sum - row[labels[i]];
        let g = grad.row_mut(i);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = (row[k] - log_sum).exp() / b;
        }
        g[labels[i]] -= T::one() / b;
    }
    (loss / b, grad)
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Training-mode normalisation of each column over the batch:
/// `(x̂, batch mean, biased batch variance)` with `x̂ = (z − µ)/sqrt(σ² + eps)`.
pub fn batchnorm_normalize<T: Scalar>(z: &Matrix<T>) -> (Matrix<T>, Vec<T>, Vec<T>) {
    let b = T::from_usize_lossy(z.rows());
    let mean: Vec<T> = column_sums(z).into_iter().map(|s| s / b).collect();
    let mut var = vec![T::zero(); z.cols()];
    for i in 0..z.rows() {
        for (k, &v) in z.row(i).iter().enumerate() {
            let d = v - mean[k];
            var[k] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= b);
    let eps = T::lit(BATCHNORM_EPS);
    let xhat = Matrix::from_fn(z.rows(), z.cols(), |i, k| (z[(i, k)] - mean[k]) / (var[k] + eps).sqrt());
    (xhat, mean, var)
}

/// Inverted-dropout masks for a batch: kept units are scaled by `1/(1 − rate)`.
pub fn dropout_masks<T: Scalar, R: Rng + ?Sized>(
    arch: &Architecture,
    batch: usize,
    rng: &mut R,
) -> Option<Vec<Matrix<T>>> {
    let Regularizer::Dropout { rate } = arch.regularizer else {
        return None;
    };
    let keep = T::lit(1.0 / (1.0 - rate));
    Some(
        arch.hidden
            .iter()
            .map(|&w| Matrix::from_fn(batch, w, |_, _| if rng.random::<f64>() < rate { T::zero() } else { keep }))
            .collect(),
    )
}

impl<T: Scalar> ModelParams<T> {
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero,
    /// batchnorm scale 1 and shift 0. Deterministic in `(arch, seed)`.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self, TrainError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                DenseLayer {
                    weights: Matrix::from_fn(fan_in, fan_out, |_, _| T::lit(rng.random_range(-limit..limit))),
                    bias: vec![T::zero(); fan_out],
                }
            })
            .collect();
        let batchnorm = match arch.regularizer {
            Regularizer::Batchnorm => arch.hidden.iter().map(|&w| BatchNormParams::new(w)).collect(),
            _ => Vec::new(),
        };
        Ok(Self { arch: arch.clone(), layers, batchnorm })
    }

    /// Mutable flat views of every trainable tensor: for each affine layer
    /// its weights then bias, then batchnorm scale and shift per layer.
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            out.push(&mut l.bias);
        }
        for bn in &mut self.batchnorm {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        let dense: usize = self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum();
        dense + self.batchnorm.iter().map(|b| 2 * b.gamma.len()).sum::<usize>()
    }

    fn check_data(&self, data: &Dataset<T>) -> Result<(), TrainError> {
        if data.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        if data.feature_dim() != self.arch.input_dim {
            return Err(TrainError::InputMismatch { expected: self.arch.input_dim, found: data.feature_dim() });
        }
        if let Some(&label) = data.labels().iter().find(|&&l| l >= self.arch.num_classes) {
            return Err(TrainError::LabelOutOfRange { label, classes: self.arch.num_classes });
        }
        Ok(())
    }

    /// Training-mode forward pass (batch statistics, given dropout masks).
    fn forward_train(&self, x: &Matrix<T>, masks: Option<&[Matrix<T>]>, slope: T) -> ForwardPass<T> {
        let mut caches = Vec::with_capacity(self.arch.hidden.len());
        let mut current = x.clone();
        for (l, layer) in self.layers[..self.arch.hidden.len()].iter().enumerate() {
            let mut z = current.matmul(&layer.weights);
            add_bias(&mut z, &layer.bias);
            let (pre_act, xhat, inv_std, batch_mean, batch_var) = match self.batchnorm.get(l) {
                Some(bn) => {
                    let (xhat, mean, var) = batchnorm_normalize(&z);
                    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + T::lit(BATCHNORM_EPS)).sqrt()).collect();
                    let y = Matrix::from_fn(z.rows(), z.cols(), |i, k| bn.gamma[k] * xhat[(i, k)] + bn.beta[k]);
                    (y, Some(xhat), inv_std, mean, var)
                }
                None => (z, None, Vec::new(), Vec::new(), Vec::new()),
            };
            let mut act = pre_act.map(|v| leaky(v, slope));
            let mask = masks.map(|m| m[l].clone());
            if let Some(mask) = &mask {
                for (a, &k) in act.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *a *= k;
                }
            }
            caches.push(LayerCache { input: current, xhat, inv_std, batch_var, batch_mean, pre_act, mask });
            current = act;
        }
        let out = self.layers.last().expect("output layer");
        let mut logits = current.matmul(&out.weights);
        add_bias(&mut logits, &out.bias);
        ForwardPass { hidden: caches, last_hidden: current, logits }
    }

    /// Mean cross-entropy on a batch and its gradient, in training mode
    /// with the given dropout masks. Running statistics are not touched.
    pub fn loss_and_gradients(
        &self,
        x: &Matrix<T>,
        labels: &[usize],
        masks: Option<&[Matrix<T>]>,
        slope: T,
    ) -> (T, Gradients<T>) {
        let pass = self.forward_train(x, masks, slope);
        let (loss, grads) = self.backward(&pass, labels, slope);
        (loss, grads)
    }

    fn backward(&self, pass: &ForwardPass<T>, labels: &[usize], slope: T) -> (T, Gradients<T>) {
        let (loss, dlogits) = softmax_cross_entropy(&pass.logits, labels);
        let hidden = self.arch.hidden.len();
        let out = &self.layers[hidden];
        let mut layer_grads = vec![None; hidden + 1];
        layer_grads[hidden] =
            Some(DenseLayer { weights: pass.last_hidden.t_matmul(&dlogits), bias: column_sums(&dlogits) });
        let mut upstream = dlogits.matmul_t(&out.weights);
        let mut gamma = vec![Vec::new(); self.batchnorm.len()];
        let mut beta = vec![Vec::new(); self.batchnorm.len()];
        let b = T::from_usize_lossy(pass.logits.rows());

        for l in (0..hidden).rev() {
            let cache = &pass.hidden[l];
            if let Some(mask) = &cache.mask {
                for (u, &k) in upstream.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *u *= k;
                }
            }
            // through the leaky ReLU
            for (u, &y) in upstream.as_mut_slice().iter_mut().zip(cache.pre_act.as_slice()) {
                if y < T::zero() {
                    *u *= slope;
                }
            }
            let dz = match (&cache.xhat, self.batchnorm.get(l)) {
                (Some(xhat), Some(bn)) => {
                    let width = xhat.cols();
                    let mut dgamma = vec![T::zero(); width];
                    let mut dbeta = vec![T::zero(); width];
                    let mut sum_dxhat = vec![T::zero(); width];
                    let mut sum_dxhat_xhat = vec![T::zero(); width];
                    for i in 0..xhat.rows() {
                        for k in 0..width {
                            let dy = upstream[(i, k)];
                            dgamma[k] += dy * xhat[(i, k)];
                            dbeta[k] += dy;
                            let dxh = dy * bn.gamma[k];
                            sum_dxhat[k] += dxh;
                            sum_dxhat_xhat[k] += dxh * xhat[(i, k)];
                        }
                    }
                    let dz = Matrix::from_fn(xhat.rows(), width, |i, k| {
                        let dxh = upstream[(i, k)] * bn.gamma[k];
                        cache.inv_std[k] / b * (b * dxh - sum_dxhat[k] - xhat[(i, k)] * sum_dxhat_xhat[k])
                    });
                    gamma[l] = dgamma;
                    beta[l] = dbeta;
                    dz
                }
                _ => upstream,
            };
            let layer = &self.layers[l];
            layer_grads[l] = Some(DenseLayer { weights: cache.input.t_matmul(&dz), bias: column_sums(&dz) });
            upstream = dz.matmul_t(&layer.weights);
        }
        let layers = layer_grads.into_iter().map(|g| g.expect("every layer visited")).collect();
        (loss, Gradients { layers, gamma, beta })
    }

    /// Inference-mode forward pass returning the hidden activations of each
    /// layer and the logits.
    fn forward_inference(&self, x: &Matrix<T>, slope: T) -> (Vec<Matrix<T>>, Matrix<T>) {
        let mut hidden = Vec::with_capacity(self.arch.hidden.len());
        let mut current = x.clone();
        for (l, layer) in self.layers[..self.arch.hidden.len()].iter().enumerate() {
            let mut z = current.matmul(&layer.weights);
            add_bias(&mut z, &layer.bias);
            if let Some(bn) = self.batchnorm.get(l) {
                let eps = T::lit(BATCHNORM_EPS);
                for i in 0..z.rows() {
                    for (k, v) in z.row_mut(i).iter_mut().enumerate() {
                        *v = bn.gamma[k] * (*v - bn.running_mean[k]) / (bn.running_var[k] + eps).sqrt() + bn.beta[k];
                    }
                }
            }
            current = z.map(|v| leaky(v, slope));
            hidden.push(current.clone());
        }
        let out = self.layers.last().expect("output layer");
        let mut logits = current.matmul(&out.weights);
        add_bias(&mut logits, &out.bias);
        (hidden, logits)
    }

    /// Normalised pre-scale batchnorm values `x̂` of each hidden layer for a
    /// training-mode pass over `x` (empty without batchnorm).
    pub fn batchnorm_training_values(&self, x: &Matrix<T>, slope: T) -> Vec<Matrix<T>> {
        self.forward_train(x, None, slope).hidden.into_iter().filter_map(|c| c.xhat).collect()
    }

    /// Hidden activations of each layer in inference mode.
    pub fn hidden_outputs(&self, x: &Matrix<T>, slope: T) -> Vec<Matrix<T>> {
        self.forward_inference(x, slope).0
    }

    /// Class scores in inference mode.
    pub fn predict_logits(&self, x: &Matrix<T>, slope: T) -> Matrix<T> {
        self.forward_inference(x, slope).1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, weighted by batch size.
    pub loss: f64,
    /// Accuracy of the training-mode predictions made during the epoch.
    pub train_accuracy: f64,
    /// Inference-mode accuracy on the training data after the epoch.
    pub eval_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(model: &mut ModelParams<T>) -> Self {
        let shapes: Vec<usize> = model.trainable_mut().iter().map(|s| s.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, model: &mut ModelParams<T>, grads: &Gradients<T>, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (T::lit(cfg.adam_beta1), T::lit(cfg.adam_beta2));
        let (lr, eps) = (T::lit(cfg.learning_rate), T::lit(cfg.adam_eps));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        for (((p, g), m), v) in model.trainable_mut().into_iter().zip(grads.slices()).zip(&mut self.m).zip(&mut self.v)
        {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

fn update_running_stats<T: Scalar>(model: &mut ModelParams<T>, pass: &ForwardPass<T>, batch: usize) {
    let mom = T::lit(BATCHNORM_MOMENTUM);
    let unbias = if batch > 1 { T::from_usize_lossy(batch) / T::from_usize_lossy(batch - 1) } else { T::one() };
    for (bn, cache) in model.batchnorm.iter_mut().zip(&pass.hidden) {
        for k in 0..bn.gamma.len() {
            bn.running_mean[k] = (T::one() - mom) * bn.running_mean[k] + mom * cache.batch_mean[k];
            bn.running_var[k] = (T::one() - mom) * bn.running_var[k] + mom * cache.batch_var[k] * unbias;
        }
    }
}

/// Mini-batch Adam training. Shuffling and dropout masks are drawn from a
/// ChaCha8 stream seeded by `cfg.seed`, so a run is fully reproducible.
pub fn train<T: Scalar>(
    model: &ModelParams<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<(ModelParams<T>, TrainingLog), TrainError> {
    cfg.validate()?;
    model.check_data(data)?;
    let mut model = model.clone();
    let mut log = TrainingLog::default();
    if cfg.epochs == 0 {
        return Ok((model, log));
    }
    let slope = T::lit(cfg.leaky_slope);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&mut model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for (batch_no, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = data.features().select_rows(idx);
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels()[i]).collect();
            let masks = dropout_masks::<T, _>(&model.arch, idx.len(), &mut rng);
            let pass = model.forward_train(&x, masks.as_deref(), slope);
            let (loss, grads) = model.backward(&pass, &labels, slope);
            if !loss.is_finite() || grads.slices().iter().any(|s| s.iter().any(|g| !g.is_finite())) {
                return Err(TrainError::Divergence { epoch, batch: batch_no });
            }
            loss_sum += loss.as_f64() * idx.len() as f64;
            correct += (0..idx.len()).filter(|&i| argmax(pass.logits.row(i)) == labels[i]).count();
            update_running_stats(&mut model, &pass, idx.len());
            adam.update(&mut model, &grads, cfg);
        }
        log.epochs.push(EpochLog {
            epoch,
            loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
            eval_accuracy: evaluate_with_slope(&model, data, slope)?,
        });
    }
    Ok((model, log))
}

fn evaluate_with_slope<T: Scalar>(model: &ModelParams<T>, data: &Dataset<T>, slope: T) -> Result<f64, TrainError> {
    model.check_data(data)?;
    let logits = model.predict_logits(data.features(), slope);
    let correct = (0..data.len()).filter(|&i| argmax(logits.row(i)) == data.labels()[i]).count();
    Ok(correct as f64 / data.len() as f64)
}

/// Inference-mode accuracy with the default leaky slope.
pub fn evaluate<T: Scalar>(model: &ModelParams<T>, data: &Dataset<T>) -> Result<f64, TrainError> {
    evaluate_with_slope(model, data, T::lit(TrainConfig::default().leaky_slope))
}

/// Activation pattern matrix: one row per datum, one column per hidden
/// neuron, layers concatenated in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix<T> {
    pub values: Matrix<T>,
    /// `(layer, index within layer)` of each column.
    pub layout: Vec<(usize, usize)>,
}

/// Post-activation hidden outputs over `data` in inference mode.
pub fn capture_activations<T: Scalar>(
    model: &ModelParams<T>,
    data: &Dataset<T>,
    leaky_slope: f64,
) -> Result<ActivationMatrix<T>, TrainError> {
    model.check_data(data)?;
    let (hidden, _) = model.forward_inference(data.features(), T::lit(leaky_slope));
    let n = model.arch.hidden_neurons();
    let mut values = Matrix::zeros(data.len(), n);
    let mut layout = Vec::with_capacity(n);
    let mut offset = 0;
    for (l, h) in hidden.iter().enumerate() {
        for k in 0..h.cols() {
            layout.push((l, k));
            for i in 0..h.rows() {
                let v = h[(i, k)];
                if !v.is_finite() {
                    return Err(TrainError::NonFiniteActivation { neuron: offset + k, datum: i });
                }
                values[(i, offset + k)] = v;
            }
        }
        offset += h.cols();
    }
    Ok(ActivationMatrix { values, layout })
}
