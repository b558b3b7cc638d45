//! Fully-connected network with ELU activations, optional batch
//! normalization, dropout, decoupled weight decay, and early stopping on
//! validation loss. Trained by mini-batch SGD on the logistic loss; the
//! seed fixes weight initialization, batch order, and dropout masks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

use super::space::HpAssignment;
use super::{ModelFamily, ProbabilisticClassifier};

const SALT_MLP: u64 = 0x313a;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParams {
    pub n_layer: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub batchnorm: bool,
    pub init_lr: f64,
    pub weight_decay: f64,
    /// Weight the loss by inverse class frequency.
    pub class_weights: bool,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_batch_size() -> usize {
    128
}

fn default_max_epochs() -> usize {
    500
}

fn default_patience() -> usize {
    20
}

impl MlpParams {
    pub fn from_hp(hp: &HpAssignment) -> Result<MlpParams> {
        let get_f = |name: &str| -> Result<f64> {
            hp.get(name)
                .and_then(|v| v.as_float())
                .ok_or_else(|| Error::ModelConfig(format!("missing hyperparameter '{name}'")))
        };
        let get_i = |name: &str| -> Result<usize> {
            hp.get(name)
                .and_then(|v| v.as_int())
                .map(|v| v as usize)
                .ok_or_else(|| {
                    Error::ModelConfig(format!("missing integer hyperparameter '{name}'"))
                })
        };
        let batchnorm = matches!(hp.get("batchnorm").and_then(|v| v.as_cat()), Some("true"));
        let params = MlpParams {
            n_layer: get_i("n_layer")?,
            hidden_dim: get_i("hidden_dim")?,
            dropout: get_f("dropout")?,
            batchnorm,
            init_lr: get_f("init_lr")?,
            weight_decay: get_f("weight_decay")?,
            class_weights: false,
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layer < 1 {
            return Err(Error::ModelConfig("n_layer must be at least 1".into()));
        }
        if self.hidden_dim < 1 {
            return Err(Error::ModelConfig("hidden_dim must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::ModelConfig("dropout must lie in [0, 1)".into()));
        }
        if self.init_lr <= 0.0 || self.init_lr.is_nan() {
            return Err(Error::ModelConfig("init_lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearLayer {
    /// Row-major (out_dim x in_dim).
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HiddenBlock {
    pub linear: LinearLayer,
    pub bn: Option<BatchNormLayer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    pub blocks: Vec<HiddenBlock>,
    pub out: LinearLayer,
    pub params: MlpParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub epochs_run: usize,
    pub best_val_loss: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

fn elu_deriv(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

impl LinearLayer {
    fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> LinearLayer {
        let scale = (2.0 / in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng::standard_normal(rng) * scale)
            .collect();
        LinearLayer {
            w,
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// Forward: input (batch x in_dim) -> output (batch x out_dim).
    fn forward(&self, input: &[f64], batch: usize) -> Vec<f64> {
        let mut out = vec![0.0f64; batch * self.out_dim];
        for i in 0..batch {
            let row = &input[i * self.in_dim..(i + 1) * self.in_dim];
            let o = &mut out[i * self.out_dim..(i + 1) * self.out_dim];
            for (j, oj) in o.iter_mut().enumerate() {
                let wrow = &self.w[j * self.in_dim..(j + 1) * self.in_dim];
                *oj = self.b[j] + wrow.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }
}

/// Gradients of one linear layer.
#[derive(Debug, Clone)]
struct LinearGrad {
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone)]
struct BnGrad {
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Grads {
    blocks: Vec<(LinearGrad, Option<BnGrad>)>,
    out: LinearGrad,
}

/// Per-batch caches needed for the backward pass.
struct ForwardCache {
    /// Input to each hidden linear layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-batchnorm linear outputs.
    lin_out: Vec<Vec<f64>>,
    /// Batchnorm normalized values and batch stats (train mode).
    bn_xhat: Vec<Option<Vec<f64>>>,
    bn_mean: Vec<Option<Vec<f64>>>,
    bn_var: Vec<Option<Vec<f64>>>,
    /// Pre-activation values entering ELU.
    pre_act: Vec<Vec<f64>>,
    /// Dropout masks (already divided by keep probability), if active.
    dropout_masks: Vec<Option<Vec<f64>>>,
    /// Input to the output layer.
    final_input: Vec<f64>,
    logits: Vec<f64>,
}

impl MlpModel {
    fn new<R: Rng>(d_in: usize, params: &MlpParams, rng: &mut R, seed: u64) -> MlpModel {
        let mut blocks = Vec::with_capacity(params.n_layer);
        let mut cur = d_in;
        for _ in 0..params.n_layer {
            let linear = LinearLayer::init(cur, params.hidden_dim, rng);
            let bn = params.batchnorm.then(|| BatchNormLayer {
                gamma: vec![1.0; params.hidden_dim],
                beta: vec![0.0; params.hidden_dim],
                running_mean: vec![0.0; params.hidden_dim],
                running_var: vec![1.0; params.hidden_dim],
                dim: params.hidden_dim,
            });
            blocks.push(HiddenBlock { linear, bn });
            cur = params.hidden_dim;
        }
        let out = LinearLayer::init(cur, 1, rng);
        MlpModel {
            blocks,
            out,
            params: params.clone(),
            seed,
            feature_names: Vec::new(),
            epochs_run: 0,
            best_val_loss: f64::INFINITY,
        }
    }

    /// Forward pass. In train mode batchnorm uses batch statistics (and
    /// updates running ones when `update_running`); dropout applies only
    /// when a mask RNG is supplied.
    fn forward(
        &mut self,
        input: &[f64],
        batch: usize,
        train_mode: bool,
        update_running: bool,
        dropout_rng: Option<&mut rand_chacha::ChaCha8Rng>,
    ) -> ForwardCache {
        let n_blocks = self.blocks.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n_blocks),
            lin_out: Vec::with_capacity(n_blocks),
            bn_xhat: Vec::with_capacity(n_blocks),
            bn_mean: Vec::with_capacity(n_blocks),
            bn_var: Vec::with_capacity(n_blocks),
            pre_act: Vec::with_capacity(n_blocks),
            dropout_masks: Vec::with_capacity(n_blocks),
            final_input: Vec::new(),
            logits: Vec::new(),
        };
        let mut dropout_rng = dropout_rng;
        let mut a: Vec<f64> = input.to_vec();
        for bi in 0..n_blocks {
            cache.inputs.push(a.clone());
            let z = self.blocks[bi].linear.forward(&a, batch);
            cache.lin_out.push(z.clone());
            let dim = self.blocks[bi].linear.out_dim;
            let mut h = z;
            if self.blocks[bi].bn.is_some() {
                let (mean, var) = if train_mode {
                    let mut mean = vec![0.0f64; dim];
                    let mut var = vec![0.0f64; dim];
                    for i in 0..batch {
                        for j in 0..dim {
                            mean[j] += h[i * dim + j];
                        }
                    }
                    for m in mean.iter_mut() {
                        *m /= batch as f64;
                    }
                    for i in 0..batch {
                        for j in 0..dim {
                            let d = h[i * dim + j] - mean[j];
                            var[j] += d * d;
                        }
                    }
                    for v in var.iter_mut() {
                        *v /= batch as f64;
                    }
                    (mean, var)
                } else {
                    let bn = self.blocks[bi].bn.as_ref().unwrap();
                    (bn.running_mean.clone(), bn.running_var.clone())
                };
                if train_mode && update_running {
                    let bn = self.blocks[bi].bn.as_mut().unwrap();
                    for j in 0..dim {
                        bn.running_mean[j] =
                            (1.0 - BN_MOMENTUM) * bn.running_mean[j] + BN_MOMENTUM * mean[j];
                        bn.running_var[j] =
                            (1.0 - BN_MOMENTUM) * bn.running_var[j] + BN_MOMENTUM * var[j];
                    }
                }
                let bn = self.blocks[bi].bn.as_ref().unwrap();
                let mut xhat = vec![0.0f64; batch * dim];
                for i in 0..batch {
                    for j in 0..dim {
                        let xh = (h[i * dim + j] - mean[j]) / (var[j] + BN_EPS).sqrt();
                        xhat[i * dim + j] = xh;
                        h[i * dim + j] = bn.gamma[j] * xh + bn.beta[j];
                    }
                }
                cache.bn_xhat.push(Some(xhat));
                cache.bn_mean.push(Some(mean));
                cache.bn_var.push(Some(var));
            } else {
                cache.bn_xhat.push(None);
                cache.bn_mean.push(None);
                cache.bn_var.push(None);
            }
            cache.pre_act.push(h.clone());
            for v in h.iter_mut() {
                *v = elu(*v);
            }
            // Inverted dropout.
            let mask = match (&mut dropout_rng, self.params.dropout > 0.0 && train_mode) {
                (Some(rng), true) => {
                    let keep = 1.0 - self.params.dropout;
                    let mask: Vec<f64> = (0..batch * dim)
                        .map(|_| {
                            if rng.gen::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    for (v, m) in h.iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    Some(mask)
                }
                _ => None,
            };
            cache.dropout_masks.push(mask);
            a = h;
        }
        cache.final_input = a.clone();
        cache.logits = self.out.forward(&a, batch);
        cache
    }

    /// Mean weighted logistic loss over the batch.
    fn loss_from_logits(&self, logits: &[f64], y: &[u8], weights: &(f64, f64)) -> f64 {
        let mut total = 0.0;
        let mut wsum = 0.0;
        for (&z, &yi) in logits.iter().zip(y) {
            let w = if yi != 0 { weights.1 } else { weights.0 };
            let s = if yi != 0 { -z } else { z };
            let l = if s > 0.0 {
                s + (1.0 + (-s).exp()).ln()
            } else {
                (1.0 + s.exp()).ln()
            };
            total += w * l;
            wsum += w;
        }
        total / wsum
    }

    /// Backward pass from the logits; returns parameter gradients.
    fn backward(&self, cache: &ForwardCache, y: &[u8], weights: &(f64, f64)) -> Grads {
        let batch = y.len();
        let wsum: f64 = y
            .iter()
            .map(|&yi| if yi != 0 { weights.1 } else { weights.0 })
            .sum();
        // dL/dlogit_i = w_i * (sigmoid(z_i) - y_i) / wsum.
        let dlogits: Vec<f64> = cache
            .logits
            .iter()
            .zip(y)
            .map(|(&z, &yi)| {
                let w = if yi != 0 { weights.1 } else { weights.0 };
                w * (sigmoid(z) - yi as f64) / wsum
            })
            .collect();

        // Output layer gradients.
        let fin = &cache.final_input;
        let in_dim = self.out.in_dim;
        let mut out_grad = LinearGrad {
            w: vec![0.0; self.out.w.len()],
            b: vec![0.0; 1],
        };
        let mut d_prev = vec![0.0f64; batch * in_dim];
        for i in 0..batch {
            out_grad.b[0] += dlogits[i];
            for j in 0..in_dim {
                out_grad.w[j] += dlogits[i] * fin[i * in_dim + j];
                d_prev[i * in_dim + j] = dlogits[i] * self.out.w[j];
            }
        }

        let mut block_grads: Vec<(LinearGrad, Option<BnGrad>)> =
            Vec::with_capacity(self.blocks.len());
        let mut d_act = d_prev;
        for bi in (0..self.blocks.len()).rev() {
            let block = &self.blocks[bi];
            let dim = block.linear.out_dim;
            // Through dropout.
            if let Some(mask) = &cache.dropout_masks[bi] {
                for (d, m) in d_act.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            // Through ELU.
            let pre = &cache.pre_act[bi];
            for (d, &z) in d_act.iter_mut().zip(pre) {
                *d *= elu_deriv(z);
            }
            // Through batchnorm.
            let bn_grad = if let Some(bn) = &block.bn {
                let xhat = cache.bn_xhat[bi].as_ref().unwrap();
                let var = cache.bn_var[bi].as_ref().unwrap();
                let mut dgamma = vec![0.0f64; dim];
                let mut dbeta = vec![0.0f64; dim];
                let mut sum_dxhat = vec![0.0f64; dim];
                let mut sum_dxhat_xhat = vec![0.0f64; dim];
                let mut dxhat = vec![0.0f64; batch * dim];
                for i in 0..batch {
                    for j in 0..dim {
                        let g = d_act[i * dim + j];
                        dgamma[j] += g * xhat[i * dim + j];
                        dbeta[j] += g;
                        let dxh = g * bn.gamma[j];
                        dxhat[i * dim + j] = dxh;
                        sum_dxhat[j] += dxh;
                        sum_dxhat_xhat[j] += dxh * xhat[i * dim + j];
                    }
                }
                let m = batch as f64;
                for i in 0..batch {
                    for j in 0..dim {
                        let inv_std = 1.0 / (var[j] + BN_EPS).sqrt();
                        d_act[i * dim + j] = inv_std / m
                            * (m * dxhat[i * dim + j]
                                - sum_dxhat[j]
                                - xhat[i * dim + j] * sum_dxhat_xhat[j]);
                    }
                }
                Some(BnGrad {
                    gamma: dgamma,
                    beta: dbeta,
                })
            } else {
                None
            };
            // Through the linear layer.
            let input = &cache.inputs[bi];
            let in_dim = block.linear.in_dim;
            let mut lg = LinearGrad {
                w: vec![0.0; block.linear.w.len()],
                b: vec![0.0; dim],
            };
            let mut d_input = vec![0.0f64; batch * in_dim];
            for i in 0..batch {
                for j in 0..dim {
                    let g = d_act[i * dim + j];
                    lg.b[j] += g;
                    let wrow = &block.linear.w[j * in_dim..(j + 1) * in_dim];
                    for k in 0..in_dim {
                        lg.w[j * in_dim + k] += g * input[i * in_dim + k];
                        d_input[i * in_dim + k] += g * wrow[k];
                    }
                }
            }
            block_grads.push((lg, bn_grad));
            d_act = d_input;
        }
        block_grads.reverse();
        Grads {
            blocks: block_grads,
            out: out_grad,
        }
    }

    fn apply_grads(&mut self, grads: &Grads, lr: f64, weight_decay: f64) {
        for (block, (lg, bng)) in self.blocks.iter_mut().zip(&grads.blocks) {
            for (w, g) in block.linear.w.iter_mut().zip(&lg.w) {
                *w -= lr * g;
                // Decoupled weight decay on weights only.
                *w -= lr * weight_decay * *w;
            }
            for (b, g) in block.linear.b.iter_mut().zip(&lg.b) {
                *b -= lr * g;
            }
            if let (Some(bn), Some(bg)) = (&mut block.bn, bng) {
                for (p, g) in bn.gamma.iter_mut().zip(&bg.gamma) {
                    *p -= lr * g;
                }
                for (p, g) in bn.beta.iter_mut().zip(&bg.beta) {
                    *p -= lr * g;
                }
            }
        }
        for (w, g) in self.out.w.iter_mut().zip(&grads.out.w) {
            *w -= lr * g;
            *w -= lr * weight_decay * *w;
        }
        self.out.b[0] -= lr * grads.out.b[0];
    }

    /// Eval-mode logits: running batchnorm statistics, no dropout.
    fn eval_logits(&self, input: &[f64], batch: usize) -> Vec<f64> {
        let mut a: Vec<f64> = input.to_vec();
        for block in &self.blocks {
            let dim = block.linear.out_dim;
            let mut h = block.linear.forward(&a, batch);
            if let Some(bn) = &block.bn {
                for i in 0..batch {
                    for j in 0..dim {
                        let xh = (h[i * dim + j] - bn.running_mean[j])
                            / (bn.running_var[j] + BN_EPS).sqrt();
                        h[i * dim + j] = bn.gamma[j] * xh + bn.beta[j];
                    }
                }
            }
            for v in h.iter_mut() {
                *v = elu(*v);
            }
            a = h;
        }
        self.out.forward(&a, batch)
    }

    fn eval_loss(&self, x: &DenseMatrix, y: &[u8], weights: &(f64, f64)) -> f64 {
        let logits = self.eval_logits(&x.data, x.n_rows);
        self.loss_from_logits(&logits, y, weights)
    }
}

fn class_weight_pair(y: &[u8], enabled: bool) -> (f64, f64) {
    if !enabled {
        return (1.0, 1.0);
    }
    let n = y.len() as f64;
    let n_pos = y.iter().filter(|&&v| v != 0).count() as f64;
    let n_neg = n - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return (1.0, 1.0);
    }
    (n / (2.0 * n_neg), n / (2.0 * n_pos))
}

pub fn fit_mlp(
    x: &DenseMatrix,
    y: &[u8],
    x_val: &DenseMatrix,
    y_val: &[u8],
    params: &MlpParams,
    seed: u64,
    feature_names: Vec<String>,
) -> Result<MlpModel> {
    params.validate()?;
    let n = x.n_rows;
    if n == 0 || n != y.len() {
        return Err(Error::ModelConfig(
            "empty or mismatched training data".into(),
        ));
    }
    if x_val.n_rows == 0 || x_val.n_rows != y_val.len() {
        return Err(Error::ModelConfig(
            "missing or mismatched validation data".into(),
        ));
    }

    let mut init_rng = rng::stream(seed, SALT_MLP, 0);
    let mut model = MlpModel::new(x.n_cols, params, &mut init_rng, seed);
    model.feature_names = feature_names;
    let weights = class_weight_pair(y, params.class_weights);

    let mut shuffle_rng = rng::stream(seed, SALT_MLP, 1);
    let mut dropout_rng = rng::stream(seed, SALT_MLP, 2);

    let mut best = (model.eval_loss(x_val, y_val, &weights), snapshot(&model));
    let mut best_epoch = 0usize;
    for epoch in 0..params.max_epochs {
        model.epochs_run = epoch + 1;
        let order = rng::shuffled_indices(n, &mut shuffle_rng);
        for chunk in order.chunks(params.batch_size) {
            // Batchnorm batch statistics need at least 2 rows.
            if params.batchnorm && chunk.len() < 2 {
                continue;
            }
            let xb = x.select_rows(chunk);
            let yb: Vec<u8> = chunk.iter().map(|&i| y[i]).collect();
            let cache = model.forward(&xb.data, xb.n_rows, true, true, Some(&mut dropout_rng));
            let grads = model.backward(&cache, &yb, &weights);
            model.apply_grads(&grads, params.init_lr, params.weight_decay);
        }
        let val_loss = model.eval_loss(x_val, y_val, &weights);
        if val_loss < best.0 - 1e-12 {
            best = (val_loss, snapshot(&model));
            best_epoch = epoch + 1;
        } else if (epoch + 1) - best_epoch >= params.patience {
            break;
        }
    }
    restore(&mut model, best.1);
    model.best_val_loss = best.0;
    Ok(model)
}

type Snapshot = (Vec<HiddenBlock>, LinearLayer);

fn snapshot(m: &MlpModel) -> Snapshot {
    (m.blocks.clone(), m.out.clone())
}

fn restore(m: &mut MlpModel, s: Snapshot) {
    m.blocks = s.0;
    m.out = s.1;
}

impl ProbabilisticClassifier for MlpModel {
    fn family(&self) -> ModelFamily {
        ModelFamily::Mlp
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }

    fn raw_score(&self, x: &[f64]) -> f64 {
        self.eval_logits(x, 1)[0]
    }
}

/// Analytic-vs-numeric gradient comparison on a fixed batch (train-mode
/// batchnorm, dropout disabled). Returns the maximum relative error over
/// all parameters.
pub fn gradient_check_max_rel_err(x: &DenseMatrix, y: &[u8], params: &MlpParams, seed: u64) -> f64 {
    let mut init_rng = rng::stream(seed, SALT_MLP, 0);
    let mut model = MlpModel::new(x.n_cols, params, &mut init_rng, seed);
    let weights = class_weight_pair(y, params.class_weights);

    let cache = model.forward(&x.data, x.n_rows, true, false, None);
    let grads = model.backward(&cache, y, &weights);

    let analytic = flatten_grads(&model, &grads);
    let mut max_rel = 0.0f64;
    #[allow(clippy::needless_range_loop)]
    for idx in 0..analytic.len() {
        let theta = *param_at(&model, idx);
        let eps = 1e-5 * theta.abs().max(1.0);
        *param_at_mut(&mut model, idx) = theta + eps;
        let cache_p = model.forward(&x.data, x.n_rows, true, false, None);
        let loss_p = model.loss_from_logits(&cache_p.logits, y, &weights);
        *param_at_mut(&mut model, idx) = theta - eps;
        let cache_m = model.forward(&x.data, x.n_rows, true, false, None);
        let loss_m = model.loss_from_logits(&cache_m.logits, y, &weights);
        *param_at_mut(&mut model, idx) = theta;
        let numeric = (loss_p - loss_m) / (2.0 * eps);
        let denom = analytic[idx].abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max((analytic[idx] - numeric).abs() / denom);
    }
    max_rel
}

fn flatten_grads(model: &MlpModel, grads: &Grads) -> Vec<f64> {
    let mut out = Vec::new();
    for (_, (lg, bng)) in model.blocks.iter().zip(&grads.blocks) {
        out.extend_from_slice(&lg.w);
        out.extend_from_slice(&lg.b);
        if let Some(bg) = bng {
            out.extend_from_slice(&bg.gamma);
            out.extend_from_slice(&bg.beta);
        }
    }
    out.extend_from_slice(&grads.out.w);
    out.extend_from_slice(&grads.out.b);
    out
}

/// Flat parameter access matching the `flatten_grads` ordering.
fn param_at(model: &MlpModel, mut idx: usize) -> &f64 {
    for block in &model.blocks {
        let spans: Vec<&Vec<f64>> = match &block.bn {
            Some(bn) => vec![&block.linear.w, &block.linear.b, &bn.gamma, &bn.beta],
            None => vec![&block.linear.w, &block.linear.b],
        };
        for s in spans {
            if idx < s.len() {
                return &s[idx];
            }
            idx -= s.len();
        }
    }
    if idx < model.out.w.len() {
        return &model.out.w[idx];
    }
    idx -= model.out.w.len();
    &model.out.b[idx]
}

fn param_at_mut(model: &mut MlpModel, mut idx: usize) -> &mut f64 {
    for block in &mut model.blocks {
        let lw = block.linear.w.len();
        if idx < lw {
            return &mut block.linear.w[idx];
        }
        idx -= lw;
        let lb = block.linear.b.len();
        if idx < lb {
            return &mut block.linear.b[idx];
        }
        idx -= lb;
        if let Some(bn) = &mut block.bn {
            let g = bn.gamma.len();
            if idx < g {
                return &mut bn.gamma[idx];
            }
            idx -= g;
            let b = bn.beta.len();
            if idx < b {
                return &mut bn.beta[idx];
            }
            idx -= b;
        }
    }
    let ow = model.out.w.len();
    if idx < ow {
        return &mut model.out.w[idx];
    }
    idx -= ow;
    &mut model.out.b[idx]
}
