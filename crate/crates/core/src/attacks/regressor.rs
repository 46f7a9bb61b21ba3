//! Convolutional inverse regressor: maps privatized 5 s segments back to
//! the raw gaze that produced them. Forward and backward passes are written
//! out by hand; the network is small enough that plain loops are fast.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{resample_linear, GazeStream, Segment, SEGMENT_LEN, SEGMENT_RATE_HZ};
use crate::rng::{substream, Key};

pub const KERNEL: usize = 9;
pub const HIDDEN_CHANNELS: usize = 16;
pub const CHANNELS: usize = 2;
/// Fewest training pairs accepted.
pub const MIN_PAIRS: usize = 32;
const PAD: usize = KERNEL / 2;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;
// Standardized targets are divided by this to fit tanh's output range.
const TARGET_SPAN: f64 = 1.5;
const FD_STEP: f64 = 1e-4;
// Floor of the relative-error denominator for near-zero gradients.
const FD_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for RegressorHyper {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Layer {
    cin: usize,
    cout: usize,
    offset: usize,
}

impl Layer {
    fn weight_len(&self) -> usize {
        self.cout * self.cin * KERNEL
    }
    fn weight(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.weight_len()
    }
    // No conv bias: batch norm subtracts it straight back out.
    fn gamma(&self) -> std::ops::Range<usize> {
        let s = self.offset + self.weight_len();
        s..s + self.cout
    }
    fn beta(&self) -> std::ops::Range<usize> {
        let s = self.gamma().end;
        s..s + self.cout
    }
    fn param_len(&self) -> usize {
        self.weight_len() + 2 * self.cout
    }
}

fn architecture() -> Vec<Layer> {
    let widths = [CHANNELS, HIDDEN_CHANNELS, HIDDEN_CHANNELS, HIDDEN_CHANNELS, CHANNELS];
    let mut offset = 0;
    widths
        .windows(2)
        .map(|w| {
            let layer = Layer {
                cin: w[0],
                cout: w[1],
                offset,
            };
            offset += layer.param_len();
            layer
        })
        .collect()
}

/// Per-channel affine normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub mean: [f64; CHANNELS],
    pub scale: [f64; CHANNELS],
}

impl Default for ChannelNorm {
    fn default() -> Self {
        Self {
            mean: [0.0; CHANNELS],
            scale: [1.0; CHANNELS],
        }
    }
}

impl ChannelNorm {
    fn fit<'a>(segments: impl Iterator<Item = &'a Segment>, span: f64) -> Self {
        let mut sum = [0.0; CHANNELS];
        let mut sq = [0.0; CHANNELS];
        let mut n = 0.0;
        for s in segments {
            for (c, ch) in [&s.theta, &s.psi].into_iter().enumerate() {
                sum[c] += ch.iter().sum::<f64>();
                sq[c] += ch.iter().map(|x| x * x).sum::<f64>();
            }
            n += s.len() as f64;
        }
        let mut norm = Self::default();
        for c in 0..CHANNELS {
            let mean = sum[c] / n;
            let var = (sq[c] / n - mean * mean).max(0.0);
            let std = var.sqrt();
            norm.mean[c] = mean;
            norm.scale[c] = if std > 1e-9 { std * span } else { span };
        }
        norm
    }

    fn apply(&self, c: usize, x: f64) -> f64 {
        (x - self.mean[c]) / self.scale[c]
    }

    fn invert(&self, c: usize, y: f64) -> f64 {
        y * self.scale[c] + self.mean[c]
    }
}

/// Batch of `n` examples laid out as `[example][channel][time]`.
struct Batch {
    n: usize,
    data: Vec<f64>,
}

fn segment_batch(segments: &[&Segment], norm: &ChannelNorm) -> Result<Batch> {
    let mut data = Vec::with_capacity(segments.len() * CHANNELS * SEGMENT_LEN);
    for s in segments {
        if s.theta.len() != SEGMENT_LEN || s.psi.len() != SEGMENT_LEN {
            return Err(Error::InvalidSegment {
                expected: SEGMENT_LEN,
                actual: s.theta.len().max(s.psi.len()),
            });
        }
        for (c, ch) in [&s.theta, &s.psi].into_iter().enumerate() {
            data.extend(ch.iter().map(|&x| norm.apply(c, x)));
        }
    }
    Ok(Batch {
        n: segments.len(),
        data,
    })
}

struct LayerCache {
    input: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    output: Vec<f64>,
}

struct Forward {
    caches: Vec<LayerCache>,
    // Per layer (mean, biased variance) of the pre-normalization activations.
    batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Forward {
    fn output(&self) -> &[f64] {
        &self.caches.last().expect("network has layers").output
    }
}

fn conv_forward(layer: &Layer, params: &[f64], input: &[f64], n: usize) -> Vec<f64> {
    let (cin, cout, t_len) = (layer.cin, layer.cout, SEGMENT_LEN);
    let w = &params[layer.weight()];
    let mut out = vec![0.0; n * cout * t_len];
    for b in 0..n {
        for o in 0..cout {
            let row = &mut out[(b * cout + o) * t_len..][..t_len];
            for i in 0..cin {
                let x = &input[(b * cin + i) * t_len..][..t_len];
                for k in 0..KERNEL {
                    let wk = w[(o * cin + i) * KERNEL + k];
                    // out[t] += w * x[t + k - PAD]
                    let (out_range, in_range) = tap_ranges(k);
                    for (r, v) in row[out_range].iter_mut().zip(&x[in_range]) {
                        *r += wk * v;
                    }
                }
            }
        }
    }
    out
}

/// Output and input index ranges touched by kernel tap `k` under same
/// padding: `out[t]` reads `x[t + k - PAD]`.
fn tap_ranges(k: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let lo = PAD.saturating_sub(k);
    let hi = (SEGMENT_LEN + PAD - k).min(SEGMENT_LEN);
    (lo..hi, lo + k - PAD..hi + k - PAD)
}

// Dot product with four independent accumulators so it vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Accumulates weight gradients; returns the input gradient.
fn conv_backward(
    layer: &Layer,
    params: &[f64],
    input: &[f64],
    dz: &[f64],
    n: usize,
    grad: &mut [f64],
) -> Vec<f64> {
    let (cin, cout, t_len) = (layer.cin, layer.cout, SEGMENT_LEN);
    let w = &params[layer.weight()];
    let mut dx = vec![0.0; n * cin * t_len];
    let w_range = layer.weight();
    for b in 0..n {
        for o in 0..cout {
            let d = &dz[(b * cout + o) * t_len..][..t_len];
            for i in 0..cin {
                let x = &input[(b * cin + i) * t_len..][..t_len];
                let dxi = &mut dx[(b * cin + i) * t_len..][..t_len];
                for k in 0..KERNEL {
                    let idx = (o * cin + i) * KERNEL + k;
                    let wk = w[idx];
                    let (out_range, in_range) = tap_ranges(k);
                    grad[w_range.start + idx] += dot(&d[out_range.clone()], &x[in_range.clone()]);
                    for (g, dv) in dxi[in_range].iter_mut().zip(&d[out_range]) {
                        *g += wk * dv;
                    }
                }
            }
        }
    }
    dx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    layers: Vec<LayerShapes>,
    input_norm: ChannelNorm,
    target_norm: ChannelNorm,
    hyper: RegressorHyper,
    seed: u64,
    trained: bool,
    loss_history: Vec<f64>,
    total_values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerShapes {
    weight: [usize; 3],
    bn_gamma: [usize; 1],
    bn_beta: [usize; 1],
    bn_running_mean: [usize; 1],
    bn_running_var: [usize; 1],
}

const SIDECAR_FORMAT: &str = "gazeguard-inverse-regressor-v1";

/// Four [conv1d → batch norm → tanh] blocks, 2 → 16 → 16 → 16 → 2 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseRegressor {
    layers: Vec<Layer>,
    params: Vec<f64>,
    running_mean: Vec<Vec<f64>>,
    running_var: Vec<Vec<f64>>,
    input_norm: ChannelNorm,
    target_norm: ChannelNorm,
    hyper: RegressorHyper,
    seed: u64,
    trained: bool,
    loss_history: Vec<f64>,
}

impl InverseRegressor {
    /// Freshly initialized, untrained network. Convolution weights are
    /// uniform in ±1/sqrt(fan_in); batch norm starts at γ = 1, β = 0.
    pub fn new(seed: u64) -> Self {
        let layers = architecture();
        let total = layers.iter().map(Layer::param_len).sum();
        let mut params = vec![0.0; total];
        let mut rng = substream(seed, &[Key::Str("regressor"), Key::Str("init")]);
        for layer in &layers {
            let bound = 1.0 / ((layer.cin * KERNEL) as f64).sqrt();
            for p in &mut params[layer.weight()] {
                *p = rng.random_range(-bound..bound);
            }
            params[layer.gamma()].fill(1.0);
        }
        Self {
            running_mean: layers.iter().map(|l| vec![0.0; l.cout]).collect(),
            running_var: layers.iter().map(|l| vec![1.0; l.cout]).collect(),
            layers,
            params,
            input_norm: ChannelNorm::default(),
            target_norm: ChannelNorm {
                mean: [0.0; CHANNELS],
                scale: [TARGET_SPAN; CHANNELS],
            },
            hyper: RegressorHyper::default(),
            seed,
            trained: false,
            loss_history: Vec::new(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Training loss in normalized target units: entry 0 is the untrained
    /// network, entry `e` the mean batch loss of epoch `e`.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    pub fn hyper(&self) -> &RegressorHyper {
        &self.hyper
    }

    fn forward(&self, input: &[f64], n: usize, training: bool) -> Forward {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut batch_stats = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let z = conv_forward(layer, &self.params, &x, n);
            let cout = layer.cout;
            let count = (n * SEGMENT_LEN) as f64;
            let (mean, var) = if training {
                let mut mean = vec![0.0; cout];
                let mut var = vec![0.0; cout];
                for b in 0..n {
                    for c in 0..cout {
                        mean[c] += z[(b * cout + c) * SEGMENT_LEN..][..SEGMENT_LEN].iter().sum::<f64>();
                    }
                }
                mean.iter_mut().for_each(|m| *m /= count);
                for b in 0..n {
                    for c in 0..cout {
                        var[c] += z[(b * cout + c) * SEGMENT_LEN..][..SEGMENT_LEN]
                            .iter()
                            .map(|v| (v - mean[c]).powi(2))
                            .sum::<f64>();
                    }
                }
                var.iter_mut().for_each(|v| *v /= count);
                (mean, var)
            } else {
                (self.running_mean[li].clone(), self.running_var[li].clone())
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
            let gamma = &self.params[layer.gamma()];
            let beta = &self.params[layer.beta()];
            let mut xhat = z;
            let mut out = vec![0.0; xhat.len()];
            for b in 0..n {
                for c in 0..cout {
                    let base = (b * cout + c) * SEGMENT_LEN;
                    for t in base..base + SEGMENT_LEN {
                        let h = (xhat[t] - mean[c]) * inv_std[c];
                        xhat[t] = h;
                        out[t] = (gamma[c] * h + beta[c]).tanh();
                    }
                }
            }
            batch_stats.push((mean, var));
            let next = out.clone();
            caches.push(LayerCache {
                input: x,
                xhat,
                inv_std,
                output: out,
            });
            x = next;
        }
        Forward {
            caches,
            batch_stats,
        }
    }

    /// Gradient of the loss with respect to every parameter, given the
    /// gradient with respect to the network output. Training-mode batch
    /// norm only.
    fn backward(&self, fwd: &Forward, dout: Vec<f64>, n: usize) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let mut da = dout;
        let count = (n * SEGMENT_LEN) as f64;
        for (layer, cache) in self.layers.iter().zip(&fwd.caches).rev() {
            let cout = layer.cout;
            let gamma = &self.params[layer.gamma()];
            let (g_range, b_range) = (layer.gamma(), layer.beta());
            // Through tanh, then the batch-norm affine.
            let mut dxhat = vec![0.0; da.len()];
            let mut sum_dxhat = vec![0.0; cout];
            let mut sum_dxhat_xhat = vec![0.0; cout];
            for b in 0..n {
                for c in 0..cout {
                    let base = (b * cout + c) * SEGMENT_LEN;
                    let (mut dg, mut db) = (0.0, 0.0);
                    for t in base..base + SEGMENT_LEN {
                        let a = cache.output[t];
                        let dy = da[t] * (1.0 - a * a);
                        let h = cache.xhat[t];
                        dg += dy * h;
                        db += dy;
                        let dh = dy * gamma[c];
                        dxhat[t] = dh;
                        sum_dxhat[c] += dh;
                        sum_dxhat_xhat[c] += dh * h;
                    }
                    grad[g_range.start + c] += dg;
                    grad[b_range.start + c] += db;
                }
            }
            // Through the batch statistics.
            let mut dz = dxhat;
            for b in 0..n {
                for c in 0..cout {
                    let base = (b * cout + c) * SEGMENT_LEN;
                    let k = cache.inv_std[c] / count;
                    for t in base..base + SEGMENT_LEN {
                        dz[t] = k
                            * (count * dz[t] - sum_dxhat[c] - cache.xhat[t] * sum_dxhat_xhat[c]);
                    }
                }
            }
            da = conv_backward(layer, &self.params, &cache.input, &dz, n, &mut grad);
        }
        grad
    }

    /// Mean squared error over every output value, and its gradient.
    fn loss_and_grad(&self, input: &Batch, target: &Batch) -> (f64, Vec<f64>, Forward) {
        let fwd = self.forward(&input.data, input.n, true);
        let out = fwd.output();
        let m = out.len() as f64;
        let mut loss = 0.0;
        let dout: Vec<f64> = out
            .iter()
            .zip(&target.data)
            .map(|(o, y)| {
                let e = o - y;
                loss += e * e;
                2.0 * e / m
            })
            .collect();
        let grad = self.backward(&fwd, dout, input.n);
        (loss / m, grad, fwd)
    }

    fn loss(&self, input: &Batch, target: &Batch) -> f64 {
        let fwd = self.forward(&input.data, input.n, true);
        let out = fwd.output();
        out.iter()
            .zip(&target.data)
            .map(|(o, y)| (o - y).powi(2))
            .sum::<f64>()
            / out.len() as f64
    }

    fn update_running(&mut self, stats: &[(Vec<f64>, Vec<f64>)], n: usize) {
        let count = (n * SEGMENT_LEN) as f64;
        let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
        for (li, (mean, var)) in stats.iter().enumerate() {
            for c in 0..mean.len() {
                let rm = &mut self.running_mean[li][c];
                *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * mean[c];
                let rv = &mut self.running_var[li][c];
                *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * var[c] * unbias;
            }
        }
    }

    /// Maps one privatized segment to its reconstruction (inference mode).
    pub fn predict_segment(&self, segment: &Segment) -> Result<Segment> {
        if !self.trained {
            return Err(Error::ModelNotTrained);
        }
        let input = segment_batch(&[segment], &self.input_norm)?;
        let fwd = self.forward(&input.data, 1, false);
        let out = fwd.output();
        let channel = |c: usize| -> Vec<f64> {
            out[c * SEGMENT_LEN..(c + 1) * SEGMENT_LEN]
                .iter()
                .map(|&y| self.target_norm.invert(c, y))
                .collect()
        };
        Ok(Segment {
            theta: channel(0),
            psi: channel(1),
            ..segment.clone()
        })
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    fn shapes(&self) -> Vec<LayerShapes> {
        self.layers
            .iter()
            .map(|l| LayerShapes {
                weight: [l.cout, l.cin, KERNEL],
                bn_gamma: [l.cout],
                bn_beta: [l.cout],
                bn_running_mean: [l.cout],
                bn_running_var: [l.cout],
            })
            .collect()
    }

    /// Writes the parameters as little-endian f64 values to `path` and a
    /// JSON sidecar with shapes and normalization next to it (`.json`).
    ///
    /// Value order per layer: weight `[out][in][k]`, γ, β,
    /// running mean, running variance.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut values = Vec::new();
        for (li, l) in self.layers.iter().enumerate() {
            values.extend_from_slice(&self.params[l.offset..l.offset + l.param_len()]);
            values.extend_from_slice(&self.running_mean[li]);
            values.extend_from_slice(&self.running_var[li]);
        }
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let sidecar = Sidecar {
            format: SIDECAR_FORMAT.into(),
            layers: self.shapes(),
            input_norm: self.input_norm,
            target_norm: self.target_norm,
            hyper: self.hyper.clone(),
            seed: self.seed,
            trained: self.trained,
            loss_history: self.loss_history.clone(),
            total_values: values.len(),
        };
        let side = Self::sidecar_path(path);
        fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let side = Self::sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        let mut model = Self::new(sidecar.seed);
        if sidecar.format != SIDECAR_FORMAT || sidecar.layers != model.shapes() {
            return Err(Error::Schema(format!(
                "{} does not describe this network architecture",
                side.display()
            )));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let expected: usize = model.layers.iter().map(|l| l.param_len() + 2 * l.cout).sum();
        if bytes.len() != expected * 8 || sidecar.total_values != expected {
            return Err(Error::DimensionMismatch {
                expected: expected * 8,
                actual: bytes.len(),
            });
        }
        let mut values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        for li in 0..model.layers.len() {
            let l = model.layers[li];
            for p in &mut model.params[l.offset..l.offset + l.param_len()] {
                *p = values.next().expect("length checked");
            }
            for v in model.running_mean[li].iter_mut().chain(model.running_var[li].iter_mut()) {
                *v = values.next().expect("length checked");
            }
        }
        model.input_norm = sidecar.input_norm;
        model.target_norm = sidecar.target_norm;
        model.hyper = sidecar.hyper;
        model.trained = sidecar.trained;
        model.loss_history = sidecar.loss_history;
        Ok(model)
    }
}

/// Trains the regressor on (privatized, original) segment pairs with
/// mini-batch Adam. Inputs and targets are standardized per channel with
/// statistics of the training set. Single-threaded and deterministic for a
/// given seed.
pub fn train_inverse_regressor(
    pairs: &[(Segment, Segment)],
    hyper: &RegressorHyper,
    seed: u64,
) -> Result<InverseRegressor> {
    if pairs.len() < MIN_PAIRS {
        return Err(Error::InsufficientData(format!(
            "inverse regression needs at least {MIN_PAIRS} pairs, got {}",
            pairs.len()
        )));
    }
    if hyper.epochs == 0 || hyper.batch_size == 0 || !(hyper.learning_rate > 0.0) {
        return Err(Error::InvalidParameter(
            "epochs, batch size and learning rate must be positive".into(),
        ));
    }
    let mut model = InverseRegressor::new(seed);
    model.hyper = hyper.clone();
    model.input_norm = ChannelNorm::fit(pairs.iter().map(|p| &p.0), 1.0);
    model.target_norm = ChannelNorm::fit(pairs.iter().map(|p| &p.1), TARGET_SPAN);

    let inputs: Vec<&Segment> = pairs.iter().map(|p| &p.0).collect();
    let targets: Vec<&Segment> = pairs.iter().map(|p| &p.1).collect();
    // Validates shapes once up front.
    segment_batch(&inputs, &model.input_norm)?;
    segment_batch(&targets, &model.target_norm)?;

    // Entry 0 of the loss history is the untrained network.
    let mut initial = 0.0;
    for chunk in (0..pairs.len()).collect::<Vec<_>>().chunks(hyper.batch_size.max(2)) {
        let x = segment_batch(&chunk.iter().map(|&i| inputs[i]).collect::<Vec<_>>(), &model.input_norm)?;
        let y = segment_batch(&chunk.iter().map(|&i| targets[i]).collect::<Vec<_>>(), &model.target_norm)?;
        initial += model.loss(&x, &y) * chunk.len() as f64;
    }
    model.loss_history.push(initial / pairs.len() as f64);

    let mut m = vec![0.0; model.params.len()];
    let mut v = vec![0.0; model.params.len()];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 0..hyper.epochs {
        let mut rng = substream(
            seed,
            &[Key::Str("regressor"), Key::Str("shuffle"), Key::Int(epoch as u64)],
        );
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(hyper.batch_size) {
            // A lone example leaves batch norm with no spread to learn from.
            if chunk.len() < 2 {
                continue;
            }
            let x = segment_batch(
                &chunk.iter().map(|&i| inputs[i]).collect::<Vec<_>>(),
                &model.input_norm,
            )?;
            let y = segment_batch(
                &chunk.iter().map(|&i| targets[i]).collect::<Vec<_>>(),
                &model.target_norm,
            )?;
            let (loss, grad, fwd) = model.loss_and_grad(&x, &y);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            step += 1;
            let (b1, b2) = (hyper.beta1, hyper.beta2);
            let c1 = 1.0 - b1.powi(step);
            let c2 = 1.0 - b2.powi(step);
            for (((p, g), mi), vi) in model.params.iter_mut().zip(&grad).zip(&mut m).zip(&mut v) {
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                *p -= hyper.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + hyper.adam_eps);
            }
            model.update_running(&fwd.batch_stats, chunk.len());
            epoch_loss += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let mean = epoch_loss / seen.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        log::debug!("regressor epoch {epoch}: loss {mean:.6}");
        model.loss_history.push(mean);
    }
    model.trained = true;
    Ok(model)
}

/// Reconstructs a privatized stream window by window.
///
/// The stream is put on the 125 Hz segment grid, cut into consecutive
/// non-overlapping 625-sample windows (the last one padded with the
/// channel mean, i.e. zero after normalization), mapped through the
/// network, and read back at the original timestamps.
pub fn apply_inverse(model: &InverseRegressor, stream: &GazeStream) -> Result<GazeStream> {
    if !model.trained {
        return Err(Error::ModelNotTrained);
    }
    if stream.samples.len() < 2 {
        return Err(Error::InsufficientData(
            "reconstruction needs at least 2 samples".into(),
        ));
    }
    let grid = if stream.nominal_rate_hz == SEGMENT_RATE_HZ {
        stream.clone()
    } else {
        resample_linear(stream, SEGMENT_RATE_HZ)?
    };
    let n = grid.len();
    let mut theta = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for start in (0..n).step_by(SEGMENT_LEN) {
        let end = (start + SEGMENT_LEN).min(n);
        let mut window = Segment {
            theta: grid.samples[start..end].iter().map(|s| s.theta_deg).collect(),
            psi: grid.samples[start..end].iter().map(|s| s.psi_deg).collect(),
            rate_hz: SEGMENT_RATE_HZ,
            user_id: stream.user_id.clone(),
            trial_id: stream.trial_id,
            segment_index: start / SEGMENT_LEN,
        };
        window.theta.resize(SEGMENT_LEN, model.input_norm.mean[0]);
        window.psi.resize(SEGMENT_LEN, model.input_norm.mean[1]);
        let out = model.predict_segment(&window)?;
        theta.extend_from_slice(&out.theta[..end - start]);
        psi.extend_from_slice(&out.psi[..end - start]);
    }

    if stream.nominal_rate_hz == SEGMENT_RATE_HZ {
        let samples = stream
            .samples
            .iter()
            .zip(theta.into_iter().zip(psi))
            .map(|(s, (t, p))| s.with_angles(t, p))
            .collect();
        return Ok(stream.with_samples(samples));
    }
    // Linear read-back at the original timestamps.
    let t0 = stream.samples[0].timestamp_s;
    let samples = stream
        .samples
        .iter()
        .map(|s| {
            let pos = (s.timestamp_s - t0) * SEGMENT_RATE_HZ;
            let i = (pos.floor() as usize).min(n - 1);
            let frac = if i + 1 < n { pos - i as f64 } else { 0.0 };
            let j = (i + 1).min(n - 1);
            s.with_angles(
                theta[i] + frac * (theta[j] - theta[i]),
                psi[i] + frac * (psi[j] - psi[i]),
            )
        })
        .collect();
    Ok(stream.with_samples(samples))
}

/// Largest relative difference between analytic and central-difference
/// gradients of the training loss, over `samples` parameters drawn with
/// `seed`. The probe serves as both input and target.
pub fn regressor_grad_check(
    model: &InverseRegressor,
    probe: &Segment,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let x = segment_batch(&[probe], &model.input_norm)?;
    let y = segment_batch(&[probe], &model.target_norm)?;
    let (_, grad, _) = model.loss_and_grad(&x, &y);
    let mut rng = substream(seed, &[Key::Str("grad-check")]);
    let mut probe_model = model.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let i = rng.random_range(0..model.params.len());
        let original = probe_model.params[i];
        probe_model.params[i] = original + FD_STEP;
        let up = probe_model.loss(&x, &y);
        probe_model.params[i] = original - FD_STEP;
        let down = probe_model.loss(&x, &y);
        probe_model.params[i] = original;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let analytic = grad[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Gradient of the probe loss for every parameter, for inspection.
pub fn regressor_gradient(model: &InverseRegressor, probe: &Segment) -> Result<Vec<f64>> {
    let x = segment_batch(&[probe], &model.input_norm)?;
    let y = segment_batch(&[probe], &model.target_norm)?;
    Ok(model.loss_and_grad(&x, &y).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave_segment(phase: f64, amp: f64) -> Segment {
        let t = |i: usize| i as f64 / SEGMENT_RATE_HZ;
        Segment {
            theta: (0..SEGMENT_LEN).map(|i| amp * (1.3 * t(i) + phase).sin()).collect(),
            psi: (0..SEGMENT_LEN)
                .map(|i| 0.5 * amp * (0.7 * t(i) + 2.0 * phase).cos() + 2.0)
                .collect(),
            rate_hz: SEGMENT_RATE_HZ,
            user_id: "u".into(),
            trial_id: 1,
            segment_index: 0,
        }
    }

    #[test]
    fn architecture_size() {
        let m = InverseRegressor::new(1);
        // Per block: weights + γ + β.
        let expected = (16 * 2 * 9 + 2 * 16) + 2 * (16 * 16 * 9 + 2 * 16) + (2 * 16 * 9 + 2 * 2);
        assert_eq!(m.parameter_count(), expected);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = InverseRegressor::new(3);
        let err = regressor_grad_check(&m, &wave_segment(0.3, 10.0), 120, 1).unwrap();
        assert!(err < 1e-4, "{err}");
        let again = regressor_grad_check(&m, &wave_segment(0.3, 10.0), 120, 1).unwrap();
        assert_eq!(err, again);
    }

    #[test]
    fn gradients_match_after_training_steps() {
        let pairs: Vec<_> = (0..32)
            .map(|i| (wave_segment(0.2 * i as f64, 8.0), wave_segment(0.2 * i as f64, 6.0)))
            .collect();
        let hyper = RegressorHyper {
            epochs: 10,
            ..RegressorHyper::default()
        };
        let m = train_inverse_regressor(&pairs, &hyper, 9).unwrap();
        let err = regressor_grad_check(&m, &wave_segment(1.1, 7.0), 120, 2).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn zero_probe_gradients_finite() {
        let m = InverseRegressor::new(4);
        let zero = wave_segment(0.0, 0.0);
        let zero = Segment {
            psi: vec![0.0; SEGMENT_LEN],
            ..zero
        };
        let g = regressor_gradient(&m, &zero).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn too_few_pairs() {
        let pairs: Vec<_> = (0..10).map(|i| (wave_segment(i as f64, 5.0), wave_segment(i as f64, 5.0))).collect();
        assert!(matches!(
            train_inverse_regressor(&pairs, &RegressorHyper::default(), 1),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn untrained_model_refuses() {
        let s = GazeStream::from_angles("u", 1, 125.0, (0..700).map(|i| (i as f64 * 0.01, 0.0)));
        assert!(matches!(
            apply_inverse(&InverseRegressor::new(1), &s),
            Err(Error::ModelNotTrained)
        ));
    }

    fn short_training(seed: u64) -> InverseRegressor {
        let pairs: Vec<_> = (0..32)
            .map(|i| {
                let s = wave_segment(i as f64 * 0.4, 8.0 + i as f64 * 0.1);
                (s.clone(), s)
            })
            .collect();
        let hyper = RegressorHyper {
            epochs: 3,
            batch_size: 16,
            ..RegressorHyper::default()
        };
        train_inverse_regressor(&pairs, &hyper, seed).unwrap()
    }

    #[test]
    fn training_is_deterministic() {
        let a = short_training(9);
        let b = short_training(9);
        assert_eq!(a.parameters(), b.parameters());
        assert_eq!(a.loss_history(), b.loss_history());
        assert_ne!(a.parameters(), short_training(10).parameters());
    }

    #[test]
    fn output_lengths() {
        let m = short_training(2);
        for (n, rate) in [(625, 125.0), (700, 125.0), (700, 72.0), (40, 72.0)] {
            let s = GazeStream::from_angles("u", 1, rate, (0..n).map(|i| ((i as f64 * 0.05).sin(), 1.0)));
            let out = apply_inverse(&m, &s).unwrap();
            assert_eq!(out.len(), n);
            assert!(out.samples.iter().zip(&s.samples).all(|(a, b)| a.timestamp_s == b.timestamp_s));
            assert!(out.samples.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn save_and_load() {
        let m = short_training(5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        m.save(&path).unwrap();
        assert!(path.with_extension("json").exists());
        let bytes = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(bytes, 8 * (m.parameter_count() + 2 * (16 * 3 + 2)));
        let back = InverseRegressor::load(&path).unwrap();
        assert_eq!(back, m);
        std::fs::write(&path, [0u8; 16]).unwrap();
        assert!(InverseRegressor::load(&path).is_err());
    }
}
