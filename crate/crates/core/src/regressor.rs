//! Dense regression head: `input -> 512 -> 512 -> 6` with tanh hidden
//! activations, inverted dropout between layers, MSE loss, exact
//! backpropagation and Adam.
//!
//! Weights are stored `[fan_in][fan_out]` row-major so a batch forward is a
//! plain row-times-matrix product. Every reduction runs in a fixed order, so
//! results are bit-reproducible for a given seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};

const ROW_BLOCK: usize = 16;

pub const OUTPUT_DIM: usize = 6;
pub const DEFAULT_HIDDEN: usize = 512;
pub const DEFAULT_DROPOUT: f64 = 0.5;

const LAYER_NAMES: [&str; 3] = ["layer1", "layer2", "output"];

/// Row-major batch matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Hidden-layer output nonlinearity choice for the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    #[default]
    Linear,
    Tanh,
}

impl FromStr for OutputActivation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::InvalidConfig(format!(
                "output activation must be `linear` or `tanh`, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for OutputActivation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Tanh => "tanh",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    Train,
    #[default]
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadDims {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl HeadDims {
    pub fn new(input: usize) -> Self {
        Self {
            input,
            hidden1: DEFAULT_HIDDEN,
            hidden2: DEFAULT_HIDDEN,
        }
    }

    pub fn small(input: usize, hidden1: usize, hidden2: usize) -> Self {
        Self {
            input,
            hidden1,
            hidden2,
        }
    }

    fn layer_shapes(&self) -> [(usize, usize); 3] {
        [
            (self.input, self.hidden1),
            (self.hidden1, self.hidden2),
            (self.hidden2, OUTPUT_DIM),
        ]
    }
}

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    /// `fan_in x fan_out`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.fan_in, self.fan_out)
    }

    /// `x * W + b` for every row of `x`.
    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows, self.fan_out);
        for r in 0..x.rows {
            out.row_mut(r).copy_from_slice(&self.bias);
        }
        // rows are processed in blocks so each weight row is read once per block
        for start in (0..x.rows).step_by(ROW_BLOCK) {
            let end = (start + ROW_BLOCK).min(x.rows);
            for k in 0..self.fan_in {
                let w = &self.weights[k * self.fan_out..(k + 1) * self.fan_out];
                for r in start..end {
                    let xv = x.data[r * x.cols + k];
                    if xv == 0.0 {
                        continue;
                    }
                    for (d, &wv) in out.row_mut(r).iter_mut().zip(w) {
                        *d += xv * wv;
                    }
                }
            }
        }
        out
    }

    /// Accumulates `x^T * delta` into the weight gradient and column sums of
    /// `delta` into the bias gradient.
    fn accumulate_grad(&self, x: &Matrix, delta: &Matrix, grad: &mut Dense) {
        for r in 0..x.rows {
            for (gb, &dv) in grad.bias.iter_mut().zip(delta.row(r)) {
                *gb += dv;
            }
        }
        for start in (0..x.rows).step_by(ROW_BLOCK) {
            let end = (start + ROW_BLOCK).min(x.rows);
            for k in 0..self.fan_in {
                let g = &mut grad.weights[k * self.fan_out..(k + 1) * self.fan_out];
                for r in start..end {
                    let xv = x.data[r * x.cols + k];
                    if xv == 0.0 {
                        continue;
                    }
                    for (gv, &dv) in g.iter_mut().zip(delta.row(r)) {
                        *gv += xv * dv;
                    }
                }
            }
        }
    }

    /// `delta * W^T`: gradient with respect to the layer input.
    fn backprop(&self, delta: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(delta.rows, self.fan_in);
        for start in (0..delta.rows).step_by(ROW_BLOCK) {
            let end = (start + ROW_BLOCK).min(delta.rows);
            for k in 0..self.fan_in {
                let w = &self.weights[k * self.fan_out..(k + 1) * self.fan_out];
                for r in start..end {
                    out.data[r * self.fan_in + k] =
                        w.iter().zip(delta.row(r)).map(|(a, b)| a * b).sum();
                }
            }
        }
        out
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// The three layers' parameters. Also used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub layers: [Dense; 3],
}

impl Params {
    pub fn zeros(dims: HeadDims) -> Self {
        let s = dims.layer_shapes();
        Self {
            layers: s.map(|(i, o)| Dense::zeros(i, o)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: std::array::from_fn(|i| self.layers[i].zeros_like()),
        }
    }

    pub fn dims(&self) -> HeadDims {
        HeadDims {
            input: self.layers[0].fan_in,
            hidden1: self.layers[0].fan_out,
            hidden2: self.layers[1].fan_out,
        }
    }

    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view in layer order, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.values())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.values_mut())
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        self.layers
            .iter()
            .zip(LAYER_NAMES)
            .find(|(l, _)| !l.all_finite())
            .map(|(_, n)| n)
    }
}

/// Trainable head plus dropout configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead {
    pub params: Params,
    pub dropout_p: f64,
    pub output_activation: OutputActivation,
    pub mode: Mode,
    /// Bumped on every optimizer step; lets `backward` detect stale caches.
    version: u64,
}

/// Activations kept from a forward pass for `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    dims: HeadDims,
    input: Matrix,
    /// Post-tanh, pre-dropout activations.
    hidden: [Matrix; 2],
    /// Inverted-dropout multipliers (`0` or `1 / (1 - p)`), if dropout ran.
    masks: [Option<Matrix>; 2],
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn masks(&self) -> &[Option<Matrix>; 2] {
        &self.masks
    }
}

/// Fan-in scaled uniform initialization: weights `U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in))`, biases zero.
pub fn init_params(dims: HeadDims, seed: u64) -> Result<DenseHead> {
    if dims.input == 0 || dims.hidden1 == 0 || dims.hidden2 == 0 {
        return Err(Error::InvalidConfig("head dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Params::zeros(dims);
    for layer in &mut params.layers {
        let bound = 1.0 / (layer.fan_in as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.gen_range(-bound..bound);
        }
    }
    Ok(DenseHead::from_params(params, DEFAULT_DROPOUT, OutputActivation::Linear))
}

fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Matrix {
    let keep = 1.0 / (1.0 - p);
    let mut m = Matrix::zeros(rows, cols);
    for v in &mut m.data {
        if rng.gen::<f64>() >= p {
            *v = keep;
        }
    }
    m
}

fn apply_mask(x: &Matrix, mask: &Option<Matrix>) -> Matrix {
    match mask {
        None => x.clone(),
        Some(m) => Matrix {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().zip(&m.data).map(|(a, b)| a * b).collect(),
        },
    }
}

impl DenseHead {
    pub fn from_params(params: Params, dropout_p: f64, output_activation: OutputActivation) -> Self {
        assert!((0.0..1.0).contains(&dropout_p), "dropout probability must lie in [0, 1)");
        Self {
            params,
            dropout_p,
            output_activation,
            mode: Mode::Eval,
            version: 0,
        }
    }

    pub fn dims(&self) -> HeadDims {
        self.params.dims()
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        let expected = self.dims().input;
        if x.cols != expected {
            return Err(Error::DimMismatch {
                expected,
                actual: x.cols,
            });
        }
        Ok(())
    }

    /// Batch forward pass in the head's current mode. Train mode draws fresh
    /// dropout masks from `rng`; eval mode never touches it.
    pub fn forward<R: Rng + ?Sized>(&self, x: &Matrix, rng: &mut R) -> Result<(Matrix, ForwardCache)> {
        let masks = if self.mode == Mode::Train && self.dropout_p > 0.0 {
            let d = self.dims();
            [
                Some(dropout_mask(x.rows, d.hidden1, self.dropout_p, rng)),
                Some(dropout_mask(x.rows, d.hidden2, self.dropout_p, rng)),
            ]
        } else {
            [None, None]
        };
        self.forward_with_masks(x, masks)
    }

    /// Forward pass with explicit dropout multipliers (`None` = no dropout).
    pub fn forward_with_masks(&self, x: &Matrix, masks: [Option<Matrix>; 2]) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        for (m, width) in masks.iter().zip([self.dims().hidden1, self.dims().hidden2]) {
            if let Some(m) = m {
                if m.rows != x.rows || m.cols != width {
                    return Err(Error::DimMismatch {
                        expected: width,
                        actual: m.cols,
                    });
                }
            }
        }
        let [l1, l2, l3] = &self.params.layers;
        let h1 = l1.apply(x).map_tanh();
        let h1d = apply_mask(&h1, &masks[0]);
        let h2 = l2.apply(&h1d).map_tanh();
        let h2d = apply_mask(&h2, &masks[1]);
        let mut out = l3.apply(&h2d);
        if self.output_activation == OutputActivation::Tanh {
            out = out.map_tanh();
        }
        let cache = ForwardCache {
            version: self.version,
            dims: self.dims(),
            input: x.clone(),
            hidden: [h1, h2],
            masks,
            output: out.clone(),
        };
        Ok((out, cache))
    }

    /// Eval-mode prediction for one feature vector, whatever `mode` is set.
    pub fn predict(&self, features: &[f64]) -> Result<[f64; OUTPUT_DIM]> {
        let x = Matrix {
            rows: 1,
            cols: features.len(),
            data: features.to_vec(),
        };
        let (out, _) = self.forward_with_masks(&x, [None, None])?;
        Ok(out.data.try_into().expect("six outputs"))
    }

    /// Exact gradient of the batch [`mse_loss`] (mean over rows) with respect
    /// to every parameter, using the masks recorded in `cache`.
    pub fn backward(&self, cache: ForwardCache, targets: &Matrix) -> Result<Params> {
        if cache.version != self.version || cache.dims != self.dims() {
            return Err(Error::StaleCache);
        }
        if targets.rows != cache.output.rows || targets.cols != OUTPUT_DIM {
            return Err(Error::DimMismatch {
                expected: cache.output.rows * OUTPUT_DIM,
                actual: targets.rows * targets.cols,
            });
        }
        let [l1, l2, l3] = &self.params.layers;
        let mut grads = self.params.zeros_like();
        let scale = 2.0 / (OUTPUT_DIM * targets.rows) as f64;

        let mut delta = Matrix::zeros(targets.rows, OUTPUT_DIM);
        for ((d, &o), &t) in delta.data.iter_mut().zip(&cache.output.data).zip(&targets.data) {
            *d = scale * (o - t);
            if self.output_activation == OutputActivation::Tanh {
                *d *= 1.0 - o * o;
            }
        }
        let [h1, h2] = &cache.hidden;
        let h1d = apply_mask(h1, &cache.masks[0]);
        let h2d = apply_mask(h2, &cache.masks[1]);

        l3.accumulate_grad(&h2d, &delta, &mut grads.layers[2]);
        let delta = hidden_delta(l3.backprop(&delta), h2, &cache.masks[1]);
        l2.accumulate_grad(&h1d, &delta, &mut grads.layers[1]);
        let delta = hidden_delta(l2.backprop(&delta), h1, &cache.masks[0]);
        l1.accumulate_grad(&cache.input, &delta, &mut grads.layers[0]);
        Ok(grads)
    }

    fn bump_version(&mut self) {
        self.version += 1;
    }
}

/// Gradient through dropout and tanh given the gradient at the dropped output.
fn hidden_delta(mut upstream: Matrix, activation: &Matrix, mask: &Option<Matrix>) -> Matrix {
    if let Some(m) = mask {
        for (u, &mv) in upstream.data.iter_mut().zip(&m.data) {
            *u *= mv;
        }
    }
    for (u, &a) in upstream.data.iter_mut().zip(&activation.data) {
        *u *= 1.0 - a * a;
    }
    upstream
}

impl Matrix {
    fn map_tanh(mut self) -> Matrix {
        for v in &mut self.data {
            *v = v.tanh();
        }
        self
    }
}

/// Mean squared error over the six components.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

/// Mean of per-row [`mse_loss`] over a batch.
pub fn batch_loss(pred: &Matrix, targets: &Matrix) -> f64 {
    (0..pred.rows)
        .map(|r| mse_loss(pred.row(r), targets.row(r)))
        .sum::<f64>()
        / pred.rows as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Params,
    pub v: Params,
    pub step: u64,
}

impl AdamState {
    pub fn new(head: &DenseHead, config: AdamConfig) -> Self {
        Self {
            config,
            m: head.params.zeros_like(),
            v: head.params.zeros_like(),
            step: 0,
        }
    }
}

/// Bias-corrected Adam update. Rejects non-finite gradients before touching
/// any state and verifies the parameters afterwards.
pub fn adam_step(head: &mut DenseHead, grads: &Params, state: &mut AdamState) -> Result<()> {
    if grads.dims() != head.dims() || state.m.dims() != head.dims() {
        return Err(Error::DimMismatch {
            expected: head.params.len(),
            actual: grads.len(),
        });
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, &g), m), v) in head
        .params
        .values_mut()
        .zip(grads.values())
        .zip(state.m.values_mut())
        .zip(state.v.values_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    head.bump_version();
    if let Some(name) = head.params.first_non_finite() {
        return Err(Error::NonFiniteParameter(name));
    }
    Ok(())
}

/// Worst relative error between `grads` and central differences of the batch
/// loss, over every parameter, holding the given dropout masks fixed.
///
/// Relative error is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn compare_gradients(
    head: &DenseHead,
    x: &Matrix,
    targets: &Matrix,
    masks: &[Option<Matrix>; 2],
    grads: &Params,
    step: f64,
) -> Result<f64> {
    let mut probe = head.clone();
    let mut worst = 0.0f64;
    let analytic: Vec<f64> = grads.values().copied().collect();
    for (i, &a) in analytic.iter().enumerate() {
        let original = *probe.params.values_mut().nth(i).expect("index in range");
        let mut loss_at = |value: f64| -> Result<f64> {
            *probe.params.values_mut().nth(i).expect("index in range") = value;
            let (out, _) = probe.forward_with_masks(x, masks.clone())?;
            Ok(batch_loss(&out, targets))
        };
        let plus = loss_at(original + step)?;
        let minus = loss_at(original - step)?;
        loss_at(original)?;
        let numeric = (plus - minus) / (2.0 * step);
        let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Denominator floor for relative gradient errors; below this magnitude the
/// comparison is effectively absolute.
pub const GRAD_CHECK_FLOOR: f64 = 1e-7;
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Builds a random small head and batch, then checks `backward` against
/// central differences. With `dropout` set, one train-mode mask draw is
/// frozen and reused for every perturbed evaluation.
pub fn grad_check(dims: HeadDims, seed: u64, dropout: bool) -> Result<f64> {
    if dims.input > 64 || dims.hidden1 > 64 || dims.hidden2 > 64 {
        return Err(Error::InvalidConfig("grad_check is limited to dims <= 64".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut head = init_params(dims, rng.gen())?;
    for layer in &mut head.params.layers {
        for b in &mut layer.bias {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    head.dropout_p = if dropout { DEFAULT_DROPOUT } else { 0.0 };
    head.mode = Mode::Train;
    let rows = 3;
    let x = Matrix {
        rows,
        cols: dims.input,
        data: (0..rows * dims.input).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let targets = Matrix {
        rows,
        cols: OUTPUT_DIM,
        data: (0..rows * OUTPUT_DIM).map(|_| rng.gen_range(0.0..1.0)).collect(),
    };
    let (_, cache) = head.forward(&x, &mut rng)?;
    let masks = cache.masks.clone();
    let grads = head.backward(cache, &targets)?;
    compare_gradients(&head, &x, &targets, &masks, &grads, GRAD_CHECK_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_head(seed: u64) -> DenseHead {
        init_params(HeadDims::small(5, 7, 4), seed).unwrap()
    }

    fn row(v: &[f64]) -> Matrix {
        Matrix::from_rows(&[v]).unwrap()
    }

    #[test]
    fn zero_everything_gives_zero_output() {
        let head = DenseHead::from_params(Params::zeros(HeadDims::small(4, 3, 3)), 0.5, OutputActivation::Linear);
        assert_eq!(head.predict(&[0.0; 4]).unwrap(), [0.0; 6]);
    }

    #[test]
    fn eval_is_deterministic_and_ignores_rng() {
        let head = tiny_head(1);
        let x = row(&[0.1, -0.2, 0.3, 0.0, 0.9]);
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let (a, _) = head.forward(&x, &mut r1).unwrap();
        let (b, _) = head.forward(&x, &mut r2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data, head.predict(x.row(0)).unwrap());
    }

    #[test]
    fn dim_mismatch() {
        let head = tiny_head(1);
        assert!(matches!(
            head.predict(&[0.0; 3]),
            Err(Error::DimMismatch { expected: 5, actual: 3 })
        ));
    }

    #[test]
    fn loss_examples() {
        let t = [0.0; 6];
        assert_eq!(mse_loss(&t, &t), 0.0);
        assert_eq!(mse_loss(&[1.0; 6], &t), 1.0);
        let l = mse_loss(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0], &t);
        assert!((l - 0.25 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn output_bias_gradient_closed_form() {
        let head = tiny_head(3);
        let x = row(&[0.3, 0.1, -0.4, 0.2, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, cache) = head.forward(&x, &mut rng).unwrap();
        let target = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let grads = head.backward(cache, &row(&target)).unwrap();
        for (k, t) in target.iter().enumerate() {
            let expect = 2.0 / 6.0 * (out.data[k] - t);
            assert!((grads.layers[2].bias[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn stationary_at_exact_fit() {
        let head = tiny_head(4);
        let x = row(&[0.0; 5]);
        let pred = head.predict(x.row(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, cache) = head.forward(&x, &mut rng).unwrap();
        let grads = head.backward(cache, &row(&pred)).unwrap();
        assert!(grads.layers[2].bias.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut head = tiny_head(5);
        let x = row(&[0.1; 5]);
        let t = row(&[0.5; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, cache) = head.forward(&x, &mut rng).unwrap();
        let (_, old) = head.forward(&x, &mut rng).unwrap();
        let grads = head.backward(cache, &t).unwrap();
        let mut adam = AdamState::new(&head, AdamConfig::default());
        adam_step(&mut head, &grads, &mut adam).unwrap();
        assert!(matches!(head.backward(old, &t), Err(Error::StaleCache)));
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut head = tiny_head(6);
        let before = head.params.clone();
        let mut adam = AdamState::new(&head, AdamConfig::default());
        let zero = head.params.zeros_like();
        adam_step(&mut head, &zero, &mut adam).unwrap();
        assert_eq!(head.params, before);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // m_hat = g and v_hat = g^2 after one step, so the update is
        // lr * g / (|g| + eps)
        let mut head = tiny_head(7);
        let before = head.params.clone();
        let mut grads = head.params.zeros_like();
        grads.layers[2].bias[0] = 0.37;
        grads.layers[2].bias[1] = -2.5e-3;
        let mut adam = AdamState::new(&head, AdamConfig::default());
        adam_step(&mut head, &grads, &mut adam).unwrap();
        for (k, g) in [(0, 0.37f64), (1, -2.5e-3)] {
            let moved = head.params.layers[2].bias[k] - before.layers[2].bias[k];
            let expect = -1e-3 * g / (g.abs() + 1e-8);
            assert!((moved - expect).abs() < 1e-15, "{moved} vs {expect}");
            assert!((moved.abs() - 1e-3).abs() < 1e-8);
        }
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut head = tiny_head(8);
        let mut grads = head.params.zeros_like();
        grads.layers[1].weights[3] = f64::NAN;
        let mut adam = AdamState::new(&head, AdamConfig::default());
        let before = head.clone();
        assert!(matches!(
            adam_step(&mut head, &grads, &mut adam),
            Err(Error::NonFiniteGradient("layer2"))
        ));
        assert_eq!(head, before);
        assert_eq!(adam.step, 0);
    }

    #[test]
    fn init_is_seeded_with_zero_bias() {
        let a = init_params(HeadDims::small(10, 8, 8), 42).unwrap();
        assert_eq!(a, init_params(HeadDims::small(10, 8, 8), 42).unwrap());
        assert_ne!(a, init_params(HeadDims::small(10, 8, 8), 43).unwrap());
        for l in &a.params.layers {
            assert!(l.bias.iter().all(|&b| b == 0.0));
            let bound = 1.0 / (l.fan_in as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn grad_check_small() {
        assert!(grad_check(HeadDims::small(6, 5, 4), 1, false).unwrap() < 1e-4);
        assert!(grad_check(HeadDims::small(6, 5, 4), 2, true).unwrap() < 1e-4);
    }

    #[test]
    fn grad_check_detects_corruption() {
        let mut head = tiny_head(9);
        head.dropout_p = 0.0;
        let x = Matrix::from_rows(&[[0.2, -0.1, 0.4, 0.3, -0.6]]).unwrap();
        let t = row(&[0.3; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, cache) = head.forward(&x, &mut rng).unwrap();
        let mut grads = head.backward(cache, &t).unwrap();
        grads.layers[1].weights[2] *= 1.5;
        grads.layers[1].weights[2] += 1e-3;
        let err = compare_gradients(&head, &x, &t, &[None, None], &grads, GRAD_CHECK_STEP).unwrap();
        assert!(err > 1e-2, "{err}");
    }
}
