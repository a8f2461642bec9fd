//! The next-sentence scorer: a feed-forward network mapping the concatenated
//! context embeddings to a predicted embedding `h` for the next sentence.
//!
//! Graph (identical for every scalar type):
//!
//! ```text
//! x = concat(context) -> layer_norm(input_norm)
//!   mlp:    [dense -> relu -> dropout] x num_layers
//!   resmlp: [dense -> relu -> dropout]            (only if input_dim != hidden_dim)
//!           [dense -> relu -> dropout -> dense -> +skip -> relu -> dropout] x blocks
//!   -> dense(output_dim) -> layer_norm(output_norm) = h
//! ```
//!
//! Dropout is inverted: kept activations are scaled by `1 / (1 - rate)` at
//! train time and evaluation leaves them untouched.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Real};
use crate::rng;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Mlp,
    ResMlp,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::ResMlp => "resmlp",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Arch::Mlp),
            "resmlp" => Ok(Arch::ResMlp),
            other => Err(Error::Config(format!("unknown arch {other:?} (mlp|resmlp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub arch: Arch,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Hidden layers of the plain MLP; ignored for `resmlp`.
    pub num_layers: usize,
    /// Residual blocks of the resMLP; ignored for `mlp`.
    pub num_residual_blocks: usize,
    pub output_dim: usize,
    pub dropout_rate: f32,
}

impl ModelConfig {
    /// 4 x 768 context, three hidden layers of 1024.
    pub fn default_mlp() -> Self {
        Self {
            arch: Arch::Mlp,
            input_dim: 4 * 768,
            hidden_dim: 1024,
            num_layers: 3,
            num_residual_blocks: 1,
            output_dim: 768,
            dropout_rate: 0.5,
        }
    }

    /// 4 x 768 context, one residual block of width 1024.
    pub fn default_resmlp() -> Self {
        Self {
            arch: Arch::ResMlp,
            ..Self::default_mlp()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("output_dim", self.output_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        match self.arch {
            Arch::Mlp if self.num_layers == 0 => {
                return Err(Error::Config("num_layers must be positive".into()))
            }
            Arch::ResMlp if self.num_residual_blocks == 0 => {
                return Err(Error::Config("num_residual_blocks must be positive".into()))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    fn has_projection(&self) -> bool {
        self.arch == Arch::ResMlp && self.input_dim != self.hidden_dim
    }

    /// `(in, out)` of every dense layer in declaration order.
    pub fn dense_shapes(&self) -> Vec<(usize, usize)> {
        let h = self.hidden_dim;
        let mut shapes = Vec::new();
        match self.arch {
            Arch::Mlp => {
                shapes.push((self.input_dim, h));
                shapes.extend(std::iter::repeat_n((h, h), self.num_layers - 1));
            }
            Arch::ResMlp => {
                if self.has_projection() {
                    shapes.push((self.input_dim, h));
                }
                shapes.extend(std::iter::repeat_n((h, h), 2 * self.num_residual_blocks));
            }
        }
        shapes.push((h, self.output_dim));
        shapes
    }

    /// Widths of the relu/dropout sites in graph order.
    pub fn dropout_sites(&self) -> Vec<usize> {
        let h = self.hidden_dim;
        match self.arch {
            Arch::Mlp => vec![h; self.num_layers],
            Arch::ResMlp => {
                let n = usize::from(self.has_projection()) + 2 * self.num_residual_blocks;
                vec![h; n]
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        let dense: usize = self.dense_shapes().iter().map(|(i, o)| i * o + o).sum();
        dense + 2 * self.input_dim + 2 * self.output_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out_dim x in_dim`, row-major.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    #[inline]
    fn row(&self, o: usize) -> &[T] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }

    /// `y[b] = W x[b] + bias` for a batch stored row-major.
    fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        let mut y = Vec::with_capacity(batch * self.out_dim);
        for xb in x.chunks_exact(self.in_dim).take(batch) {
            for o in 0..self.out_dim {
                y.push(dot(self.row(o), xb) + self.bias[o]);
            }
        }
        y
    }

    /// Accumulates weight/bias gradients into `grad`; returns the input
    /// gradient when `want_input` is set.
    fn backward(&self, x: &[T], dy: &[T], batch: usize, grad: &mut Dense<T>, want_input: bool) -> Vec<T> {
        let (n_in, n_out) = (self.in_dim, self.out_dim);
        for b in 0..batch {
            let xb = &x[b * n_in..(b + 1) * n_in];
            let dyb = &dy[b * n_out..(b + 1) * n_out];
            for (o, &g) in dyb.iter().enumerate() {
                if g != T::zero() {
                    axpy(g, xb, &mut grad.weight[o * n_in..(o + 1) * n_in]);
                }
                grad.bias[o] = grad.bias[o] + g;
            }
        }
        if !want_input {
            return Vec::new();
        }
        let mut dx = vec![T::zero(); batch * n_in];
        for b in 0..batch {
            let dyb = &dy[b * n_out..(b + 1) * n_out];
            let dxb = &mut dx[b * n_in..(b + 1) * n_in];
            for (o, &g) in dyb.iter().enumerate() {
                if g != T::zero() {
                    axpy(g, self.row(o), dxb);
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<T> {
    pub gain: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> LayerNormParams<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            gain: vec![T::one(); dim],
            bias: vec![T::zero(); dim],
        }
    }

    fn zeros(dim: usize) -> Self {
        Self {
            gain: vec![T::zero(); dim],
            bias: vec![T::zero(); dim],
        }
    }
}

/// `gain * (x - mean) / sqrt(var + eps) + bias` with the population variance.
pub fn layer_norm<T: Real>(x: &[T], gain: &[T], bias: &[T], eps: T) -> Result<Vec<T>> {
    if x.is_empty() {
        return Err(Error::Domain("layer_norm of an empty vector".into()));
    }
    if gain.len() != x.len() || bias.len() != x.len() {
        return Err(Error::Dimension(format!(
            "layer_norm over {} entries with gain {} and bias {}",
            x.len(),
            gain.len(),
            bias.len()
        )));
    }
    if eps <= T::zero() {
        return Err(Error::Domain("layer_norm eps must be positive".into()));
    }
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    normalize_row(x, gain, bias, eps, &mut xhat, &mut out);
    Ok(out)
}

/// Writes the normalized row into `xhat` and the affine output into `out`;
/// returns `1 / sqrt(var + eps)`.
fn normalize_row<T: Real>(x: &[T], gain: &[T], bias: &[T], eps: T, xhat: &mut [T], out: &mut [T]) -> T {
    let n = T::from_usize(x.len()).unwrap();
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let inv_std = T::one() / (var + eps).sqrt();
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * inv_std;
        out[i] = gain[i] * xhat[i] + bias[i];
    }
    inv_std
}

#[derive(Debug, Clone)]
struct NormCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

fn norm_forward<T: Real>(p: &LayerNormParams<T>, x: &[T], batch: usize) -> (Vec<T>, NormCache<T>) {
    let d = p.gain.len();
    let eps = T::of(LAYER_NORM_EPS);
    let mut out = vec![T::zero(); batch * d];
    let mut xhat = vec![T::zero(); batch * d];
    let mut inv_std = Vec::with_capacity(batch);
    for b in 0..batch {
        let r = b * d..(b + 1) * d;
        inv_std.push(normalize_row(
            &x[r.clone()],
            &p.gain,
            &p.bias,
            eps,
            &mut xhat[r.clone()],
            &mut out[r],
        ));
    }
    (out, NormCache { xhat, inv_std })
}

/// Accumulates gain/bias gradients; returns the input gradient if requested.
fn norm_backward<T: Real>(
    p: &LayerNormParams<T>,
    cache: &NormCache<T>,
    dy: &[T],
    batch: usize,
    grad: &mut LayerNormParams<T>,
    want_input: bool,
) -> Vec<T> {
    let d = p.gain.len();
    let n = T::from_usize(d).unwrap();
    let mut dx = if want_input { vec![T::zero(); batch * d] } else { Vec::new() };
    let mut dxhat = vec![T::zero(); d];
    for b in 0..batch {
        let xh = &cache.xhat[b * d..(b + 1) * d];
        let g = &dy[b * d..(b + 1) * d];
        for i in 0..d {
            grad.gain[i] = grad.gain[i] + g[i] * xh[i];
            grad.bias[i] = grad.bias[i] + g[i];
        }
        if want_input {
            for i in 0..d {
                dxhat[i] = g[i] * p.gain[i];
            }
            let mean_d = dxhat.iter().copied().sum::<T>() / n;
            let mean_dx = dxhat.iter().zip(xh).map(|(&a, &c)| a * c).sum::<T>() / n;
            let s = cache.inv_std[b];
            let out = &mut dx[b * d..(b + 1) * d];
            for i in 0..d {
                out[i] = s * (dxhat[i] - mean_d - xh[i] * mean_dx);
            }
        }
    }
    dx
}

/// All trainable tensors of the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub input_norm: LayerNormParams<T>,
    pub dense: Vec<Dense<T>>,
    pub output_norm: LayerNormParams<T>,
}

impl<T: Real> ModelParams<T> {
    /// Same shapes as `config`, every entry zero. Used as a gradient buffer.
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            input_norm: LayerNormParams::zeros(config.input_dim),
            dense: config
                .dense_shapes()
                .into_iter()
                .map(|(i, o)| Dense::zeros(i, o))
                .collect(),
            output_norm: LayerNormParams::zeros(config.output_dim),
        }
    }

    /// Tensors in declaration order: input norm gain, bias; each dense
    /// weight, bias; output norm gain, bias.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = vec![&self.input_norm.gain, &self.input_norm.bias];
        for d in &self.dense {
            v.push(&d.weight);
            v.push(&d.bias);
        }
        v.push(&self.output_norm.gain);
        v.push(&self.output_norm.bias);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = vec![&mut self.input_norm.gain, &mut self.input_norm.bias];
        for d in &mut self.dense {
            v.push(&mut d.weight);
            v.push(&mut d.bias);
        }
        v.push(&mut self.output_norm.gain);
        v.push(&mut self.output_norm.bias);
        v
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut v = vec!["input_norm.gain".to_string(), "input_norm.bias".to_string()];
        for i in 0..self.dense.len() {
            v.push(format!("dense{i}.weight"));
            v.push(format!("dense{i}.bias"));
        }
        v.push("output_norm.gain".into());
        v.push("output_norm.bias".into());
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = config.dense_shapes();
        let ok = self.input_norm.gain.len() == config.input_dim
            && self.input_norm.bias.len() == config.input_dim
            && self.output_norm.gain.len() == config.output_dim
            && self.output_norm.bias.len() == config.output_dim
            && self.dense.len() == expected.len()
            && self.dense.iter().zip(&expected).all(|(d, &(i, o))| {
                d.in_dim == i && d.out_dim == o && d.weight.len() == i * o && d.bias.len() == o
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("parameter shapes do not match model config".into()))
        }
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from(*x).unwrap()).collect::<Vec<U>>();
        ModelParams {
            input_norm: LayerNormParams {
                gain: conv(&self.input_norm.gain),
                bias: conv(&self.input_norm.bias),
            },
            dense: self
                .dense
                .iter()
                .map(|d| Dense {
                    in_dim: d.in_dim,
                    out_dim: d.out_dim,
                    weight: conv(&d.weight),
                    bias: conv(&d.bias),
                })
                .collect(),
            output_norm: LayerNormParams {
                gain: conv(&self.output_norm.gain),
                bias: conv(&self.output_norm.bias),
            },
        }
    }
}

/// He-normal weights (variance `2 / fan_in`), zero biases, identity norms.
pub fn init_params<T: Real>(config: &ModelConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = rng::stream(seed, "init");
    let mut params = ModelParams::zeros(config);
    for d in &mut params.dense {
        let normal = Normal::new(0.0, (2.0 / d.in_dim as f64).sqrt()).unwrap();
        for w in &mut d.weight {
            *w = T::of(normal.sample(&mut rng));
        }
    }
    params.input_norm = LayerNormParams::identity(config.input_dim);
    params.output_norm = LayerNormParams::identity(config.output_dim);
    Ok(params)
}

/// Per-site inverted-dropout multipliers, `batch x width` each (`0` or
/// `1 / (1 - rate)`). An empty mask set means no dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<T> {
    pub sites: Vec<Vec<T>>,
}

impl<T: Real> DropoutMasks<T> {
    pub fn none() -> Self {
        Self { sites: Vec::new() }
    }

    pub fn sample<R: Rng + ?Sized>(config: &ModelConfig, batch: usize, rng: &mut R) -> Self {
        let rate = f64::from(config.dropout_rate);
        if rate == 0.0 {
            return Self::none();
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let sites = config
            .dropout_sites()
            .into_iter()
            .map(|w| {
                (0..batch * w)
                    .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
                    .collect()
            })
            .collect();
        Self { sites }
    }

    fn apply(&self, site: usize, v: &mut [T]) {
        if let Some(m) = self.sites.get(site) {
            for (x, k) in v.iter_mut().zip(m) {
                *x = *x * *k;
            }
        }
    }
}

pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

/// Intermediate values of a batched forward pass needed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub batch: usize,
    input_norm: NormCache<T>,
    /// Input to every dense layer, in declaration order.
    dense_inputs: Vec<Vec<T>>,
    /// Value fed to each relu site (pre-activation).
    relu_inputs: Vec<Vec<T>>,
    output_norm: NormCache<T>,
    /// Predicted embeddings, `batch x output_dim`.
    pub output: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn row(&self, b: usize, output_dim: usize) -> &[T] {
        &self.output[b * output_dim..(b + 1) * output_dim]
    }
}

fn relu_dropout<T: Real>(z: &[T], masks: &DropoutMasks<T>, site: usize) -> Vec<T> {
    let mut a: Vec<T> = z.iter().map(|&v| v.max(T::zero())).collect();
    masks.apply(site, &mut a);
    a
}

/// Batched forward pass. `inputs` is `batch x input_dim` row-major.
pub fn forward_batch<T: Real>(
    params: &ModelParams<T>,
    config: &ModelConfig,
    inputs: &[T],
    masks: &DropoutMasks<T>,
) -> Result<ForwardCache<T>> {
    if !inputs.len().is_multiple_of(config.input_dim) {
        return Err(Error::Dimension(format!(
            "input of {} values is not a batch of width {}",
            inputs.len(),
            config.input_dim
        )));
    }
    params.check_shapes(config)?;
    let batch = inputs.len() / config.input_dim;
    if !masks.sites.is_empty() {
        let sites = config.dropout_sites();
        if masks.sites.len() != sites.len()
            || masks.sites.iter().zip(&sites).any(|(m, w)| m.len() != batch * w)
        {
            return Err(Error::Dimension("dropout masks do not match graph".into()));
        }
    }

    let (normed, input_norm) = norm_forward(&params.input_norm, inputs, batch);
    let mut dense_inputs = Vec::with_capacity(params.dense.len());
    let mut relu_inputs = Vec::new();
    let mut site = 0;
    let mut h = normed;
    let mut layer = 0;

    match config.arch {
        Arch::Mlp => {
            for _ in 0..config.num_layers {
                let z = params.dense[layer].forward(&h, batch);
                dense_inputs.push(std::mem::take(&mut h));
                h = relu_dropout(&z, masks, site);
                relu_inputs.push(z);
                layer += 1;
                site += 1;
            }
        }
        Arch::ResMlp => {
            if config.has_projection() {
                let z = params.dense[layer].forward(&h, batch);
                dense_inputs.push(std::mem::take(&mut h));
                h = relu_dropout(&z, masks, site);
                relu_inputs.push(z);
                layer += 1;
                site += 1;
            }
            for _ in 0..config.num_residual_blocks {
                let z1 = params.dense[layer].forward(&h, batch);
                let a1 = relu_dropout(&z1, masks, site);
                relu_inputs.push(z1);
                let mut s = params.dense[layer + 1].forward(&a1, batch);
                for (si, hi) in s.iter_mut().zip(&h) {
                    *si = *si + *hi;
                }
                dense_inputs.push(std::mem::take(&mut h));
                dense_inputs.push(a1);
                h = relu_dropout(&s, masks, site + 1);
                relu_inputs.push(s);
                layer += 2;
                site += 2;
            }
        }
    }

    let y = params.dense[layer].forward(&h, batch);
    dense_inputs.push(h);
    let (output, output_norm) = norm_forward(&params.output_norm, &y, batch);
    Ok(ForwardCache {
        batch,
        input_norm,
        dense_inputs,
        relu_inputs,
        output_norm,
        output,
    })
}

fn relu_dropout_backward<T: Real>(
    d_out: &[T],
    relu_in: &[T],
    masks: &DropoutMasks<T>,
    site: usize,
) -> Vec<T> {
    let mut g: Vec<T> = d_out
        .iter()
        .zip(relu_in)
        .map(|(&d, &z)| if z > T::zero() { d } else { T::zero() })
        .collect();
    masks.apply(site, &mut g);
    g
}

/// Reverse pass from `d_output` (gradient w.r.t. the predicted embeddings,
/// `batch x output_dim`), accumulating into `grads`.
pub fn backward_batch<T: Real>(
    params: &ModelParams<T>,
    config: &ModelConfig,
    cache: &ForwardCache<T>,
    masks: &DropoutMasks<T>,
    d_output: &[T],
    grads: &mut ModelParams<T>,
) {
    let batch = cache.batch;
    let mut layer = params.dense.len() - 1;
    let dy = norm_backward(
        &params.output_norm,
        &cache.output_norm,
        d_output,
        batch,
        &mut grads.output_norm,
        true,
    );
    let mut dh = params.dense[layer].backward(
        &cache.dense_inputs[layer],
        &dy,
        batch,
        &mut grads.dense[layer],
        true,
    );
    let mut site = cache.relu_inputs.len();

    match config.arch {
        Arch::Mlp => {
            while layer > 0 {
                layer -= 1;
                site -= 1;
                let dz = relu_dropout_backward(&dh, &cache.relu_inputs[site], masks, site);
                dh = params.dense[layer].backward(
                    &cache.dense_inputs[layer],
                    &dz,
                    batch,
                    &mut grads.dense[layer],
                    true,
                );
            }
        }
        Arch::ResMlp => {
            for _ in 0..config.num_residual_blocks {
                layer -= 2;
                site -= 2;
                let ds = relu_dropout_backward(&dh, &cache.relu_inputs[site + 1], masks, site + 1);
                let da1 = params.dense[layer + 1].backward(
                    &cache.dense_inputs[layer + 1],
                    &ds,
                    batch,
                    &mut grads.dense[layer + 1],
                    true,
                );
                let dz1 = relu_dropout_backward(&da1, &cache.relu_inputs[site], masks, site);
                let dh_inner = params.dense[layer].backward(
                    &cache.dense_inputs[layer],
                    &dz1,
                    batch,
                    &mut grads.dense[layer],
                    true,
                );
                dh = ds;
                for (a, b) in dh.iter_mut().zip(&dh_inner) {
                    *a = *a + *b;
                }
            }
            if config.has_projection() {
                layer -= 1;
                site -= 1;
                let dz = relu_dropout_backward(&dh, &cache.relu_inputs[site], masks, site);
                dh = params.dense[layer].backward(
                    &cache.dense_inputs[layer],
                    &dz,
                    batch,
                    &mut grads.dense[layer],
                    true,
                );
            }
        }
    }
    debug_assert_eq!((layer, site), (0, 0));
    norm_backward(
        &params.input_norm,
        &cache.input_norm,
        &dh,
        batch,
        &mut grads.input_norm,
        false,
    );
}

/// Predicted next-sentence embedding for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedEmbedding<T = f32> {
    pub h: Vec<T>,
}

/// Forward pass for a single context of `t` embeddings.
pub fn forward<T: Real>(
    params: &ModelParams<T>,
    config: &ModelConfig,
    context: &[&[T]],
    mode: Mode<'_>,
) -> Result<PredictedEmbedding<T>> {
    let width: usize = context.iter().map(|c| c.len()).sum();
    if width != config.input_dim {
        return Err(Error::Dimension(format!(
            "context of {} embeddings ({width} values) does not match input_dim {}",
            context.len(),
            config.input_dim
        )));
    }
    let input: Vec<T> = context.iter().flat_map(|c| c.iter().copied()).collect();
    let masks = match mode {
        Mode::Eval => DropoutMasks::none(),
        Mode::Train(rng) => DropoutMasks::sample(config, 1, rng),
    };
    let cache = forward_batch(params, config, &input, &masks)?;
    Ok(PredictedEmbedding { h: cache.output })
}

/// Eval-mode predictions for a batch of concatenated contexts.
pub fn predict_batch(
    params: &ModelParams<f32>,
    config: &ModelConfig,
    inputs: &[f32],
) -> Result<Vec<f32>> {
    Ok(forward_batch(params, config, inputs, &DropoutMasks::none())?.output)
}
