//! Body + head model over fixed input embeddings.
//!
//! The body maps an input embedding to the representation the contrastive
//! term acts on (identity, one affine layer, or a small MLP). The head is a
//! one-hidden-layer MLP with dropout on the hidden units and sigmoid
//! outputs, one per class.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

const BODY_STREAM: u64 = 0xB0D1;
const HEAD_STREAM: u64 = 0x4EAD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Gelu,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Gelu => 0.5 * z * (1.0 + (GELU_C * (z + 0.044715 * z * z * z)).tanh()),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Gelu => {
                let inner = GELU_C * (z + 0.044715 * z * z * z);
                let t = inner.tanh();
                0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * z * z)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyKind {
    Identity,
    Affine,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyConfig {
    pub kind: BodyKind,
    pub in_dim: usize,
    pub out_dim: usize,
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl BodyConfig {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: BodyKind::Identity,
            in_dim: dim,
            out_dim: dim,
            hidden_dims: Vec::new(),
            activation: Activation::Relu,
        }
    }

    pub fn affine(in_dim: usize, out_dim: usize) -> Self {
        Self {
            kind: BodyKind::Affine,
            in_dim,
            out_dim,
            hidden_dims: Vec::new(),
            activation: Activation::Relu,
        }
    }

    pub fn mlp(in_dim: usize, hidden_dims: Vec<usize>, out_dim: usize, activation: Activation) -> Self {
        Self {
            kind: BodyKind::Mlp,
            in_dim,
            out_dim,
            hidden_dims,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config("body dimensions must be at least 1".into()));
        }
        match self.kind {
            BodyKind::Identity if self.in_dim != self.out_dim => Err(Error::Config(format!(
                "identity body needs in_dim == out_dim, got {} and {}",
                self.in_dim, self.out_dim
            ))),
            BodyKind::Mlp if self.hidden_dims.is_empty() => {
                Err(Error::Config("mlp body needs at least one hidden layer".into()))
            }
            _ => Ok(()),
        }
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        match self.kind {
            BodyKind::Identity => Vec::new(),
            BodyKind::Affine => vec![(self.in_dim, self.out_dim)],
            BodyKind::Mlp => {
                let mut dims = vec![self.in_dim];
                dims.extend(&self.hidden_dims);
                dims.push(self.out_dim);
                dims.windows(2).map(|w| (w[0], w[1])).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub dropout_rate: f64,
    #[serde(default)]
    pub activation: Activation,
}

impl HeadConfig {
    /// Hidden width 256, dropout 0.5, ReLU.
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            hidden: 256,
            out_dim,
            dropout_rate: 0.5,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden == 0 || self.out_dim == 0 {
            return Err(Error::Config("head dimensions must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Fully connected layer; `weight` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn glorot<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            in_dim,
            out_dim,
            weight: (0..in_dim * out_dim)
                .map(|_| rng.random_range(-limit..=limit))
                .collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn forward(&self, input: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(input.rows(), self.out_dim);
        for r in 0..input.rows() {
            let x = input.row(r);
            let y = out.row_mut(r);
            for (o, yo) in y.iter_mut().enumerate() {
                let w = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                *yo = self.bias[o] + crate::matrix::dot(w, x);
            }
        }
        out
    }

    /// Accumulates weight/bias gradients into `grad` and returns the
    /// gradient with respect to `input`.
    fn backward(&self, input: &Matrix, grad_out: &Matrix, grad: &mut Linear) -> Matrix {
        let mut grad_in = Matrix::zeros(input.rows(), self.in_dim);
        for r in 0..input.rows() {
            let x = input.row(r);
            let go = grad_out.row(r);
            let gi = grad_in.row_mut(r);
            for (o, &g) in go.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                let w = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                let gw = &mut grad.weight[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    gw[i] += g * x[i];
                    gi[i] += g * w[i];
                }
            }
        }
        grad_in
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub layers: Vec<Linear>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub hidden: Linear,
    pub output: Linear,
}

fn layer_slices<'a>(layers: &[&'a Linear]) -> Vec<&'a [f64]> {
    layers
        .iter()
        .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
        .collect()
}

impl BodyParams {
    fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Linear::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Linear::num_params).sum()
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        layer_slices(&self.layers.iter().collect::<Vec<_>>())
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl HeadParams {
    fn zeros_like(&self) -> Self {
        Self {
            hidden: Linear::zeros(self.hidden.in_dim, self.hidden.out_dim),
            output: Linear::zeros(self.output.in_dim, self.output.out_dim),
        }
    }

    pub fn num_params(&self) -> usize {
        self.hidden.num_params() + self.output.num_params()
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        layer_slices(&[&self.hidden, &self.output])
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.hidden.weight.as_mut_slice(),
            self.hidden.bias.as_mut_slice(),
            self.output.weight.as_mut_slice(),
            self.output.bias.as_mut_slice(),
        ]
    }
}

fn to_bytes(slices: &[&[f64]]) -> Vec<u8> {
    slices
        .iter()
        .flat_map(|s| s.iter().flat_map(|v| v.to_le_bytes()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub body_config: BodyConfig,
    pub head_config: HeadConfig,
    pub body: BodyParams,
    pub head: HeadParams,
    pub body_frozen: bool,
    pub head_frozen: bool,
}

/// Parameter gradients, shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub body: BodyParams,
    pub head: HeadParams,
    /// False when the body was frozen at backward time; the values are still
    /// exact but no optimizer step should apply them.
    pub body_applicable: bool,
    pub head_applicable: bool,
}

impl ModelGrads {
    pub fn to_flat(&self) -> Vec<f64> {
        self.body
            .slices()
            .into_iter()
            .chain(self.head.slices())
            .flat_map(|s| s.iter().copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.to_flat().iter().all(|&g| g == 0.0)
    }
}

fn init_body<R: Rng>(config: &BodyConfig, rng: &mut R) -> BodyParams {
    BodyParams {
        layers: config
            .layer_dims()
            .into_iter()
            .map(|(i, o)| Linear::glorot(i, o, rng))
            .collect(),
    }
}

fn init_head<R: Rng>(config: &HeadConfig, rng: &mut R) -> HeadParams {
    let hidden = Linear::glorot(config.in_dim, config.hidden, rng);
    let output = Linear::glorot(config.hidden, config.out_dim, rng);
    HeadParams { hidden, output }
}

/// Glorot-uniform weights and zero biases, drawn from `seed`.
pub fn init_model(body: BodyConfig, head: HeadConfig, seed: u64) -> Result<ModelParams> {
    body.validate()?;
    head.validate()?;
    if body.out_dim != head.in_dim {
        return Err(Error::Config(format!(
            "body output width {} does not match head input width {}",
            body.out_dim, head.in_dim
        )));
    }
    let body_params = init_body(&body, &mut seed::derived_rng(seed, &[BODY_STREAM]));
    let head_params = init_head(&head, &mut seed::derived_rng(seed, &[HEAD_STREAM]));
    Ok(ModelParams {
        body_config: body,
        head_config: head,
        body: body_params,
        head: head_params,
        body_frozen: false,
        head_frozen: false,
    })
}

/// Replaces the head with a fresh draw; the body is untouched.
/// Optimizer moments for the head must be reset separately.
pub fn reinit_head(params: &mut ModelParams, seed: u64) {
    params.head = init_head(&params.head_config, &mut seed::derived_rng(seed, &[HEAD_STREAM]));
}

impl ModelParams {
    pub fn num_params(&self) -> usize {
        self.body.num_params() + self.head.num_params()
    }

    pub fn body_bytes(&self) -> Vec<u8> {
        to_bytes(&self.body.slices())
    }

    pub fn head_bytes(&self) -> Vec<u8> {
        to_bytes(&self.head.slices())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.body
            .slices()
            .into_iter()
            .chain(self.head.slices())
            .flat_map(|s| s.iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for s in self.body.slices_mut().into_iter().chain(self.head.slices_mut()) {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.head_config.out_dim
    }

    pub fn input_dim(&self) -> usize {
        self.body_config.in_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Activations kept from the last forward pass.
#[derive(Debug, Clone)]
struct ForwardCache {
    /// Input to each body layer followed by the final embeddings.
    body_inputs: Vec<Matrix>,
    /// Pre-activation of every body layer.
    body_pre: Vec<Matrix>,
    head_pre: Matrix,
    /// Hidden activations after dropout.
    head_hidden: Matrix,
    dropout_mask: Option<Matrix>,
    probs: Matrix,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub embeddings: Matrix,
    pub probs: Matrix,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, dropout_seed: u64) -> Matrix {
    let mut rng = seed::rng(dropout_seed);
    let keep_scale = 1.0 / (1.0 - rate);
    let mut mask = Matrix::zeros(rows, cols);
    for v in mask.as_mut_slice() {
        if rng.random::<f64>() >= rate {
            *v = keep_scale;
        }
    }
    mask
}

/// Parameters plus the cache of the most recent forward pass.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    cache: Option<ForwardCache>,
}

impl Model {
    pub fn new(params: ModelParams) -> Self {
        Self { params, cache: None }
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    fn run(&self, inputs: &Matrix, mode: Mode, dropout_seed: u64) -> Result<ForwardCache> {
        let p = &self.params;
        if inputs.cols() != p.body_config.in_dim {
            return Err(Error::Dimension(format!(
                "input width {} does not match body input width {}",
                inputs.cols(),
                p.body_config.in_dim
            )));
        }
        let n_layers = p.body.layers.len();
        let mut body_inputs = vec![inputs.clone()];
        let mut body_pre = Vec::with_capacity(n_layers);
        for (l, layer) in p.body.layers.iter().enumerate() {
            let z = layer.forward(&body_inputs[l]);
            let a = if l + 1 < n_layers {
                let mut a = z.clone();
                let act = p.body_config.activation;
                a.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
                a
            } else {
                z.clone()
            };
            body_pre.push(z);
            body_inputs.push(a);
        }
        let embeddings = body_inputs.last().expect("at least the input");

        let head_pre = p.head.hidden.forward(embeddings);
        let act = p.head_config.activation;
        let mut head_hidden = head_pre.clone();
        head_hidden.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
        let dropout_mask = match mode {
            Mode::Train if p.head_config.dropout_rate > 0.0 => {
                let mask = dropout_mask(
                    head_hidden.rows(),
                    head_hidden.cols(),
                    p.head_config.dropout_rate,
                    dropout_seed,
                );
                for (h, m) in head_hidden.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *h *= m;
                }
                Some(mask)
            }
            _ => None,
        };
        let mut probs = p.head.output.forward(&head_hidden);
        probs.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));

        Ok(ForwardCache {
            body_inputs,
            body_pre,
            head_pre,
            head_hidden,
            dropout_mask,
            probs,
        })
    }

    /// Runs the model and keeps the activations for [`Model::backward`].
    pub fn forward(&mut self, inputs: &Matrix, mode: Mode, dropout_seed: u64) -> Result<ForwardOutput> {
        let cache = self.run(inputs, mode, dropout_seed)?;
        let out = ForwardOutput {
            embeddings: cache.body_inputs.last().expect("non-empty").clone(),
            probs: cache.probs.clone(),
        };
        self.cache = Some(cache);
        Ok(out)
    }

    /// Eval-mode forward that leaves the cache untouched.
    pub fn predict(&self, inputs: &Matrix) -> Result<ForwardOutput> {
        let cache = self.run(inputs, Mode::Eval, 0)?;
        Ok(ForwardOutput {
            embeddings: cache.body_inputs.last().expect("non-empty").clone(),
            probs: cache.probs,
        })
    }

    /// Hidden activations of the head (after dropout in train mode).
    pub fn head_hidden(&self, inputs: &Matrix, mode: Mode, dropout_seed: u64) -> Result<Matrix> {
        Ok(self.run(inputs, mode, dropout_seed)?.head_hidden)
    }

    /// Backpropagates loss gradients with respect to the embeddings and the
    /// probabilities of the last forward pass.
    pub fn backward(&self, grad_embeddings: &Matrix, grad_probs: &Matrix) -> Result<ModelGrads> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let p = &self.params;
        let embeddings = cache.body_inputs.last().expect("non-empty");
        if grad_probs.shape() != cache.probs.shape() || grad_embeddings.shape() != embeddings.shape() {
            return Err(Error::State(format!(
                "gradient shapes {:?}/{:?} do not match cached forward {:?}/{:?}",
                grad_embeddings.shape(),
                grad_probs.shape(),
                embeddings.shape(),
                cache.probs.shape()
            )));
        }

        let mut head_grad = p.head.zeros_like();
        let mut dz2 = grad_probs.clone();
        for (g, &pr) in dz2.as_mut_slice().iter_mut().zip(cache.probs.as_slice()) {
            *g *= pr * (1.0 - pr);
        }
        let mut dhidden = p.head.output.backward(&cache.head_hidden, &dz2, &mut head_grad.output);
        if let Some(mask) = &cache.dropout_mask {
            for (g, m) in dhidden.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *g *= m;
            }
        }
        let act = p.head_config.activation;
        for (g, &z) in dhidden.as_mut_slice().iter_mut().zip(cache.head_pre.as_slice()) {
            *g *= act.derivative(z);
        }
        let mut dembed = p.head.hidden.backward(embeddings, &dhidden, &mut head_grad.hidden);
        dembed.add_scaled(grad_embeddings, 1.0)?;

        let mut body_grad = p.body.zeros_like();
        let n_layers = p.body.layers.len();
        let mut upstream = dembed;
        for l in (0..n_layers).rev() {
            if l + 1 < n_layers {
                let act = p.body_config.activation;
                for (g, &z) in upstream.as_mut_slice().iter_mut().zip(cache.body_pre[l].as_slice()) {
                    *g *= act.derivative(z);
                }
            }
            upstream = p.body.layers[l].backward(&cache.body_inputs[l], &upstream, &mut body_grad.layers[l]);
        }

        Ok(ModelGrads {
            body: body_grad,
            head: head_grad,
            body_applicable: !p.body_frozen,
            head_applicable: !p.head_frozen,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model(dropout: f64) -> ModelParams {
        let mut head = HeadConfig::new(4, 3);
        head.hidden = 6;
        head.dropout_rate = dropout;
        init_model(BodyConfig::affine(5, 4), head, 11).unwrap()
    }

    fn inputs() -> Matrix {
        Matrix::from_rows(&[
            [0.5, -1.0, 0.3, 0.8, 0.1],
            [-0.2, 0.4, 1.1, -0.7, 0.9],
            [1.3, 0.2, -0.5, 0.0, -0.4],
        ])
        .unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(small_model(0.5), small_model(0.5));
        let other = init_model(BodyConfig::affine(5, 4), HeadConfig { hidden: 6, ..HeadConfig::new(4, 3) }, 12).unwrap();
        assert_ne!(small_model(0.5).body, other.body);
    }

    #[test]
    fn identity_body_has_no_params() {
        let p = init_model(BodyConfig::identity(8), HeadConfig::new(8, 14), 0).unwrap();
        assert_eq!(p.body.num_params(), 0);
    }

    #[test]
    fn head_param_count() {
        let p = init_model(BodyConfig::identity(384), HeadConfig::new(384, 14), 0).unwrap();
        assert_eq!(p.head.num_params(), 384 * 256 + 256 + 256 * 14 + 14);
        assert_eq!(p.head.num_params(), 102_158);
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let p = small_model(0.5);
        let limit = (6.0f64 / 11.0).sqrt();
        assert!(p.head.output.weight.iter().all(|w| w.abs() <= (6.0f64 / 9.0).sqrt()));
        assert!(p.head.hidden.weight.iter().all(|w| w.abs() <= (6.0f64 / 10.0).sqrt()));
        assert!(p.body.layers[0].weight.iter().all(|w| w.abs() <= (6.0f64 / 9.0).sqrt()));
        assert!(limit > 0.0);
        assert!(p.head.hidden.bias.iter().chain(&p.head.output.bias).all(|&b| b == 0.0));
    }

    #[test]
    fn config_mismatch_rejected() {
        assert!(matches!(
            init_model(BodyConfig::affine(5, 4), HeadConfig::new(3, 2), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            init_model(
                BodyConfig { out_dim: 3, ..BodyConfig::identity(4) },
                HeadConfig::new(3, 2),
                0
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let mut m = Model::new(small_model(0.5));
        let a = m.forward(&inputs(), Mode::Eval, 1).unwrap();
        let b = m.forward(&inputs(), Mode::Eval, 99).unwrap();
        assert_eq!(a.probs, b.probs);
        assert_eq!(a.embeddings, b.embeddings);
        assert!(a.probs.as_slice().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn zero_dropout_train_equals_eval() {
        let mut m = Model::new(small_model(0.0));
        let a = m.forward(&inputs(), Mode::Train, 5).unwrap();
        let b = m.forward(&inputs(), Mode::Eval, 5).unwrap();
        assert_eq!(a.probs, b.probs);
    }

    #[test]
    fn train_forward_depends_only_on_seed() {
        let mut m = Model::new(small_model(0.5));
        let a = m.forward(&inputs(), Mode::Train, 5).unwrap();
        let b = m.forward(&inputs(), Mode::Train, 5).unwrap();
        let c = m.forward(&inputs(), Mode::Train, 6).unwrap();
        assert_eq!(a.probs, b.probs);
        assert_ne!(a.probs, c.probs);
    }

    #[test]
    fn zero_input_gives_half() {
        let p = init_model(BodyConfig::identity(5), HeadConfig::new(5, 3), 3).unwrap();
        let out = Model::new(p).predict(&Matrix::zeros(2, 5)).unwrap();
        assert!(out.probs.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn width_mismatch() {
        let m = Model::new(small_model(0.5));
        assert!(matches!(m.predict(&Matrix::zeros(2, 4)), Err(Error::Dimension(_))));
    }

    #[test]
    fn backward_requires_forward() {
        let m = Model::new(small_model(0.5));
        let r = m.backward(&Matrix::zeros(3, 4), &Matrix::zeros(3, 3));
        assert!(matches!(r, Err(Error::State(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut m = Model::new(small_model(0.5));
        m.forward(&inputs(), Mode::Train, 2).unwrap();
        let g = m.backward(&Matrix::zeros(3, 4), &Matrix::zeros(3, 3)).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn frozen_grads_are_flagged() {
        let mut p = small_model(0.5);
        p.body_frozen = true;
        let mut m = Model::new(p);
        m.forward(&inputs(), Mode::Eval, 0).unwrap();
        let g = m.backward(&Matrix::filled(3, 4, 0.1), &Matrix::filled(3, 3, 0.1)).unwrap();
        assert!(!g.body_applicable);
        assert!(g.head_applicable);
    }

    #[test]
    fn reinit_head_keeps_body() {
        let mut p = small_model(0.5);
        let body = p.body_bytes();
        let head = p.head_bytes();
        reinit_head(&mut p, 77);
        assert_eq!(p.body_bytes(), body);
        assert_ne!(p.head_bytes(), head);
        let mut q = small_model(0.5);
        reinit_head(&mut q, 77);
        assert_eq!(p.head, q.head);
    }

    #[test]
    fn reinit_with_different_seeds_differs() {
        let base = small_model(0.5);
        for s in 0..10u64 {
            let mut a = base.clone();
            let mut b = base.clone();
            reinit_head(&mut a, s);
            reinit_head(&mut b, s + 1000);
            assert_ne!(a.head, b.head);
        }
    }

    #[test]
    fn flat_round_trip() {
        let mut p = small_model(0.5);
        let flat = p.to_flat();
        let q = p.clone();
        p.set_flat(&flat).unwrap();
        assert_eq!(p, q);
        assert!(p.set_flat(&flat[1..]).is_err());
    }

    #[test]
    fn activations_match_difference_quotients() {
        for act in [Activation::Relu, Activation::Tanh, Activation::Gelu] {
            for z in [-2.0, -0.3, 0.4, 1.7] {
                let h = 1e-6;
                let num = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((num - act.derivative(z)).abs() < 1e-8, "{act:?} at {z}");
            }
        }
    }
}
