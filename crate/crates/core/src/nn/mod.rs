//! Dense feed-forward regressor built from scratch: Xavier initialization,
//! inverted dropout, analytic backpropagation and Adam.

mod adam;
mod train;

pub use adam::AdamState;
pub use train::{fit, train_abundance, Example, PlateauDetector, TrainConfig, TrainReport, Trainable};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::seeding;

/// Layer dimensions of the abundance regressor: six inputs, six hidden layers
/// of 64 units and a single output node.
pub const ABUNDANCE_LAYER_DIMS: [usize; 8] = [6, 64, 64, 64, 64, 64, 64, 1];
pub const ABUNDANCE_DROPOUT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
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
            Activation::Identity => 1.0,
        }
    }
}

/// Forward-pass mode. Training mode carries the random stream used for
/// dropout masks.
pub enum Mode<'a> {
    Train(&'a mut dyn RngCore),
    Eval,
}

/// Dense network with row-major weights (`fan_out × fan_in`) per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activations: Vec<Activation>,
    dropout_rate: f64,
}

/// Activation record of one forward pass, replayed by [`DenseNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre_activations: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl ForwardCache {
    /// Scaled dropout mask applied to the output of `layer`, if any.
    pub fn mask(&self, layer: usize) -> Option<&[f64]> {
        self.masks.get(layer).and_then(|m| m.as_deref())
    }

    pub fn layer_output(&self, layer: usize) -> &[f64] {
        &self.outputs[layer]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::config(format!(
            "a dense network needs at least 2 layer dims, got {}",
            layer_dims.len()
        )));
    }
    if let Some(i) = layer_dims.iter().position(|&d| d == 0) {
        return Err(Error::config(format!("layer dim {i} is zero")));
    }
    Ok(())
}

fn default_activations(n_layers: usize) -> Vec<Activation> {
    let mut acts = vec![Activation::Relu; n_layers];
    acts[n_layers - 1] = Activation::Identity;
    acts
}

fn check_dropout(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Glorot-uniform initialization: weights in `±sqrt(6 / (fan_in + fan_out))`,
/// zero biases, relu everywhere except an identity output layer. Dropout is
/// off; see [`DenseNetwork::with_dropout`].
pub fn xavier_init(layer_dims: &[usize], seed: u64) -> Result<DenseNetwork> {
    validate_dims(layer_dims)?;
    let mut rng = seeding::rng(seed, seeding::INIT_STREAM);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        weights.push(xavier_uniform(&mut rng, fan_in, fan_out));
        biases.push(vec![0.0; fan_out]);
    }
    Ok(DenseNetwork {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
        activations: default_activations(layer_dims.len() - 1),
        dropout_rate: 0.0,
    })
}

/// `fan_out × fan_in` matrix drawn from the Glorot uniform distribution.
pub(crate) fn xavier_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect()
}

impl DenseNetwork {
    /// The abundance regressor (21,313 parameters, dropout 0.2).
    pub fn abundance(seed: u64) -> Result<Self> {
        xavier_init(&ABUNDANCE_LAYER_DIMS, seed)?.with_dropout(ABUNDANCE_DROPOUT)
    }

    /// Builds a network from explicit parameters, validating every shape.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        activations: Vec<Activation>,
        dropout_rate: f64,
    ) -> Result<Self> {
        validate_dims(&layer_dims)?;
        check_dropout(dropout_rate)?;
        let n_layers = layer_dims.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers || activations.len() != n_layers {
            return Err(Error::shape(format!(
                "expected {n_layers} layers, got {} weight, {} bias and {} activation entries",
                weights.len(),
                biases.len(),
                activations.len()
            )));
        }
        for (i, pair) in layer_dims.windows(2).enumerate() {
            if weights[i].len() != pair[0] * pair[1] {
                return Err(Error::shape(format!(
                    "layer {i} weights have {} values, expected {}x{}",
                    weights[i].len(),
                    pair[1],
                    pair[0]
                )));
            }
            if biases[i].len() != pair[1] {
                return Err(Error::shape(format!(
                    "layer {i} biases have {} values, expected {}",
                    biases[i].len(),
                    pair[1]
                )));
            }
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
            activations,
            dropout_rate,
        })
    }

    pub fn with_dropout(mut self, rate: f64) -> Result<Self> {
        check_dropout(rate)?;
        self.dropout_rate = rate;
        Ok(self)
    }

    pub fn with_activations(mut self, activations: Vec<Activation>) -> Result<Self> {
        if activations.len() != self.n_layers() {
            return Err(Error::shape(format!(
                "{} activations for {} layers",
                activations.len(),
                self.n_layers()
            )));
        }
        self.activations = activations;
        Ok(self)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims[self.layer_dims.len() - 1]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn forward(&self, x: &[f64], mode: Mode<'_>) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut rng = match mode {
            Mode::Train(rng) => Some(rng),
            Mode::Eval => None,
        };
        let n_layers = self.n_layers();
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut masks = Vec::with_capacity(n_layers);
        for layer in 0..n_layers {
            let input = if layer == 0 { x } else { &outputs[layer - 1] };
            let z = affine(&self.weights[layer], &self.biases[layer], input);
            let act = self.activations[layer];
            let mut a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            let hidden = layer + 1 < n_layers;
            let mask = match rng.as_mut() {
                Some(rng) if hidden && self.dropout_rate > 0.0 => {
                    let mask = dropout_mask(&mut **rng, a.len(), self.dropout_rate);
                    a.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                    Some(mask)
                }
                _ => None,
            };
            pre_activations.push(z);
            outputs.push(a);
            masks.push(mask);
        }
        let prediction = outputs[n_layers - 1].clone();
        Ok((
            prediction,
            ForwardCache {
                input: x.to_vec(),
                pre_activations,
                outputs,
                masks,
            },
        ))
    }

    /// Eval-mode prediction; pure and safe to call concurrently.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x, Mode::Eval).map(|(y, _)| y)
    }

    /// Gradient of [`mse_loss`] against `target` for the pass recorded in `cache`.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64]) -> Result<DenseGradients> {
        let n_layers = self.n_layers();
        if cache.outputs.len() != n_layers
            || cache.input.len() != self.input_dim()
            || cache
                .outputs
                .iter()
                .zip(&self.layer_dims[1..])
                .any(|(o, &d)| o.len() != d)
        {
            return Err(Error::shape("activation record does not match network"));
        }
        if target.len() != self.output_dim() {
            return Err(Error::shape(format!(
                "target has {} values, network outputs {}",
                target.len(),
                self.output_dim()
            )));
        }
        let prediction = &cache.outputs[n_layers - 1];
        let scale = 2.0 / target.len() as f64;
        // d loss / d (layer output, after mask)
        let mut delta: Vec<f64> = prediction
            .iter()
            .zip(target)
            .map(|(p, t)| scale * (p - t))
            .collect();
        let mut grads = self.zero_gradients();
        for layer in (0..n_layers).rev() {
            if let Some(mask) = &cache.masks[layer] {
                delta.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
            }
            let act = self.activations[layer];
            delta
                .iter_mut()
                .zip(&cache.pre_activations[layer])
                .for_each(|(d, &z)| *d *= act.derivative(z));
            let input = if layer == 0 {
                &cache.input
            } else {
                &cache.outputs[layer - 1]
            };
            let fan_in = input.len();
            let gw = &mut grads.weights[layer];
            for (row, &d) in delta.iter().enumerate() {
                let gw_row = &mut gw[row * fan_in..(row + 1) * fan_in];
                gw_row.iter_mut().zip(input).for_each(|(g, &a)| *g = d * a);
            }
            grads.biases[layer].copy_from_slice(&delta);
            if layer > 0 {
                let w = &self.weights[layer];
                let mut prev = vec![0.0; fan_in];
                for (row, &d) in delta.iter().enumerate() {
                    let w_row = &w[row * fan_in..(row + 1) * fan_in];
                    prev.iter_mut().zip(w_row).for_each(|(p, &wv)| *p += wv * d);
                }
                delta = prev;
            }
        }
        Ok(grads)
    }

    pub fn zero_gradients(&self) -> DenseGradients {
        DenseGradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// `W·x + b` for a row-major `W`.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    b.iter()
        .enumerate()
        .map(|(row, &bias)| {
            w[row * n..(row + 1) * n]
                .iter()
                .zip(x)
                .fold(bias, |acc, (wv, xv)| acc + wv * xv)
        })
        .collect()
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub(crate) fn dropout_mask<R: Rng + ?Sized>(rng: &mut R, len: usize, rate: f64) -> Vec<f64> {
    let keep_scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep_scale })
        .collect()
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::shape(format!(
            "prediction length {} != target length {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::shape("mse of empty vectors"));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}

impl Parameters for DenseNetwork {
    fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }
}

impl Parameters for DenseGradients {
    fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }
}
