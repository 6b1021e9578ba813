//! Univariate LSTM block forecaster: a single LSTM layer unrolled over a
//! lookback window, with a dense head mapping the final hidden state to a
//! block of future values. Trained with backpropagation through time.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::ingest::RegionSeries;
use crate::nn::{dropout_mask, fit, xavier_uniform, Mode, TrainConfig, TrainReport, Trainable};
use crate::params::Parameters;
use crate::preprocess::StandardScaler;
use crate::seeding;

pub const HIDDEN_SIZE: usize = 32;
pub const LOOKBACK: usize = 20;
pub const HORIZON: usize = 10;
pub const INPUT_DROPOUT: f64 = 0.2;

/// Gate order used for every per-gate array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Cell = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub lookback: usize,
    pub horizon: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            lookback: LOOKBACK,
            horizon: HORIZON,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.horizon == 0 {
            return Err(Error::config("lookback and horizon must be positive"));
        }
        if self.horizon > self.lookback {
            return Err(Error::config(format!(
                "horizon {} exceeds lookback {}",
                self.horizon, self.lookback
            )));
        }
        Ok(())
    }
}

/// Weights per gate: `input_weights[g]` is `hidden × input`,
/// `recurrent_weights[g]` is `hidden × hidden`, `biases[g]` has `hidden`
/// entries. The head is `output_len × hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub(crate) hidden_size: usize,
    pub(crate) input_size: usize,
    pub(crate) output_len: usize,
    pub(crate) input_weights: [Vec<f64>; 4],
    pub(crate) recurrent_weights: [Vec<f64>; 4],
    pub(crate) biases: [Vec<f64>; 4],
    pub(crate) head_weights: Vec<f64>,
    pub(crate) head_bias: Vec<f64>,
    pub(crate) input_dropout_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGradients {
    pub input_weights: [Vec<f64>; 4],
    pub recurrent_weights: [Vec<f64>; 4],
    pub biases: [Vec<f64>; 4],
    pub head_weights: Vec<f64>,
    pub head_bias: Vec<f64>,
}

/// Intermediate values of one cell step.
#[derive(Debug, Clone)]
pub struct CellCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates in [`Gate`] order.
    gates: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
}

impl CellCache {
    pub fn gate(&self, gate: Gate) -> &[f64] {
        &self.gates[gate as usize]
    }
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<CellCache>,
    input_mask: Option<Vec<f64>>,
    h_final: Vec<f64>,
}

impl LstmCache {
    pub fn input_mask(&self) -> Option<&[f64]> {
        self.input_mask.as_deref()
    }

    pub fn final_hidden(&self) -> &[f64] {
        &self.h_final
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn mat_vec_add(out: &mut [f64], w: &[f64], x: &[f64]) {
    let n = x.len();
    for (row, o) in out.iter_mut().enumerate() {
        *o += w[row * n..(row + 1) * n]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
}

/// `out += Wᵀ·d` for a row-major `W` with `d.len()` rows.
fn mat_t_vec_add(out: &mut [f64], w: &[f64], d: &[f64]) {
    let n = out.len();
    for (row, &dv) in d.iter().enumerate() {
        out.iter_mut()
            .zip(&w[row * n..(row + 1) * n])
            .for_each(|(o, wv)| *o += wv * dv);
    }
}

/// `g += d ⊗ x`.
fn outer_add(g: &mut [f64], d: &[f64], x: &[f64]) {
    let n = x.len();
    for (row, &dv) in d.iter().enumerate() {
        g[row * n..(row + 1) * n]
            .iter_mut()
            .zip(x)
            .for_each(|(gv, xv)| *gv += dv * xv);
    }
}

impl LstmModel {
    /// Xavier-uniform weights, zero biases except the forget gate (1.0).
    pub fn new(
        hidden_size: usize,
        input_size: usize,
        output_len: usize,
        input_dropout_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if hidden_size == 0 || input_size == 0 || output_len == 0 {
            return Err(Error::config("LSTM sizes must be positive"));
        }
        if !(0.0..1.0).contains(&input_dropout_rate) {
            return Err(Error::config(format!(
                "dropout rate {input_dropout_rate} outside [0, 1)"
            )));
        }
        let mut rng = seeding::rng(seed, seeding::INIT_STREAM);
        let input_weights = Gate::ALL.map(|_| xavier_uniform(&mut rng, input_size, hidden_size));
        let recurrent_weights = Gate::ALL.map(|_| xavier_uniform(&mut rng, hidden_size, hidden_size));
        let biases = Gate::ALL.map(|g| {
            let fill = if g == Gate::Forget { 1.0 } else { 0.0 };
            vec![fill; hidden_size]
        });
        let head_weights = xavier_uniform(&mut rng, hidden_size, output_len);
        Ok(Self {
            hidden_size,
            input_size,
            output_len,
            input_weights,
            recurrent_weights,
            biases,
            head_weights,
            head_bias: vec![0.0; output_len],
            input_dropout_rate,
        })
    }

    /// The climate forecaster: 32 units, univariate input, 10-step head.
    pub fn climate(seed: u64) -> Result<Self> {
        Self::new(HIDDEN_SIZE, 1, HORIZON, INPUT_DROPOUT, seed)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        hidden_size: usize,
        input_size: usize,
        output_len: usize,
        input_weights: [Vec<f64>; 4],
        recurrent_weights: [Vec<f64>; 4],
        biases: [Vec<f64>; 4],
        head_weights: Vec<f64>,
        head_bias: Vec<f64>,
        input_dropout_rate: f64,
    ) -> Result<Self> {
        let model = Self {
            hidden_size,
            input_size,
            output_len,
            input_weights,
            recurrent_weights,
            biases,
            head_weights,
            head_bias,
            input_dropout_rate,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let (h, i, o) = (self.hidden_size, self.input_size, self.output_len);
        if h == 0 || i == 0 || o == 0 {
            return Err(Error::shape("LSTM sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.input_dropout_rate) {
            return Err(Error::config("input dropout rate outside [0, 1)"));
        }
        for g in Gate::ALL {
            let k = g as usize;
            if self.input_weights[k].len() != h * i
                || self.recurrent_weights[k].len() != h * h
                || self.biases[k].len() != h
            {
                return Err(Error::shape(format!("{g:?} gate parameters have the wrong size")));
            }
        }
        if self.head_weights.len() != o * h || self.head_bias.len() != o {
            return Err(Error::shape("head parameters have the wrong size"));
        }
        Ok(())
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn input_dropout_rate(&self) -> f64 {
        self.input_dropout_rate
    }

    pub fn input_weights(&self, gate: Gate) -> &[f64] {
        &self.input_weights[gate as usize]
    }

    pub fn recurrent_weights(&self, gate: Gate) -> &[f64] {
        &self.recurrent_weights[gate as usize]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        &self.biases[gate as usize]
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.head_weights
    }

    pub fn head_bias(&self) -> &[f64] {
        &self.head_bias
    }

    /// One step of the standard (peephole-free) LSTM cell.
    pub fn cell(&self, x_t: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>, CellCache)> {
        let h = self.hidden_size;
        if x_t.len() != self.input_size || h_prev.len() != h || c_prev.len() != h {
            return Err(Error::shape(format!(
                "cell expects input {} and state {h}, got {}, {}, {}",
                self.input_size,
                x_t.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        let gates = Gate::ALL.map(|g| {
            let k = g as usize;
            let mut z = self.biases[k].clone();
            mat_vec_add(&mut z, &self.input_weights[k], x_t);
            mat_vec_add(&mut z, &self.recurrent_weights[k], h_prev);
            let act: fn(f64) -> f64 = if g == Gate::Cell { f64::tanh } else { sigmoid };
            z.into_iter().map(act).collect::<Vec<f64>>()
        });
        let [i, f, o, g] = &gates;
        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        let cache = CellCache {
            x: x_t.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
        };
        Ok((h_new, c, cache))
    }

    /// Unrolls the cell over `window` (time-major, `input_size` values per
    /// step) from zero state and applies the head to the final hidden state.
    /// Training mode applies inverted dropout to the input sequence.
    pub fn forward(&self, window: &[f64], mode: Mode<'_>) -> Result<(Vec<f64>, LstmCache)> {
        if window.is_empty() || window.len() % self.input_size != 0 {
            return Err(Error::shape(format!(
                "window of {} values is not a whole number of {}-wide steps",
                window.len(),
                self.input_size
            )));
        }
        let (inputs, input_mask) = match mode {
            Mode::Train(rng) if self.input_dropout_rate > 0.0 => {
                let mask = dropout_mask(rng, window.len(), self.input_dropout_rate);
                let masked = window.iter().zip(&mask).map(|(x, m)| x * m).collect();
                (masked, Some(mask))
            }
            _ => (window.to_vec(), None),
        };
        let mut h = vec![0.0; self.hidden_size];
        let mut c = vec![0.0; self.hidden_size];
        let mut steps = Vec::with_capacity(inputs.len() / self.input_size);
        for x_t in inputs.chunks(self.input_size) {
            let (h_next, c_next, cache) = self.cell(x_t, &h, &c)?;
            h = h_next;
            c = c_next;
            steps.push(cache);
        }
        let mut prediction = self.head_bias.clone();
        mat_vec_add(&mut prediction, &self.head_weights, &h);
        Ok((
            prediction,
            LstmCache {
                steps,
                input_mask,
                h_final: h,
            },
        ))
    }

    /// Eval-mode prediction; pure and safe to share across threads.
    pub fn predict(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.forward(window, Mode::Eval).map(|(y, _)| y)
    }

    /// Backpropagation through time of the mean squared error against `target`.
    pub fn backward(&self, cache: &LstmCache, target: &[f64]) -> Result<LstmGradients> {
        let h = self.hidden_size;
        if target.len() != self.output_len {
            return Err(Error::shape(format!(
                "target has {} values, head outputs {}",
                target.len(),
                self.output_len
            )));
        }
        if cache.h_final.len() != h
            || cache
                .steps
                .iter()
                .any(|s| s.x.len() != self.input_size || s.h_prev.len() != h)
        {
            return Err(Error::shape("activation record does not match model"));
        }
        let mut grads = self.zero_gradients();
        let mut prediction = self.head_bias.clone();
        mat_vec_add(&mut prediction, &self.head_weights, &cache.h_final);
        let scale = 2.0 / self.output_len as f64;
        let d_pred: Vec<f64> = prediction
            .iter()
            .zip(target)
            .map(|(p, t)| scale * (p - t))
            .collect();
        outer_add(&mut grads.head_weights, &d_pred, &cache.h_final);
        grads.head_bias.copy_from_slice(&d_pred);

        let mut dh = vec![0.0; h];
        mat_t_vec_add(&mut dh, &self.head_weights, &d_pred);
        let mut dc = vec![0.0; h];
        for step in cache.steps.iter().rev() {
            let [i, f, o, g] = &step.gates;
            let mut dz: [Vec<f64>; 4] = Gate::ALL.map(|_| vec![0.0; h]);
            let mut dc_prev = vec![0.0; h];
            for k in 0..h {
                let d_o = dh[k] * step.tanh_c[k];
                dc[k] += dh[k] * o[k] * (1.0 - step.tanh_c[k] * step.tanh_c[k]);
                let d_i = dc[k] * g[k];
                let d_g = dc[k] * i[k];
                let d_f = dc[k] * step.c_prev[k];
                dc_prev[k] = dc[k] * f[k];
                dz[Gate::Input as usize][k] = d_i * i[k] * (1.0 - i[k]);
                dz[Gate::Forget as usize][k] = d_f * f[k] * (1.0 - f[k]);
                dz[Gate::Output as usize][k] = d_o * o[k] * (1.0 - o[k]);
                dz[Gate::Cell as usize][k] = d_g * (1.0 - g[k] * g[k]);
            }
            let mut dh_prev = vec![0.0; h];
            for gate in Gate::ALL {
                let k = gate as usize;
                outer_add(&mut grads.input_weights[k], &dz[k], &step.x);
                outer_add(&mut grads.recurrent_weights[k], &dz[k], &step.h_prev);
                grads.biases[k].iter_mut().zip(&dz[k]).for_each(|(b, d)| *b += d);
                mat_t_vec_add(&mut dh_prev, &self.recurrent_weights[k], &dz[k]);
            }
            dh = dh_prev;
            dc = dc_prev;
        }
        Ok(grads)
    }

    pub fn zero_gradients(&self) -> LstmGradients {
        LstmGradients {
            input_weights: self.input_weights.clone().map(|w| vec![0.0; w.len()]),
            recurrent_weights: self.recurrent_weights.clone().map(|w| vec![0.0; w.len()]),
            biases: self.biases.clone().map(|b| vec![0.0; b.len()]),
            head_weights: vec![0.0; self.head_weights.len()],
            head_bias: vec![0.0; self.head_bias.len()],
        }
    }
}

macro_rules! lstm_tensors {
    ($s:expr, $iter:ident, $as:ident) => {{
        let mut out = Vec::with_capacity(14);
        for ((w, u), b) in $s
            .input_weights
            .$iter()
            .zip($s.recurrent_weights.$iter())
            .zip($s.biases.$iter())
        {
            out.push(w.$as());
            out.push(u.$as());
            out.push(b.$as());
        }
        out.push($s.head_weights.$as());
        out.push($s.head_bias.$as());
        out
    }};
}

impl Parameters for LstmModel {
    fn tensors(&self) -> Vec<&[f64]> {
        lstm_tensors!(self, iter, as_slice)
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        lstm_tensors!(self, iter_mut, as_mut_slice)
    }
}

impl Parameters for LstmGradients {
    fn tensors(&self) -> Vec<&[f64]> {
        lstm_tensors!(self, iter, as_slice)
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        lstm_tensors!(self, iter_mut, as_mut_slice)
    }
}

/// A training pair standardized with the statistics of its own input window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub scaler: StandardScaler,
}

impl WindowPair {
    /// Standardizes `input` and `target` with the input window's mean and
    /// population standard deviation.
    pub fn from_raw(input: &[f64], target: &[f64]) -> Result<Self> {
        let scaler = StandardScaler::fit(input)?;
        Ok(Self {
            input: scaler.apply_all(input),
            target: scaler.apply_all(target),
            scaler,
        })
    }
}

/// All stride-1 (lookback, horizon) windows of a series.
pub fn make_windows(series: &RegionSeries, cfg: WindowConfig) -> Result<Vec<WindowPair>> {
    cfg.validate()?;
    let span = cfg.lookback + cfg.horizon;
    let values = series.values();
    if values.len() < span {
        return Err(Error::data(format!(
            "series {}/{} has {} values; windows need at least {span}",
            series.region_id(),
            series.variable(),
            values.len()
        )));
    }
    values
        .windows(span)
        .map(|w| WindowPair::from_raw(&w[..cfg.lookback], &w[cfg.lookback..]))
        .collect()
}

impl Trainable for LstmModel {
    type Sample = WindowPair;
    type Grads = LstmGradients;

    fn zero_grads(&self) -> LstmGradients {
        self.zero_gradients()
    }

    fn accumulate(&self, sample: &WindowPair, rng: &mut dyn RngCore, grads: &mut LstmGradients) -> Result<f64> {
        let (pred, cache) = self.forward(&sample.input, Mode::Train(rng))?;
        let g = self.backward(&cache, &sample.target)?;
        grads.add_assign_from(&g);
        crate::nn::mse_loss(&pred, &sample.target)
    }
}

/// Trains a fresh climate LSTM (32 units, input dropout 0.2) on `pairs`.
/// The head length follows the pairs' target length.
pub fn train_lstm(pairs: &[WindowPair], cfg: &TrainConfig) -> Result<(LstmModel, TrainReport)> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::config("cannot train an LSTM on zero window pairs"))?;
    let (lookback, horizon) = (first.input.len(), first.target.len());
    if let Some(i) = pairs
        .iter()
        .position(|p| p.input.len() != lookback || p.target.len() != horizon)
    {
        return Err(Error::shape(format!("window pair {i} differs in shape from pair 0")));
    }
    let mut model = LstmModel::new(HIDDEN_SIZE, 1, horizon, INPUT_DROPOUT, cfg.seed)?;
    let report = fit(&mut model, pairs, cfg)?;
    Ok((model, report))
}

/// Random small model for tests and diagnostics, with every parameter
/// (biases included) drawn from `±scale`.
pub fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    hidden_size: usize,
    input_size: usize,
    output_len: usize,
    scale: f64,
) -> LstmModel {
    let mut model = LstmModel::new(hidden_size, input_size, output_len, 0.0, 0).expect("positive sizes");
    for t in model.tensors_mut() {
        t.iter_mut().for_each(|v| *v = rng.gen_range(-scale..scale));
    }
    model
}
