use rand::seq::SliceRandom;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::seeding;

use super::{AdamState, DenseGradients, DenseNetwork, Mode};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub plateau_tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 5000,
            plateau_patience: 50,
            plateau_tolerance: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0 < self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::config(format!(
                "adam moments must satisfy 0 < beta1 < beta2 < 1 (got {}, {})",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("adam epsilon must be positive"));
        }
        if self.max_epochs == 0 || self.plateau_patience == 0 {
            return Err(Error::config("max_epochs and plateau_patience must be positive"));
        }
        if !(self.plateau_tolerance > 0.0) {
            return Err(Error::config("plateau_tolerance must be positive"));
        }
        Ok(())
    }
}

/// Convergence rule on the running-best epoch loss: halts once the relative
/// improvement across the last `patience` epochs drops below `tolerance`.
#[derive(Debug, Clone)]
pub struct PlateauDetector {
    patience: usize,
    tolerance: f64,
    best: Vec<f64>,
}

impl PlateauDetector {
    pub fn new(patience: usize, tolerance: f64) -> Self {
        Self {
            patience,
            tolerance,
            best: Vec::new(),
        }
    }

    /// Records one epoch loss; returns true when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        let best = self.best.last().map_or(loss, |&b| b.min(loss));
        self.best.push(best);
        let n = self.best.len();
        if n <= self.patience {
            return false;
        }
        let earlier = self.best[n - 1 - self.patience];
        if earlier <= 0.0 {
            return true;
        }
        (earlier - best) / earlier < self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean train-mode loss of every epoch run.
    pub epoch_losses: Vec<f64>,
    pub stopped_on_plateau: bool,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.epoch_losses.len()
    }

    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// A model that can be fitted by [`fit`].
pub trait Trainable: Parameters {
    type Sample;
    type Grads: Parameters;

    fn zero_grads(&self) -> Self::Grads;

    /// Train-mode forward and backward pass on one sample; adds the sample's
    /// gradient into `grads` and returns its loss.
    fn accumulate(
        &self,
        sample: &Self::Sample,
        rng: &mut dyn RngCore,
        grads: &mut Self::Grads,
    ) -> Result<f64>;
}

/// Mini-batch Adam with per-epoch seeded Fisher–Yates shuffling and the
/// plateau stopping rule. Deterministic given `cfg.seed`.
pub fn fit<M: Trainable>(model: &mut M, samples: &[M::Sample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    let mut adam = AdamState::new(model);
    let mut plateau = PlateauDetector::new(cfg.plateau_patience, cfg.plateau_tolerance);
    let mut epoch_losses = Vec::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut seeding::rng(cfg.seed, seeding::shuffle_stream(epoch)));
        let mut dropout_rng = seeding::rng(cfg.seed, seeding::dropout_stream(epoch));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zero_grads();
            for &i in batch {
                total += model.accumulate(&samples[i], &mut dropout_rng, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(model, &grads, cfg)?;
        }
        let loss = total / samples.len() as f64;
        if !loss.is_finite() {
            return Err(Error::config(format!(
                "training diverged at epoch {epoch} (loss {loss}); lower the learning rate"
            )));
        }
        epoch_losses.push(loss);
        if plateau.observe(loss) {
            return Ok(TrainReport {
                epoch_losses,
                stopped_on_plateau: true,
            });
        }
    }
    Ok(TrainReport {
        epoch_losses,
        stopped_on_plateau: false,
    })
}

/// One standardized training example for the dense regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub target: f64,
}

impl Trainable for DenseNetwork {
    type Sample = Example;
    type Grads = DenseGradients;

    fn zero_grads(&self) -> DenseGradients {
        self.zero_gradients()
    }

    fn accumulate(
        &self,
        sample: &Example,
        rng: &mut dyn RngCore,
        grads: &mut DenseGradients,
    ) -> Result<f64> {
        let (pred, cache) = self.forward(&sample.features, Mode::Train(rng))?;
        let target = [sample.target];
        let g = self.backward(&cache, &target)?;
        grads.add_assign_from(&g);
        super::mse_loss(&pred, &target)
    }
}

/// Trains the abundance regressor from a fresh Xavier initialization on
/// standardized features and log-transformed targets.
pub fn train_abundance(examples: &[Example], cfg: &TrainConfig) -> Result<(DenseNetwork, TrainReport)> {
    if examples.is_empty() {
        return Err(Error::config("no training examples"));
    }
    if examples.len() < cfg.batch_size {
        return Err(Error::config(format!(
            "{} training examples is fewer than the batch size {}",
            examples.len(),
            cfg.batch_size
        )));
    }
    let mut net = DenseNetwork::abundance(cfg.seed)?;
    let report = fit(&mut net, examples, cfg)?;
    Ok((net, report))
}
