//! Small neural networks trained by plain mini-batch SGD.
//!
//! Batches are stored column-wise: a `d × B` matrix holds `B` samples of
//! dimension `d`. The training loss is the squared error averaged over output
//! components and over the batch.

mod conv;
mod dense;
mod lsvd;
mod model_file;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use conv::{ConvLayer, ConvNet, Raster};
pub use dense::{Activation, DenseLayer, ForwardCache, Gradients, MlpNetwork};
pub use lsvd::{
    infer, train_denoiser, train_lsvd, LsvdConfig, LsvdModel, MinMax, TrainingReport,
    TrainingSample,
};
pub use model_file::{read_model, write_model};

use crate::error::{DotError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize, seed: u64) -> Self {
        Self {
            learning_rate,
            epochs,
            batch_size: 32,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(DotError::InvalidArgument(format!(
                "learning rate {} must be non-negative",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(DotError::InvalidArgument(
                "epochs and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A model that can take one SGD step on a batch.
pub trait Trainable {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Updates the parameters with `lr` times the gradient of the batch loss
    /// and returns each sample's squared error `‖f(x) − t‖²` measured before
    /// the update.
    fn sgd_step(
        &mut self,
        inputs: &DMatrix<f64>,
        targets: &DMatrix<f64>,
        lr: f64,
    ) -> Result<Vec<f64>>;
}

/// Runs `cfg.epochs` passes over a seeded shuffle of the columns and returns
/// the mean loss of every epoch.
pub fn train_sgd<T: Trainable>(
    model: &mut T,
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    cfg: &TrainConfig,
    stage: &str,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = inputs.ncols();
    if n == 0 || targets.ncols() != n {
        return Err(DotError::InvalidArgument(format!(
            "{stage}: {n} inputs and {} targets",
            targets.ncols()
        )));
    }
    if inputs.nrows() != model.input_dim() || targets.nrows() != model.output_dim() {
        return Err(DotError::InvalidArgument(format!(
            "{stage}: data is {}→{}, model is {}→{}",
            inputs.nrows(),
            targets.nrows(),
            model.input_dim(),
            model.output_dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut per_sample = vec![0.0; n];
    let scale = 1.0 / targets.nrows() as f64;
    let mut history = Vec::with_capacity(cfg.epochs);
    let start = std::time::Instant::now();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let x = inputs.select_columns(batch);
            let t = targets.select_columns(batch);
            let losses = model.sgd_step(&x, &t, cfg.learning_rate)?;
            for (&i, l) in batch.iter().zip(losses) {
                per_sample[i] = l * scale;
            }
        }
        let loss = per_sample.iter().sum::<f64>() / n as f64;
        if !loss.is_finite() {
            return Err(DotError::Divergence {
                stage: stage.to_string(),
                iteration: epoch,
            });
        }
        log::debug!("{stage} epoch {epoch}: loss {loss:e}");
        history.push(loss);
    }
    log::info!(
        "{stage}: {} epochs in {:.1?}, final loss {:e}",
        cfg.epochs,
        start.elapsed(),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(history)
}
