//! Learned-SVD reconstruction network.
//!
//! A data autoencoder and a signal autoencoder are trained separately; a
//! bridge network then maps the data latent code to the signal latent code.
//! Reconstruction chains data encoder, bridge and signal decoder, followed by
//! an optional convolutional denoiser on the voxel raster.

use nalgebra::DMatrix;

use super::{train_sgd, Activation, ConvNet, MlpNetwork, Raster, TrainConfig};
use crate::error::{DotError, Result};
use crate::geometry::VoxelGrid;

/// Affine map of each feature (or of all features, when one pair of bounds
/// is stored) onto `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMax {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl MinMax {
    /// Bounds per feature; ranges narrower than `floor` are widened to it.
    pub fn per_feature(samples: &[&[f64]], floor: f64) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| DotError::InvalidArgument("no samples to normalize".into()))?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for s in samples {
            if s.len() != lo.len() {
                return Err(DotError::InvalidArgument("samples differ in length".into()));
            }
            for (k, &v) in s.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        for (l, h) in lo.iter().zip(hi.iter_mut()) {
            if *h - *l < floor {
                *h = *l + floor;
            }
        }
        Self::checked(lo, hi)
    }

    pub fn global(lo: f64, hi: f64) -> Result<Self> {
        Self::checked(vec![lo], vec![hi])
    }

    fn checked(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len()
            || lo
                .iter()
                .zip(&hi)
                .any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite())
        {
            return Err(DotError::InvalidArgument(
                "normalization bounds must be finite with max > min".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    fn bounds(&self, k: usize) -> (f64, f64) {
        if self.lo.len() == 1 {
            (self.lo[0], self.hi[0])
        } else {
            (self.lo[k], self.hi[k])
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let (l, h) = self.bounds(k);
                (v - l) / (h - l)
            })
            .collect()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let (l, h) = self.bounds(k);
                l + v * (h - l)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsvdConfig {
    pub latent_dim: usize,
    pub bridge_layers: usize,
    pub bridge_width: usize,
    pub dae: TrainConfig,
    pub sae: TrainConfig,
    pub bridge: TrainConfig,
    pub denoiser: TrainConfig,
    pub denoiser_channels: usize,
    /// Folds for the denoiser's training inputs: each fold is reconstructed
    /// by a chain trained on the other folds. Below 2 the full chain's own
    /// training outputs are used.
    pub denoiser_folds: usize,
    /// Amplitude of the random perturbation added to the identity-initialized
    /// denoiser.
    pub denoiser_init_scale: f64,
    pub init_seed: u64,
    /// Upper clamp of reconstructions as a multiple of the background.
    pub max_contrast: f64,
}

impl LsvdConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            latent_dim: 64,
            bridge_layers: 7,
            bridge_width: 64,
            dae: TrainConfig::new(0.1, 2000, seed ^ 0x01),
            sae: TrainConfig::new(0.01, 2000, seed ^ 0x02),
            bridge: TrainConfig::new(0.1, 2000, seed ^ 0x03),
            denoiser: TrainConfig::new(1e-4, 100, seed ^ 0x04),
            denoiser_channels: 16,
            denoiser_folds: 3,
            denoiser_init_scale: 0.01,
            init_seed: seed,
            max_contrast: 5.0,
        }
    }

    /// Same architecture with every stage limited to `epochs` passes.
    pub fn with_epochs(mut self, epochs: usize, denoiser_epochs: usize) -> Self {
        self.dae.epochs = epochs;
        self.sae.epochs = epochs;
        self.bridge.epochs = epochs;
        self.denoiser.epochs = denoiser_epochs;
        self
    }
}

/// One training phantom with its measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// Noise-free log-ratio data.
    pub clean: Vec<f64>,
    /// Noisy log-ratio data, one vector per noise realization.
    pub noisy: Vec<Vec<f64>>,
    /// Ground-truth absorption per voxel.
    pub mu_a: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReport {
    pub dae_loss: Vec<f64>,
    pub sae_loss: Vec<f64>,
    pub bridge_loss: Vec<f64>,
    pub denoiser_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsvdModel {
    pub dae_encoder: MlpNetwork,
    pub dae_decoder: MlpNetwork,
    pub sae_encoder: MlpNetwork,
    pub sae_decoder: MlpNetwork,
    pub bridge: MlpNetwork,
    pub denoiser: Option<ConvNet>,
    pub measurement_norm: MinMax,
    pub signal_norm: MinMax,
    /// Physical clamp range of reconstructions.
    pub mu_a_range: (f64, f64),
}

impl LsvdModel {
    pub fn n_measurements(&self) -> usize {
        self.dae_encoder.input_dim()
    }

    pub fn n_voxels(&self) -> usize {
        self.sae_decoder.output_dim()
    }

    /// Data encoder, bridge and signal decoder as one network.
    pub fn composed(&self) -> MlpNetwork {
        MlpNetwork::chain(&[&self.dae_encoder, &self.bridge, &self.sae_decoder])
            .expect("trained model chains")
    }

    fn check(&self) -> Result<()> {
        let ok = self.dae_encoder.output_dim() == self.bridge.input_dim()
            && self.bridge.output_dim() == self.sae_decoder.input_dim()
            && self.sae_encoder.output_dim() == self.sae_decoder.input_dim()
            && self.dae_decoder.input_dim() == self.dae_encoder.output_dim()
            && self.dae_decoder.output_dim() == self.dae_encoder.input_dim()
            && self.sae_encoder.input_dim() == self.sae_decoder.output_dim()
            && self
                .denoiser
                .as_ref()
                .is_none_or(|d| d.raster.n_voxels() == self.n_voxels());
        if ok {
            Ok(())
        } else {
            Err(DotError::InvalidArgument(
                "model components have inconsistent dimensions".into(),
            ))
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
    }

    fn normalize_batch(&self, ys: &[&[f64]]) -> Result<DMatrix<f64>> {
        let m = self.n_measurements();
        let mut x = DMatrix::zeros(m, ys.len());
        for (b, y) in ys.iter().enumerate() {
            if y.len() != m {
                return Err(DotError::InvalidArgument(format!(
                    "measurement vector has {} entries, model expects {m}",
                    y.len()
                )));
            }
            x.column_mut(b)
                .copy_from_slice(&self.measurement_norm.normalize(y));
        }
        Ok(x)
    }

    /// Composed-network output in normalized signal units, before denoising.
    pub fn predict_normalized(&self, ys: &[&[f64]]) -> Result<DMatrix<f64>> {
        let x = self.normalize_batch(ys)?;
        let z = self.dae_encoder.forward_batch(&x)?;
        let z = self.bridge.forward_batch(&z)?;
        self.sae_decoder.forward_batch(&z)
    }
}

fn columns(vectors: &[&[f64]]) -> DMatrix<f64> {
    let rows = vectors.first().map_or(0, |v| v.len());
    let mut m = DMatrix::zeros(rows, vectors.len());
    for (b, v) in vectors.iter().enumerate() {
        m.column_mut(b).copy_from_slice(v);
    }
    m
}

fn check_samples(samples: &[TrainingSample]) -> Result<(usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| DotError::InvalidArgument("training set is empty".into()))?;
    let (m, n) = (first.clean.len(), first.mu_a.len());
    for (i, s) in samples.iter().enumerate() {
        if s.clean.len() != m || s.mu_a.len() != n || s.noisy.iter().any(|y| y.len() != m) {
            return Err(DotError::InvalidArgument(format!(
                "training sample {i} has inconsistent lengths"
            )));
        }
    }
    Ok((m, n))
}

/// Pairs of (noisy input, sample index); every sample contributes its clean
/// data when it carries no noisy realization.
fn realizations(samples: &[TrainingSample]) -> Vec<(&[f64], usize)> {
    samples
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            let noisy: Vec<(&[f64], usize)> = s.noisy.iter().map(|y| (y.as_slice(), i)).collect();
            if noisy.is_empty() {
                vec![(s.clean.as_slice(), i)]
            } else {
                noisy
            }
        })
        .collect()
}

/// Three-stage training: data autoencoder (noisy to clean), signal
/// autoencoder, then the bridge on frozen latent pairs.
pub fn train_lsvd(
    samples: &[TrainingSample],
    cfg: &LsvdConfig,
) -> Result<(LsvdModel, TrainingReport)> {
    let (m, n) = check_samples(samples)?;
    let inputs = realizations(samples);

    // Bounds from clean data only: noise would otherwise stretch the range
    // and squash the phantom-driven variation.
    let clean_data: Vec<&[f64]> = samples.iter().map(|s| s.clean.as_slice()).collect();
    let measurement_norm = MinMax::per_feature(&clean_data, 1e-12)?;
    let (lo, hi) = samples
        .iter()
        .flat_map(|s| s.mu_a.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let signal_norm = MinMax::global(lo, hi)?;

    let noisy: Vec<Vec<f64>> = inputs
        .iter()
        .map(|(y, _)| measurement_norm.normalize(y))
        .collect();
    let noisy_x = columns(&noisy.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let clean: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| measurement_norm.normalize(&s.clean))
        .collect();
    let clean_t = columns(
        &inputs
            .iter()
            .map(|&(_, i)| clean[i].as_slice())
            .collect::<Vec<_>>(),
    );
    let signal: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| signal_norm.normalize(&s.mu_a))
        .collect();
    let signal_x = columns(&signal.iter().map(Vec::as_slice).collect::<Vec<_>>());

    let k = cfg.latent_dim;
    let seed = cfg.init_seed;
    let mut dae = MlpNetwork::random(
        &[m, k, m],
        &[Activation::Tanh, Activation::Sigmoid],
        seed ^ 0x11,
    )?;
    let dae_loss = train_sgd(&mut dae, &noisy_x, &clean_t, &cfg.dae, "data autoencoder")?;
    let mut sae = MlpNetwork::random(
        &[n, k, n],
        &[Activation::Tanh, Activation::Sigmoid],
        seed ^ 0x12,
    )?;
    let sae_loss = train_sgd(
        &mut sae,
        &signal_x,
        &signal_x,
        &cfg.sae,
        "signal autoencoder",
    )?;

    let split = |net: MlpNetwork| -> (MlpNetwork, MlpNetwork) {
        let mut layers = net.layers;
        let decoder = layers.split_off(1);
        (MlpNetwork { layers }, MlpNetwork { layers: decoder })
    };
    let (dae_encoder, dae_decoder) = split(dae);
    let (sae_encoder, sae_decoder) = split(sae);

    let z_y = dae_encoder.forward_batch(&noisy_x)?;
    let z_mu_samples = sae_encoder.forward_batch(&signal_x)?;
    let z_mu = DMatrix::from_fn(k, inputs.len(), |r, c| z_mu_samples[(r, inputs[c].1)]);

    let mut dims = vec![k];
    dims.extend(std::iter::repeat_n(
        cfg.bridge_width,
        cfg.bridge_layers.saturating_sub(1),
    ));
    dims.push(k);
    let acts = vec![Activation::Tanh; cfg.bridge_layers];
    let mut bridge = MlpNetwork::random(&dims, &acts, seed ^ 0x13)?;
    let bridge_loss = train_sgd(&mut bridge, &z_y, &z_mu, &cfg.bridge, "bridge")?;

    let model = LsvdModel {
        dae_encoder,
        dae_decoder,
        sae_encoder,
        sae_decoder,
        bridge,
        denoiser: None,
        measurement_norm,
        signal_norm,
        mu_a_range: (lo, hi.max(cfg.max_contrast * lo)),
    };
    model.check()?;
    Ok((
        model,
        TrainingReport {
            dae_loss,
            sae_loss,
            bridge_loss,
            denoiser_loss: Vec::new(),
        },
    ))
}

/// Trains the convolutional denoiser on (composed output, ground truth)
/// pairs in normalized signal units and attaches it to the model. With
/// `denoiser_folds ≥ 2` the composed outputs come from chains that did not
/// see the sample, so the denoiser learns the errors of unseen data.
pub fn train_denoiser(
    model: &mut LsvdModel,
    samples: &[TrainingSample],
    grid: &VoxelGrid,
    cfg: &LsvdConfig,
) -> Result<Vec<f64>> {
    let (_, n) = check_samples(samples)?;
    if n != model.n_voxels() || grid.len() != n {
        return Err(DotError::InvalidArgument(format!(
            "grid has {} voxels, model reconstructs {}",
            grid.len(),
            model.n_voxels()
        )));
    }
    let inputs = realizations(samples);
    let x = held_out_outputs(model, samples, &inputs, cfg)?;
    let targets: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| model.signal_norm.normalize(&s.mu_a))
        .collect();
    let t = columns(
        &inputs
            .iter()
            .map(|&(_, i)| targets[i].as_slice())
            .collect::<Vec<_>>(),
    );
    let mut net = ConvNet::denoiser(
        Raster::from_grid(grid),
        cfg.denoiser_channels,
        cfg.denoiser_init_scale,
        cfg.init_seed ^ 0x14,
    );
    let history = train_sgd(&mut net, &x, &t, &cfg.denoiser, "denoiser")?;
    model.denoiser = Some(net);
    Ok(history)
}

/// Composed outputs for every realization in the model's normalized signal
/// units, from out-of-fold chains when folds are configured.
fn held_out_outputs(
    model: &LsvdModel,
    samples: &[TrainingSample],
    inputs: &[(&[f64], usize)],
    cfg: &LsvdConfig,
) -> Result<DMatrix<f64>> {
    let folds = cfg.denoiser_folds.min(samples.len());
    if folds < 2 {
        return model.predict_normalized(&inputs.iter().map(|(y, _)| *y).collect::<Vec<_>>());
    }
    let mut x = DMatrix::zeros(model.n_voxels(), inputs.len());
    for f in 0..folds {
        let rest: Vec<TrainingSample> = samples
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != f)
            .map(|(_, s)| s.clone())
            .collect();
        let (chain, _) = train_lsvd(&rest, cfg)?;
        let cols: Vec<usize> = (0..inputs.len())
            .filter(|&c| inputs[c].1 % folds == f)
            .collect();
        let out =
            chain.predict_normalized(&cols.iter().map(|&c| inputs[c].0).collect::<Vec<_>>())?;
        for (j, &c) in cols.iter().enumerate() {
            let mu = chain.signal_norm.denormalize(out.column(j).as_slice());
            x.column_mut(c)
                .copy_from_slice(&model.signal_norm.normalize(&mu));
        }
        log::info!("denoiser inputs: fold {}/{folds} reconstructed", f + 1);
    }
    Ok(x)
}

/// Overshoot beyond the clamp range that is reported as a diagnostic.
const OVERSHOOT_WARN: f64 = 0.05;

/// Reconstructed absorption map for one measurement vector.
pub fn infer(model: &LsvdModel, y: &[f64]) -> Result<Vec<f64>> {
    let out = model.predict_normalized(&[y])?;
    let mut v: Vec<f64> = out.column(0).iter().copied().collect();
    if let Some(d) = &model.denoiser {
        v = d.forward(&v)?;
    }
    let mu = model.signal_norm.denormalize(&v);
    let (lo, hi) = model.mu_a_range;
    let overshoot = mu
        .iter()
        .filter(|&&m| m < lo * (1.0 - OVERSHOOT_WARN) || m > hi * (1.0 + OVERSHOOT_WARN))
        .count();
    if overshoot > 0 {
        log::debug!("{overshoot} voxels outside the absorption range by more than 5%; clamped");
    }
    Ok(mu.into_iter().map(|m| m.clamp(lo, hi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};
    use crate::nn::{read_model, write_model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_set(grid: &VoxelGrid, m: usize, count: usize) -> Vec<TrainingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        (0..count)
            .map(|_| {
                let mult = [3.0, 4.0, 5.0][rng.random_range(0..3)];
                let cx = rng.random_range(-3.0..3.0);
                let mu_a: Vec<f64> = grid
                    .centroids()
                    .iter()
                    .map(|c| {
                        if (c.x - cx).abs() < 1.0 && c.y > 1.0 && c.y < 3.0 {
                            0.01 * mult
                        } else {
                            0.01
                        }
                    })
                    .collect();
                let clean: Vec<f64> = (0..m)
                    .map(|i| -0.1 * mult * (1.0 + (i as f64 + cx).sin()))
                    .collect();
                let noisy = vec![
                    clean.clone(),
                    clean
                        .iter()
                        .map(|v| v * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
                        .collect(),
                ];
                TrainingSample { clean, noisy, mu_a }
            })
            .collect()
    }

    fn small_config() -> LsvdConfig {
        let mut cfg = LsvdConfig::new(7).with_epochs(40, 3);
        cfg.latent_dim = 8;
        cfg.bridge_width = 8;
        cfg.denoiser_channels = 4;
        cfg
    }

    #[test]
    fn min_max_round_trip() {
        let a = [1.0, -2.0, 5.0];
        let b = [3.0, -2.0, 1.0];
        let n = MinMax::per_feature(&[&a, &b], 1e-9).unwrap();
        assert_eq!(n.normalize(&a), vec![0.0, 0.0, 1.0]);
        assert_eq!(n.normalize(&b)[0], 1.0);
        let back = n.denormalize(&n.normalize(&b));
        for (x, y) in back.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(MinMax::global(1.0, 1.0).is_err());
        assert!(MinMax::per_feature(&[], 1e-9).is_err());
    }

    #[test]
    fn training_pipeline_contract() {
        let grid = build_grid(&DomainSpec::default(), 1.0).unwrap();
        let samples = toy_set(&grid, 12, 20);
        let cfg = small_config();
        let (mut model, report) = train_lsvd(&samples, &cfg).unwrap();
        for h in [&report.dae_loss, &report.sae_loss, &report.bridge_loss] {
            assert_eq!(h.len(), 40);
            assert!(h.last().unwrap() < &h[0]);
        }
        assert_eq!(model.bridge.layers.len(), 7);
        assert_eq!(model.composed().input_dim(), 12);
        assert_eq!(model.composed().output_dim(), grid.len());

        // Composed network equals the staged evaluation.
        let y = &samples[0].noisy[1];
        let staged = model.predict_normalized(&[y]).unwrap();
        let direct = model
            .composed()
            .forward(&model.measurement_norm.normalize(y))
            .unwrap();
        for (a, b) in staged.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-12);
            assert!(*b > 0.0 && *b < 1.0);
        }

        let losses = train_denoiser(&mut model, &samples, &grid, &cfg).unwrap();
        assert_eq!(losses.len(), 3);
        let out = infer(&model, y).unwrap();
        assert_eq!(out.len(), grid.len());
        assert_eq!(out, infer(&model, y).unwrap());
        assert!(out.iter().all(|&v| (0.01..=0.05).contains(&v)));
        assert!(infer(&model, &y[..3]).is_err());

        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let loaded = read_model(buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
        let again = infer(&loaded, y).unwrap();
        assert_eq!(
            again.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            out.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        buf[0] = b'X';
        assert!(read_model(buf.as_slice()).is_err());
    }

    #[test]
    fn denoiser_inputs_come_from_chains_that_did_not_see_the_sample() {
        let grid = build_grid(&DomainSpec::default(), 1.0).unwrap();
        let samples = toy_set(&grid, 12, 10);
        let mut cfg = small_config();
        cfg.denoiser_folds = 2;
        let (model, _) = train_lsvd(&samples, &cfg).unwrap();
        let inputs = realizations(&samples);
        let x = held_out_outputs(&model, &samples, &inputs, &cfg).unwrap();

        // Sample 0 sits in fold 0, so its chain saw only the odd samples.
        let odd: Vec<TrainingSample> = samples.iter().skip(1).step_by(2).cloned().collect();
        let (chain, _) = train_lsvd(&odd, &cfg).unwrap();
        let mu = chain
            .signal_norm
            .denormalize(chain.predict_normalized(&[inputs[0].0]).unwrap().as_slice());
        for (a, b) in x.column(0).iter().zip(model.signal_norm.normalize(&mu)) {
            assert!((a - b).abs() < 1e-12);
        }

        cfg.denoiser_folds = 1;
        let own = held_out_outputs(&model, &samples, &inputs, &cfg).unwrap();
        let all: Vec<&[f64]> = inputs.iter().map(|(y, _)| *y).collect();
        assert_eq!(own, model.predict_normalized(&all).unwrap());
        assert_ne!(own, x);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(train_lsvd(&[], &small_config()).is_err());
    }
}
