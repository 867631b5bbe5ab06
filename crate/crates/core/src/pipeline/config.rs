//! Experiment configuration file (TOML, units in key names).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DotError, Result};
use crate::forward::NoiseReading;
use crate::geometry::DomainSpec;
use crate::nn::{LsvdConfig, TrainConfig};
use crate::variational::{AlphaGrid, BregmanConfig, ElasticNetConfig};

use super::Method;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub radius_cm: f64,
    pub mu_a0_per_cm: f64,
    pub reduced_scattering_per_cm: f64,
    pub accommodation: f64,
    pub source_intensity_w: f64,
    pub n_sources: usize,
    pub n_detectors: usize,
    pub source_inset_cm: f64,
    pub mu_a_bound_per_cm: f64,
    pub reduced_scattering_bound_per_cm: f64,
    pub voxel_side_cm: f64,
    /// Element size of the forward (data-generating) mesh.
    pub mesh_size_cm: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        let d = DomainSpec::default();
        Self {
            radius_cm: d.radius,
            mu_a0_per_cm: d.mu_a0,
            reduced_scattering_per_cm: d.reduced_scattering,
            accommodation: d.accommodation,
            source_intensity_w: d.source_intensity,
            n_sources: d.n_sources,
            n_detectors: d.n_detectors,
            source_inset_cm: d.source_inset,
            mu_a_bound_per_cm: d.mu_a_bound,
            reduced_scattering_bound_per_cm: d.scattering_bound,
            voxel_side_cm: 0.25,
            mesh_size_cm: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub train_count: usize,
    pub test_count: usize,
    /// Relative noise levels; must include 0 (the clean data).
    pub noise_levels: Vec<f64>,
    pub noise_reading: NoiseReading,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            train_count: 1500,
            test_count: 150,
            noise_levels: vec![0.0, 0.01, 0.03, 0.05],
            noise_reading: NoiseReading::Std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub latent_dim: usize,
    pub bridge_layers: usize,
    pub bridge_width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dae_learning_rate: f64,
    pub sae_learning_rate: f64,
    pub bridge_learning_rate: f64,
    pub denoiser: bool,
    pub denoiser_epochs: usize,
    pub denoiser_learning_rate: f64,
    pub denoiser_channels: usize,
    pub denoiser_folds: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let c = LsvdConfig::new(0);
        Self {
            latent_dim: c.latent_dim,
            bridge_layers: c.bridge_layers,
            bridge_width: c.bridge_width,
            epochs: c.dae.epochs,
            batch_size: c.dae.batch_size,
            dae_learning_rate: c.dae.learning_rate,
            sae_learning_rate: c.sae.learning_rate,
            bridge_learning_rate: c.bridge.learning_rate,
            denoiser: true,
            denoiser_epochs: c.denoiser.epochs,
            denoiser_learning_rate: c.denoiser.learning_rate,
            denoiser_channels: c.denoiser_channels,
            denoiser_folds: c.denoiser_folds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolversSection {
    pub bregman_outer_iterations: usize,
    pub bregman_inner_iterations: usize,
    pub bregman_alpha_scale: f64,
    pub elastic_net_theta: f64,
    pub elastic_net_alpha_count: usize,
    pub elastic_net_alpha_min_ratio: f64,
    pub elastic_net_folds: usize,
    pub elastic_net_tol: f64,
    pub elastic_net_max_iter: usize,
    /// Tikhonov parameter as a fraction of `σ_max²`; 0 gives the truncated
    /// pseudoinverse.
    pub tikhonov_alpha_rel: f64,
}

impl Default for SolversSection {
    fn default() -> Self {
        let b = BregmanConfig::default();
        let e = ElasticNetConfig::default();
        let (count, min_ratio) = match e.alpha_grid {
            AlphaGrid::Relative { count, min_ratio } => (count, min_ratio),
            AlphaGrid::Explicit(_) => unreachable!("default grid is relative"),
        };
        Self {
            bregman_outer_iterations: b.max_outer,
            bregman_inner_iterations: b.inner_iters,
            bregman_alpha_scale: b.alpha_scale,
            elastic_net_theta: e.theta,
            elastic_net_alpha_count: count,
            elastic_net_alpha_min_ratio: min_ratio,
            elastic_net_folds: e.cv_folds,
            elastic_net_tol: e.tol,
            elastic_net_max_iter: e.max_iter,
            tikhonov_alpha_rel: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub methods: Vec<Method>,
    /// Segmentation threshold as a multiple of the background absorption.
    pub threshold_ratio: f64,
    /// Number of test samples (from index 0) rendered as heatmaps.
    pub heatmap_samples: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            threshold_ratio: crate::metrics::DEFAULT_THRESHOLD_RATIO,
            heatmap_samples: 3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub solvers: SolversSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| DotError::parse("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&crate::io::read_text(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DotError::parse("config", e))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DotError::InvalidArgument(msg));
        self.domain_spec().validate()?;
        if !(self.domain.voxel_side_cm > 0.0) || !(self.domain.mesh_size_cm > 0.0) {
            return bad("voxel_side_cm and mesh_size_cm must be positive".into());
        }
        let ds = &self.dataset;
        if ds.train_count == 0 || ds.test_count == 0 {
            return bad("train_count and test_count must be at least 1".into());
        }
        if ds
            .noise_levels
            .iter()
            .any(|p| !(*p >= 0.0 && p.is_finite()))
        {
            return bad("noise levels must be finite and non-negative".into());
        }
        if !ds.noise_levels.contains(&0.0) {
            return bad("noise_levels must include 0 (clean data)".into());
        }
        let mut sorted = ds.noise_levels.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != ds.noise_levels.len() {
            return bad("noise_levels contains duplicates".into());
        }
        if !(self.evaluation.threshold_ratio > 1.0) {
            return bad("threshold_ratio must exceed 1".into());
        }
        if !(self.solvers.tikhonov_alpha_rel >= 0.0) {
            return bad("tikhonov_alpha_rel must be non-negative".into());
        }
        let lsvd = self.lsvd_config();
        for stage in [&lsvd.dae, &lsvd.sae, &lsvd.bridge] {
            stage.validate()?;
        }
        if self.training.denoiser {
            lsvd.denoiser.validate()?;
        }
        if self.solvers.bregman_outer_iterations == 0 || self.solvers.bregman_inner_iterations == 0
        {
            return bad("Bregman iteration counts must be positive".into());
        }
        self.elastic_net_config().validate()
    }

    pub fn domain_spec(&self) -> DomainSpec {
        let d = &self.domain;
        DomainSpec {
            radius: d.radius_cm,
            mu_a0: d.mu_a0_per_cm,
            reduced_scattering: d.reduced_scattering_per_cm,
            accommodation: d.accommodation,
            source_intensity: d.source_intensity_w,
            n_sources: d.n_sources,
            n_detectors: d.n_detectors,
            source_inset: d.source_inset_cm,
            mu_a_bound: d.mu_a_bound_per_cm,
            scattering_bound: d.reduced_scattering_bound_per_cm,
        }
    }

    pub fn lsvd_config(&self) -> LsvdConfig {
        let t = &self.training;
        let seed = super::derive_seed(self.master_seed, super::Stream::Training, 0);
        let stage = |lr: f64, epochs: usize, salt: u64| TrainConfig {
            learning_rate: lr,
            epochs,
            batch_size: t.batch_size,
            seed: seed ^ salt,
        };
        LsvdConfig {
            latent_dim: t.latent_dim,
            bridge_layers: t.bridge_layers,
            bridge_width: t.bridge_width,
            dae: stage(t.dae_learning_rate, t.epochs, 0x01),
            sae: stage(t.sae_learning_rate, t.epochs, 0x02),
            bridge: stage(t.bridge_learning_rate, t.epochs, 0x03),
            denoiser: stage(t.denoiser_learning_rate, t.denoiser_epochs, 0x04),
            denoiser_channels: t.denoiser_channels,
            denoiser_folds: t.denoiser_folds,
            init_seed: seed,
            ..LsvdConfig::new(seed)
        }
    }

    pub fn bregman_config(&self) -> BregmanConfig {
        BregmanConfig {
            max_outer: self.solvers.bregman_outer_iterations,
            inner_iters: self.solvers.bregman_inner_iterations,
            alpha_scale: self.solvers.bregman_alpha_scale,
            ..BregmanConfig::default()
        }
    }

    pub fn elastic_net_config(&self) -> ElasticNetConfig {
        let s = &self.solvers;
        ElasticNetConfig {
            theta: s.elastic_net_theta,
            alpha_grid: AlphaGrid::Relative {
                count: s.elastic_net_alpha_count,
                min_ratio: s.elastic_net_alpha_min_ratio,
            },
            cv_folds: s.elastic_net_folds,
            tol: s.elastic_net_tol,
            max_iter: s.elastic_net_max_iter,
        }
    }
}
