use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::manifest::{relative, MeasurementEntry, SampleEntry, Split};
use super::{derive_seed, DatasetManifest, ExperimentConfig, Method, Paths, Stream};
use crate::error::{DotError, Result};
use crate::forward::{add_noise, ForwardModel, MeasurementSet};
use crate::geometry::{
    build_grid, place_probes, sample_phantom, DomainSpec, Phantom, ProbeLayout, VoxelGrid,
};
use crate::io;
use crate::metrics::{
    aggregate, evaluate_sample, pgm_heatmap, read_per_sample_csv, write_per_sample_csv,
};
use crate::metrics::{EvalReport, PerSampleRecord};
use crate::nn::{
    read_model, train_denoiser, train_lsvd, write_model, LsvdModel, TrainingReport, TrainingSample,
};
use crate::rytov::{assemble_jacobian, rytov_transform, FilteredSvd, RytovData, SensitivityMatrix};
use crate::variational::{BregmanSolver, ElasticNetSolver};

/// A validated configuration with its derived geometry.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: DomainSpec,
    pub grid: VoxelGrid,
    pub layout: ProbeLayout,
    pub paths: Paths,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.domain_spec();
        let grid = build_grid(&spec, config.domain.voxel_side_cm)?;
        let layout = place_probes(&spec)?;
        let paths = Paths::new(&config.output_dir);
        Ok(Self {
            config,
            spec,
            grid,
            layout,
            paths,
        })
    }

    pub fn noise_levels(&self) -> &[f64] {
        &self.config.dataset.noise_levels
    }

    pub fn manifest(&self) -> Result<DatasetManifest> {
        DatasetManifest::load(&self.paths, &self.config)
    }

    pub fn read_phantom(&self, path: &Path) -> Result<Phantom> {
        let file = io::parse_phantom(&io::read_text(&self.paths.resolve(path))?)?;
        if file.phantom.mu_a.len() != self.grid.len() || file.side != self.grid.side {
            return Err(DotError::InvalidArgument(format!(
                "{} does not match the configured voxel grid",
                path.display()
            )));
        }
        Ok(file.phantom)
    }

    pub fn read_measurements(&self, path: &Path) -> Result<MeasurementSet> {
        io::parse_measurements(&io::read_text(&self.paths.resolve(path))?, &self.layout)
    }

    pub fn read_rytov(&self, path: &Path) -> Result<RytovData> {
        rytov_transform(&self.read_measurements(path)?)
    }

    pub fn load_jacobian(&self) -> Result<SensitivityMatrix> {
        let path = self.paths.jacobian();
        let file = std::fs::File::open(&path).map_err(|_| DotError::MissingPrerequisite {
            path: path.clone(),
            step: "jacobian".into(),
        })?;
        let j = io::read_jacobian(std::io::BufReader::new(file))?;
        if j.grid_hash != self.grid.fingerprint() || j.n_pairs() != self.layout.n_pairs() {
            return Err(DotError::InvalidArgument(format!(
                "{} was assembled for a different grid or probe layout; rerun `jacobian`",
                path.display()
            )));
        }
        Ok(j)
    }

    pub fn load_model(&self) -> Result<LsvdModel> {
        let path = self.paths.model();
        let file = std::fs::File::open(&path).map_err(|_| DotError::MissingPrerequisite {
            path: path.clone(),
            step: "train".into(),
        })?;
        let model = read_model(std::io::BufReader::new(file))?;
        if model.n_voxels() != self.grid.len() || model.n_measurements() != self.layout.n_pairs() {
            return Err(DotError::InvalidArgument(format!(
                "{} does not match the configured grid and probes; rerun `train`",
                path.display()
            )));
        }
        Ok(model)
    }
}

/// Writes phantoms and measurements for every sample and noise level.
pub fn cmd_generate(exp: &Experiment) -> Result<DatasetManifest> {
    let cfg = &exp.config;
    let start = Instant::now();
    let forward = ForwardModel::new(&exp.spec, cfg.domain.mesh_size_cm)?;
    let jobs: Vec<(Split, usize)> = (0..cfg.dataset.train_count)
        .map(|i| (Split::Train, i))
        .chain((0..cfg.dataset.test_count).map(|i| (Split::Test, i)))
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(split, index)| generate_sample(exp, &forward, split, index))
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(cfg, samples)?;
    io::write_bytes(&exp.paths.manifest(), manifest.to_json()?.as_bytes())?;
    log::info!(
        "generated {} samples in {:.1?}",
        jobs.len(),
        start.elapsed()
    );
    Ok(manifest)
}

fn generate_sample(
    exp: &Experiment,
    forward: &ForwardModel,
    split: Split,
    index: usize,
) -> Result<SampleEntry> {
    let cfg = &exp.config;
    let (phantom_stream, noise_stream) = match split {
        Split::Train => (Stream::TrainPhantom, Stream::TrainNoise),
        Split::Test => (Stream::TestPhantom, Stream::TestNoise),
    };
    let phantom_seed = derive_seed(cfg.master_seed, phantom_stream, index as u64);
    let phantom = sample_phantom(&exp.spec, &exp.grid, phantom_seed)?;
    let phantom_path = relative(split, format!("phantom_{index:05}.txt"));
    io::write_bytes(
        &exp.paths.resolve(&phantom_path),
        io::format_phantom(&phantom, &exp.grid).as_bytes(),
    )?;
    let clean = forward
        .simulate_measurements(&exp.layout, &phantom.regions)
        .map_err(|e| {
            DotError::Numeric(format!(
                "forward solve for {} sample {index}: {e}",
                split.dir()
            ))
        })?;
    let levels = exp.noise_levels();
    let mut measurements = Vec::with_capacity(levels.len());
    for (k, &p) in levels.iter().enumerate() {
        let seed = derive_seed(
            cfg.master_seed,
            noise_stream,
            (index * levels.len() + k) as u64,
        );
        let noisy = add_noise(&clean, p, seed, cfg.dataset.noise_reading)?;
        let path = relative(split, format!("meas_{index:05}_n{k}.csv"));
        io::write_bytes(
            &exp.paths.resolve(&path),
            io::format_measurements(&noisy)?.as_bytes(),
        )?;
        measurements.push(MeasurementEntry {
            noise_level: p,
            seed,
            path,
        });
    }
    Ok(SampleEntry {
        split,
        index,
        phantom_seed,
        phantom: phantom_path,
        measurements,
    })
}

/// Assembles the sensitivity matrix for the configured grid.
pub fn cmd_jacobian(exp: &Experiment) -> Result<SensitivityMatrix> {
    let j = assemble_jacobian(&exp.spec, &exp.grid, &exp.layout)?;
    let mut buf = Vec::with_capacity(40 + 8 * j.entries.len());
    io::write_jacobian(&j, &mut buf)?;
    io::write_bytes(&exp.paths.jacobian(), &buf)?;
    Ok(j)
}

/// Trains the learned-SVD model (and its denoiser) on the training split.
pub fn cmd_train(exp: &Experiment) -> Result<TrainingReport> {
    let manifest = exp.manifest()?;
    let clean_index = exp
        .noise_levels()
        .iter()
        .position(|&p| p == 0.0)
        .ok_or_else(|| DotError::InvalidArgument("noise_levels must include 0".into()))?;
    let entries: Vec<&SampleEntry> = manifest.split(Split::Train).collect();
    let samples = entries
        .par_iter()
        .map(|s| {
            let data = s
                .measurements
                .iter()
                .map(|m| exp.read_rytov(&m.path).map(|d| d.values))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainingSample {
                clean: data[clean_index].clone(),
                noisy: data,
                mu_a: exp.read_phantom(&s.phantom)?.mu_a,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let lsvd_cfg = exp.config.lsvd_config();
    let start = Instant::now();
    let (mut model, mut report) = train_lsvd(&samples, &lsvd_cfg)?;
    if exp.config.training.denoiser {
        report.denoiser_loss = train_denoiser(&mut model, &samples, &exp.grid, &lsvd_cfg)?;
    }
    log::info!(
        "trained on {} samples in {:.1?}",
        samples.len(),
        start.elapsed()
    );

    let mut buf = Vec::new();
    write_model(&model, &mut buf)?;
    io::write_bytes(&exp.paths.model(), &buf)?;
    let mut loss = String::from("stage,epoch,loss\n");
    for (stage, history) in [
        ("dae", &report.dae_loss),
        ("sae", &report.sae_loss),
        ("bridge", &report.bridge_loss),
        ("denoiser", &report.denoiser_loss),
    ] {
        for (e, l) in history.iter().enumerate() {
            loss.push_str(&format!("{stage},{e},{l}\n"));
        }
    }
    io::write_bytes(
        &exp.paths.results().join("training_loss.csv"),
        loss.as_bytes(),
    )?;
    Ok(report)
}

/// A reconstruction method with its precomputed operators.
pub enum Reconstructor<'a> {
    Lsvd(&'a LsvdModel),
    Tikhonov {
        svd: FilteredSvd,
        alpha: f64,
        mu_a0: f64,
    },
    ElasticNet {
        solver: ElasticNetSolver,
        mu_a0: f64,
    },
    Bregman {
        solver: BregmanSolver<'a>,
        mu_a0: f64,
    },
}

impl<'a> Reconstructor<'a> {
    pub fn new(
        method: Method,
        cfg: &ExperimentConfig,
        jacobian: Option<&'a SensitivityMatrix>,
        model: Option<&'a LsvdModel>,
    ) -> Result<Self> {
        let mu_a0 = cfg.domain.mu_a0_per_cm;
        let need_j = || {
            jacobian.ok_or_else(|| {
                DotError::InvalidArgument(format!("{method} needs a sensitivity matrix"))
            })
        };
        Ok(match method {
            Method::Lsvd => {
                Reconstructor::Lsvd(model.ok_or_else(|| {
                    DotError::InvalidArgument("lsvd needs a trained model".into())
                })?)
            }
            Method::Tikhonov => {
                let svd = FilteredSvd::new(&need_j()?.entries)?;
                let alpha = cfg.solvers.tikhonov_alpha_rel * svd.sigma_max().powi(2);
                Reconstructor::Tikhonov { svd, alpha, mu_a0 }
            }
            Method::ElasticNet => Reconstructor::ElasticNet {
                solver: ElasticNetSolver::new(&need_j()?.entries, cfg.elastic_net_config())?,
                mu_a0,
            },
            Method::Bregman => Reconstructor::Bregman {
                solver: BregmanSolver::new(&need_j()?.entries, cfg.bregman_config())?,
                mu_a0,
            },
        })
    }

    /// Absorption map reconstructed from log-ratio data.
    pub fn reconstruct(&self, data: &RytovData) -> Result<Vec<f64>> {
        let shift = |mu_a0: f64, dmu: Vec<f64>| dmu.into_iter().map(|d| mu_a0 + d).collect();
        match self {
            Reconstructor::Lsvd(model) => crate::nn::infer(model, &data.values),
            Reconstructor::Tikhonov { svd, alpha, mu_a0 } => {
                Ok(shift(*mu_a0, svd.solve(&data.attenuation(), *alpha)?))
            }
            Reconstructor::ElasticNet { solver, mu_a0 } => {
                Ok(shift(*mu_a0, solver.solve(&data.attenuation())?.x))
            }
            Reconstructor::Bregman { solver, mu_a0 } => {
                Ok(shift(*mu_a0, solver.solve(&data.attenuation())?.0.iterate))
            }
        }
    }
}

fn check_methods(methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(DotError::InvalidArgument("method list is empty".into()));
    }
    Ok(())
}

/// Reconstructs every test sample at every noise level with each method.
pub fn cmd_reconstruct(exp: &Experiment, methods: &[Method]) -> Result<()> {
    check_methods(methods)?;
    let manifest = exp.manifest()?;
    let jacobian = if methods.iter().any(|m| m.uses_jacobian()) {
        Some(exp.load_jacobian()?)
    } else {
        None
    };
    let model = if methods.contains(&Method::Lsvd) {
        Some(exp.load_model()?)
    } else {
        None
    };
    let jobs: Vec<(&SampleEntry, usize)> = manifest
        .split(Split::Test)
        .flat_map(|s| (0..s.measurements.len()).map(move |k| (s, k)))
        .collect();
    for &method in methods {
        let start = Instant::now();
        let rec = Reconstructor::new(method, &exp.config, jacobian.as_ref(), model.as_ref())?;
        jobs.par_iter().try_for_each(|&(s, k)| {
            let data = exp.read_rytov(&s.measurements[k].path)?;
            let mu_a = rec.reconstruct(&data)?;
            io::write_bytes(
                &exp.paths.recon(method, s.index, k),
                io::format_map(&mu_a, &exp.grid)?.as_bytes(),
            )
        })?;
        log::info!(
            "{method}: {} reconstructions in {:.1?}",
            jobs.len(),
            start.elapsed()
        );
    }
    Ok(())
}

fn read_recon(exp: &Experiment, method: Method, index: usize, k: usize) -> Result<Vec<f64>> {
    let path = exp.paths.recon(method, index, k);
    if !path.exists() {
        return Err(DotError::MissingPrerequisite {
            path,
            step: "reconstruct".into(),
        });
    }
    let mu_a = io::parse_map(&io::read_text(&path)?)?;
    if mu_a.len() != exp.grid.len() {
        return Err(DotError::parse(
            "absorption map",
            format!("{} has {} voxels", path.display(), mu_a.len()),
        ));
    }
    Ok(mu_a)
}

/// Scores every reconstruction and writes the per-sample CSV.
pub fn cmd_evaluate(exp: &Experiment, methods: &[Method]) -> Result<Vec<PerSampleRecord>> {
    check_methods(methods)?;
    let manifest = exp.manifest()?;
    let threshold = exp.config.evaluation.threshold_ratio * exp.spec.mu_a0;
    let tests: Vec<&SampleEntry> = manifest.split(Split::Test).collect();
    let mut records = Vec::new();
    for &method in methods {
        let per_sample = tests
            .par_iter()
            .map(|s| {
                let truth = exp.read_phantom(&s.phantom)?;
                let mut out = Vec::new();
                for (k, m) in s.measurements.iter().enumerate() {
                    let mu_a = read_recon(exp, method, s.index, k)?;
                    let eval = evaluate_sample(&mu_a, &exp.grid, &truth, threshold)?;
                    out.extend(PerSampleRecord::from_eval(
                        s.index,
                        method.name(),
                        m.noise_level,
                        &eval,
                    ));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        records.extend(per_sample.into_iter().flatten());
    }
    let mut buf = Vec::new();
    write_per_sample_csv(&records, &mut buf)?;
    io::write_bytes(&exp.paths.per_sample(), &buf)?;
    Ok(records)
}

/// Aggregates the per-sample results into the comparison table and renders
/// heatmaps of the first test samples.
pub fn cmd_compare(exp: &Experiment, methods: &[Method]) -> Result<EvalReport> {
    check_methods(methods)?;
    let path = exp.paths.per_sample();
    let file = std::fs::File::open(&path).map_err(|_| DotError::MissingPrerequisite {
        path: path.clone(),
        step: "evaluate".into(),
    })?;
    let records = read_per_sample_csv(std::io::BufReader::new(file))?;
    let names: Vec<String> = methods.iter().map(|m| m.name().to_string()).collect();
    let report = aggregate(&records, &names, exp.noise_levels())?;
    io::write_bytes(&exp.paths.table(), report.to_csv().as_bytes())?;

    let manifest = exp.manifest()?;
    let mu_a0 = exp.spec.mu_a0;
    let dir = exp.paths.heatmaps();
    for s in manifest
        .split(Split::Test)
        .take(exp.config.evaluation.heatmap_samples)
    {
        let truth = exp.read_phantom(&s.phantom)?;
        io::write_bytes(
            &dir.join(format!("truth_{:05}.pgm", s.index)),
            pgm_heatmap(&truth.mu_a, &exp.grid, mu_a0).as_bytes(),
        )?;
        for &method in methods {
            for k in 0..s.measurements.len() {
                let mu_a = read_recon(exp, method, s.index, k)?;
                io::write_bytes(
                    &dir.join(format!("{method}_{:05}_n{k}.pgm", s.index)),
                    pgm_heatmap(&mu_a, &exp.grid, mu_a0).as_bytes(),
                )?;
            }
        }
    }
    Ok(report)
}

/// Every stage in order, for the configured methods.
pub fn run_all(exp: &Experiment) -> Result<EvalReport> {
    let methods = exp.config.evaluation.methods.clone();
    check_methods(&methods)?;
    cmd_generate(exp)?;
    if methods.iter().any(|m| m.uses_jacobian()) {
        cmd_jacobian(exp)?;
    }
    if methods.contains(&Method::Lsvd) {
        cmd_train(exp)?;
    }
    cmd_reconstruct(exp, &methods)?;
    cmd_evaluate(exp, &methods)?;
    cmd_compare(exp, &methods)
}
