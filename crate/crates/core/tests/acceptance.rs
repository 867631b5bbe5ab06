//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every criterion executes even when an
//! earlier one fails. Pass substrings as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- solver`. With `--noise-variance`
//! the generated datasets read each noise level as a relative variance.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use dot_core::forward::{FemMesh, ForwardModel, NoiseReading};
use dot_core::geometry::{
    build_grid, place_probes, sample_phantom, ContrastRegion, DomainSpec, Point2,
};
use dot_core::metrics::{read_per_sample_csv, EvalReport, PerSampleRecord};
use dot_core::nn::{Activation, ConvLayer, ConvNet, MlpNetwork, Raster};
use dot_core::pipeline::{run_all, Experiment, ExperimentConfig, Method};
use dot_core::rytov::{assemble_jacobian, tikhonov_filtered_solve};
use dot_core::variational::{
    bregman_l1, elastic_net_solve, forward_backward_l1, soft_threshold, AlphaGrid, ElasticNetConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: failed sub-checks plus informational notes.
#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

fn power_norm(j: &DMatrix<f64>) -> f64 {
    dot_core::linalg::gram_norm(j, 1e-10, 100_000).unwrap()
}

// ---------------------------------------------------------------- numerics

fn numerics() -> Outcome {
    let mut out = Outcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // Soft threshold against a brute-force 1D search on a 1e-4 grid.
    let mut bad = 0;
    for _ in 0..100 {
        let v: f64 = rng.random_range(-2.0..2.0);
        let beta: f64 = rng.random_range(0.0..1.0);
        let f = |x: f64| 0.5 * (x - v).powi(2) + beta * x.abs();
        let best = (-30_000..=30_000)
            .map(|k| k as f64 * 1e-4)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        if (soft_threshold(&[v], beta)[0] - best).abs() > 1e-4 {
            bad += 1;
        }
    }
    out.check(bad == 0, format!("prox brute force {}/100", 100 - bad));

    // Adjoint identity on the assembled sensitivity matrix.
    let spec = DomainSpec::default();
    let grid = build_grid(&spec, 0.25).unwrap();
    let layout = place_probes(&spec).unwrap();
    let j = assemble_jacobian(&spec, &grid, &layout).unwrap().entries;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = DVector::from_fn(j.ncols(), |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(j.nrows(), |_, _| rng.random_range(-1.0..1.0));
        let lhs = (&j * &x).dot(&y);
        let rhs = x.dot(&j.tr_mul(&y));
        let scale = (&j * &x).norm() * y.norm();
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    out.check(worst <= 1e-12, format!("adjoint {worst:.1e}"));

    // Filtered SVD solve against the normal equations.
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_matrix(&mut rng, 8, 5);
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha = 10f64.powf(rng.random_range(-3.0..0.0));
        let got = DVector::from_vec(tikhonov_filtered_solve(&a, &y, alpha).unwrap());
        let normal = a.tr_mul(&a) + DMatrix::identity(5, 5) * alpha;
        let expect = normal
            .cholesky()
            .unwrap()
            .solve(&a.tr_mul(&DVector::from_vec(y)));
        worst = worst.max((&got - &expect).norm() / expect.norm());
    }
    out.check(worst <= 1e-8, format!("tikhonov 8x5 {worst:.1e}"));

    // Back-propagation against central differences.
    let acts = [
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Relu,
        Activation::Identity,
    ];
    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        for &a0 in &acts {
            for &a1 in &acts {
                for &a2 in &acts {
                    worst = worst.max(dense_fd_error(&[a0, a1, a2], seed));
                }
            }
        }
    }
    out.check(worst <= 1e-4, format!("dense backprop {worst:.1e}"));
    let mut worst: f64 = 0.0;
    for &act in &acts {
        worst = worst.max(conv_fd_error(act, 3));
    }
    out.check(worst <= 1e-4, format!("conv backprop {worst:.1e}"));
    out
}

fn half_loss(net: &MlpNetwork, x: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    0.5 * (net.forward_batch(x).unwrap() - t).norm_squared()
}

/// Largest relative gap between analytic and central-difference gradients.
fn dense_fd_error(acts: &[Activation; 3], seed: u64) -> f64 {
    let mut net = MlpNetwork::random(&[3, 5, 4, 2], acts, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
    // Nonzero biases keep relu units off their kink.
    for l in &mut net.layers {
        l.biases.apply(|b| *b = rng.random_range(-0.5..0.5));
    }
    let x = random_matrix(&mut rng, 3, 2);
    let t = random_matrix(&mut rng, 2, 2);
    let g = net.backward(&net.forward_cached(&x).unwrap(), &t);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for l in 0..net.layers.len() {
        let (rows, cols) = net.layers[l].weights.shape();
        for i in 0..rows {
            for j in 0..=cols {
                let (mut plus, mut minus) = (net.clone(), net.clone());
                if j < cols {
                    plus.layers[l].weights[(i, j)] += h;
                    minus.layers[l].weights[(i, j)] -= h;
                } else {
                    plus.layers[l].biases[i] += h;
                    minus.layers[l].biases[i] -= h;
                }
                let fd = (half_loss(&plus, &x, &t) - half_loss(&minus, &x, &t)) / (2.0 * h);
                let an = if j < cols {
                    g.weights[l][(i, j)]
                } else {
                    g.biases[l][i]
                };
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
            }
        }
    }
    worst
}

fn conv_fd_error(act: Activation, seed: u64) -> f64 {
    let raster = Raster::new(4, 5, (0..20).filter(|k| k % 7 != 3).collect()).unwrap();
    let n = raster.n_voxels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = |i: usize, o: usize, a: Activation| {
        let mut l = ConvLayer::zeros(i, o, a);
        l.weights.apply(|w| *w = rng.random_range(-0.5..0.5));
        l.biases.apply(|b| *b = rng.random_range(-0.3..0.3));
        l
    };
    let layers = vec![
        layer(1, 3, act),
        layer(3, 2, act),
        layer(2, 1, Activation::Identity),
    ];
    let net = ConvNet::new(raster, layers).unwrap();
    let x = random_matrix(&mut rng, n, 2);
    let t = random_matrix(&mut rng, n, 2);
    let loss = |net: &ConvNet| {
        (0..x.ncols())
            .map(|c| {
                let y = net.forward(x.column(c).as_slice()).unwrap();
                y.iter()
                    .zip(t.column(c).iter())
                    .map(|(a, b)| 0.5 * (a - b).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
    };
    let (grads, _) = net.gradients(&x, &t);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (l, (gw, gb)) in grads.iter().enumerate() {
        for k in 0..gw.len() + gb.len() {
            let (mut plus, mut minus) = (net.clone(), net.clone());
            let an = if k < gw.len() {
                plus.layers[l].weights[k] += h;
                minus.layers[l].weights[k] -= h;
                gw[k]
            } else {
                plus.layers[l].biases[k - gw.len()] += h;
                minus.layers[l].biases[k - gw.len()] -= h;
                gb[k - gw.len()]
            };
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
        }
    }
    worst
}

// ----------------------------------------------------------- forward solver

fn forward_solver() -> Outcome {
    let mut out = Outcome::default();
    let spec = DomainSpec::default();
    let layout = place_probes(&spec).unwrap();
    let fine = ForwardModel::new(&spec, 0.1).unwrap();
    let n_tri = fine.mesh().triangles.len();
    let mu0 = vec![spec.mu_a0; n_tri];

    // Energy balance for every source, homogeneous and with an inclusion.
    let inclusion = [ContrastRegion {
        center: Point2::new(-1.0, 2.0),
        radius: 0.8,
        multiplier: 4,
    }];
    let mut worst: f64 = 0.0;
    for mu in [mu0.clone(), fine.element_absorption(&inclusion)] {
        for field in fine.solve_sources(&mu, &layout.sources).unwrap() {
            let (absorbed, outflow) = fine.power_balance(&field, &mu);
            worst = worst
                .max((absorbed + outflow - spec.source_intensity).abs() / spec.source_intensity);
        }
    }
    out.check(worst <= 0.01, format!("energy balance {worst:.1e}"));

    // Three-level refinement at the detectors, on meshes that resolve the
    // source inset. The observed order comes from successive differences.
    let model = |h: f64| {
        ForwardModel::with_mesh(&spec, Arc::new(FemMesh::semidisk(spec.radius, h).unwrap()))
            .unwrap()
    };
    let readings = |h: f64| {
        let fm = model(h);
        let mu = vec![spec.mu_a0; fm.mesh().triangles.len()];
        DVector::from_vec(fm.detector_readings(&layout, &mu).unwrap())
    };
    let levels: Vec<DVector<f64>> = [0.1, 0.05, 0.025].iter().map(|&h| readings(h)).collect();
    let d1 = (&levels[0] - &levels[1]).norm() / levels[2].norm();
    let d2 = (&levels[1] - &levels[2]).norm() / levels[2].norm();
    let order = (d1 / d2).log2();
    out.check(
        (order - 2.0).abs() <= 0.3,
        format!("convergence differences {d1:.2e}/{d2:.2e}, order {order:.2}"),
    );

    // Reciprocity: swap source and detector roles.
    let mut worst: f64 = 0.0;
    for &k in &[0usize, 6, 9, 15] {
        let forward = fine.solve_diffusion(&mu0, &layout.sources[k]).unwrap();
        for &l in &[0usize, 5, 12, 19] {
            let backward = fine.solve_diffusion(&mu0, &layout.detectors[l]).unwrap();
            let a = forward.value_at(&layout.detectors[l]).unwrap();
            let b = backward.value_at(&layout.sources[k]).unwrap();
            worst = worst.max((a - b).abs() / a.max(b));
        }
    }
    out.check(worst <= 0.01, format!("reciprocity {worst:.1e}"));

    // Added absorption never raises a detector reading.
    let grid = build_grid(&spec, 0.25).unwrap();
    let background = fine.detector_readings(&layout, &mu0).unwrap();
    let mut bad = 0;
    for seed in 0..20 {
        let phantom = sample_phantom(&spec, &grid, 9000 + seed).unwrap();
        let u = fine
            .detector_readings(&layout, &fine.element_absorption(&phantom.regions))
            .unwrap();
        // Doubling one region's excess absorption lowers readings further.
        let mut stronger = phantom.regions.clone();
        stronger[0].multiplier = stronger[0].multiplier * 2 - 1;
        let v = fine
            .detector_readings(&layout, &fine.element_absorption(&stronger))
            .unwrap();
        let ok =
            u.iter().zip(&background).all(|(a, b)| a <= b) && v.iter().zip(&u).all(|(a, b)| a <= b);
        if !ok {
            bad += 1;
        }
    }
    out.check(bad == 0, format!("monotonicity {}/20", 20 - bad));
    out
}

// ------------------------------------------------------------------ solvers

fn sparse_system(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let j = random_matrix(rng, m, n);
    let mut truth = DVector::zeros(n);
    for _ in 0..k {
        truth[rng.random_range(0..n)] = rng.random_range(0.5..2.0);
    }
    let y = (&j * truth).as_slice().to_vec();
    (j, y)
}

fn solvers() -> Outcome {
    let mut out = Outcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // Forward-backward composite objective on random instances.
    let mut good = 0;
    for _ in 0..50 {
        let j = random_matrix(&mut rng, 20, 40);
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha = rng.random_range(0.01..1.0);
        let gamma = 0.99 / power_norm(&j);
        let (_, trace) = forward_backward_l1(&j, &y, &p, alpha, gamma, 50, None).unwrap();
        let v = &trace.objective_values;
        if v.windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0))
        {
            good += 1;
        }
    }
    out.check(good == 50, format!("forward-backward monotone {good}/50"));

    // Bregman residual over 100 outer steps with the 50-step inner solve.
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (j, y) = sparse_system(&mut rng, 30, 60, 4);
        let (_, trace) = bregman_l1(&j, &y, 100, 50).unwrap();
        let rise = trace
            .residual_norms
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(rise);
        if rise <= 1e-10 {
            good += 1;
        }
    }
    out.check(
        good == 50,
        format!("bregman monotone {good}/50 random (largest rise {worst:.2e})"),
    );
    let spec = DomainSpec::default();
    let grid = build_grid(&spec, 0.25).unwrap();
    let layout = place_probes(&spec).unwrap();
    let jdot = assemble_jacobian(&spec, &grid, &layout).unwrap().entries;
    let phantom = sample_phantom(&spec, &grid, 77).unwrap();
    let dmu = DVector::from_iterator(grid.len(), phantom.mu_a.iter().map(|m| m - spec.mu_a0));
    let y = (&jdot * dmu).as_slice().to_vec();
    let (_, trace) = bregman_l1(&jdot, &y, 100, 50).unwrap();
    let rise = trace
        .residual_norms
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    out.check(
        rise <= 1e-10,
        format!("bregman monotone on the sensitivity matrix (largest rise {rise:.2e})"),
    );

    // Elastic-Net limits: lasso at theta = 1, ridge at theta = 0.
    let mut worst_lasso: f64 = 0.0;
    let mut worst_ridge: f64 = 0.0;
    for _ in 0..5 {
        let (j, mut y) = sparse_system(&mut rng, 15, 25, 3);
        y.iter_mut()
            .for_each(|v| *v += rng.random_range(-0.01..0.01));
        let alpha = 0.05 * j.tr_mul(&DVector::from_column_slice(&y)).amax();
        let fixed = |theta: f64| ElasticNetConfig {
            theta,
            alpha_grid: AlphaGrid::Explicit(vec![alpha]),
            tol: 1e-28,
            max_iter: 100_000,
            ..ElasticNetConfig::default()
        };
        let lasso = elastic_net_solve(&j, &y, &fixed(1.0)).unwrap().x;
        let gamma = 0.99 / power_norm(&j);
        let (fb, _) =
            forward_backward_l1(&j, &y, &vec![0.0; 25], alpha, gamma, 200_000, None).unwrap();
        let diff = lasso
            .iter()
            .zip(&fb)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_lasso = worst_lasso.max(diff);

        let ridge = elastic_net_solve(&j, &y, &fixed(0.0)).unwrap().x;
        // ½‖Jx − y‖² + α‖x‖² has normal equations (JᵀJ + 2αI)x = Jᵀy.
        let normal = j.tr_mul(&j) + DMatrix::identity(25, 25) * (2.0 * alpha);
        let expect = normal
            .cholesky()
            .unwrap()
            .solve(&j.tr_mul(&DVector::from_column_slice(&y)));
        let diff = ridge
            .iter()
            .zip(expect.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_ridge = worst_ridge.max(diff);
    }
    out.check(
        worst_lasso <= 1e-8,
        format!("lasso limit {worst_lasso:.1e}"),
    );
    out.check(
        worst_ridge <= 1e-8,
        format!("ridge limit {worst_ridge:.1e}"),
    );
    out
}

// --------------------------------------------------------------- desk scale

struct DeskRun {
    report: EvalReport,
    records: Vec<PerSampleRecord>,
    elapsed: Duration,
}

fn base_config(reading: NoiseReading) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.noise_reading = reading;
    cfg
}

fn desk_run(dir: &Path, reading: NoiseReading) -> DeskRun {
    let mut cfg = base_config(reading);
    cfg.master_seed = 2024;
    cfg.output_dir = dir.to_path_buf();
    cfg.dataset.train_count = 300;
    cfg.dataset.test_count = 50;
    let exp = Experiment::new(cfg).unwrap();
    let start = Instant::now();
    let report = run_all(&exp).unwrap();
    let elapsed = start.elapsed();
    let records =
        read_per_sample_csv(std::fs::File::open(exp.paths.per_sample()).unwrap()).unwrap();
    DeskRun {
        report,
        records,
        elapsed,
    }
}

fn tpr_of(report: &EvalReport, method: Method, noise: f64) -> f64 {
    report.row(method.name(), noise).unwrap().tpr_mean
}

fn desk_replication(run: &DeskRun) -> Outcome {
    let mut out = Outcome::default();
    let report = &run.report;
    let minutes = run.elapsed.as_secs_f64() / 60.0;
    out.check(minutes <= 60.0, format!("wall time {minutes:.1} min"));

    let clean = tpr_of(report, Method::Lsvd, 0.0);
    out.check(clean >= 0.80, format!("(a) lsvd clean TPR {clean:.3}"));

    for noise in [0.0, 0.01, 0.03] {
        let (l, e, b) = (
            tpr_of(report, Method::Lsvd, noise),
            tpr_of(report, Method::ElasticNet, noise),
            tpr_of(report, Method::Bregman, noise),
        );
        out.check(
            l > e && l > b,
            format!("(b) TPR at {noise}: lsvd {l:.3} elasticnet {e:.3} bregman {b:.3}"),
        );
    }

    let row = report.row(Method::Lsvd.name(), 0.0).unwrap();
    for (bin, stats) in dot_core::metrics::MULTIPLIER_BINS.iter().zip(&row.acr) {
        if let Some(s) = stats {
            let truth = f64::from(*bin) * 0.01;
            let rel = (s.mean - truth).abs() / truth;
            out.check(
                rel <= 0.15,
                format!(
                    "(c) lsvd ACR bin {bin}: {:.3e} ({:.1}%)",
                    s.mean,
                    100.0 * rel
                ),
            );
        }
    }

    let trend: Vec<f64> = [0.0, 0.01, 0.03, 0.05]
        .iter()
        .map(|&p| tpr_of(report, Method::Lsvd, p))
        .collect();
    out.check(
        trend.windows(2).all(|w| w[1] <= w[0]),
        format!("(d) lsvd TPR by noise {trend:.3?}"),
    );
    out
}

/// Mean of ACR / truth − 1 over recovered regions at zero noise.
fn mean_acr_bias(records: &[PerSampleRecord], method: Method) -> (f64, usize) {
    let rel: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method.name() && r.noise == 0.0)
        .filter_map(|r| r.acr.map(|a| a / (f64::from(r.bin) * 0.01) - 1.0))
        .collect();
    (rel.iter().sum::<f64>() / rel.len() as f64, rel.len())
}

fn variational_trends(run: &DeskRun) -> Outcome {
    let mut out = Outcome::default();
    let (en, n_en) = mean_acr_bias(&run.records, Method::ElasticNet);
    out.check(
        n_en > 0 && en < 0.0,
        format!(
            "elasticnet ACR bias {:+.1}% over {n_en} regions",
            100.0 * en
        ),
    );
    let (br, n_br) = mean_acr_bias(&run.records, Method::Bregman);
    out.check(
        n_br > 0 && br > 0.0,
        format!("bregman ACR bias {:+.1}% over {n_br} regions", 100.0 * br),
    );
    out
}

// ---------------------------------------------------------- reproducibility

fn reproducibility(reading: NoiseReading) -> Outcome {
    let mut out = Outcome::default();
    let tables: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = base_config(reading);
            cfg.master_seed = 99;
            cfg.output_dir = dir.path().to_path_buf();
            cfg.dataset.train_count = 24;
            cfg.dataset.test_count = 4;
            cfg.training.epochs = 40;
            cfg.training.denoiser_epochs = 5;
            cfg.solvers.elastic_net_alpha_count = 8;
            let exp = Experiment::new(cfg).unwrap();
            run_all(&exp).unwrap();
            std::fs::read(exp.paths.table()).unwrap()
        })
        .collect();
    out.check(
        tables[0] == tables[1] && !tables[0].is_empty(),
        format!(
            "table.csv {} bytes, identical: {}",
            tables[0].len(),
            tables[0] == tables[1]
        ),
    );
    out
}

// --------------------------------------------------------------------- main

fn report(id: usize, name: &str, started: Instant, outcome: &Outcome) -> bool {
    let pass = outcome.failures.is_empty();
    let mut line = format!(
        "criterion {id} {name}: {} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    if !pass {
        let _ = write!(line, " failed: {}", outcome.failures.join("; "));
    }
    if !outcome.notes.is_empty() {
        let _ = write!(line, " ok: {}", outcome.notes.join("; "));
    }
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{line}");
    let _ = stdout.flush();
    pass
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let reading = if args.iter().any(|a| a == "--noise-variance") {
        NoiseReading::Variance
    } else {
        NoiseReading::Std
    };
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let selected =
        |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut all_pass = true;
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if selected(name) {
            let started = Instant::now();
            let outcome = f();
            all_pass &= report(id, name, started, &outcome);
        }
    };

    run(1, "numerics", &mut numerics);
    run(2, "forward-solver", &mut forward_solver);
    run(3, "solver-behaviour", &mut solvers);

    let desk_dir = tempfile::tempdir().unwrap();
    let desk = OnceLock::new();
    let shared = || desk.get_or_init(|| desk_run(desk_dir.path(), reading));
    run(4, "desk-replication", &mut || desk_replication(shared()));
    run(
        5,
        "variational-trends",
        &mut || variational_trends(shared()),
    );
    run(6, "reproducibility", &mut || reproducibility(reading));

    if !all_pass {
        std::process::exit(1);
    }
}
