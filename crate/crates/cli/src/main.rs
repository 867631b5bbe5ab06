use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dot_core::forward::{add_noise, ForwardModel};
use dot_core::io;
use dot_core::nn::read_model;
use dot_core::pipeline::{self, Experiment, ExperimentConfig, Method, Reconstructor};
use dot_core::rytov::rytov_transform;
use dot_core::DotError;

/// Diffuse optical tomography: synthetic data, reconstruction and evaluation.
#[derive(Parser, Debug)]
#[command(name = "dot", version)]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for pipeline stages; output file for single-file
    /// commands (`forward`, `infer`, `reconstruct --data`, `train --dataset`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate phantoms and measurements for the train and test splits.
    Generate,
    /// Assemble the Rytov sensitivity matrix for the reconstruction grid.
    Jacobian,
    /// Train the learned-SVD model on the training split.
    Train {
        /// Experiment directory holding a generated dataset; `--out` then
        /// names the model file.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Reconstruct the test split, or a single measurement file.
    Reconstruct(ReconstructArgs),
    /// Score reconstructions against the ground truth.
    Evaluate(MethodArgs),
    /// Aggregate scores into the comparison table and render heatmaps.
    Compare(MethodArgs),
    /// Run every stage in order.
    Run,
    /// Simulate measurements for one phantom file.
    Forward {
        #[arg(long)]
        phantom: PathBuf,
        /// Relative noise level.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Reconstruct one measurement file with a trained model.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Print the effective configuration.
    Config,
}

#[derive(Args, Debug)]
struct MethodArgs {
    /// Methods to include (repeatable); defaults to the configured list.
    #[arg(long = "method")]
    methods: Vec<Method>,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[command(flatten)]
    methods: MethodArgs,
    /// Sensitivity matrix for single-file mode (default: the pipeline's).
    #[arg(long)]
    jacobian: Option<PathBuf>,
    /// Trained model for single-file mode (default: the pipeline's).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Measurement CSV to reconstruct in single-file mode.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Tikhonov parameter relative to the largest squared singular value.
    #[arg(long)]
    tikhonov_alpha_rel: Option<f64>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            output_dir: PathBuf::from("dot-run"),
            ..ExperimentConfig::default()
        },
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn methods_or_default(args: &MethodArgs, cfg: &ExperimentConfig) -> Vec<Method> {
    if args.methods.is_empty() {
        cfg.evaluation.methods.clone()
    } else {
        args.methods.clone()
    }
}

fn required_out(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .context("--out <file> is required for this command")
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = load_config(&cli)?;
    let single_file = matches!(
        &cli.command,
        Command::Forward { .. } | Command::Infer { .. } | Command::Train { dataset: Some(_) }
    ) || matches!(&cli.command, Command::Reconstruct(a) if a.data.is_some());
    if !single_file {
        if let Some(out) = &cli.out {
            cfg.output_dir = out.clone();
        }
    }
    if let Command::Train { dataset: Some(dir) } = &cli.command {
        cfg.output_dir = dir.clone();
    }
    if let Command::Reconstruct(a) = &cli.command {
        if let Some(alpha) = a.tikhonov_alpha_rel {
            cfg.solvers.tikhonov_alpha_rel = alpha;
        }
    }
    let exp = Experiment::new(cfg)?;

    match &cli.command {
        Command::Config => print!("{}", exp.config.to_toml()?),
        Command::Generate => {
            let manifest = pipeline::cmd_generate(&exp)?;
            println!(
                "{} samples written to {}",
                manifest.samples.len(),
                exp.paths.root.display()
            );
        }
        Command::Jacobian => {
            let j = pipeline::cmd_jacobian(&exp)?;
            println!(
                "{}x{} sensitivity matrix written to {}",
                j.n_pairs(),
                j.n_voxels(),
                exp.paths.jacobian().display()
            );
        }
        Command::Train { dataset } => {
            pipeline::cmd_train(&exp)?;
            let model = exp.paths.model();
            if dataset.is_some() {
                if let Some(out) = &cli.out {
                    if out != &model {
                        std::fs::rename(&model, out)
                            .or_else(|_| std::fs::copy(&model, out).map(|_| ()))
                            .with_context(|| format!("moving model to {}", out.display()))?;
                        println!("model written to {}", out.display());
                        return Ok(());
                    }
                }
            }
            println!("model written to {}", model.display());
        }
        Command::Reconstruct(args) => match &args.data {
            Some(data) => reconstruct_file(&exp, args, data, required_out(&cli)?)?,
            None => {
                pipeline::cmd_reconstruct(&exp, &methods_or_default(&args.methods, &exp.config))?
            }
        },
        Command::Evaluate(args) => {
            let records = pipeline::cmd_evaluate(&exp, &methods_or_default(args, &exp.config))?;
            println!(
                "{} records written to {}",
                records.len(),
                exp.paths.per_sample().display()
            );
        }
        Command::Compare(args) => {
            let report = pipeline::cmd_compare(&exp, &methods_or_default(args, &exp.config))?;
            print!("{}", report.to_csv());
        }
        Command::Run => {
            let report = pipeline::run_all(&exp)?;
            print!("{}", report.to_csv());
        }
        Command::Forward { phantom, noise } => {
            let file = io::parse_phantom(&io::read_text(phantom)?)?;
            let forward = ForwardModel::new(&exp.spec, exp.config.domain.mesh_size_cm)?;
            let clean = forward.simulate_measurements(&exp.layout, &file.phantom.regions)?;
            let noisy = add_noise(
                &clean,
                *noise,
                exp.config.master_seed,
                exp.config.dataset.noise_reading,
            )?;
            io::write_bytes(
                required_out(&cli)?,
                io::format_measurements(&noisy)?.as_bytes(),
            )?;
        }
        Command::Infer { model, data } => {
            let file = std::fs::File::open(model)
                .with_context(|| format!("opening {}", model.display()))?;
            let model = read_model(std::io::BufReader::new(file))?;
            let y = rytov_transform(&io::parse_measurements(&io::read_text(data)?, &exp.layout)?)?;
            let mu_a = dot_core::nn::infer(&model, &y.values)?;
            io::write_bytes(
                required_out(&cli)?,
                io::format_map(&mu_a, &exp.grid)?.as_bytes(),
            )?;
        }
    }
    Ok(())
}

fn reconstruct_file(
    exp: &Experiment,
    args: &ReconstructArgs,
    data: &Path,
    out: &Path,
) -> Result<()> {
    let [method] = args.methods.methods[..] else {
        bail!(DotError::InvalidArgument(
            "single-file reconstruction takes exactly one --method".into()
        ));
    };
    let jacobian = if method.uses_jacobian() {
        Some(match &args.jacobian {
            Some(p) => {
                let file =
                    std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                io::read_jacobian(std::io::BufReader::new(file))?
            }
            None => exp.load_jacobian()?,
        })
    } else {
        None
    };
    let model = if method == Method::Lsvd {
        Some(match &args.model {
            Some(p) => {
                let file =
                    std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                read_model(std::io::BufReader::new(file))?
            }
            None => exp.load_model()?,
        })
    } else {
        None
    };
    let rec = Reconstructor::new(method, &exp.config, jacobian.as_ref(), model.as_ref())?;
    let y = rytov_transform(&io::parse_measurements(&io::read_text(data)?, &exp.layout)?)?;
    let mu_a = rec.reconstruct(&y)?;
    io::write_bytes(out, io::format_map(&mu_a, &exp.grid)?.as_bytes())?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<DotError>())
                .map_or(1, DotError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
