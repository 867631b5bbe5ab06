//! Drives the `dot` binary as a user would.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dot"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

const TINY: &str = r#"
master_seed = 5
output_dir = "run"

[dataset]
train_count = 6
test_count = 2
noise_levels = [0.0, 0.03]

[training]
epochs = 10
denoiser_epochs = 2
denoiser_channels = 4

[solvers]
bregman_outer_iterations = 3
bregman_inner_iterations = 5
elastic_net_alpha_count = 3
elastic_net_folds = 2
elastic_net_max_iter = 20

[evaluation]
heatmap_samples = 1
"#;

#[test]
fn config_prints_the_effective_settings() {
    let dir = tempfile::tempdir().unwrap();
    let o = dot(dir.path(), &["config", "--seed", "42"]);
    assert_ok(&o);
    let text = stdout(&o);
    assert!(text.contains("master_seed = 42"), "{text}");
    assert!(text.contains("train_count = 1500"));

    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let o = dot(dir.path(), &["--config", "tiny.toml", "config"]);
    assert_ok(&o);
    assert!(stdout(&o).contains("train_count = 6"));
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown method name.
    assert_eq!(
        dot(dir.path(), &["evaluate", "--method", "magic"])
            .status
            .code(),
        Some(2)
    );
    // Unknown configuration key.
    fs::write(
        dir.path().join("bad.toml"),
        "master_seed = 1\noutput_dir = \"x\"\nbogus = 3\n",
    )
    .unwrap();
    assert_eq!(
        dot(dir.path(), &["--config", "bad.toml", "config"])
            .status
            .code(),
        Some(2)
    );
    // Invalid value.
    fs::write(
        dir.path().join("neg.toml"),
        "master_seed = 1\noutput_dir = \"x\"\n[dataset]\ntrain_count = 0\n",
    )
    .unwrap();
    assert_eq!(
        dot(dir.path(), &["--config", "neg.toml", "generate"])
            .status
            .code(),
        Some(2)
    );
    // Stages run out of order name the missing step.
    let o = dot(dir.path(), &["--out", "empty", "reconstruct"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("generate"));
    // Missing configuration file.
    assert_eq!(
        dot(dir.path(), &["--config", "absent.toml", "config"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn tiny_experiment_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("tiny.toml"), TINY).unwrap();
    let cfg = ["--config", "tiny.toml"];
    let step = |extra: &[&str]| {
        let args: Vec<&str> = cfg.iter().chain(extra).copied().collect();
        let o = dot(d, &args);
        assert_ok(&o);
        o
    };
    step(&["generate"]);
    step(&["jacobian"]);
    step(&["train"]);
    step(&["reconstruct"]);
    step(&["evaluate"]);
    let table = stdout(&step(&["compare"]));
    // Header plus four methods at two noise levels.
    assert_eq!(table.lines().count(), 1 + 4 * 2, "{table}");
    assert_eq!(
        table,
        fs::read_to_string(d.join("run/results/table.csv")).unwrap()
    );

    // Single-file commands.
    step(&[
        "forward",
        "--phantom",
        "run/test/phantom_00000.txt",
        "--noise",
        "0.01",
        "--out",
        "meas.csv",
    ]);
    assert!(fs::read_to_string(d.join("meas.csv"))
        .unwrap()
        .contains("pair_index"));
    step(&[
        "reconstruct",
        "--method",
        "tikhonov",
        "--data",
        "meas.csv",
        "--out",
        "tik.csv",
    ]);
    step(&[
        "reconstruct",
        "--method",
        "bregman",
        "--jacobian",
        "run/jacobian.bin",
        "--data",
        "meas.csv",
        "--out",
        "breg.csv",
    ]);
    step(&["train", "--dataset", "run", "--out", "model.bin"]);
    step(&[
        "infer",
        "--model",
        "model.bin",
        "--data",
        "meas.csv",
        "--out",
        "lsvd.csv",
    ]);
    for f in ["tik.csv", "breg.csv", "lsvd.csv"] {
        let text = fs::read_to_string(d.join(f)).unwrap();
        assert_eq!(text.lines().count(), 1 + 632, "{f}");
    }
    // Two methods in single-file mode is ambiguous.
    let o = dot(
        d,
        &[
            "--config",
            "tiny.toml",
            "reconstruct",
            "--method",
            "tikhonov",
            "--method",
            "bregman",
            "--data",
            "meas.csv",
            "--out",
            "x.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}
