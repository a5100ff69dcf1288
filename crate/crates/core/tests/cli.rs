//! End-to-end CLI tests: every subcommand against TOML configs in a temp
//! directory, including exit codes and output determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn optgap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optgap"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const HET_PROBLEM: &str = r#"
[problem]
kind = "block_quadratic"
eigenvalue_blocks = [[1.0, 2.0, 3.0], [99.0, 100.0, 101.0], [4998.0, 4999.0, 5000.0]]
layout = "heterogeneous"
rotation_seed = 1
"#;

#[test]
fn build_problem_emits_hessian_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("problem.toml");
    write(
        &config,
        r#"
kind = "block_quadratic"
eigenvalue_blocks = [[1.0, 2.0, 3.0], [99.0, 100.0, 101.0], [4998.0, 4999.0, 5000.0]]
layout = "heterogeneous"
rotation_seed = 1
"#,
    );
    let out = dir.path().join("out");
    let status = optgap()
        .args(["build-problem", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let spectrum = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 10); // header + 9 eigenvalues
    let hessian = fs::read_to_string(out.join("hessian.csv")).unwrap();
    assert_eq!(hessian.lines().count(), 10); // header + 9 rows
}

#[test]
fn run_is_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(
        &config,
        &format!(
            r#"
batch_size = 3
steps = 20
seed = 5
{HET_PROBLEM}
[optimizer]
rule = "adaptive_clip"
lr = 1e-5
beta = 0.9
p = 0.1

[schedule]
kind = "cosine_warmup"
peak_lr = 1e-5
total_steps = 20
warmup_steps = 5
floor_lr = 1e-7
"#
        ),
    );
    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&out_a, &out_b] {
        let status = optgap()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv_a = fs::read(out_a.join("run.csv")).unwrap();
    let csv_b = fs::read(out_b.join("run.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("summary.json")).unwrap()).unwrap();
    assert!(summary["final_loss"].is_number());
    assert!(summary["diverged_at"].is_null());
    assert_eq!(summary["steps_logged"], serde_json::json!(21));
}

#[test]
fn diverging_run_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(
        &config,
        &format!(
            r#"
batch_size = 1
steps = 200
seed = 5
{HET_PROBLEM}
[optimizer]
rule = "sgd"
lr = 1.0
"#
        ),
    );
    let out = dir.path().join("out");
    let status = optgap()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["diverged_at"].is_number());
}

#[test]
fn sweep_emits_per_run_csvs_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    write(
        &config,
        &format!(
            r#"
batch_sizes = [1, 3]
seeds = [0, 1]
steps = 30
{HET_PROBLEM}
[[optimizers]]
name = "sgd"
learning_rates = [1e-6, 1e-5]

[optimizers.spec]
rule = "sgd"
lr = 0.0

[[optimizers]]
name = "sign_sgd"
learning_rates = [1e-3]

[optimizers.spec]
rule = "sign_sgd"
lr = 0.0
"#
        ),
    );
    let out = dir.path().join("out");
    let status = optgap()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let sweep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["cells"].as_array().unwrap().len(), 6);
    assert_eq!(sweep["best"].as_array().unwrap().len(), 4);
    let n_csvs = fs::read_dir(out.join("runs")).unwrap().count();
    assert_eq!(n_csvs, 12); // (2 lrs * 2 + 1 lr * 2) cells x 2 seeds
}

#[test]
fn sweep_with_only_divergence_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    write(
        &config,
        &format!(
            r#"
batch_sizes = [1]
seeds = [0, 1]
steps = 100
{HET_PROBLEM}
[[optimizers]]
name = "sgd"
learning_rates = [1.0]

[optimizers.spec]
rule = "sgd"
lr = 0.0
"#
        ),
    );
    let status = optgap()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sde_sim_writes_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sde.toml");
    write(
        &config,
        r#"
model = "sign_sgd"
sigma = 1.0
batch_size = 4
eta = 0.01
steps = 50
seed = 3

[problem]
kind = "noisy_isotropic"
dim = 4
sigma = 1.0

[init]
kind = "ones"
"#,
    );
    let out = dir.path().join("out");
    let status = optgap()
        .args(["sde-sim", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let trajectory = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(trajectory.lines().count(), 52); // header + 51 states
    assert!(trajectory.starts_with("step,time,loss,x_0,x_1,x_2,x_3"));
}

#[test]
fn drift_report_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("drift.toml");
    write(
        &config,
        r#"
mus = [0.0, 1.0]
sigmas = [1.0]
batch_sizes = [1, 4]
n_samples = 20000
seed = 9
"#,
    );
    let out = dir.path().join("out");
    let output = optgap()
        .args(["drift-report", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let report = fs::read_to_string(out.join("drift_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 5); // header + 4 cells
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("/4 cells"));
}

#[test]
fn missing_config_reports_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = optgap()
        .args(["run", "--config"])
        .arg(dir.path().join("nope.toml"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8(output.stderr).unwrap().contains("error"));
}
