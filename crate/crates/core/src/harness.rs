//! Deterministic experiment runner: builds problems, executes
//! (optimizer x batch size x learning rate x seed) grids, aggregates
//! mean/std over seeds, and persists configs and results as CSV/JSON.
//!
//! Determinism contract: a RunConfig fully determines every logged number.
//! Sweep cells execute in parallel with no shared mutable state; aggregation
//! is a fold in grid order, not completion order.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::math::{derive_seed, ParamVector, Rng};
use crate::metrics::{clipped_fraction, directional_sharpness, gradient_correlation};
use crate::optimizers::OptimizerSpec;
use crate::problems::{
    build_hessian, BlockQuadraticProblem, BlockQuadraticSpec, NoisyIsotropicSpec,
};
use crate::schedulers::{DecayShape, ScheduleKind, ScheduleSpec};
use crate::sde::{
    erf_drift_prediction, euler_maruyama, expected_sign_mc, sgd_sde, signsgd_sde, NoiseModel,
    SdeModel,
};
use crate::{Error, Result};

/// Loss above this (or non-finite) terminates a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    BlockQuadratic(BlockQuadraticSpec),
    NoisyIsotropic(NoisyIsotropicSpec),
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::BlockQuadratic(spec) => {
                Ok(Problem::BlockQuadratic(build_hessian(spec)?))
            }
            ProblemSpec::NoisyIsotropic(spec) => {
                spec.validate()?;
                Ok(Problem::NoisyIsotropic(*spec))
            }
        }
    }
}

/// A built problem instance; immutable and shareable across runs.
#[derive(Debug, Clone)]
pub enum Problem {
    BlockQuadratic(BlockQuadraticProblem),
    NoisyIsotropic(NoisyIsotropicSpec),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::BlockQuadratic(p) => p.dim(),
            Problem::NoisyIsotropic(s) => s.dim,
        }
    }

    /// Block partition for per-block diagnostics (single block when the
    /// problem has no natural layout).
    pub fn block_sizes(&self) -> Vec<usize> {
        match self {
            Problem::BlockQuadratic(p) => p.block_sizes.clone(),
            Problem::NoisyIsotropic(s) => vec![s.dim],
        }
    }

    pub fn loss(&self, w: &ParamVector) -> Result<f64> {
        match self {
            Problem::BlockQuadratic(p) => p.loss(w),
            Problem::NoisyIsotropic(s) => s.loss(w),
        }
    }

    /// Deterministic full gradient.
    pub fn gradient(&self, w: &ParamVector) -> Result<ParamVector> {
        match self {
            Problem::BlockQuadratic(p) => p.gradient(w),
            Problem::NoisyIsotropic(s) => s.gradient(w),
        }
    }

    pub fn hessian_vector(&self, v: &ParamVector) -> Result<ParamVector> {
        match self {
            Problem::BlockQuadratic(p) => p.hessian_vector(v),
            Problem::NoisyIsotropic(_) => Ok(v.clone()),
        }
    }

    /// One stochastic minibatch gradient. Block quadratics subsample rows of
    /// the design matrix; the isotropic quadratic injects Gaussian noise
    /// scaled by 1/sqrt(B).
    pub fn stochastic_gradient(
        &self,
        w: &ParamVector,
        batch_size: u32,
        rng: &mut Rng,
    ) -> Result<ParamVector> {
        if batch_size == 0 {
            return Err(Error::ZeroBatchSize);
        }
        match self {
            Problem::BlockQuadratic(p) => {
                let batch = p.sample_batch(rng, batch_size as usize)?;
                p.stochastic_gradient(w, &batch)
            }
            Problem::NoisyIsotropic(s) => {
                let effective = NoisyIsotropicSpec {
                    dim: s.dim,
                    sigma: s.sigma / (batch_size as f64).sqrt(),
                };
                effective.noisy_gradient(w, rng)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Ones,
    Gaussian { scale: f64 },
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Gaussian { scale: 1.0 }
    }
}

impl InitSpec {
    fn sample(&self, dim: usize, rng: &mut Rng) -> ParamVector {
        match self {
            InitSpec::Ones => ParamVector::ones(dim),
            InitSpec::Gaussian { scale } => rng.normal_vector(dim).scale(*scale),
        }
    }
}

fn default_log_every() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    pub batch_size: u32,
    pub steps: u64,
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "default_true")]
    pub metrics_enabled: bool,
}

/// One logged step. Step 0 is the initial state (gradient and metric
/// columns zero); later rows describe the step that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm_pre_clip: f64,
    pub grad_norm_post_clip: f64,
    pub grad_corr: f64,
    pub dir_sharp: f64,
    pub clipped_frac_global: f64,
    pub clipped_frac_blocks: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    pub final_loss: f64,
    pub diverged_at: Option<u64>,
    pub wall_time_s: f64,
    pub block_sizes: Vec<usize>,
}

/// Executes one run: sample batch -> stochastic gradient -> optimizer step
/// -> apply delta -> log. Divergence terminates early but still yields a
/// record with the divergence step.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    let start = Instant::now();
    if config.log_every == 0 {
        return Err(Error::InvalidConfig("log_every must be >= 1".into()));
    }
    let problem = config.problem.build()?;
    let dim = problem.dim();
    let block_sizes = problem.block_sizes();
    let n_blocks = block_sizes.len();
    if let Some(s) = &config.schedule {
        s.validate()?;
        if s.total_steps < config.steps {
            return Err(Error::InvalidConfig(
                "schedule total_steps shorter than run".into(),
            ));
        }
    }
    let mut rng = Rng::from_seed(config.seed);
    let mut x = config.init.sample(dim, &mut rng);
    let mut opt = config.optimizer.build(dim)?;
    let lr_at = |t: u64| -> Result<f64> {
        match &config.schedule {
            Some(s) => s.lr_at(t),
            None => Ok(config.optimizer.peak_lr()),
        }
    };

    let mut loss = problem.loss(&x)?;
    let mut rows = vec![RunRow {
        step: 0,
        lr: lr_at(0)?,
        loss,
        grad_norm_pre_clip: 0.0,
        grad_norm_post_clip: 0.0,
        grad_corr: 0.0,
        dir_sharp: 0.0,
        clipped_frac_global: 0.0,
        clipped_frac_blocks: vec![0.0; n_blocks],
    }];
    let mut diverged_at = None;

    for t in 1..=config.steps {
        let lr = lr_at(t - 1)?;
        opt.set_lr(lr);
        let g = problem.stochastic_gradient(&x, config.batch_size, &mut rng)?;
        let out = opt.step(&g)?;

        let (grad_corr, dir_sharp) = if config.metrics_enabled {
            let full_grad = problem.gradient(&x)?;
            let corr = gradient_correlation(&full_grad, &out.delta)?;
            let sharp = directional_sharpness(&out.delta, |v| problem.hessian_vector(v))?;
            (corr, sharp)
        } else {
            (0.0, 0.0)
        };

        let (clip_global, clip_blocks) = if let Some(qc) = &out.quantile_clip {
            if qc.threshold > 0.0 {
                clipped_fraction(&qc.momentum_pre_clip, qc.threshold, Some(&block_sizes))?
            } else {
                (0.0, vec![0.0; n_blocks])
            }
        } else if let Some(c) = opt.clip_threshold() {
            let clipped = if out.grad_norm_pre_clip > c { 1.0 } else { 0.0 };
            (clipped, vec![clipped; n_blocks])
        } else {
            (0.0, vec![0.0; n_blocks])
        };

        x.axpy(1.0, &out.delta)?;
        loss = problem.loss(&x)?;

        let row = RunRow {
            step: t,
            lr,
            loss,
            grad_norm_pre_clip: out.grad_norm_pre_clip,
            grad_norm_post_clip: out.grad_norm_post_clip,
            grad_corr,
            dir_sharp,
            clipped_frac_global: clip_global,
            clipped_frac_blocks: clip_blocks,
        };

        if !loss.is_finite() || loss > DIVERGENCE_THRESHOLD {
            diverged_at = Some(t);
            rows.push(row);
            break;
        }
        if t % config.log_every == 0 || t == config.steps {
            rows.push(row);
        }
    }

    Ok(RunRecord {
        rows,
        final_loss: loss,
        diverged_at,
        wall_time_s: start.elapsed().as_secs_f64(),
        block_sizes,
    })
}

/// Fixed CSV schema: step, lr, loss, grad norms, Taylor terms, clipped
/// fractions (global then one column per block).
pub fn write_run_csv(record: &RunRecord, out: &mut impl Write) -> Result<()> {
    let mut header = vec![
        "step".to_string(),
        "lr".into(),
        "loss".into(),
        "grad_norm_pre_clip".into(),
        "grad_norm_post_clip".into(),
        "grad_corr".into(),
        "dir_sharp".into(),
        "clipped_frac_global".into(),
    ];
    for k in 0..record.block_sizes.len() {
        header.push(format!("clipped_frac_block_{k}"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in &record.rows {
        let mut fields = vec![
            row.step.to_string(),
            row.lr.to_string(),
            row.loss.to_string(),
            row.grad_norm_pre_clip.to_string(),
            row.grad_norm_post_clip.to_string(),
            row.grad_corr.to_string(),
            row.dir_sharp.to_string(),
            row.clipped_frac_global.to_string(),
        ];
        for v in &row.clipped_frac_blocks {
            fields.push(v.to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_csv_string(record: &RunRecord) -> Result<String> {
    let mut buf = Vec::new();
    write_run_csv(record, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf8"))
}

/// Schedule template for sweeps: the peak learning rate comes from the grid,
/// total_steps from the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub kind: ScheduleKind,
    #[serde(default)]
    pub warmup_steps: u64,
    #[serde(default = "sweep_floor_lr")]
    pub floor_lr: f64,
    #[serde(default = "sweep_decay_fraction")]
    pub decay_fraction: f64,
    #[serde(default)]
    pub decay_shape: DecayShape,
}

fn sweep_floor_lr() -> f64 {
    1e-5
}

fn sweep_decay_fraction() -> f64 {
    0.2
}

impl SweepSchedule {
    fn instantiate(&self, peak_lr: f64, total_steps: u64) -> ScheduleSpec {
        ScheduleSpec {
            kind: self.kind,
            peak_lr,
            total_steps,
            warmup_steps: self.warmup_steps,
            floor_lr: self.floor_lr.min(peak_lr),
            decay_fraction: self.decay_fraction,
            decay_shape: self.decay_shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptimizer {
    pub name: String,
    pub spec: OptimizerSpec,
    pub learning_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub problem: ProblemSpec,
    pub optimizers: Vec<SweepOptimizer>,
    pub batch_sizes: Vec<u32>,
    pub seeds: Vec<u64>,
    pub steps: u64,
    #[serde(default)]
    pub schedule: Option<SweepSchedule>,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub metrics_enabled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStat {
    pub seed: u64,
    pub final_loss: f64,
    pub diverged_at: Option<u64>,
}

/// Statistics for one (optimizer, batch size, lr) cell over all seeds.
/// Mean/std are over completed (non-diverged) runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellStats {
    pub optimizer: String,
    pub batch_size: u32,
    pub lr: f64,
    pub runs: Vec<RunStat>,
    pub mean_final_loss: Option<f64>,
    pub std_final_loss: Option<f64>,
    pub n_diverged: usize,
}

impl CellStats {
    /// Median run completes: at most half the seeds diverged.
    pub fn is_stable(&self) -> bool {
        2 * self.n_diverged <= self.runs.len()
    }
}

/// Best learning rate per (optimizer, batch size): lowest mean final loss
/// among stable learning rates; when the overall minimizer is unstable (the
/// median run diverges), selection falls back to the largest stable
/// learning rate. `lr == None` marks a fully diverged cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestSelection {
    pub optimizer: String,
    pub batch_size: u32,
    pub lr: Option<f64>,
    pub mean_final_loss: Option<f64>,
    pub std_final_loss: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellStats>,
    pub best: Vec<BestSelection>,
}

/// Best-learning-rate rule for one (optimizer, batch size) group: minimize
/// mean final loss over cells with at least one completed run; if the
/// minimizer is unstable (median run diverges), fall back to the largest
/// stable learning rate. Returns `None` when every cell fully diverged.
pub fn select_best_cell<'a>(group: &[&'a CellStats]) -> Option<&'a CellStats> {
    let candidates: Vec<&&CellStats> = group
        .iter()
        .filter(|c| c.mean_final_loss.is_some())
        .collect();
    candidates
        .iter()
        .min_by(|a, b| {
            a.mean_final_loss
                .unwrap()
                .partial_cmp(&b.mean_final_loss.unwrap())
                .unwrap()
        })
        .map(|c| **c)
        .and_then(|winner| {
            if winner.is_stable() {
                Some(winner)
            } else {
                candidates
                    .iter()
                    .filter(|c| c.is_stable())
                    .max_by(|a, b| a.lr.partial_cmp(&b.lr).unwrap())
                    .map(|c| **c)
            }
        })
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = crate::math::compensated_sum(values.iter().copied()) / n;
    let std = if values.len() > 1 {
        let ss = crate::math::compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// Runs the full grid. `run_csv_dir`, when set, persists one CSV per run.
pub fn sweep(config: &SweepConfig, run_csv_dir: Option<&Path>) -> Result<SweepResult> {
    if config.optimizers.is_empty() || config.batch_sizes.is_empty() || config.seeds.is_empty() {
        return Err(Error::InvalidConfig("empty sweep grid".into()));
    }
    for opt in &config.optimizers {
        if opt.learning_rates.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "optimizer {} has an empty learning rate grid",
                opt.name
            )));
        }
    }
    if let Some(dir) = run_csv_dir {
        std::fs::create_dir_all(dir)?;
    }

    // flatten the grid in a fixed order so aggregation is order-deterministic
    let mut grid = Vec::new();
    for (oi, opt) in config.optimizers.iter().enumerate() {
        for &b in &config.batch_sizes {
            for (li, &lr) in opt.learning_rates.iter().enumerate() {
                for &seed in &config.seeds {
                    grid.push((oi, b, li, lr, seed));
                }
            }
        }
    }

    let outcomes: Vec<Result<RunStat>> = grid
        .par_iter()
        .map(|&(oi, b, li, lr, seed)| {
            let opt = &config.optimizers[oi];
            let run_config = RunConfig {
                problem: config.problem.clone(),
                optimizer: opt.spec.with_lr(lr),
                schedule: config
                    .schedule
                    .as_ref()
                    .map(|s| s.instantiate(lr, config.steps)),
                batch_size: b,
                steps: config.steps,
                seed,
                log_every: 1,
                init: config.init,
                metrics_enabled: config.metrics_enabled,
            };
            let record = run(&run_config)?;
            if let Some(dir) = run_csv_dir {
                let path = dir.join(format!("{}_b{}_lr{}_seed{}.csv", opt.name, b, li, seed));
                let mut file = std::fs::File::create(path)?;
                write_run_csv(&record, &mut file)?;
            }
            Ok(RunStat {
                seed,
                final_loss: record.final_loss,
                diverged_at: record.diverged_at,
            })
        })
        .collect();

    let mut cells = Vec::new();
    let mut idx = 0;
    for opt in &config.optimizers {
        for &b in &config.batch_sizes {
            for &lr in &opt.learning_rates {
                let mut runs = Vec::with_capacity(config.seeds.len());
                for _ in &config.seeds {
                    runs.push(match &outcomes[idx] {
                        Ok(stat) => stat.clone(),
                        Err(e) => {
                            return Err(Error::InvalidConfig(format!("run failed: {e}")));
                        }
                    });
                    idx += 1;
                }
                let completed: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.diverged_at.is_none())
                    .map(|r| r.final_loss)
                    .collect();
                let n_diverged = runs.len() - completed.len();
                let (mean, std) = mean_std(&completed);
                cells.push(CellStats {
                    optimizer: opt.name.clone(),
                    batch_size: b,
                    lr,
                    runs,
                    mean_final_loss: mean,
                    std_final_loss: std,
                    n_diverged,
                });
            }
        }
    }

    let mut best = Vec::new();
    for opt in &config.optimizers {
        for &b in &config.batch_sizes {
            let group: Vec<&CellStats> = cells
                .iter()
                .filter(|c| c.optimizer == opt.name && c.batch_size == b)
                .collect();
            let selected = select_best_cell(&group);
            best.push(match selected {
                Some(c) => BestSelection {
                    optimizer: opt.name.clone(),
                    batch_size: b,
                    lr: Some(c.lr),
                    mean_final_loss: c.mean_final_loss,
                    std_final_loss: c.std_final_loss,
                },
                None => BestSelection {
                    optimizer: opt.name.clone(),
                    batch_size: b,
                    lr: None,
                    mean_final_loss: None,
                    std_final_loss: None,
                },
            });
        }
    }

    Ok(SweepResult { cells, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub mus: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub batch_sizes: Vec<u32>,
    pub n_samples: u64,
    pub seed: u64,
}

impl DriftConfig {
    /// The 45-cell validation grid for the erf drift identity.
    pub fn theorem_grid(n_samples: u64, seed: u64) -> Self {
        DriftConfig {
            mus: vec![-1.0, -0.1, 0.0, 0.1, 1.0],
            sigmas: vec![0.5, 1.0, 2.0],
            batch_sizes: vec![1, 4, 16],
            n_samples,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftRow {
    pub mu: f64,
    pub sigma: f64,
    pub batch_size: u32,
    pub estimate: f64,
    pub std_error: f64,
    pub prediction: f64,
    pub pass: bool,
}

/// Monte Carlo sign expectations vs. the erf prediction over a (mu, sigma,
/// B) grid. A cell passes when |estimate - prediction| <= 4 SE (plus a
/// 1e-12 absolute slack for saturated cells whose sample variance is zero).
pub fn drift_report(config: &DriftConfig) -> Result<Vec<DriftRow>> {
    for &s in &config.sigmas {
        if !(s > 0.0) {
            return Err(Error::InvalidConfig("sigma must be positive".into()));
        }
    }
    let mut grid = Vec::new();
    for &mu in &config.mus {
        for &sigma in &config.sigmas {
            for &b in &config.batch_sizes {
                grid.push((mu, sigma, b));
            }
        }
    }
    Ok(grid
        .par_iter()
        .enumerate()
        .map(|(i, &(mu, sigma, b))| {
            let mut rng = Rng::from_seed(derive_seed(config.seed, i as u64));
            let est = expected_sign_mc(mu, sigma, b, config.n_samples, &mut rng);
            let prediction = erf_drift_prediction(mu, sigma, b);
            DriftRow {
                mu,
                sigma,
                batch_size: b,
                estimate: est.mean,
                std_error: est.std_error,
                prediction,
                pass: (est.mean - prediction).abs() <= 4.0 * est.std_error + 1e-12,
            }
        })
        .collect())
}

pub fn write_drift_csv(rows: &[DriftRow], out: &mut impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mu", "sigma", "batch_size", "estimate", "std_error", "prediction", "pass"])?;
    for r in rows {
        w.write_record([
            r.mu.to_string(),
            r.sigma.to_string(),
            r.batch_size.to_string(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            r.prediction.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeKind {
    Sgd,
    SignSgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeSimConfig {
    pub model: SdeKind,
    pub problem: ProblemSpec,
    /// Per-coordinate gradient noise standard deviation at batch size 1.
    pub sigma: f64,
    pub batch_size: u32,
    pub eta: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    pub steps: u64,
    pub seed: u64,
    #[serde(default)]
    pub init: InitSpec,
}

/// Builds the configured SDE model over the problem's full gradient.
pub fn build_sde(config: &SdeSimConfig) -> Result<SdeModel> {
    let problem = config.problem.build()?;
    let noise = NoiseModel::isotropic(problem.dim(), config.sigma, config.batch_size);
    let grad = move |x: &ParamVector| problem.gradient(x);
    let mut model = match config.model {
        SdeKind::Sgd => sgd_sde(grad, &noise, config.eta)?,
        SdeKind::SignSgd => signsgd_sde(grad, &noise, config.eta)?,
    };
    if let Some(dt) = config.dt {
        model.dt = dt;
    }
    Ok(model)
}

/// Simulates one trajectory and returns (states, per-state losses).
pub fn sde_sim(config: &SdeSimConfig) -> Result<(Vec<ParamVector>, Vec<f64>)> {
    let problem = config.problem.build()?;
    let model = build_sde(config)?;
    let mut rng = Rng::from_seed(config.seed);
    let x0 = config.init.sample(problem.dim(), &mut rng);
    let trajectory = euler_maruyama(&model, &x0, config.steps, &mut rng)?;
    let losses = trajectory
        .iter()
        .map(|x| problem.loss(x))
        .collect::<Result<Vec<f64>>>()?;
    Ok((trajectory, losses))
}

pub fn write_trajectory_csv(
    trajectory: &[ParamVector],
    losses: &[f64],
    dt: f64,
    out: &mut impl Write,
) -> Result<()> {
    let dim = trajectory.first().map_or(0, |x| x.dim());
    let mut header = vec!["step".to_string(), "time".into(), "loss".into()];
    for i in 0..dim {
        header.push(format!("x_{i}"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for (k, (x, loss)) in trajectory.iter().zip(losses).enumerate() {
        let mut fields = vec![
            k.to_string(),
            (k as f64 * dt).to_string(),
            loss.to_string(),
        ];
        for v in x.iter() {
            fields.push(v.to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Hessian entries plus the sorted spectrum, for `build-problem`.
pub fn write_problem_csv(
    problem: &BlockQuadraticProblem,
    hessian_out: &mut impl Write,
    spectrum_out: &mut impl Write,
) -> Result<()> {
    let d = problem.dim();
    let mut w = csv::Writer::from_writer(hessian_out);
    w.write_record((0..d).map(|j| format!("h_{j}")))?;
    for i in 0..d {
        w.write_record((0..d).map(|j| problem.h.get(i, j).to_string()))?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(spectrum_out);
    w.write_record(["index", "eigenvalue"])?;
    for (i, l) in problem.h.eigenvalues_sorted().iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
