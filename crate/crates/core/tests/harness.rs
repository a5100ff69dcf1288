//! Integration tests for the experiment runner: logging contract, divergence
//! handling, sweep aggregation, and best-learning-rate selection.

use optgap::harness::{
    run, select_best_cell, sweep, CellStats, InitSpec, ProblemSpec, RunConfig, RunStat,
    SweepConfig, SweepOptimizer, DIVERGENCE_THRESHOLD,
};
use optgap::optimizers::OptimizerSpec;
use optgap::problems::{build_hessian, BlockQuadraticSpec, NoisyIsotropicSpec};
use optgap::schedulers::ScheduleSpec;
use optgap::Error;

fn sgd(lr: f64) -> OptimizerSpec {
    OptimizerSpec::Sgd {
        lr,
        beta: 0.0,
        clip: None,
    }
}

fn het_problem() -> ProblemSpec {
    ProblemSpec::BlockQuadratic(BlockQuadraticSpec::heterogeneous(2))
}

fn basic_config(lr: f64, steps: u64) -> RunConfig {
    RunConfig {
        problem: het_problem(),
        optimizer: sgd(lr),
        schedule: None,
        batch_size: 3,
        steps,
        seed: 4,
        log_every: 1,
        init: InitSpec::Gaussian { scale: 1.0 },
        metrics_enabled: true,
    }
}

#[test]
fn zero_steps_logs_only_the_initial_state() {
    let record = run(&basic_config(1e-5, 0)).unwrap();
    assert_eq!(record.rows.len(), 1);
    assert_eq!(record.rows[0].step, 0);
    assert_eq!(record.rows[0].loss, record.final_loss);
    assert!(record.diverged_at.is_none());
}

#[test]
fn log_every_thins_rows_but_keeps_the_last_step() {
    let mut config = basic_config(1e-5, 25);
    config.log_every = 10;
    let record = run(&config).unwrap();
    let steps: Vec<u64> = record.rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 10, 20, 25]);
}

#[test]
fn initial_row_matches_the_sampled_init_loss() {
    let config = basic_config(1e-5, 5);
    let record = run(&config).unwrap();
    // same seed => same init draw
    let problem = config.problem.build().unwrap();
    let mut rng = optgap::math::Rng::from_seed(config.seed);
    let x0 = rng.normal_vector(9);
    assert_eq!(record.rows[0].loss, problem.loss(&x0).unwrap());
}

#[test]
fn full_gradient_descent_is_monotone_below_the_stability_limit() {
    // eta < 2 / lambda_max on the exact gradient
    let problem = build_hessian(&BlockQuadraticSpec::heterogeneous(6)).unwrap();
    let mut rng = optgap::math::Rng::from_seed(3);
    let mut w = rng.normal_vector(9);
    let eta = 3e-4;
    let mut prev = problem.loss(&w).unwrap();
    for _ in 0..200 {
        let g = problem.gradient(&w).unwrap();
        w.axpy(-eta, &g).unwrap();
        let loss = problem.loss(&w).unwrap();
        assert!(loss <= prev + 1e-12, "loss increased: {prev} -> {loss}");
        prev = loss;
    }
}

#[test]
fn unstable_run_reports_the_divergence_step() {
    let record = run(&basic_config(1.0, 100)).unwrap();
    let at = record.diverged_at.expect("run should diverge");
    assert!(at >= 1);
    let last = record.rows.last().unwrap();
    assert_eq!(last.step, at);
    assert!(!last.loss.is_finite() || last.loss > DIVERGENCE_THRESHOLD);
}

#[test]
fn config_validation_errors() {
    let mut config = basic_config(1e-5, 10);
    config.log_every = 0;
    assert!(matches!(run(&config), Err(Error::InvalidConfig(_))));

    let mut config = basic_config(1e-5, 10);
    config.batch_size = 0;
    assert!(matches!(run(&config), Err(Error::ZeroBatchSize)));

    let mut config = basic_config(1e-5, 10);
    config.schedule = Some(ScheduleSpec::constant(1e-5, 5)); // shorter than the run
    assert!(matches!(run(&config), Err(Error::InvalidConfig(_))));
}

#[test]
fn metrics_predict_the_observed_loss_change() {
    let record = run(&basic_config(1e-5, 30)).unwrap();
    for pair in record.rows.windows(2) {
        let (prev, row) = (&pair[0], &pair[1]);
        let dloss = row.loss - prev.loss;
        let predicted = row.grad_corr + row.dir_sharp;
        assert!(
            (dloss - predicted).abs() <= 1e-10 * dloss.abs().max(1.0),
            "step {}: {dloss} vs {predicted}",
            row.step
        );
    }
}

#[test]
fn sweep_cell_stats_match_standalone_runs() {
    let config = SweepConfig {
        problem: ProblemSpec::NoisyIsotropic(NoisyIsotropicSpec { dim: 10, sigma: 0.5 }),
        optimizers: vec![SweepOptimizer {
            name: "sgd".into(),
            spec: sgd(0.0),
            learning_rates: vec![0.05, 0.1],
        }],
        batch_sizes: vec![1, 4],
        seeds: vec![0, 1, 2],
        steps: 50,
        schedule: None,
        init: InitSpec::Gaussian { scale: 1.0 },
        metrics_enabled: false,
    };
    let result = sweep(&config, None).unwrap();
    assert_eq!(result.cells.len(), 4);
    for cell in &result.cells {
        assert_eq!(cell.runs.len(), 3);
        // recompute each run independently and the cell mean from it
        let mut finals = Vec::new();
        for stat in &cell.runs {
            let rerun = run(&RunConfig {
                problem: config.problem.clone(),
                optimizer: sgd(cell.lr),
                schedule: None,
                batch_size: cell.batch_size,
                steps: config.steps,
                seed: stat.seed,
                log_every: 1,
                init: config.init,
                metrics_enabled: false,
            })
            .unwrap();
            assert_eq!(rerun.final_loss, stat.final_loss);
            assert_eq!(rerun.diverged_at, stat.diverged_at);
            if rerun.diverged_at.is_none() {
                finals.push(rerun.final_loss);
            }
        }
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let got = cell.mean_final_loss.unwrap();
        assert!((got - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }
}

fn cell(lr: f64, finals: &[f64], n_diverged: usize) -> CellStats {
    let runs: Vec<RunStat> = finals
        .iter()
        .enumerate()
        .map(|(i, &f)| RunStat {
            seed: i as u64,
            final_loss: f,
            diverged_at: if i < n_diverged { Some(1) } else { None },
        })
        .collect();
    let completed: Vec<f64> = runs
        .iter()
        .filter(|r| r.diverged_at.is_none())
        .map(|r| r.final_loss)
        .collect();
    let mean = if completed.is_empty() {
        None
    } else {
        Some(completed.iter().sum::<f64>() / completed.len() as f64)
    };
    CellStats {
        optimizer: "sgd".into(),
        batch_size: 1,
        lr,
        runs,
        mean_final_loss: mean,
        std_final_loss: mean.map(|_| 0.0),
        n_diverged,
    }
}

#[test]
fn best_selection_prefers_lowest_stable_mean() {
    let a = cell(0.01, &[3.0, 3.0, 3.0, 3.0], 0);
    let b = cell(0.1, &[1.0, 1.0, 1.0, 1.0], 0);
    let picked = select_best_cell(&[&a, &b]).unwrap();
    assert_eq!(picked.lr, 0.1);
}

#[test]
fn best_selection_falls_back_to_largest_stable_lr() {
    // lowest mean comes from a cell where 3/4 seeds diverged
    let stable_small = cell(0.01, &[5.0, 5.0, 5.0, 5.0], 0);
    let stable_large = cell(0.05, &[4.0, 4.0, 4.0, 4.0], 0);
    let unstable = cell(0.5, &[1e9, 1e9, 1e9, 0.1], 3);
    let picked = select_best_cell(&[&stable_small, &stable_large, &unstable]).unwrap();
    assert_eq!(picked.lr, 0.05);
}

#[test]
fn best_selection_none_when_everything_diverged() {
    let a = cell(0.5, &[f64::INFINITY; 4], 4);
    let b = cell(1.0, &[f64::INFINITY; 4], 4);
    assert!(select_best_cell(&[&a, &b]).is_none());
}

#[test]
fn half_diverged_counts_as_stable() {
    let half = cell(0.1, &[1.0, 1.0, 2.0, 2.0], 2);
    assert!(half.is_stable());
    let majority = cell(0.1, &[1.0, 1.0, 2.0, 2.0], 3);
    assert!(!majority.is_stable());
}
