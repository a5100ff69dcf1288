//! Weak-approximation SDE models of SGD and SignSGD, an Euler-Maruyama
//! integrator, and a Monte Carlo oracle for the erf drift identity
//! E[sign(m)] = erf(sqrt(B/2) mu / sigma) with m ~ N(mu, sigma^2/B).

use crate::math::{erf, sign, ParamVector, Rng};
use crate::{Error, Result};

/// Diagonal gradient-noise model: per-coordinate standard deviations at
/// batch size 1 (square roots of the diagonal of the batch-1 covariance)
/// and the batch size B.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub sigma_diag: ParamVector,
    pub batch_size: u32,
}

impl NoiseModel {
    pub fn isotropic(dim: usize, sigma: f64, batch_size: u32) -> Self {
        NoiseModel {
            sigma_diag: ParamVector::new(vec![sigma; dim]),
            batch_size,
        }
    }
}

type StateFn = Box<dyn Fn(&ParamVector) -> Result<ParamVector> + Send + Sync>;

/// Drift/diffusion pair with the learning rate and integrator time step.
/// dt defaults to eta, the standard time identification for these models.
pub struct SdeModel {
    drift: StateFn,
    diffusion_diag: StateFn,
    pub eta: f64,
    pub dt: f64,
}

impl SdeModel {
    pub fn drift(&self, x: &ParamVector) -> Result<ParamVector> {
        (self.drift)(x)
    }

    pub fn diffusion_diag(&self, x: &ParamVector) -> Result<ParamVector> {
        (self.diffusion_diag)(x)
    }
}

/// SDE model of SGD: drift -grad f(x), state-independent diagonal diffusion
/// sqrt(eta Sigma_ii / B). The drift does not depend on B; only the
/// diffusion does.
pub fn sgd_sde(
    grad: impl Fn(&ParamVector) -> Result<ParamVector> + Send + Sync + 'static,
    noise: &NoiseModel,
    eta: f64,
) -> Result<SdeModel> {
    if noise.batch_size == 0 {
        return Err(Error::ZeroBatchSize);
    }
    let b = noise.batch_size as f64;
    let diff: ParamVector = noise.sigma_diag.map(|s| (eta * s * s / b).sqrt());
    Ok(SdeModel {
        drift: Box::new(move |x| Ok(grad(x)?.scale(-1.0))),
        diffusion_diag: Box::new(move |_| Ok(diff.clone())),
        eta,
        dt: eta,
    })
}

/// SDE model of SignSGD: componentwise
///   drift_i     = -erf(sqrt(B/2) grad_i / sigma_i)
///   diffusion_i =  sqrt(eta (1 - erf(...)^2))
///
/// The erf argument is computed as (sqrt(B) * grad_i) / (sigma_i * sqrt(2)),
/// in that association, so drift(B, g) == drift(1, sqrt(B) * g) holds
/// bitwise. Requires strictly positive noise on every coordinate.
pub fn signsgd_sde(
    grad: impl Fn(&ParamVector) -> Result<ParamVector> + Send + Sync + 'static,
    noise: &NoiseModel,
    eta: f64,
) -> Result<SdeModel> {
    if noise.batch_size == 0 {
        return Err(Error::ZeroBatchSize);
    }
    for (i, s) in noise.sigma_diag.iter().enumerate() {
        if !(*s > 0.0) {
            return Err(Error::ZeroNoise(i));
        }
    }
    let b_sqrt = (noise.batch_size as f64).sqrt();
    let sigma = noise.sigma_diag.clone();
    let erf_of_grad = move |grad_fn: &dyn Fn(&ParamVector) -> Result<ParamVector>,
                            x: &ParamVector|
          -> Result<ParamVector> {
        let g = grad_fn(x)?;
        g.check_dim(sigma.dim())?;
        Ok(ParamVector::new(
            g.iter()
                .zip(sigma.iter())
                .map(|(gi, si)| erf((b_sqrt * gi) / (si * std::f64::consts::SQRT_2)))
                .collect(),
        ))
    };
    let grad = std::sync::Arc::new(grad);
    let grad2 = grad.clone();
    let e1 = erf_of_grad.clone();
    Ok(SdeModel {
        drift: Box::new(move |x| Ok(e1(&*grad, x)?.scale(-1.0))),
        diffusion_diag: Box::new(move |x| {
            let e = erf_of_grad(&*grad2, x)?;
            Ok(e.map(|v| (eta * (1.0 - v * v).max(0.0)).sqrt()))
        }),
        eta,
        dt: eta,
    })
}

/// Euler-Maruyama: x_{k+1} = x_k + drift dt + diffusion sqrt(dt) z_k.
/// Returns the full trajectory (steps + 1 states); aborts with the step
/// index if the state goes non-finite.
pub fn euler_maruyama(
    model: &SdeModel,
    x0: &ParamVector,
    steps: u64,
    rng: &mut Rng,
) -> Result<Vec<ParamVector>> {
    assert!(model.dt > 0.0, "dt must be positive");
    let sqrt_dt = model.dt.sqrt();
    let mut trajectory = Vec::with_capacity(steps as usize + 1);
    let mut x = x0.clone();
    trajectory.push(x.clone());
    for step in 0..steps {
        let drift = model.drift(&x)?;
        let diff = model.diffusion_diag(&x)?;
        let z = rng.normal_vector(x.dim());
        for i in 0..x.dim() {
            x[i] += drift[i] * model.dt + diff[i] * sqrt_dt * z[i];
        }
        if !x.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
        trajectory.push(x.clone());
    }
    Ok(trajectory)
}

/// Monte Carlo estimate of E[sign(m)], m ~ N(mu, sigma^2/B), with its
/// standard error.
#[derive(Debug, Clone, Copy)]
pub struct SignEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

pub fn expected_sign_mc(
    mu: f64,
    sigma: f64,
    batch_size: u32,
    n_samples: u64,
    rng: &mut Rng,
) -> SignEstimate {
    assert!(n_samples >= 1);
    assert!(sigma > 0.0);
    assert!(batch_size >= 1);
    let scale = sigma / (batch_size as f64).sqrt();
    let mut sum = 0.0;
    for _ in 0..n_samples {
        sum += sign(mu + scale * rng.standard_normal());
    }
    let n = n_samples as f64;
    let mean = sum / n;
    // sign^2 = 1 a.s., so the sample variance is (1 - mean^2) n/(n-1)
    let var = if n_samples > 1 {
        (1.0 - mean * mean).max(0.0) * n / (n - 1.0)
    } else {
        0.0
    };
    SignEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_samples,
    }
}

/// erf prediction for the sign expectation at (mu, sigma, B).
pub fn erf_drift_prediction(mu: f64, sigma: f64, batch_size: u32) -> f64 {
    let b_sqrt = (batch_size as f64).sqrt();
    erf((b_sqrt * mu) / (sigma * std::f64::consts::SQRT_2))
}
