//! Update rules under study: momentum SGD (with raw-gradient global norm
//! clipping), Adam, SignSGD, signed momentum, adaptive momentum clipping,
//! and grafted updates.
//!
//! Momentum is heavy-ball throughout: m <- beta m + g, no (1-beta) damping.
//! Steppers return the update delta; the caller applies w <- w + delta so
//! diagnostics can inspect the update before it lands.

use serde::{Deserialize, Serialize};

use crate::math::{componentwise_sign, global_norm_clip, sign, ParamVector};
use crate::{Error, Result};

/// Per-step telemetry alongside the update.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub delta: ParamVector,
    pub grad_norm_pre_clip: f64,
    pub grad_norm_post_clip: f64,
    /// Set by adaptive momentum clipping: the quantile threshold and the
    /// momentum buffer before clipping.
    pub quantile_clip: Option<QuantileClip>,
}

#[derive(Debug, Clone)]
pub struct QuantileClip {
    pub threshold: f64,
    pub momentum_pre_clip: ParamVector,
}

impl StepOutput {
    fn plain(delta: ParamVector, pre: f64, post: f64) -> Self {
        StepOutput {
            delta,
            grad_norm_pre_clip: pre,
            grad_norm_post_clip: post,
            quantile_clip: None,
        }
    }
}

/// SGD with heavy-ball momentum; optional global norm clipping applied to
/// the raw gradient before the momentum update.
#[derive(Debug, Clone)]
pub struct SgdMomentumState {
    pub m: ParamVector,
    pub beta: f64,
    pub lr: f64,
    pub clip: Option<f64>,
}

impl SgdMomentumState {
    pub fn new(dim: usize, lr: f64, beta: f64, clip: Option<f64>) -> Self {
        SgdMomentumState {
            m: ParamVector::zeros(dim),
            beta,
            lr,
            clip,
        }
    }

    pub fn step(&mut self, g: &ParamVector) -> Result<StepOutput> {
        g.check_dim(self.m.dim())?;
        let pre = g.norm();
        let g_used = match self.clip {
            Some(c) => global_norm_clip(g, c),
            None => g.clone(),
        };
        let post = g_used.norm();
        self.m = self.m.scale(self.beta).add(&g_used)?;
        Ok(StepOutput::plain(self.m.scale(-self.lr), pre, post))
    }
}

/// Adam with bias correction; beta2 defaults to 0.95, eps to 1e-8.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ParamVector,
    pub v: ParamVector,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub lr: f64,
    pub clip: Option<f64>,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64, beta1: f64, beta2: f64, eps: f64, clip: Option<f64>) -> Self {
        AdamState {
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            beta1,
            beta2,
            eps,
            step: 0,
            lr,
            clip,
        }
    }

    pub fn step(&mut self, g: &ParamVector) -> Result<StepOutput> {
        g.check_dim(self.m.dim())?;
        let pre = g.norm();
        let g_used = match self.clip {
            Some(c) => global_norm_clip(g, c),
            None => g.clone(),
        };
        let post = g_used.norm();
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut delta = ParamVector::zeros(g.dim());
        for i in 0..g.dim() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g_used[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g_used[i] * g_used[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            delta[i] = -self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(StepOutput::plain(delta, pre, post))
    }
}

/// SignSGD: delta = -lr * sign(g).
#[derive(Debug, Clone)]
pub struct SignSgdState {
    pub lr: f64,
    dim: usize,
}

impl SignSgdState {
    pub fn new(dim: usize, lr: f64) -> Self {
        SignSgdState { lr, dim }
    }

    pub fn step(&mut self, g: &ParamVector) -> Result<StepOutput> {
        g.check_dim(self.dim)?;
        let pre = g.norm();
        Ok(StepOutput::plain(
            componentwise_sign(g).scale(-self.lr),
            pre,
            pre,
        ))
    }
}

/// Signed momentum: delta = -lr * sign(beta m + g).
#[derive(Debug, Clone)]
pub struct SignedMomentumState {
    pub m: ParamVector,
    pub beta: f64,
    pub lr: f64,
}

impl SignedMomentumState {
    pub fn new(dim: usize, lr: f64, beta: f64) -> Self {
        SignedMomentumState {
            m: ParamVector::zeros(dim),
            beta,
            lr,
        }
    }

    pub fn step(&mut self, g: &ParamVector) -> Result<StepOutput> {
        g.check_dim(self.m.dim())?;
        let pre = g.norm();
        self.m = self.m.scale(self.beta).add(g)?;
        Ok(StepOutput::plain(
            componentwise_sign(&self.m).scale(-self.lr),
            pre,
            pre,
        ))
    }
}

/// SGD with adaptive momentum clipping: the momentum buffer is clipped
/// coordinatewise at the (1-p)-quantile of |m| each step.
#[derive(Debug, Clone)]
pub struct AdaptiveClipState {
    pub m: ParamVector,
    pub beta: f64,
    pub lr: f64,
    pub p: f64,
}

impl AdaptiveClipState {
    pub fn new(dim: usize, lr: f64, beta: f64, p: f64) -> Result<Self> {
        if !(0.0 < p && p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "clipping fraction p must be in (0,1), got {p}"
            )));
        }
        Ok(AdaptiveClipState {
            m: ParamVector::zeros(dim),
            beta,
            lr,
            p,
        })
    }

    /// Quantile rule: tau is the k-th smallest of |m| with k = ceil((1-p)d).
    /// Ties share the threshold: coordinates equal to tau are left unclipped.
    pub fn quantile_threshold(abs_m: &ParamVector, p: f64) -> f64 {
        let d = abs_m.dim();
        let k = ((1.0 - p) * d as f64).ceil() as usize;
        let k = k.clamp(1, d);
        let mut sorted: Vec<f64> = abs_m.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted[k - 1]
    }

    pub fn step(&mut self, g: &ParamVector) -> Result<StepOutput> {
        g.check_dim(self.m.dim())?;
        let pre = g.norm();
        self.m = self.m.scale(self.beta).add(g)?;
        let momentum_pre_clip = self.m.clone();
        let abs_m = self.m.map(f64::abs);
        let tau = Self::quantile_threshold(&abs_m, self.p);
        let clipped = self.m.map(|v| sign(v) * v.abs().min(tau));
        Ok(StepOutput {
            delta: clipped.scale(-self.lr),
            grad_norm_pre_clip: pre,
            grad_norm_post_clip: pre,
            quantile_clip: Some(QuantileClip {
                threshold: tau,
                momentum_pre_clip,
            }),
        })
    }
}

/// Grafted update: direction of one optimizer, global magnitude of another.
/// Both sub-optimizers advance exactly one step on the same gradient.
#[derive(Debug, Clone)]
pub struct GraftState {
    pub direction: Box<Optimizer>,
    pub magnitude: Box<Optimizer>,
}

impl GraftState {
    pub fn step(&mut self, g: &ParamVector) -> Result<StepOutput> {
        let dir = self.direction.step(g)?;
        let mag = self.magnitude.step(g)?;
        let d_norm = dir.delta.norm();
        let delta = if d_norm == 0.0 {
            // magnitude discarded: no direction to scale
            ParamVector::zeros(g.dim())
        } else {
            dir.delta.scale(mag.delta.norm() / d_norm)
        };
        Ok(StepOutput {
            delta,
            grad_norm_pre_clip: dir.grad_norm_pre_clip,
            grad_norm_post_clip: dir.grad_norm_post_clip,
            quantile_clip: dir.quantile_clip,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd(SgdMomentumState),
    Adam(AdamState),
    SignSgd(SignSgdState),
    SignedMomentum(SignedMomentumState),
    AdaptiveClip(AdaptiveClipState),
    Graft(GraftState),
}

impl Optimizer {
    pub fn step(&mut self, g: &ParamVector) -> Result<StepOutput> {
        match self {
            Optimizer::Sgd(s) => s.step(g),
            Optimizer::Adam(s) => s.step(g),
            Optimizer::SignSgd(s) => s.step(g),
            Optimizer::SignedMomentum(s) => s.step(g),
            Optimizer::AdaptiveClip(s) => s.step(g),
            Optimizer::Graft(s) => s.step(g),
        }
    }

    /// Schedule hook; grafting forwards the rate to both sub-optimizers.
    pub fn set_lr(&mut self, lr: f64) {
        match self {
            Optimizer::Sgd(s) => s.lr = lr,
            Optimizer::Adam(s) => s.lr = lr,
            Optimizer::SignSgd(s) => s.lr = lr,
            Optimizer::SignedMomentum(s) => s.lr = lr,
            Optimizer::AdaptiveClip(s) => s.lr = lr,
            Optimizer::Graft(s) => {
                s.direction.set_lr(lr);
                s.magnitude.set_lr(lr);
            }
        }
    }

    /// Global-norm clip threshold, when configured on the top-level rule.
    pub fn clip_threshold(&self) -> Option<f64> {
        match self {
            Optimizer::Sgd(s) => s.clip,
            Optimizer::Adam(s) => s.clip,
            Optimizer::Graft(s) => s.direction.clip_threshold(),
            _ => None,
        }
    }
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.95
}

fn default_eps() -> f64 {
    1e-8
}

/// Serializable optimizer configuration (rule name + hyperparameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Sgd {
        lr: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default)]
        clip: Option<f64>,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default)]
        clip: Option<f64>,
    },
    SignSgd {
        lr: f64,
    },
    SignedMomentum {
        lr: f64,
        #[serde(default)]
        beta: f64,
    },
    AdaptiveClip {
        lr: f64,
        #[serde(default)]
        beta: f64,
        p: f64,
    },
    Graft {
        direction: Box<OptimizerSpec>,
        magnitude: Box<OptimizerSpec>,
    },
}

impl OptimizerSpec {
    pub fn build(&self, dim: usize) -> Result<Optimizer> {
        Ok(match self {
            OptimizerSpec::Sgd { lr, beta, clip } => {
                Optimizer::Sgd(SgdMomentumState::new(dim, *lr, *beta, *clip))
            }
            OptimizerSpec::Adam {
                lr,
                beta1,
                beta2,
                eps,
                clip,
            } => Optimizer::Adam(AdamState::new(dim, *lr, *beta1, *beta2, *eps, *clip)),
            OptimizerSpec::SignSgd { lr } => Optimizer::SignSgd(SignSgdState::new(dim, *lr)),
            OptimizerSpec::SignedMomentum { lr, beta } => {
                Optimizer::SignedMomentum(SignedMomentumState::new(dim, *lr, *beta))
            }
            OptimizerSpec::AdaptiveClip { lr, beta, p } => {
                Optimizer::AdaptiveClip(AdaptiveClipState::new(dim, *lr, *beta, *p)?)
            }
            OptimizerSpec::Graft {
                direction,
                magnitude,
            } => Optimizer::Graft(GraftState {
                direction: Box::new(direction.build(dim)?),
                magnitude: Box::new(magnitude.build(dim)?),
            }),
        })
    }

    /// Rebuilds the spec with a new peak learning rate (sweep grids).
    pub fn with_lr(&self, new_lr: f64) -> OptimizerSpec {
        let mut s = self.clone();
        match &mut s {
            OptimizerSpec::Sgd { lr, .. }
            | OptimizerSpec::Adam { lr, .. }
            | OptimizerSpec::SignSgd { lr }
            | OptimizerSpec::SignedMomentum { lr, .. }
            | OptimizerSpec::AdaptiveClip { lr, .. } => *lr = new_lr,
            OptimizerSpec::Graft {
                direction,
                magnitude,
            } => {
                *direction = Box::new(direction.with_lr(new_lr));
                *magnitude = Box::new(magnitude.with_lr(new_lr));
            }
        }
        s
    }

    pub fn peak_lr(&self) -> f64 {
        match self {
            OptimizerSpec::Sgd { lr, .. }
            | OptimizerSpec::Adam { lr, .. }
            | OptimizerSpec::SignSgd { lr }
            | OptimizerSpec::SignedMomentum { lr, .. }
            | OptimizerSpec::AdaptiveClip { lr, .. } => *lr,
            OptimizerSpec::Graft { direction, .. } => direction.peak_lr(),
        }
    }
}
