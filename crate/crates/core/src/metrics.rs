//! Step diagnostics: gradient correlation, directional sharpness, the
//! second-order loss-change approximation, and clipped-coordinate fractions
//! (global and per-block).

use serde::{Deserialize, Serialize};

use crate::math::ParamVector;
use crate::{Error, Result};

/// Diagnostics for one applied update delta = x_{k+1} - x_k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// grad f(x_k)^T delta
    pub grad_corr: f64,
    /// 1/2 delta^T H delta
    pub dir_sharp: f64,
    /// grad_corr + dir_sharp (exact by construction)
    pub second_order_change: f64,
    pub loss_before: f64,
    pub loss_after: f64,
    pub clipped_fraction_global: f64,
    pub clipped_fraction_per_block: Vec<f64>,
}

impl StepDiagnostics {
    pub fn new(
        grad_corr: f64,
        dir_sharp: f64,
        loss_before: f64,
        loss_after: f64,
        clipped_fraction_global: f64,
        clipped_fraction_per_block: Vec<f64>,
    ) -> Self {
        StepDiagnostics {
            grad_corr,
            dir_sharp,
            second_order_change: grad_corr + dir_sharp,
            loss_before,
            loss_after,
            clipped_fraction_global,
            clipped_fraction_per_block,
        }
    }
}

/// First-order Taylor term: grad f(x_k)^T (x_{k+1} - x_k).
pub fn gradient_correlation(grad: &ParamVector, delta: &ParamVector) -> Result<f64> {
    grad.dot(delta)
}

/// Second-order Taylor term 1/2 delta^T (H delta), with the Hessian applied
/// through the supplied oracle (exact product on quadratics, finite
/// differences elsewhere).
pub fn directional_sharpness(
    delta: &ParamVector,
    hessian_vector: impl FnOnce(&ParamVector) -> Result<ParamVector>,
) -> Result<f64> {
    let h_delta = hessian_vector(delta)?;
    Ok(0.5 * delta.dot(&h_delta)?)
}

/// Fraction of coordinates with |v_i| > threshold, globally and per block of
/// a contiguous partition (block sizes must cover the vector exactly).
pub fn clipped_fraction(
    values: &ParamVector,
    threshold: f64,
    block_sizes: Option<&[usize]>,
) -> Result<(f64, Vec<f64>)> {
    assert!(threshold > 0.0, "threshold must be positive");
    let d = values.dim();
    let count = values.iter().filter(|v| v.abs() > threshold).count();
    let global = count as f64 / d as f64;
    let per_block = match block_sizes {
        None => vec![global],
        Some(sizes) => {
            let covered: usize = sizes.iter().sum();
            if covered != d {
                return Err(Error::PartitionMismatch { covered, dim: d });
            }
            let mut fractions = Vec::with_capacity(sizes.len());
            let mut offset = 0;
            for (k, &size) in sizes.iter().enumerate() {
                if size == 0 {
                    return Err(Error::EmptyBlock(k));
                }
                let block_count = values.as_slice()[offset..offset + size]
                    .iter()
                    .filter(|v| v.abs() > threshold)
                    .count();
                fractions.push(block_count as f64 / size as f64);
                offset += size;
            }
            fractions
        }
    };
    Ok((global, per_block))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{compensated_dot, Rng};
    use crate::optimizers::AdaptiveClipState;
    use crate::problems::{build_hessian, BlockQuadraticSpec};

    #[test]
    fn gradient_correlation_examples() {
        let grad = ParamVector::new(vec![1.0, 0.0]);
        let delta = ParamVector::new(vec![-1.0, 0.0]);
        assert_eq!(gradient_correlation(&grad, &delta).unwrap(), -1.0);

        // steepest descent: delta = -eta grad -> -eta ||grad||^2
        let g = ParamVector::new(vec![2.0, -3.0]);
        let eta = 0.1;
        let corr = gradient_correlation(&g, &g.scale(-eta)).unwrap();
        assert!((corr + eta * 13.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_correlation_matches_compensated_oracle() {
        let mut rng = Rng::from_seed(3);
        for _ in 0..20 {
            let a = rng.normal_vector(50);
            let b = rng.normal_vector(50);
            let got = gradient_correlation(&a, &b).unwrap();
            let oracle = compensated_dot(a.as_slice(), b.as_slice());
            assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
        }
    }

    #[test]
    fn directional_sharpness_identity_hessian() {
        let delta = ParamVector::new(vec![1.0, 1.0]);
        let s = directional_sharpness(&delta, |v| Ok(v.clone())).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn directional_sharpness_psd_nonnegative() {
        let p = build_hessian(&BlockQuadraticSpec::heterogeneous(1)).unwrap();
        let mut rng = Rng::from_seed(8);
        for _ in 0..20 {
            let delta = rng.normal_vector(9);
            let s = directional_sharpness(&delta, |v| p.hessian_vector(v)).unwrap();
            assert!(s >= -1e-12);
        }
    }

    #[test]
    fn taylor_exact_on_quadratics() {
        let p = build_hessian(&BlockQuadraticSpec::heterogeneous(4)).unwrap();
        let mut rng = Rng::from_seed(19);
        for _ in 0..100 {
            let w = rng.normal_vector(9);
            let delta = rng.normal_vector(9).scale(0.01);
            let grad = p.gradient(&w).unwrap();
            let corr = gradient_correlation(&grad, &delta).unwrap();
            let sharp = directional_sharpness(&delta, |v| p.hessian_vector(v)).unwrap();
            let w_next = w.add(&delta).unwrap();
            let dloss = p.loss(&w_next).unwrap() - p.loss(&w).unwrap();
            assert!(
                (dloss - (corr + sharp)).abs() <= 1e-10 * dloss.abs().max(1.0),
                "residual {}",
                (dloss - (corr + sharp)).abs()
            );
        }
    }

    #[test]
    fn descending_gd_has_negative_terms() {
        let p = build_hessian(&BlockQuadraticSpec::heterogeneous(2)).unwrap();
        let mut rng = Rng::from_seed(6);
        let mut w = rng.normal_vector(9);
        let eta = 1.0 / 10_000.0; // < 1/lambda_max
        for _ in 0..50 {
            let grad = p.gradient(&w).unwrap();
            let delta = grad.scale(-eta);
            let corr = gradient_correlation(&grad, &delta).unwrap();
            let sharp = directional_sharpness(&delta, |v| p.hessian_vector(v)).unwrap();
            assert!(corr < 0.0);
            assert!(corr + sharp < 0.0);
            w.axpy(1.0, &delta).unwrap();
        }
    }

    #[test]
    fn clipped_fraction_examples() {
        let v = ParamVector::new(vec![0.1, 0.2, 0.3, 0.4]);
        let (global, blocks) = clipped_fraction(&v, 1.0, Some(&[2, 2])).unwrap();
        assert_eq!(global, 0.0);
        assert_eq!(blocks, vec![0.0, 0.0]);

        let v = ParamVector::new(vec![2.0, 0.1, 3.0, 0.2]);
        let (global, _) = clipped_fraction(&v, 1.0, None).unwrap();
        assert_eq!(global, 0.5);
    }

    #[test]
    fn clipped_fraction_block_average_is_global() {
        let mut rng = Rng::from_seed(14);
        let v = rng.normal_vector(12);
        let sizes = [3, 4, 5];
        let (global, blocks) = clipped_fraction(&v, 0.5, Some(&sizes)).unwrap();
        // recover per-block counts (exact: fractions are count/size to 1 ulp)
        let total: f64 = blocks
            .iter()
            .zip(sizes)
            .map(|(f, s)| (f * s as f64).round())
            .sum();
        assert_eq!(total / 12.0, global);
    }

    #[test]
    fn clipped_fraction_empty_block_rejected() {
        let v = ParamVector::ones(3);
        assert!(matches!(
            clipped_fraction(&v, 1.0, Some(&[3, 0])),
            Err(Error::PartitionMismatch { .. }) | Err(Error::EmptyBlock(_))
        ));
        assert!(matches!(
            clipped_fraction(&v, 1.0, Some(&[0, 3])),
            Err(Error::EmptyBlock(0))
        ));
    }

    #[test]
    fn adaptive_clip_fraction_near_p() {
        // Alg-1-style buffer: fraction above the quantile threshold ~ p
        let mut rng = Rng::from_seed(9);
        let d = 1000;
        let p = 0.1;
        let m = rng.normal_vector(d);
        let abs = m.map(f64::abs);
        let tau = AdaptiveClipState::quantile_threshold(&abs, p);
        let (frac, _) = clipped_fraction(&m, tau, None).unwrap();
        assert!((frac - p).abs() <= 1.0 / d as f64 + 1e-12);
    }
}
