//! Block-quadratic testbeds with heterogeneous/homogeneous Hessian layouts
//! and the isotropic noisy quadratic.
//!
//! The block-quadratic loss is L(w) = 1/2 w^T H w with H block-diagonal,
//! each 3x3 block an independently Haar-rotated diagonal of eigenvalues.
//! Stochasticity comes from subsampling rows of the design matrix
//! X = H^{1/2} (so X^T X = H and the full-batch gradient is H w).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::math::{compensated_sum, ParamVector, Rng, SymmetricMatrix};
use crate::{Error, Result};

/// Heterogeneous layout: eigenvalues of similar magnitude share a block
/// (transformer-like).
pub const HET_BLOCKS: [[f64; 3]; 3] = [[1.0, 2.0, 3.0], [99.0, 100.0, 101.0], [4998.0, 4999.0, 5000.0]];

/// Homogeneous layout: each block mixes all magnitudes (CNN-like). Same
/// eigenvalue multiset as [`HET_BLOCKS`].
pub const HOM_BLOCKS: [[f64; 3]; 3] = [[1.0, 99.0, 4998.0], [2.0, 100.0, 4999.0], [3.0, 101.0, 5000.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Heterogeneous,
    Homogeneous,
}

/// Per-block rotation mode. `Identity` is a test hook that keeps H diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationMode {
    #[default]
    Haar,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockQuadraticSpec {
    pub eigenvalue_blocks: Vec<Vec<f64>>,
    pub layout: Layout,
    pub rotation_seed: u64,
    #[serde(default)]
    pub rotation: RotationMode,
}

impl BlockQuadraticSpec {
    pub fn heterogeneous(rotation_seed: u64) -> Self {
        BlockQuadraticSpec {
            eigenvalue_blocks: HET_BLOCKS.iter().map(|b| b.to_vec()).collect(),
            layout: Layout::Heterogeneous,
            rotation_seed,
            rotation: RotationMode::Haar,
        }
    }

    pub fn homogeneous(rotation_seed: u64) -> Self {
        BlockQuadraticSpec {
            eigenvalue_blocks: HOM_BLOCKS.iter().map(|b| b.to_vec()).collect(),
            layout: Layout::Homogeneous,
            rotation_seed,
            rotation: RotationMode::Haar,
        }
    }

    pub fn from_layout(layout: Layout, rotation_seed: u64) -> Self {
        match layout {
            Layout::Heterogeneous => Self::heterogeneous(rotation_seed),
            Layout::Homogeneous => Self::homogeneous(rotation_seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalue_blocks.iter().map(|b| b.len()).sum()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.eigenvalue_blocks.iter().map(|b| b.len()).collect()
    }
}

/// A built block-quadratic problem: Hessian H, design matrix X = H^{1/2},
/// and the block partition used for per-block diagnostics. Immutable after
/// construction and safely shareable across runs.
#[derive(Debug, Clone)]
pub struct BlockQuadraticProblem {
    pub h: SymmetricMatrix,
    pub x: SymmetricMatrix,
    pub n_rows: usize,
    pub block_sizes: Vec<usize>,
}

/// Random orthogonal n x n matrix sampled from the Haar measure by
/// eigendecomposition of A A^T with A iid standard Gaussian.
///
/// Sign convention: the first nonzero entry of each column is made positive,
/// so the rotation is a pure function of the rng state. Degenerate draws
/// (eigenvalue gaps at machine precision, or an orthogonality defect) are
/// resampled with the advanced rng state.
pub fn haar_block_rotation(rng: &mut Rng, n: usize) -> DMatrix<f64> {
    assert!(n >= 1);
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
        let m = &a * a.transpose();
        let eig = m.symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1.0);
        let mut degenerate = false;
        for i in 0..n {
            for j in (i + 1)..n {
                if (eig.eigenvalues[i] - eig.eigenvalues[j]).abs() <= 1e-12 * scale {
                    degenerate = true;
                }
            }
        }
        if degenerate {
            continue;
        }
        let mut r = eig.eigenvectors;
        for j in 0..n {
            let lead = (0..n).find(|&i| r[(i, j)] != 0.0).unwrap_or(0);
            if r[(lead, j)] < 0.0 {
                for i in 0..n {
                    r[(i, j)] = -r[(i, j)];
                }
            }
        }
        let defect = (r.transpose() * &r - DMatrix::identity(n, n)).norm();
        if defect <= 1e-10 {
            return r;
        }
    }
}

/// Builds the block-diagonal Hessian and its symmetric PSD square root.
pub fn build_hessian(spec: &BlockQuadraticSpec) -> Result<BlockQuadraticProblem> {
    let dim = spec.dim();
    if dim == 0 {
        return Err(Error::InvalidConfig("empty eigenvalue blocks".into()));
    }
    for block in &spec.eigenvalue_blocks {
        for &l in block {
            if !(l > 0.0) {
                return Err(Error::NonPositiveEigenvalue(l));
            }
        }
    }
    let mut rng = Rng::from_seed(spec.rotation_seed);
    let mut h = DMatrix::zeros(dim, dim);
    let mut offset = 0;
    for block in &spec.eigenvalue_blocks {
        let n = block.len();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(block));
        let hb = match spec.rotation {
            RotationMode::Haar => {
                let r = haar_block_rotation(&mut rng, n);
                &r * d * r.transpose()
            }
            RotationMode::Identity => d,
        };
        h.view_mut((offset, offset), (n, n)).copy_from(&hb);
        offset += n;
    }
    let h = SymmetricMatrix::symmetrized(&h);
    let x = h.sqrt_psd()?;
    Ok(BlockQuadraticProblem {
        h,
        x,
        n_rows: dim,
        block_sizes: spec.block_sizes(),
    })
}

impl BlockQuadraticProblem {
    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// L(w) = 1/2 w^T H w.
    pub fn loss(&self, w: &ParamVector) -> Result<f64> {
        Ok(0.5 * self.h.quadratic_form(w)?)
    }

    /// Full-batch gradient H w.
    pub fn gradient(&self, w: &ParamVector) -> Result<ParamVector> {
        self.h.matvec(w)
    }

    /// Exact Hessian-vector product H v.
    pub fn hessian_vector(&self, v: &ParamVector) -> Result<ParamVector> {
        self.h.matvec(v)
    }

    /// Uniform-with-replacement row indices; B may exceed n_rows.
    pub fn sample_batch(&self, rng: &mut Rng, batch_size: usize) -> Result<Vec<usize>> {
        if batch_size == 0 {
            return Err(Error::ZeroBatchSize);
        }
        Ok((0..batch_size).map(|_| rng.index(self.n_rows)).collect())
    }

    /// (n/B) sum_{i in batch} (x_i^T w) x_i over rows x_i of X. Expectation
    /// over uniform row sampling is H w.
    pub fn stochastic_gradient(&self, w: &ParamVector, batch: &[usize]) -> Result<ParamVector> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        w.check_dim(self.dim())?;
        let mut g = ParamVector::zeros(self.dim());
        for &i in batch {
            let row = self.x.row(i);
            let coeff = row.dot(w)?;
            g.axpy(coeff, &row)?;
        }
        let scale = self.n_rows as f64 / batch.len() as f64;
        Ok(g.scale(scale))
    }
}

/// Isotropic noisy quadratic: f(x) = 1/2 ||x||^2 with injected Gaussian
/// gradient noise of per-coordinate standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyIsotropicSpec {
    #[serde(default = "default_noisy_dim")]
    pub dim: usize,
    pub sigma: f64,
}

fn default_noisy_dim() -> usize {
    100
}

impl NoisyIsotropicSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidConfig("dimension must be >= 1".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidConfig("sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn loss(&self, x: &ParamVector) -> Result<f64> {
        x.check_dim(self.dim)?;
        Ok(0.5 * compensated_sum(x.iter().map(|v| v * v)))
    }

    pub fn gradient(&self, x: &ParamVector) -> Result<ParamVector> {
        x.check_dim(self.dim)?;
        Ok(x.clone())
    }

    /// x + sigma * z, z ~ N(0, I).
    pub fn noisy_gradient(&self, x: &ParamVector, rng: &mut Rng) -> Result<ParamVector> {
        x.check_dim(self.dim)?;
        if self.sigma == 0.0 {
            return Ok(x.clone());
        }
        let mut g = x.clone();
        let z = rng.normal_vector(self.dim);
        g.axpy(self.sigma, &z)?;
        Ok(g)
    }
}

/// Central finite difference (g(x+eps v) - g(x-eps v)) / (2 eps) for generic
/// differentiable problems; quadratics use the exact product instead.
pub fn hessian_vector_fd(
    grad: impl Fn(&ParamVector) -> Result<ParamVector>,
    x: &ParamVector,
    v: &ParamVector,
) -> Result<ParamVector> {
    v.check_dim(x.dim())?;
    if v.norm() == 0.0 {
        return Ok(ParamVector::zeros(x.dim()));
    }
    let eps = f64::EPSILON.sqrt() * (1.0 + x.norm()) / v.norm().max(1e-30);
    let mut xp = x.clone();
    xp.axpy(eps, v)?;
    let mut xm = x.clone();
    xm.axpy(-eps, v)?;
    let gp = grad(&xp)?;
    let gm = grad(&xm)?;
    Ok(gp.sub(&gm)?.scale(0.5 / eps))
}
