//! Continuous-control environments with known quadratic costs.

mod cartpole;
mod collect;
mod lti;
mod robust;

pub use cartpole::{cartpole_step, CartpoleEnv, CartpoleParams};
pub use collect::{collect_trajectories, ContinuousPolicy, Episode, TrajectoryBatch};
pub use lti::{lti_env, LtiEnv};
pub use robust::make_robust_family;

use crate::error::{DpiError, Result};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

/// Quadratic stage cost `c(s, a) = (s - s*)^T Q (s - s*) + a^T R a` with
/// `Q` positive semidefinite and `R` positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    target: DVector<f64>,
}

impl QuadraticCost {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, target: DVector<f64>) -> Result<Self> {
        if !q.is_square() || !r.is_square() || q.nrows() != target.len() {
            return Err(DpiError::invalid("cost matrix dimensions inconsistent"));
        }
        let q = symmetrize(&q);
        let r = symmetrize(&r);
        let q_min = min_eigenvalue(&q);
        if q_min < -1e-10 {
            return Err(DpiError::invalid(format!(
                "Q must be positive semidefinite (min eigenvalue {q_min:.3e})"
            )));
        }
        let r_min = min_eigenvalue(&r);
        if r_min <= 1e-12 {
            return Err(DpiError::invalid(format!(
                "R must be positive definite (min eigenvalue {r_min:.3e})"
            )));
        }
        Ok(Self { q, r, target })
    }

    pub fn state_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn action_matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn eval(&self, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        let ds = s - &self.target;
        (ds.transpose() * &self.q * &ds)[(0, 0)] + (a.transpose() * &self.r * a)[(0, 0)]
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Gaussian start-state law.
#[derive(Debug, Clone)]
pub struct GaussianStart {
    mean: DVector<f64>,
    /// Lower-triangular scale; zero for a deterministic start.
    scale_tril: DMatrix<f64>,
}

impl GaussianStart {
    pub fn new(mean: DVector<f64>, covariance: &DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() != mean.len() {
            return Err(DpiError::invalid("start covariance dimensions inconsistent"));
        }
        let scale_tril = psd_cholesky(covariance)?;
        Ok(Self { mean, scale_tril })
    }

    pub fn diagonal(mean: DVector<f64>, std: &DVector<f64>) -> Result<Self> {
        if std.len() != mean.len() || std.iter().any(|s| *s < 0.0) {
            return Err(DpiError::invalid("start std must be nonnegative and match dims"));
        }
        let scale_tril = DMatrix::from_diagonal(std);
        Ok(Self { mean, scale_tril })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let z = standard_normal_vector(self.mean.len(), rng);
        &self.mean + &self.scale_tril * z
    }
}

/// Cholesky factor of a PSD matrix, tolerating zero (or numerically zero)
/// eigenvalues by clamping them before factoring.
pub(crate) fn psd_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().all(|x| *x == 0.0) {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    if let Some(chol) = symmetrize(m).cholesky() {
        return Ok(chol.l());
    }
    let eig = symmetrize(m).symmetric_eigen();
    if eig.eigenvalues.iter().any(|l| *l < -1e-8) {
        return Err(DpiError::invalid("matrix is not positive semidefinite"));
    }
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let half = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
    // `half * half^T = m`; not triangular, but only used as a sampling scale.
    Ok(half)
}

pub(crate) fn standard_normal_vector(n: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut *rng)))
}

/// A continuous environment: known quadratic cost, Gaussian start law,
/// stochastic (or deterministic) step dynamics, fixed horizon and discount.
pub trait ContinuousEnv: Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn gamma(&self) -> f64;
    fn cost(&self) -> &QuadraticCost;
    fn start(&self) -> &GaussianStart;
    /// Project a commanded action onto the actuator limits. Rollouts record
    /// the applied action so that fitted models, costs and densities all see
    /// the same variable.
    fn clip_action(&self, a: DVector<f64>) -> DVector<f64> {
        a
    }
    fn step(&self, s: &DVector<f64>, a: &DVector<f64>, rng: &mut dyn RngCore)
        -> Result<DVector<f64>>;
}
