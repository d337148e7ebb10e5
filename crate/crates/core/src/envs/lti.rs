//! Linear time-invariant environment with Gaussian process noise; the
//! ground-truth system for tests where local fitting and the optimal control
//! recursion must be exact.

use super::{psd_cholesky, ContinuousEnv, GaussianStart, QuadraticCost};
use crate::error::{DpiError, Result};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;

#[derive(Debug, Clone)]
pub struct LtiEnv {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DVector<f64>,
    noise_tril: Option<DMatrix<f64>>,
    cost: QuadraticCost,
    start: GaussianStart,
    horizon: usize,
    gamma: f64,
}

/// Exact linear-Gaussian dynamics `s' = A s + B a + c + noise`.
#[allow(clippy::too_many_arguments)]
pub fn lti_env(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DVector<f64>,
    sigma: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    target: DVector<f64>,
    horizon: usize,
    gamma: f64,
) -> Result<LtiEnv> {
    let d_s = a.nrows();
    let d_a = b.ncols();
    if a.ncols() != d_s || b.nrows() != d_s || c.len() != d_s {
        return Err(DpiError::invalid("dynamics dimensions inconsistent"));
    }
    if sigma.nrows() != d_s || sigma.ncols() != d_s {
        return Err(DpiError::invalid("noise covariance dimensions inconsistent"));
    }
    if q.nrows() != d_s || r.nrows() != d_a {
        return Err(DpiError::invalid("cost dimensions inconsistent"));
    }
    if horizon == 0 || !(gamma > 0.0 && gamma < 1.0) {
        return Err(DpiError::invalid("need horizon >= 1 and gamma in (0,1)"));
    }
    let noise_tril = if sigma.iter().all(|x| *x == 0.0) {
        None
    } else {
        Some(psd_cholesky(&sigma)?)
    };
    let cost = QuadraticCost::new(q, r, target)?;
    let start = GaussianStart::diagonal(DVector::zeros(d_s), &DVector::from_element(d_s, 1.0))?;
    Ok(LtiEnv {
        a,
        b,
        c,
        noise_tril,
        cost,
        start,
        horizon,
        gamma,
    })
}

impl LtiEnv {
    pub fn with_start(mut self, start: GaussianStart) -> Self {
        self.start = start;
        self
    }

    pub fn dynamics(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DVector<f64>) {
        (&self.a, &self.b, &self.c)
    }
}

impl ContinuousEnv for LtiEnv {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn action_dim(&self) -> usize {
        self.b.ncols()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn cost(&self) -> &QuadraticCost {
        &self.cost
    }

    fn start(&self) -> &GaussianStart {
        &self.start
    }

    fn step(
        &self,
        s: &DVector<f64>,
        a: &DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<DVector<f64>> {
        if s.len() != self.state_dim() || a.len() != self.action_dim() {
            return Err(DpiError::invalid("state/action dimension mismatch"));
        }
        let mut next = &self.a * s + &self.b * a + &self.c;
        if let Some(tril) = &self.noise_tril {
            next += tril * super::standard_normal_vector(s.len(), rng);
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_env() -> LtiEnv {
        lti_env(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 0.1,
            DVector::zeros(2),
            10,
            0.99,
        )
        .unwrap()
    }

    #[test]
    fn identity_dynamics_add_action() {
        let env = identity_env();
        let mut rng = crate::seeding::master_rng(0);
        let s = DVector::from_vec(vec![1.0, -2.0]);
        let a = DVector::from_vec(vec![0.5, 0.25]);
        let next = env.step(&s, &a, &mut rng).unwrap();
        assert_eq!(next, DVector::from_vec(vec![1.5, -1.75]));
    }

    #[test]
    fn scalar_zero_action_is_power_iteration() {
        let env = lti_env(
            DMatrix::from_element(1, 1, 0.8),
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::zeros(1, 1),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            5,
            0.9,
        )
        .unwrap();
        let mut rng = crate::seeding::master_rng(1);
        let mut s = DVector::from_element(1, 2.0);
        for t in 1..=5 {
            s = env.step(&s, &DVector::zeros(1), &mut rng).unwrap();
            assert!((s[0] - 2.0 * 0.8f64.powi(t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(lti_env(
            DMatrix::identity(2, 2),
            DMatrix::identity(3, 1),
            DVector::zeros(2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
            DVector::zeros(2),
            10,
            0.99,
        )
        .is_err());
    }
}
