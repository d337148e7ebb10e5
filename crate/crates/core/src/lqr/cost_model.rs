//! Quadratic stage-cost models over the joint `(s, a)` vector.

use crate::envs::{QuadraticCost, TrajectoryBatch};
use crate::error::{DpiError, Result};
use crate::policy::GaussianPolicy;
use nalgebra::{DMatrix, DVector};

const LN_2PI: f64 = 1.8378770664093453;

/// One timestep's cost `c'(s, a) = z^T C z / 2 + g^T z + k`, `z = (s, a)`.
#[derive(Debug, Clone)]
pub struct QuadraticStage {
    pub c: DMatrix<f64>,
    pub g: DVector<f64>,
    pub k: f64,
}

impl QuadraticStage {
    pub fn eval(&self, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        let d_s = s.len();
        let d = self.g.len();
        let mut z = DVector::zeros(d);
        z.rows_mut(0, d_s).copy_from(s);
        z.rows_mut(d_s, d - d_s).copy_from(a);
        0.5 * (z.transpose() * &self.c * &z)[(0, 0)] + self.g.dot(&z) + self.k
    }
}

/// Time-varying quadratic cost model.
#[derive(Debug, Clone)]
pub struct QuadraticCostModel {
    pub stages: Vec<QuadraticStage>,
    state_dim: usize,
    action_dim: usize,
}

impl QuadraticCostModel {
    pub fn new(stages: Vec<QuadraticStage>, state_dim: usize, action_dim: usize) -> Self {
        Self { stages, state_dim, action_dim }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// The environment cost scaled by `1/mu`, replicated over a horizon.
    /// Exact (the cost is already quadratic); no policy term.
    pub fn from_env_cost(cost: &QuadraticCost, mu: f64, horizon: usize) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(DpiError::invalid("mu must be positive"));
        }
        let d_s = cost.state_matrix().nrows();
        let d_a = cost.action_matrix().nrows();
        let stage = env_cost_stage(cost, mu, d_s, d_a);
        Ok(Self {
            stages: vec![stage; horizon],
            state_dim: d_s,
            action_dim: d_a,
        })
    }
}

fn env_cost_stage(cost: &QuadraticCost, mu: f64, d_s: usize, d_a: usize) -> QuadraticStage {
    let d = d_s + d_a;
    let mut c = DMatrix::zeros(d, d);
    let mut g = DVector::zeros(d);
    let q = cost.state_matrix();
    let r = cost.action_matrix();
    let target = cost.target();
    c.view_mut((0, 0), (d_s, d_s)).copy_from(&(q * 2.0 / mu));
    c.view_mut((d_s, d_s), (d_a, d_a)).copy_from(&(r * 2.0 / mu));
    g.rows_mut(0, d_s).copy_from(&(-(q * target) * 2.0 / mu));
    let k = (target.transpose() * q * target)[(0, 0)] / mu;
    QuadraticStage { c, g, k }
}

/// Build the surrogate cost `c(s,a)/mu - log pi_n(a|s)` as an exactly
/// quadratic stage per timestep.
///
/// The negative log-density is quadratic in `a` but not in `s` unless the
/// policy mean is linear; the mean is linearized around the batch-mean state
/// of each timestep, which makes the quadratization exact for linear means
/// and exact at the anchor otherwise.
pub fn build_surrogate_cost(
    cost: &QuadraticCost,
    mu: f64,
    pi_n: &GaussianPolicy,
    batch: &TrajectoryBatch,
) -> Result<QuadraticCostModel> {
    if !(mu > 0.0) {
        return Err(DpiError::invalid("mu must be positive"));
    }
    if batch.num_episodes() == 0 || batch.horizon() == 0 {
        return Err(DpiError::invalid("batch is empty"));
    }
    let d_s = pi_n.state_dim();
    let d_a = pi_n.action_dim();
    if batch.state_dim() != d_s || batch.action_dim() != d_a {
        return Err(DpiError::invalid("batch/policy dimension mismatch"));
    }
    let variance = pi_n.variance();
    if variance.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(DpiError::numerical("policy covariance is singular or non-finite"));
    }
    let inv_var = variance.map(|v| 1.0 / v);
    let log_norm: f64 = pi_n
        .log_std()
        .iter()
        .map(|l| 0.5 * (2.0 * l + LN_2PI))
        .sum();

    let base = env_cost_stage(cost, mu, d_s, d_a);
    let horizon = batch.horizon();
    let stages = (0..horizon)
        .map(|t| {
            let anchor = batch.mean_state_at(t);
            let jac = pi_n.mean_state_jacobian(&anchor); // d_a x d_s
            let m_bar = pi_n.mean(&anchor);
            let r_vec = &jac * &anchor - &m_bar;

            // 0.5 * (Mz + r)^T S^{-1} (Mz + r) with M = [-J | I].
            let mut c = base.c.clone();
            let mut g = base.g.clone();
            let mut k = base.k + log_norm;
            // S^{-1} J and J^T S^{-1} J
            let mut sinv_j = jac.clone();
            for row in 0..d_a {
                for col in 0..d_s {
                    sinv_j[(row, col)] *= inv_var[row];
                }
            }
            let jt_sinv_j = jac.transpose() * &sinv_j;
            for r in 0..d_s {
                for cc in 0..d_s {
                    c[(r, cc)] += jt_sinv_j[(r, cc)];
                }
            }
            for r in 0..d_a {
                c[(d_s + r, d_s + r)] += inv_var[r];
                for cc in 0..d_s {
                    c[(d_s + r, cc)] -= sinv_j[(r, cc)];
                    c[(cc, d_s + r)] -= sinv_j[(r, cc)];
                }
            }
            let sinv_r = r_vec.component_mul(&inv_var);
            let jt_sinv_r = jac.transpose() * &sinv_r;
            for r in 0..d_s {
                g[r] -= jt_sinv_r[r];
            }
            for r in 0..d_a {
                g[d_s + r] += sinv_r[r];
            }
            k += 0.5 * r_vec.dot(&sinv_r);
            QuadraticStage { c, g, k }
        })
        .collect();
    Ok(QuadraticCostModel::new(stages, d_s, d_a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{collect_trajectories, lti_env, ContinuousEnv, GaussianStart};
    use crate::seeding;
    use rand_distr::{Distribution, StandardNormal};

    fn setup(policy: GaussianPolicy) -> (QuadraticCost, TrajectoryBatch, GaussianPolicy) {
        let env = lti_env(
            DMatrix::identity(3, 3) * 0.9,
            DMatrix::from_fn(3, 2, |r, c| if r == c { 1.0 } else { 0.2 }),
            DVector::zeros(3),
            DMatrix::identity(3, 3) * 0.01,
            DMatrix::identity(3, 3),
            DMatrix::identity(2, 2) * 0.3,
            DVector::from_vec(vec![0.5, -0.5, 0.0]),
            8,
            0.99,
        )
        .unwrap()
        .with_start(
            GaussianStart::diagonal(DVector::zeros(3), &DVector::from_element(3, 0.7)).unwrap(),
        );
        let batch = collect_trajectories(&env, &policy, 6, 3, "p").unwrap();
        (env.cost().clone(), batch, policy)
    }

    fn random_linear_policy(seed: u64) -> GaussianPolicy {
        let pol = GaussianPolicy::linear(3, 2, -0.4);
        let mut rng = seeding::master_rng(seed);
        let theta = DVector::from_fn(pol.param_count(), |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.3 * z
        });
        pol.with_params(&theta).unwrap()
    }

    #[test]
    fn linear_mean_quadratization_is_exact() {
        let (cost, batch, pol) = setup(random_linear_policy(3));
        let mu = 0.7;
        let model = build_surrogate_cost(&cost, mu, &pol, &batch).unwrap();
        let mut rng = seeding::master_rng(9);
        for t in [0usize, 3, 7] {
            for _ in 0..20 {
                let s = DVector::from_fn(3, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    2.0 * z
                });
                let a = DVector::from_fn(2, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    2.0 * z
                });
                let direct = cost.eval(&s, &a) / mu - pol.log_prob(&s, &a);
                let quad = model.stages[t].eval(&s, &a);
                assert!(
                    (direct - quad).abs() <= 1e-10 * direct.abs().max(1.0),
                    "t={t}: direct {direct} quad {quad}"
                );
            }
        }
    }

    #[test]
    fn huge_mu_leaves_only_policy_term() {
        let (cost, batch, pol) = setup(random_linear_policy(5));
        let model = build_surrogate_cost(&cost, 1e15, &pol, &batch).unwrap();
        let s = DVector::from_vec(vec![0.4, -0.2, 0.1]);
        let a = DVector::from_vec(vec![0.3, -0.6]);
        let quad = model.stages[2].eval(&s, &a);
        assert!((quad - (-pol.log_prob(&s, &a))).abs() <= 1e-9);
    }

    #[test]
    fn two_layer_exact_at_anchor() {
        let pol = GaussianPolicy::two_layer(3, 2, 16, -0.2, 11);
        let mut rng = seeding::master_rng(21);
        let theta = DVector::from_fn(pol.param_count(), |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.4 * z
        });
        let pol = pol.with_params(&theta).unwrap();
        let (cost, batch, pol) = setup(pol);
        let mu = 2.0;
        let model = build_surrogate_cost(&cost, mu, &pol, &batch).unwrap();
        for t in 0..batch.horizon() {
            let anchor = batch.mean_state_at(t);
            for _ in 0..5 {
                let a = DVector::from_fn(2, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                });
                let direct = cost.eval(&anchor, &a) / mu - pol.log_prob(&anchor, &a);
                let quad = model.stages[t].eval(&anchor, &a);
                assert!(
                    (direct - quad).abs() <= 1e-9 * direct.abs().max(1.0),
                    "t={t}: {direct} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_mu() {
        let (cost, batch, pol) = setup(random_linear_policy(1));
        assert!(build_surrogate_cost(&cost, 0.0, &pol, &batch).is_err());
        assert!(build_surrogate_cost(&cost, -1.0, &pol, &batch).is_err());
    }
}
