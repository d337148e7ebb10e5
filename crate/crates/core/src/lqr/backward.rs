//! Maximum-entropy LQR backward recursion and quadratic policy evaluation.

use super::cost_model::QuadraticCostModel;
use crate::envs::ContinuousPolicy;
use crate::error::{DpiError, Result};
use crate::sysid::LinearGaussianDynamics;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::RngCore;

const LN_2PI: f64 = 1.8378770664093453;

/// The expert: per-timestep affine-Gaussian controller
/// `a ~ N(K_t s + k_t, P_t)`.
#[derive(Debug, Clone)]
pub struct TimeVaryingLinearGaussianPolicy {
    pub gains: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    cov_trils: Vec<DMatrix<f64>>,
}

impl TimeVaryingLinearGaussianPolicy {
    pub fn new(
        gains: Vec<DMatrix<f64>>,
        biases: Vec<DVector<f64>>,
        covs: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if gains.len() != biases.len() || gains.len() != covs.len() {
            return Err(DpiError::invalid("per-timestep parameter lengths differ"));
        }
        let cov_trils = covs
            .iter()
            .enumerate()
            .map(|(t, c)| {
                Cholesky::new(c.clone())
                    .map(|ch| ch.l())
                    .ok_or_else(|| DpiError::numerical(format!("covariance not PD at t={t}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { gains, biases, covs, cov_trils })
    }

    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    pub fn mean_action(&self, t: usize, s: &DVector<f64>) -> DVector<f64> {
        &self.gains[t] * s + &self.biases[t]
    }

    /// Deterministic wrapper executing only the mean controller.
    pub fn mean_only(&self) -> MeanController<'_> {
        MeanController(self)
    }
}

impl ContinuousPolicy for TimeVaryingLinearGaussianPolicy {
    fn action(&self, t: usize, s: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        let t = t.min(self.horizon() - 1);
        let z = crate::envs::standard_normal_vector(self.biases[t].len(), rng);
        self.mean_action(t, s) + &self.cov_trils[t] * z
    }
}

pub struct MeanController<'a>(&'a TimeVaryingLinearGaussianPolicy);

impl ContinuousPolicy for MeanController<'_> {
    fn action(&self, t: usize, s: &DVector<f64>, _rng: &mut dyn RngCore) -> DVector<f64> {
        self.0.mean_action(t.min(self.0.horizon() - 1), s)
    }
}

/// One timestep of the value chain: the quadratic action-value
/// `Q_t(s, a) = z^T Q2 z / 2 + q1^T z + q0` and state-value
/// `V_t(s) = s^T V2 s / 2 + v1^T s + v0`.
#[derive(Debug, Clone)]
pub struct ValueStage {
    pub q2: DMatrix<f64>,
    pub q1: DVector<f64>,
    pub q0: f64,
    pub v2: DMatrix<f64>,
    pub v1: DVector<f64>,
    pub v0: f64,
}

/// Quadratic cost-to-go and disadvantage functions, one stage per timestep.
#[derive(Debug, Clone)]
pub struct QuadraticValueChain {
    pub stages: Vec<ValueStage>,
    state_dim: usize,
    action_dim: usize,
}

impl QuadraticValueChain {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn q_value(&self, t: usize, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        let st = &self.stages[t];
        let mut z = DVector::zeros(self.state_dim + self.action_dim);
        z.rows_mut(0, self.state_dim).copy_from(s);
        z.rows_mut(self.state_dim, self.action_dim).copy_from(a);
        0.5 * (z.transpose() * &st.q2 * &z)[(0, 0)] + st.q1.dot(&z) + st.q0
    }

    pub fn v_value(&self, t: usize, s: &DVector<f64>) -> f64 {
        let st = &self.stages[t];
        0.5 * (s.transpose() * &st.v2 * s)[(0, 0)] + st.v1.dot(s) + st.v0
    }

    /// Disadvantage `A_t(s, a) = Q_t(s, a) - V_t(s)`.
    pub fn disadvantage(&self, t: usize, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        let t = t.min(self.stages.len() - 1);
        self.q_value(t, s, a) - self.v_value(t, s)
    }
}

/// Backward recursion with entropy weight 1 (the KL-derived value).
pub fn soft_lqr_backward(
    dynamics: &LinearGaussianDynamics,
    cost: &QuadraticCostModel,
    gamma: f64,
) -> Result<(TimeVaryingLinearGaussianPolicy, QuadraticValueChain)> {
    soft_lqr_backward_weighted(dynamics, cost, gamma, 1.0)
}

/// Backward recursion with an explicit entropy weight; annealing the weight
/// toward zero recovers the plain (deterministic-optimum) recursion for
/// cross-checks against the Riccati form. The weight scales only the policy
/// covariance and value constants; the gains are weight-independent.
pub fn soft_lqr_backward_weighted(
    dynamics: &LinearGaussianDynamics,
    cost: &QuadraticCostModel,
    gamma: f64,
    entropy_weight: f64,
) -> Result<(TimeVaryingLinearGaussianPolicy, QuadraticValueChain)> {
    if !(entropy_weight > 0.0) {
        return Err(DpiError::invalid("entropy weight must be positive"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(DpiError::invalid("gamma must lie in (0, 1]"));
    }
    let horizon = dynamics.horizon();
    if cost.horizon() != horizon {
        return Err(DpiError::invalid("cost and dynamics horizons differ"));
    }
    let d_s = dynamics.state_dim();
    let d_a = dynamics.action_dim();
    let d = d_s + d_a;
    if cost.state_dim() != d_s || cost.action_dim() != d_a {
        return Err(DpiError::invalid("cost and dynamics dimensions differ"));
    }

    let mut v2 = DMatrix::<f64>::zeros(d_s, d_s);
    let mut v1 = DVector::<f64>::zeros(d_s);
    let mut v0 = 0.0f64;
    let mut stages_rev: Vec<ValueStage> = Vec::with_capacity(horizon);
    let mut gains_rev = Vec::with_capacity(horizon);
    let mut biases_rev = Vec::with_capacity(horizon);
    let mut covs_rev = Vec::with_capacity(horizon);

    for t in (0..horizon).rev() {
        let stage = &cost.stages[t];
        let a_t = &dynamics.a[t];
        let b_t = &dynamics.b[t];
        let c_t = &dynamics.c[t];
        let sig_t = &dynamics.sigma[t];

        // F = [A | B], z-space curvature of the cost-to-go.
        let mut f = DMatrix::<f64>::zeros(d_s, d);
        f.view_mut((0, 0), (d_s, d_s)).copy_from(a_t);
        f.view_mut((0, d_s), (d_s, d_a)).copy_from(b_t);

        let v2f = &v2 * &f;
        let mut q2 = stage.c.clone() + f.transpose() * &v2f * gamma;
        // keep symmetric against round-off
        q2 = (&q2 + q2.transpose()) * 0.5;
        let q1 = &stage.g + f.transpose() * (&v2 * c_t + &v1) * gamma;
        let q0 = stage.k
            + gamma
                * (0.5 * (c_t.transpose() * &v2 * c_t)[(0, 0)]
                    + v1.dot(c_t)
                    + v0
                    + 0.5 * (&v2 * sig_t).trace());

        // Regularize the action-action block until it factors.
        let mut q_aa = q2.view((d_s, d_s), (d_a, d_a)).into_owned();
        let mut chol = Cholesky::new(q_aa.clone());
        let mut reg = 1e-6;
        let mut attempts = 0;
        while chol.is_none() {
            if attempts >= 60 {
                return Err(DpiError::numerical(format!(
                    "action curvature not positive definite at t={t} after regularization"
                )));
            }
            for i in 0..d_a {
                q_aa[(i, i)] += reg;
            }
            reg *= 2.0;
            attempts += 1;
            chol = Cholesky::new(q_aa.clone());
        }
        let chol = chol.unwrap();
        // write the regularized block back so the stored chain matches the
        // curvature actually used
        q2.view_mut((d_s, d_s), (d_a, d_a)).copy_from(&q_aa);

        let q_as = q2.view((d_s, 0), (d_a, d_s)).into_owned();
        let q_a = q1.rows(d_s, d_a).into_owned();
        let q_s = q1.rows(0, d_s).into_owned();
        let q_ss = q2.view((0, 0), (d_s, d_s)).into_owned();

        let gain = -chol.solve(&q_as);
        let bias = -chol.solve(&q_a);
        let cov = chol.inverse() * entropy_weight;

        // V(s) = Q(s, K s + k) + entropy correction.
        let q_sa = q_as.transpose();
        let mut new_v2 = &q_ss + &q_sa * &gain;
        new_v2 = (&new_v2 + new_v2.transpose()) * 0.5;
        let new_v1 = &q_s + &q_sa * &bias;
        let logdet_qaa: f64 = chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let new_v0 = q0 + 0.5 * q_a.dot(&bias)
            - entropy_weight
                * (0.5 * d_a as f64 * (LN_2PI + entropy_weight.ln()) - 0.5 * logdet_qaa);

        stages_rev.push(ValueStage {
            q2,
            q1,
            q0,
            v2: new_v2.clone(),
            v1: new_v1.clone(),
            v0: new_v0,
        });
        gains_rev.push(gain);
        biases_rev.push(bias);
        covs_rev.push((&cov + cov.transpose()) * 0.5);
        v2 = new_v2;
        v1 = new_v1;
        v0 = new_v0;
    }

    stages_rev.reverse();
    gains_rev.reverse();
    biases_rev.reverse();
    covs_rev.reverse();
    let eta = TimeVaryingLinearGaussianPolicy::new(gains_rev, biases_rev, covs_rev)?;
    let chain = QuadraticValueChain {
        stages: stages_rev,
        state_dim: d_s,
        action_dim: d_a,
    };
    Ok((eta, chain))
}

/// Evaluate a fixed affine-Gaussian controller under a quadratic cost model
/// and linear-Gaussian dynamics: the exact quadratic `V^eta_t` and
/// `Q^eta_t`, hence the disadvantage of `eta` under that cost.
pub fn policy_eval_quadratic(
    dynamics: &LinearGaussianDynamics,
    cost: &QuadraticCostModel,
    eta: &TimeVaryingLinearGaussianPolicy,
    gamma: f64,
) -> Result<QuadraticValueChain> {
    let horizon = dynamics.horizon();
    if cost.horizon() != horizon || eta.horizon() != horizon {
        return Err(DpiError::invalid("horizon mismatch"));
    }
    let d_s = dynamics.state_dim();
    let d_a = dynamics.action_dim();
    let d = d_s + d_a;

    let mut v2 = DMatrix::<f64>::zeros(d_s, d_s);
    let mut v1 = DVector::<f64>::zeros(d_s);
    let mut v0 = 0.0f64;
    let mut stages_rev = Vec::with_capacity(horizon);
    for t in (0..horizon).rev() {
        let stage = &cost.stages[t];
        let a_t = &dynamics.a[t];
        let b_t = &dynamics.b[t];
        let c_t = &dynamics.c[t];
        let sig_t = &dynamics.sigma[t];
        let mut f = DMatrix::<f64>::zeros(d_s, d);
        f.view_mut((0, 0), (d_s, d_s)).copy_from(a_t);
        f.view_mut((0, d_s), (d_s, d_a)).copy_from(b_t);

        let mut q2 = stage.c.clone() + f.transpose() * (&v2 * &f) * gamma;
        q2 = (&q2 + q2.transpose()) * 0.5;
        let q1 = &stage.g + f.transpose() * (&v2 * c_t + &v1) * gamma;
        let q0 = stage.k
            + gamma
                * (0.5 * (c_t.transpose() * &v2 * c_t)[(0, 0)]
                    + v1.dot(c_t)
                    + v0
                    + 0.5 * (&v2 * sig_t).trace());

        // V(s) = E_{a ~ eta_t(.|s)} Q(s, a): substitute the affine mean and
        // add the covariance trace against the action-action curvature.
        let gain = &eta.gains[t];
        let bias = &eta.biases[t];
        let cov = &eta.covs[t];
        let q_ss = q2.view((0, 0), (d_s, d_s)).into_owned();
        let q_sa = q2.view((0, d_s), (d_s, d_a)).into_owned();
        let q_aa = q2.view((d_s, d_s), (d_a, d_a)).into_owned();
        let q_s = q1.rows(0, d_s).into_owned();
        let q_a = q1.rows(d_s, d_a).into_owned();

        let mut new_v2 =
            &q_ss + &q_sa * gain + gain.transpose() * q_sa.transpose() + gain.transpose() * &q_aa * gain;
        new_v2 = (&new_v2 + new_v2.transpose()) * 0.5;
        let new_v1 = &q_s
            + &q_sa * bias
            + gain.transpose() * (&q_aa * bias)
            + gain.transpose() * &q_a;
        let new_v0 = q0
            + q_a.dot(bias)
            + 0.5 * (bias.transpose() * &q_aa * bias)[(0, 0)]
            + 0.5 * (&q_aa * cov).trace();

        stages_rev.push(ValueStage {
            q2,
            q1,
            q0,
            v2: new_v2.clone(),
            v1: new_v1.clone(),
            v0: new_v0,
        });
        v2 = new_v2;
        v1 = new_v1;
        v0 = new_v0;
    }
    stages_rev.reverse();
    Ok(QuadraticValueChain {
        stages: stages_rev,
        state_dim: d_s,
        action_dim: d_a,
    })
}
