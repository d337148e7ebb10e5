//! Discount-weighted expected KL between the expert and the reactive policy.

use super::backward::TimeVaryingLinearGaussianPolicy;
use crate::envs::TrajectoryBatch;
use crate::error::{DpiError, Result};
use crate::policy::GaussianPolicy;
use nalgebra::Cholesky;

/// `sum_t gamma^{t-1} E_{s_t}[D_KL(eta_t(.|s) || pi_n(.|s))]` over the batch
/// states, normalized by `sum_t gamma^{t-1}` so the trust-region target does
/// not scale with the horizon.
pub fn expected_kl(
    eta: &TimeVaryingLinearGaussianPolicy,
    pi_n: &GaussianPolicy,
    batch: &TrajectoryBatch,
    gamma: f64,
) -> Result<f64> {
    if batch.num_episodes() == 0 || batch.horizon() == 0 {
        return Err(DpiError::invalid("batch is empty"));
    }
    if batch.horizon() > eta.horizon() {
        return Err(DpiError::invalid("batch horizon exceeds the expert horizon"));
    }
    if batch.action_dim() != pi_n.action_dim() {
        return Err(DpiError::invalid("action dimension mismatch"));
    }
    let d_a = pi_n.action_dim();
    let pi_var = pi_n.variance();
    if pi_var.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(DpiError::numerical("reactive policy covariance is singular"));
    }
    let log_det_pi: f64 = pi_n.log_std().iter().map(|l| 2.0 * l).sum();

    // Per-timestep pieces that do not depend on the state.
    let mut logdet_eta = Vec::with_capacity(batch.horizon());
    let mut trace_term = Vec::with_capacity(batch.horizon());
    for t in 0..batch.horizon() {
        let chol = Cholesky::new(eta.covs[t].clone())
            .ok_or_else(|| DpiError::numerical(format!("expert covariance not PD at t={t}")))?;
        logdet_eta.push(chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum::<f64>());
        let mut tr = 0.0;
        for i in 0..d_a {
            tr += eta.covs[t][(i, i)] / pi_var[i];
        }
        trace_term.push(tr);
    }

    let partials: Vec<f64> = crate::par::map_slice(&batch.episodes, |ep| {
        let mut disc = 1.0;
        let mut acc = 0.0;
        for t in 0..ep.len() {
            let s = &ep.states[t];
            let m_eta = eta.mean_action(t, s);
            let m_pi = pi_n.mean(s);
            let mut mahal = 0.0;
            for i in 0..d_a {
                let d = m_pi[i] - m_eta[i];
                mahal += d * d / pi_var[i];
            }
            let kl = 0.5
                * (trace_term[t] + mahal - d_a as f64 + log_det_pi - logdet_eta[t]);
            acc += disc * kl;
            disc *= gamma;
        }
        acc
    });
    let total: f64 = partials.iter().sum();
    let weight: f64 = (0..batch.horizon()).map(|t| gamma.powi(t as i32)).sum();
    Ok(total / (batch.num_episodes() as f64 * weight))
}
