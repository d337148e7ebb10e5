//! Time-varying linear-Gaussian dynamics fits.
//!
//! For each timestep, ridge regression of the next state on `(s, a, 1)` over
//! a window of adjacent timesteps (all coefficients penalized, intercept
//! included), with the noise covariance estimated from residual outer
//! products plus jitter.

use crate::envs::TrajectoryBatch;
use crate::error::{DpiError, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Jitter added to every estimated noise covariance so it always factors.
pub const SIGMA_JITTER: f64 = 1e-6;

/// Fitted dynamics `s' ~ N(A_t s + B_t a + c_t, Sigma_t)` for `t` in
/// `0..horizon` (0-based timestep index).
#[derive(Debug, Clone)]
pub struct LinearGaussianDynamics {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub c: Vec<DVector<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
}

impl LinearGaussianDynamics {
    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a.first().map(|m| m.nrows()).unwrap_or(0)
    }

    pub fn action_dim(&self) -> usize {
        self.b.first().map(|m| m.ncols()).unwrap_or(0)
    }

    pub fn predict_mean(&self, t: usize, s: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        &self.a[t] * s + &self.b[t] * a + &self.c[t]
    }

    /// Exact time-invariant dynamics replicated over a horizon; used when a
    /// ground-truth linear model stands in for a fit.
    pub fn from_lti(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DVector<f64>,
        sigma: DMatrix<f64>,
        horizon: usize,
    ) -> Self {
        Self {
            a: vec![a; horizon],
            b: vec![b; horizon],
            c: vec![c; horizon],
            sigma: vec![sigma; horizon],
        }
    }
}

/// Fit diagnostics.
#[derive(Debug, Clone)]
pub struct FitReport {
    /// Per-timestep root-mean-square residual (over all coordinates).
    pub residual_rms: Vec<f64>,
    /// Whether timestep pooling (window > 1) was in effect.
    pub pooled_window: bool,
    pub ridge: f64,
    /// Samples entering each per-timestep fit.
    pub sample_counts: Vec<usize>,
}

/// Held-out fit quality: the tractable proxies for the model's local
/// predictive error.
#[derive(Debug, Clone)]
pub struct ModelErrorReport {
    /// Mean Gaussian negative log-likelihood per transition.
    pub mean_nll: f64,
    /// Mean squared standardized residual per coordinate; near 1 when the
    /// model matches the generator.
    pub standardized_mse: f64,
    pub transitions: usize,
}

/// Ridge fit of time-varying linear dynamics over `batch`.
///
/// `pool_window` timesteps (centered, clipped at the boundaries) pool their
/// samples into each per-timestep regression.
pub fn fit_time_varying_linear(
    batch: &TrajectoryBatch,
    ridge: f64,
    pool_window: usize,
) -> Result<(LinearGaussianDynamics, FitReport)> {
    if !(ridge > 0.0) {
        return Err(DpiError::invalid("ridge must be positive"));
    }
    if pool_window == 0 {
        return Err(DpiError::invalid("pool_window must be at least 1"));
    }
    if batch.num_episodes() == 0 || batch.horizon() == 0 {
        return Err(DpiError::invalid("batch is empty"));
    }
    let horizon = batch.horizon();
    let d_s = batch.state_dim();
    let d_a = batch.action_dim();
    let d = d_s + d_a + 1;
    let half_lo = (pool_window - 1) / 2;
    let half_hi = pool_window - 1 - half_lo;

    let fits: Vec<Result<(DMatrix<f64>, DMatrix<f64>, f64, usize)>> =
        crate::par::map_indexed(horizon, |t| {
            let lo = t.saturating_sub(half_lo);
            let hi = (t + half_hi).min(horizon - 1);
            let n = batch.num_episodes() * (hi - lo + 1);
            if n < 2 {
                return Err(DpiError::invalid(format!(
                    "only {n} samples in the window at t={t}; collect more episodes or \
                     increase pool_window"
                )));
            }
            let nf = n as f64;
            let mut gram = DMatrix::<f64>::zeros(d, d);
            let mut rhs = DMatrix::<f64>::zeros(d, d_s);
            let mut x = DVector::<f64>::zeros(d);
            for ep in &batch.episodes {
                for u in lo..=hi {
                    fill_regressor(&mut x, &ep.states[u], &ep.actions[u]);
                    let y = &ep.states[u + 1];
                    for r in 0..d {
                        let xr = x[r];
                        if xr == 0.0 {
                            continue;
                        }
                        for cc in 0..d {
                            gram[(r, cc)] += xr * x[cc] / nf;
                        }
                        for cc in 0..d_s {
                            rhs[(r, cc)] += xr * y[cc] / nf;
                        }
                    }
                }
            }
            for k in 0..d {
                gram[(k, k)] += ridge;
            }
            let chol = Cholesky::new(gram)
                .ok_or_else(|| DpiError::numerical(format!("ridge system not PD at t={t}")))?;
            let theta = chol.solve(&rhs); // (d x d_s): rows are A^T | B^T | c^T

            // Residual second moment for Sigma and the RMS diagnostic.
            let mut sig = DMatrix::<f64>::zeros(d_s, d_s);
            let mut sq_sum = 0.0;
            for ep in &batch.episodes {
                for u in lo..=hi {
                    fill_regressor(&mut x, &ep.states[u], &ep.actions[u]);
                    let pred = theta.transpose() * &x;
                    let e = &ep.states[u + 1] - pred;
                    for r in 0..d_s {
                        for cc in 0..d_s {
                            sig[(r, cc)] += e[r] * e[cc] / nf;
                        }
                    }
                    sq_sum += e.norm_squared();
                }
            }
            for k in 0..d_s {
                sig[(k, k)] += SIGMA_JITTER;
            }
            let rms = (sq_sum / (nf * d_s as f64)).sqrt();
            Ok((theta, sig, rms, n))
        });

    let mut a = Vec::with_capacity(horizon);
    let mut b = Vec::with_capacity(horizon);
    let mut c = Vec::with_capacity(horizon);
    let mut sigma = Vec::with_capacity(horizon);
    let mut residual_rms = Vec::with_capacity(horizon);
    let mut sample_counts = Vec::with_capacity(horizon);
    for fit in fits {
        let (theta, sig, rms, n) = fit?;
        let theta_t = theta.transpose(); // d_s x d
        a.push(theta_t.columns(0, d_s).into_owned());
        b.push(theta_t.columns(d_s, d_a).into_owned());
        c.push(DVector::from_column_slice(theta_t.column(d_s + d_a).as_slice()));
        sigma.push(sig);
        residual_rms.push(rms);
        sample_counts.push(n);
    }
    Ok((
        LinearGaussianDynamics { a, b, c, sigma },
        FitReport {
            residual_rms,
            pooled_window: pool_window > 1,
            ridge,
            sample_counts,
        },
    ))
}

fn fill_regressor(x: &mut DVector<f64>, s: &DVector<f64>, a: &DVector<f64>) {
    let d_s = s.len();
    let d_a = a.len();
    for i in 0..d_s {
        x[i] = s[i];
    }
    for i in 0..d_a {
        x[d_s + i] = a[i];
    }
    x[d_s + d_a] = 1.0;
}

/// Held-out predictive diagnostics for a fitted model.
pub fn model_error_report(
    dynamics: &LinearGaussianDynamics,
    heldout: &TrajectoryBatch,
) -> Result<ModelErrorReport> {
    if heldout.num_episodes() == 0 || heldout.horizon() == 0 {
        return Err(DpiError::invalid("held-out batch is empty"));
    }
    if heldout.horizon() > dynamics.horizon() {
        return Err(DpiError::invalid("held-out horizon exceeds the fitted horizon"));
    }
    let d_s = dynamics.state_dim();
    let mut chols = Vec::with_capacity(heldout.horizon());
    for t in 0..heldout.horizon() {
        chols.push(
            Cholesky::new(dynamics.sigma[t].clone())
                .ok_or_else(|| DpiError::numerical(format!("Sigma not PD at t={t}")))?,
        );
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut nll_sum = 0.0;
    let mut mahal_sum = 0.0;
    let mut n = 0usize;
    for ep in &heldout.episodes {
        for t in 0..ep.len() {
            let e = ep.next_state(t) - dynamics.predict_mean(t, &ep.states[t], &ep.actions[t]);
            let solved = chols[t].solve(&e);
            let mahal = e.dot(&solved);
            let logdet: f64 = chols[t].l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
            nll_sum += 0.5 * (mahal + logdet + d_s as f64 * ln_2pi);
            mahal_sum += mahal;
            n += 1;
        }
    }
    Ok(ModelErrorReport {
        mean_nll: nll_sum / n as f64,
        standardized_mse: mahal_sum / (n * d_s) as f64,
        transitions: n,
    })
}
