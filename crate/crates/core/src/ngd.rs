//! Natural-gradient imitation updates.
//!
//! Score-function gradient of the imitation objective against the expert's
//! disadvantage, Fisher-vector products without materializing the Fisher
//! matrix, conjugate-gradient solves, and the k-step update with the
//! shrunken step size that keeps the quadratized KL inside the trust region.
//!
//! Two Fisher estimators are provided. [`fisher_vector_product`] takes the
//! analytic per-state Gaussian Fisher (the expectation over actions in
//! closed form), which is the Hessian of the state-averaged KL and the
//! operator the update uses. [`fisher_vector_product_sampled`] is the raw
//! score outer-product form over the sampled actions; it agrees with the
//! former in expectation and stays available for diagnostics.

use crate::envs::TrajectoryBatch;
use crate::error::{DpiError, Result};
use crate::policy::GaussianPolicy;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Per-timestep disadvantage evaluator `A(t, s, a)`.
pub trait AdvantageEvaluator: Sync {
    fn advantage(&self, t: usize, s: &DVector<f64>, a: &DVector<f64>) -> f64;
}

impl<F> AdvantageEvaluator for F
where
    F: Fn(usize, &DVector<f64>, &DVector<f64>) -> f64 + Sync,
{
    fn advantage(&self, t: usize, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        self(t, s, a)
    }
}

/// Evaluate the disadvantage at every batch sample, episode-major.
pub fn advantage_table(batch: &TrajectoryBatch, advantage: &dyn AdvantageEvaluator) -> Vec<f64> {
    let mut values = Vec::new();
    for ep in &batch.episodes {
        for t in 0..ep.len() {
            values.push(advantage.advantage(t, &ep.states[t], &ep.actions[t]));
        }
    }
    values
}

/// Score-function estimate of the imitation-objective gradient:
/// `(1/N) sum gamma^{t-1} grad log pi(a|s) * A(t, s, a)` over the batch.
///
/// With `standardize` the disadvantages are shifted and scaled to zero mean
/// and unit variance across the batch first; the score identity leaves the
/// estimator's expectation direction unchanged.
pub fn imitation_gradient(
    policy: &GaussianPolicy,
    batch: &TrajectoryBatch,
    advantage: &dyn AdvantageEvaluator,
    gamma: f64,
    standardize: bool,
) -> Result<DVector<f64>> {
    let values = advantage_table(batch, advantage);
    imitation_gradient_from_values(policy, batch, &values, gamma, standardize)
}

/// Gradient from a precomputed per-sample disadvantage table
/// (episode-major, matching [`advantage_table`]).
pub fn imitation_gradient_from_values(
    policy: &GaussianPolicy,
    batch: &TrajectoryBatch,
    values: &[f64],
    gamma: f64,
    standardize: bool,
) -> Result<DVector<f64>> {
    let n = batch_size(batch)?;
    if values.len() != n {
        return Err(DpiError::invalid("value table length does not match batch"));
    }
    let (shift, scale) = if standardize {
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        (mean, var.sqrt().max(1e-12))
    } else {
        (0.0, 1.0)
    };

    let partials: Vec<DVector<f64>> = crate::par::map_indexed(batch.episodes.len(), |k| {
        let ep = &batch.episodes[k];
        let offset: usize = batch.episodes[..k].iter().map(|e| e.len()).sum();
        let mut acc = DVector::zeros(policy.param_count());
        let mut disc = 1.0;
        for t in 0..ep.len() {
            let a_val = (values[offset + t] - shift) / scale;
            let g = policy.grad_log_prob(&ep.states[t], &ep.actions[t]);
            acc += g * (disc * a_val);
            disc *= gamma;
        }
        acc
    });
    let mut grad = DVector::zeros(policy.param_count());
    for p in partials {
        grad += p;
    }
    Ok(grad / n as f64)
}

/// Analytic per-state Fisher-vector product plus damping:
/// `(1/N) sum_i F(s_i) v + damping * v` where `F(s)` is the exact Gaussian
/// Fisher at the visited state (mean block `J^T S^{-1} J`, log-std block
/// `2 I`, zero cross terms). Never materializes the matrix.
pub fn fisher_vector_product(
    policy: &GaussianPolicy,
    batch: &TrajectoryBatch,
    v: &DVector<f64>,
    damping: f64,
) -> Result<DVector<f64>> {
    let n = batch_size(batch)?;
    if v.len() != policy.param_count() {
        return Err(DpiError::invalid("vector length does not match parameter count"));
    }
    let p_mean = policy.param_count() - policy.action_dim();
    let v_mean = &v.as_slice()[..p_mean];
    let inv_var = policy.variance().map(|x| 1.0 / x);

    let partials: Vec<DVector<f64>> = crate::par::map_slice(&batch.episodes, |ep| {
        let mut acc = DVector::zeros(policy.param_count());
        for s in &ep.states[..ep.len()] {
            let jv = policy.mean_jvp(s, v_mean);
            let scaled = jv.component_mul(&inv_var);
            policy.accumulate_mean_vjp(s, &scaled, &mut acc);
        }
        acc
    });
    let mut out = DVector::zeros(policy.param_count());
    for p in partials {
        out += p;
    }
    out /= n as f64;
    // log-std block: Fisher is exactly 2 per coordinate, state-independent
    for i in 0..policy.action_dim() {
        out[p_mean + i] = 2.0 * v[p_mean + i];
    }
    Ok(out + v * damping)
}

/// Raw empirical Fisher-vector product over sampled actions:
/// `(1/N) sum g_i (g_i . v) + damping * v` with `g_i = grad log pi(a_i|s_i)`.
pub fn fisher_vector_product_sampled(
    policy: &GaussianPolicy,
    batch: &TrajectoryBatch,
    v: &DVector<f64>,
    damping: f64,
) -> Result<DVector<f64>> {
    let n = batch_size(batch)?;
    if v.len() != policy.param_count() {
        return Err(DpiError::invalid("vector length does not match parameter count"));
    }
    let partials: Vec<DVector<f64>> = crate::par::map_slice(&batch.episodes, |ep| {
        let mut acc = DVector::zeros(policy.param_count());
        for t in 0..ep.len() {
            let g = policy.grad_log_prob(&ep.states[t], &ep.actions[t]);
            let coeff = g.dot(v);
            acc += g * coeff;
        }
        acc
    });
    let mut out = DVector::zeros(policy.param_count());
    for p in partials {
        out += p;
    }
    Ok(out / n as f64 + v * damping)
}

fn batch_size(batch: &TrajectoryBatch) -> Result<usize> {
    let n: usize = batch.episodes.iter().map(|e| e.len()).sum();
    if n == 0 {
        return Err(DpiError::invalid("batch is empty"));
    }
    Ok(n)
}

#[derive(Debug, Clone)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradient for a symmetric positive definite operator.
pub fn conjugate_gradient(
    apply: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    b: &DVector<f64>,
    max_iters: usize,
    tol: f64,
) -> Result<(DVector<f64>, CgStats)> {
    let mut x = DVector::zeros(b.len());
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok((x, CgStats { iterations: 0, residual: 0.0 }));
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    let mut iterations = 0;
    for _ in 0..max_iters {
        let ap = apply(&p)?;
        let denom = p.dot(&ap);
        if !denom.is_finite() || denom <= 0.0 {
            return Err(DpiError::numerical(format!(
                "conjugate gradient hit a non-PD direction (p^T A p = {denom})"
            )));
        }
        let alpha = rs / denom;
        x += &p * alpha;
        r -= ap * alpha;
        iterations += 1;
        let rs_new = r.norm_squared();
        if !rs_new.is_finite() {
            return Err(DpiError::numerical("conjugate gradient produced non-finite residual"));
        }
        if rs_new.sqrt() <= tol * b_norm {
            rs = rs_new;
            break;
        }
        p = &r + &p * (rs_new / rs);
        rs = rs_new;
    }
    Ok((
        x,
        CgStats {
            iterations,
            residual: rs.sqrt() / b_norm,
        },
    ))
}

/// Diagnostics for one natural-gradient step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgdStepReport {
    pub grad_norm: f64,
    /// `grad^T F^{-1} grad` for the step.
    pub quad_form: f64,
    pub step_size: f64,
    /// Realized `dtheta^T F dtheta` for the step (target `beta / k`).
    pub realized_kl_quad: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgdReport {
    pub steps: Vec<NgdStepReport>,
}

impl NgdReport {
    pub fn total_realized_kl_quad(&self) -> f64 {
        self.steps.iter().map(|s| s.realized_kl_quad).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NgdConfig {
    pub damping: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub standardize_advantages: bool,
    /// Clamp the log-std coordinates from below after every step. The
    /// imitation objective always pays for action noise, so without a floor
    /// the exploration scale decays linearly in the iteration count and the
    /// Fisher metric makes mean updates ever more expensive.
    pub log_std_floor: Option<f64>,
}

impl Default for NgdConfig {
    fn default() -> Self {
        Self {
            damping: 1e-4,
            cg_iters: 50,
            cg_tol: 1e-8,
            standardize_advantages: true,
            log_std_floor: Some(-1.6),
        }
    }
}

/// Clamp the log-std block of a parameter vector from below.
pub fn clamp_log_std(policy: &GaussianPolicy, theta: &mut DVector<f64>, floor: f64) {
    let base = policy.param_count() - policy.action_dim();
    for i in 0..policy.action_dim() {
        if theta[base + i] < floor {
            theta[base + i] = floor;
        }
    }
}

/// `k_steps` natural-gradient steps, each of size
/// `sqrt((beta / k) / (grad^T F^{-1} grad))`, recomputing the gradient and
/// the Fisher operator from the same batch after every step. The
/// disadvantage values themselves do not depend on the policy parameters,
/// so they are evaluated once.
pub fn ngd_update(
    policy: &GaussianPolicy,
    batch: &TrajectoryBatch,
    advantage: &dyn AdvantageEvaluator,
    gamma: f64,
    beta: f64,
    k_steps: usize,
    cfg: &NgdConfig,
) -> Result<(GaussianPolicy, NgdReport)> {
    let values = advantage_table(batch, advantage);
    ngd_update_from_values(policy, batch, &values, gamma, beta, k_steps, cfg)
}

/// [`ngd_update`] with a precomputed per-sample disadvantage table.
pub fn ngd_update_from_values(
    policy: &GaussianPolicy,
    batch: &TrajectoryBatch,
    values: &[f64],
    gamma: f64,
    beta: f64,
    k_steps: usize,
    cfg: &NgdConfig,
) -> Result<(GaussianPolicy, NgdReport)> {
    if !(beta > 0.0) {
        return Err(DpiError::invalid("beta must be positive"));
    }
    if k_steps == 0 {
        return Err(DpiError::invalid("k_steps must be at least 1"));
    }
    let mut current = policy.clone();
    let mut steps = Vec::with_capacity(k_steps);
    let per_step_budget = beta / k_steps as f64;
    for _ in 0..k_steps {
        let grad = imitation_gradient_from_values(
            &current,
            batch,
            values,
            gamma,
            cfg.standardize_advantages,
        )?;
        let grad_norm = grad.norm();
        if grad_norm == 0.0 {
            steps.push(NgdStepReport {
                grad_norm,
                quad_form: 0.0,
                step_size: 0.0,
                realized_kl_quad: 0.0,
                cg_iterations: 0,
                cg_residual: 0.0,
                skipped: true,
            });
            continue;
        }
        let (direction, cg) = conjugate_gradient(
            |p| fisher_vector_product(&current, batch, p, cfg.damping),
            &grad,
            cfg.cg_iters,
            cfg.cg_tol,
        )?;
        let quad_form = grad.dot(&direction);
        if !(quad_form > 0.0) || !quad_form.is_finite() {
            steps.push(NgdStepReport {
                grad_norm,
                quad_form,
                step_size: 0.0,
                realized_kl_quad: 0.0,
                cg_iterations: cg.iterations,
                cg_residual: cg.residual,
                skipped: true,
            });
            continue;
        }
        let step_size = (per_step_budget / quad_form).sqrt();
        let delta = &direction * (-step_size);
        let mut theta = current.params() + &delta;
        if let Some(floor) = cfg.log_std_floor {
            clamp_log_std(&current, &mut theta, floor);
        }
        let next = current.with_params(&theta)?;
        let f_delta = fisher_vector_product(&current, batch, &delta, cfg.damping)?;
        let realized = delta.dot(&f_delta);
        steps.push(NgdStepReport {
            grad_norm,
            quad_form,
            step_size,
            realized_kl_quad: realized,
            cg_iterations: cg.iterations,
            cg_residual: cg.residual,
            skipped: false,
        });
        current = next;
    }
    Ok((current, NgdReport { steps }))
}
