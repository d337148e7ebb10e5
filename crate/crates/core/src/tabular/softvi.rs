//! Entropy-regularized value iteration under an estimated model.
//!
//! Solves the soft Bellman fixed point
//! `V(s) = -log sum_a exp(-(c'(s,a) + gamma <p_hat, V>))`
//! whose optimizer is the Boltzmann policy over the soft action values. A
//! hard-backup variant recovers plain value iteration for the same cost.

use crate::error::{DpiError, Result};
use crate::mdp::{TabularPolicy, TransitionModel};

/// Backup rule for the expert solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpertBackup {
    /// Maximum-entropy backup at the given temperature (1.0 is the
    /// KL-derived weight).
    Soft { temperature: f64 },
    /// Plain min backup with a greedy deterministic policy.
    Hard,
}

impl Default for ExpertBackup {
    fn default() -> Self {
        ExpertBackup::Soft { temperature: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SoftViSolution {
    pub eta: TabularPolicy,
    /// Soft action values at the fixed point, length S*A.
    pub q: Vec<f64>,
    /// Soft state values, length S.
    pub v: Vec<f64>,
    pub sweeps: usize,
}

pub const DEFAULT_SOFT_VI_CAP: usize = 1_000_000;

/// Solve the soft Bellman fixed point to sup-norm residual `tol`.
pub fn soft_value_iteration<M: TransitionModel>(
    model: &M,
    surrogate_cost: &[f64],
    gamma: f64,
    tol: f64,
) -> Result<(TabularPolicy, Vec<f64>, Vec<f64>)> {
    let sol = soft_value_iteration_warm(
        model,
        surrogate_cost,
        gamma,
        tol,
        None,
        ExpertBackup::default(),
        DEFAULT_SOFT_VI_CAP,
    )?;
    Ok((sol.eta, sol.q, sol.v))
}

pub fn soft_value_iteration_warm<M: TransitionModel>(
    model: &M,
    surrogate_cost: &[f64],
    gamma: f64,
    tol: f64,
    warm: Option<&[f64]>,
    backup: ExpertBackup,
    cap: usize,
) -> Result<SoftViSolution> {
    let s_n = model.num_states();
    let a_n = model.num_actions();
    if surrogate_cost.len() != s_n * a_n {
        return Err(DpiError::invalid("surrogate cost size mismatch"));
    }
    if surrogate_cost.iter().any(|c| !c.is_finite()) {
        return Err(DpiError::invalid("surrogate cost must be finite"));
    }
    if !(tol > 0.0) {
        return Err(DpiError::invalid("tol must be positive"));
    }
    if let ExpertBackup::Soft { temperature } = backup {
        if !(temperature > 0.0) {
            return Err(DpiError::invalid("temperature must be positive"));
        }
    }

    let mut v = match warm {
        Some(w) if w.len() == s_n => w.to_vec(),
        _ => vec![0.0; s_n],
    };
    let mut next = vec![0.0f64; s_n];
    let mut z = vec![0.0f64; a_n];
    let mut diff = f64::INFINITY;
    let mut sweeps = 0usize;
    while sweeps < cap {
        for s in 0..s_n {
            for (a, za) in z.iter_mut().enumerate() {
                let mut acc = 0.0;
                for &(tgt, p) in model.row(s, a) {
                    acc += p * v[tgt as usize];
                }
                *za = surrogate_cost[s * a_n + a] + gamma * acc;
            }
            next[s] = backup_value(&z, backup);
        }
        diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        sweeps += 1;
        if gamma * diff <= tol {
            let (eta, q) = extract_policy(model, surrogate_cost, gamma, &v, backup)?;
            return Ok(SoftViSolution { eta, q, v, sweeps });
        }
    }
    Err(DpiError::NonConvergence {
        what: "soft value iteration",
        iterations: cap,
        residual: diff,
    })
}

fn backup_value(z: &[f64], backup: ExpertBackup) -> f64 {
    let m = z.iter().copied().fold(f64::INFINITY, f64::min);
    match backup {
        ExpertBackup::Hard => m,
        ExpertBackup::Soft { temperature } => {
            let lse: f64 = z.iter().map(|za| (-(za - m) / temperature).exp()).sum();
            m - temperature * lse.ln()
        }
    }
}

fn extract_policy<M: TransitionModel>(
    model: &M,
    surrogate_cost: &[f64],
    gamma: f64,
    v: &[f64],
    backup: ExpertBackup,
) -> Result<(TabularPolicy, Vec<f64>)> {
    let s_n = model.num_states();
    let a_n = model.num_actions();
    let mut q = vec![0.0f64; s_n * a_n];
    let mut probs = vec![0.0f64; s_n * a_n];
    for s in 0..s_n {
        for a in 0..a_n {
            let mut acc = 0.0;
            for &(tgt, p) in model.row(s, a) {
                acc += p * v[tgt as usize];
            }
            q[s * a_n + a] = surrogate_cost[s * a_n + a] + gamma * acc;
        }
        let row = &q[s * a_n..(s + 1) * a_n];
        let out = &mut probs[s * a_n..(s + 1) * a_n];
        match backup {
            ExpertBackup::Hard => {
                let mut best = 0usize;
                for a in 1..a_n {
                    if row[a] < row[best] {
                        best = a;
                    }
                }
                out[best] = 1.0;
            }
            ExpertBackup::Soft { temperature } => {
                let m = row.iter().copied().fold(f64::INFINITY, f64::min);
                let mut sum = 0.0;
                for a in 0..a_n {
                    let w = (-(row[a] - m) / temperature).exp();
                    out[a] = w;
                    sum += w;
                }
                for p in out.iter_mut() {
                    *p /= sum;
                }
            }
        }
    }
    let eta = TabularPolicy::new(s_n, a_n, probs)?;
    Ok((eta, q))
}
