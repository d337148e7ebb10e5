//! Exact policy evaluation.
//!
//! Values and visitation distributions come from linear solves of the
//! Bellman systems, never from truncated rollout sums. Small systems go
//! through a dense LU factorization; larger ones use the contraction
//! fixed-point iteration with a certified residual bound (the map is a
//! `gamma`-contraction, so `gamma * |x_{k+1} - x_k| / (1 - gamma)` bounds the
//! remaining error).

use super::{check_compatible, SparseRow, TabularMdp, TabularPolicy, TransitionModel};
use crate::error::{DpiError, Result};
use nalgebra::{DMatrix, DVector};

/// Above this state count the solver switches from dense LU to the certified
/// fixed-point iteration.
const DENSE_SOLVE_LIMIT: usize = 256;

/// Residual target for the iterative solver, relative to the value scale.
const ITER_RESIDUAL_TOL: f64 = 1e-12;

const MAX_SOLVE_SWEEPS: usize = 4_000_000;

/// Exact evaluation of a policy: value, action value, disadvantage,
/// objective and visitation distribution.
#[derive(Debug, Clone)]
pub struct ExactEvaluation {
    /// State values `V`, length S.
    pub v: Vec<f64>,
    /// Action values `Q`, length S*A.
    pub q: Vec<f64>,
    /// Disadvantage `A = Q - V`, length S*A.
    pub adv: Vec<f64>,
    /// Objective `J = <rho0, V>`.
    pub j: f64,
    /// Discounted state visitation distribution, length S.
    pub d: Vec<f64>,
}

/// Warm-start storage reused across repeated evaluations of slowly changing
/// policies.
#[derive(Debug, Clone, Default)]
pub struct EvalWorkspace {
    pub v: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
}

/// Merge per-action transition rows into per-state rows under `policy`.
pub fn policy_transition_rows<M: TransitionModel>(
    model: &M,
    policy: &TabularPolicy,
) -> Vec<SparseRow> {
    let s_n = model.num_states();
    let a_n = model.num_actions();
    let mut scratch = vec![0.0f64; s_n];
    let mut touched: Vec<u32> = Vec::new();
    let mut rows = Vec::with_capacity(s_n);
    for s in 0..s_n {
        touched.clear();
        for a in 0..a_n {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for &(tgt, p) in model.row(s, a) {
                if scratch[tgt as usize] == 0.0 {
                    touched.push(tgt);
                }
                scratch[tgt as usize] += w * p;
            }
        }
        touched.sort_unstable();
        let row: SparseRow = touched
            .iter()
            .map(|&t| {
                let p = scratch[t as usize];
                scratch[t as usize] = 0.0;
                (t, p)
            })
            .collect();
        rows.push(row);
    }
    rows
}

/// Expected immediate cost per state under `policy`.
pub fn policy_cost_vector(costs: &[f64], policy: &TabularPolicy) -> Vec<f64> {
    let a_n = policy.num_actions();
    (0..policy.num_states())
        .map(|s| {
            policy
                .row(s)
                .iter()
                .enumerate()
                .map(|(a, w)| w * costs[s * a_n + a])
                .sum()
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solve `v = c + gamma * P v` for the per-state rows `rows`.
pub fn solve_value(
    rows: &[SparseRow],
    c: &[f64],
    gamma: f64,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = rows.len();
    if n <= DENSE_SOLVE_LIMIT {
        let mut m = DMatrix::<f64>::identity(n, n);
        for (s, row) in rows.iter().enumerate() {
            for &(tgt, p) in row {
                m[(s, tgt as usize)] -= gamma * p;
            }
        }
        let rhs = DVector::from_column_slice(c);
        let lu = m.lu();
        let v = lu.solve(&rhs).ok_or_else(|| {
            DpiError::numerical(format!(
                "Bellman system singular at gamma={gamma} (n={n}); this indicates a \
                 non-stochastic transition matrix"
            ))
        })?;
        return Ok(v.as_slice().to_vec());
    }

    let mut v = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => c.to_vec(),
    };
    let mut next = vec![0.0f64; n];
    let scale = c.iter().fold(1.0f64, |m, x| m.max(x.abs())) / (1.0 - gamma);
    let tol = ITER_RESIDUAL_TOL * scale.max(1.0);
    for sweep in 0..MAX_SOLVE_SWEEPS {
        for (s, row) in rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(tgt, p) in row {
                acc += p * v[tgt as usize];
            }
            next[s] = c[s] + gamma * acc;
        }
        let diff = max_abs_diff(&next, &v);
        std::mem::swap(&mut v, &mut next);
        if gamma * diff <= tol {
            return Ok(v);
        }
        let _ = sweep;
    }
    Err(DpiError::NonConvergence {
        what: "policy evaluation fixed point",
        iterations: MAX_SOLVE_SWEEPS,
        residual: max_abs_diff(&v, &next),
    })
}

/// Solve `x = rho0 + gamma * P^T x`; the visitation distribution is
/// `(1 - gamma) * x`, renormalized to kill accumulated round-off.
pub fn solve_visitation(
    rows: &[SparseRow],
    rho0: &[f64],
    gamma: f64,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = rows.len();
    let x = if n <= DENSE_SOLVE_LIMIT {
        let mut m = DMatrix::<f64>::identity(n, n);
        for (s, row) in rows.iter().enumerate() {
            for &(tgt, p) in row {
                // transpose of (I - gamma P)
                m[(tgt as usize, s)] -= gamma * p;
            }
        }
        let rhs = DVector::from_column_slice(rho0);
        let lu = m.lu();
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| DpiError::numerical("visitation system singular"))?;
        sol.as_slice().to_vec()
    } else {
        // Transposed sparse structure, built once.
        let mut cols: Vec<SparseRow> = vec![Vec::new(); n];
        for (s, row) in rows.iter().enumerate() {
            for &(tgt, p) in row {
                cols[tgt as usize].push((s as u32, p));
            }
        }
        let mut x = match warm {
            Some(w) if w.len() == n => w.to_vec(),
            _ => rho0.to_vec(),
        };
        let mut next = vec![0.0f64; n];
        let tol = ITER_RESIDUAL_TOL / (1.0 - gamma);
        let mut converged = false;
        for _ in 0..MAX_SOLVE_SWEEPS {
            for (s, col) in cols.iter().enumerate() {
                let mut acc = 0.0;
                for &(src, p) in col {
                    acc += p * x[src as usize];
                }
                next[s] = rho0[s] + gamma * acc;
            }
            let diff: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut x, &mut next);
            if gamma * diff <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(DpiError::NonConvergence {
                what: "visitation fixed point",
                iterations: MAX_SOLVE_SWEEPS,
                residual: 0.0,
            });
        }
        x
    };
    let mut d: Vec<f64> = x.iter().map(|xi| (1.0 - gamma) * xi).collect();
    let sum: f64 = d.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err(DpiError::numerical("visitation distribution failed to normalize"));
    }
    for di in &mut d {
        *di /= sum;
    }
    Ok(d)
}

/// Exact policy evaluation under the true model.
pub fn evaluate_exact(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<ExactEvaluation> {
    evaluate_exact_with(mdp, policy, &mut EvalWorkspace::default())
}

/// Exact policy evaluation with warm-start storage for the iterative path.
pub fn evaluate_exact_with(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    ws: &mut EvalWorkspace,
) -> Result<ExactEvaluation> {
    check_compatible(mdp, policy)?;
    let s_n = mdp.num_states();
    let a_n = mdp.num_actions();
    let gamma = mdp.gamma();
    let rows = policy_transition_rows(mdp, policy);
    let c_pi = policy_cost_vector(mdp.costs(), policy);
    let v = solve_value(&rows, &c_pi, gamma, ws.v.as_deref())?;
    let d = solve_visitation(&rows, mdp.rho0(), gamma, ws.x.as_deref())?;

    let mut q = vec![0.0f64; s_n * a_n];
    let mut adv = vec![0.0f64; s_n * a_n];
    for s in 0..s_n {
        for a in 0..a_n {
            let mut acc = 0.0;
            for &(tgt, p) in mdp.transition_row(s, a) {
                acc += p * v[tgt as usize];
            }
            let qa = mdp.cost(s, a) + gamma * acc;
            q[s * a_n + a] = qa;
            adv[s * a_n + a] = qa - v[s];
        }
    }
    let j = mdp.rho0().iter().zip(&v).map(|(r, vi)| r * vi).sum();
    ws.v = Some(v.clone());
    ws.x = Some(d.iter().map(|di| di / (1.0 - gamma)).collect());
    Ok(ExactEvaluation { v, q, adv, j, d })
}

/// Objective `J(policy)` only; cheaper than a full evaluation.
pub fn policy_objective(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    ws: &mut EvalWorkspace,
) -> Result<f64> {
    check_compatible(mdp, policy)?;
    let rows = policy_transition_rows(mdp, policy);
    let c_pi = policy_cost_vector(mdp.costs(), policy);
    let v = solve_value(&rows, &c_pi, mdp.gamma(), ws.v.as_deref())?;
    let j = mdp.rho0().iter().zip(&v).map(|(r, vi)| r * vi).sum();
    ws.v = Some(v);
    Ok(j)
}
