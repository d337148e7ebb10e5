//! Brute-force numeric check of the per-iteration improvement bound.
//!
//! On tiny MDPs both trust-region optima are found by grid search over the
//! discretized policy simplex under the true model: the expert minimizes the
//! objective inside the expected-TV ball of radius `alpha` around the
//! current policy, the next reactive policy minimizes the expert's expected
//! disadvantage inside the ball of radius `beta`. The realized improvement
//! is then compared against
//! `beta*eps/(1-gamma)^2 - |A_n|/(1-gamma) - Delta(alpha)`.

use crate::error::{DpiError, Result};
use crate::mdp::{
    evaluate_exact, policy_cost_vector, policy_transition_rows, solve_value, TabularMdp,
    TabularPolicy,
};

#[derive(Debug, Clone)]
pub struct Theorem2Outcome {
    /// Realized improvement `J(pi_{n+1}) - J(pi_n)`.
    pub lhs: f64,
    /// Bound `beta*eps/(1-gamma)^2 - |A_n|/(1-gamma) - Delta(alpha)`.
    pub rhs_bound: f64,
    /// Expert gain `Delta(alpha) = J(pi_n) - J(eta_n)`.
    pub delta_alpha: f64,
    /// Expected disadvantage of the new policy against the expert.
    pub a_n: f64,
    /// Maximum per-state expected disadvantage magnitude.
    pub epsilon: f64,
    pub eta: TabularPolicy,
    pub pi_next: TabularPolicy,
}

/// Sizes beyond which the product grid stops being brute-forceable.
const MAX_STATES: usize = 4;
const MAX_ACTIONS: usize = 3;

/// All probability vectors over `a_n` actions on a grid with the given step,
/// preceded by a caller-supplied exact row (so the current policy is always
/// a candidate and ties resolve toward it).
fn simplex_grid(a_n: usize, step: f64) -> Vec<Vec<f64>> {
    let levels = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    match a_n {
        1 => out.push(vec![1.0]),
        2 => {
            for i in 0..=levels {
                let p = i as f64 / levels as f64;
                out.push(vec![p, 1.0 - p]);
            }
        }
        3 => {
            for i in 0..=levels {
                for j in 0..=(levels - i) {
                    let p0 = i as f64 / levels as f64;
                    let p1 = j as f64 / levels as f64;
                    out.push(vec![p0, p1, 1.0 - p0 - p1]);
                }
            }
        }
        _ => unreachable!("guarded by MAX_ACTIONS"),
    }
    out
}

/// Enumerate product policies over per-state candidate rows, pruning on the
/// partial weighted-TV budget, and return the feasible minimizer of `score`.
fn grid_search_min(
    per_state: &[Vec<Vec<f64>>],
    d_ref: &[f64],
    pi_ref: &TabularPolicy,
    budget: f64,
    mut score: impl FnMut(&TabularPolicy) -> Result<f64>,
) -> Result<TabularPolicy> {
    let s_n = per_state.len();
    let mut choice = vec![0usize; s_n];
    let mut best: Option<(f64, TabularPolicy)> = None;

    // Depth-first product enumeration with an explicit stack of partial TV.
    fn recurse(
        s: usize,
        tv_so_far: f64,
        per_state: &[Vec<Vec<f64>>],
        d_ref: &[f64],
        pi_ref: &TabularPolicy,
        budget: f64,
        choice: &mut [usize],
        best: &mut Option<(f64, TabularPolicy)>,
        score: &mut dyn FnMut(&TabularPolicy) -> Result<f64>,
    ) -> Result<()> {
        let s_n = per_state.len();
        let a_n = pi_ref.num_actions();
        if s == s_n {
            let mut probs = Vec::with_capacity(s_n * a_n);
            for (st, &c) in choice.iter().enumerate() {
                probs.extend_from_slice(&per_state[st][c]);
            }
            let cand = TabularPolicy::new(s_n, a_n, probs)?;
            let val = score(&cand)?;
            match best {
                Some((b, _)) if val >= *b => {}
                _ => *best = Some((val, cand)),
            }
            return Ok(());
        }
        for (c, row) in per_state[s].iter().enumerate() {
            let tv: f64 = 0.5
                * row
                    .iter()
                    .zip(pi_ref.row(s))
                    .map(|(p, q)| (p - q).abs())
                    .sum::<f64>();
            let tv_new = tv_so_far + d_ref[s] * tv;
            if tv_new > budget + 1e-12 {
                continue;
            }
            choice[s] = c;
            recurse(s + 1, tv_new, per_state, d_ref, pi_ref, budget, choice, best, score)?;
        }
        Ok(())
    }

    recurse(
        0,
        0.0,
        per_state,
        d_ref,
        pi_ref,
        budget,
        &mut choice,
        &mut best,
        &mut score,
    )?;
    best.map(|(_, p)| p)
        .ok_or_else(|| DpiError::numerical("grid search found no feasible policy"))
}

/// Run the improvement-bound check at grid resolution `grid_resolution`.
/// The caller asserts `lhs <= rhs_bound + slack` with the grid slack
/// `2 * grid_resolution / (1 - gamma)^2`.
pub fn theorem2_check(
    mdp: &TabularMdp,
    pi_n: &TabularPolicy,
    alpha: f64,
    beta: f64,
    grid_resolution: f64,
) -> Result<Theorem2Outcome> {
    if mdp.num_states() > MAX_STATES || mdp.num_actions() > MAX_ACTIONS {
        return Err(DpiError::invalid(format!(
            "grid check is limited to {MAX_STATES} states / {MAX_ACTIONS} actions"
        )));
    }
    if !(grid_resolution > 0.0 && grid_resolution <= 0.5) {
        return Err(DpiError::invalid("grid resolution must lie in (0, 0.5]"));
    }
    if alpha < 0.0 || beta < 0.0 {
        return Err(DpiError::invalid("alpha and beta must be nonnegative"));
    }
    let s_n = mdp.num_states();
    let a_n = mdp.num_actions();
    let gamma = mdp.gamma();

    let eval_n = evaluate_exact(mdp, pi_n)?;
    let grid = simplex_grid(a_n, grid_resolution);
    let per_state: Vec<Vec<Vec<f64>>> = (0..s_n)
        .map(|s| {
            let mut rows = Vec::with_capacity(grid.len() + 1);
            rows.push(pi_n.row(s).to_vec());
            rows.extend(grid.iter().cloned());
            rows
        })
        .collect();

    // Expert search: minimize J inside the alpha ball (true model).
    let eta = grid_search_min(&per_state, &eval_n.d, pi_n, alpha, |cand| {
        let rows = policy_transition_rows(mdp, cand);
        let c = policy_cost_vector(mdp.costs(), cand);
        let v = solve_value(&rows, &c, gamma, None)?;
        Ok(mdp.rho0().iter().zip(&v).map(|(r, vi)| r * vi).sum())
    })?;
    let eval_eta = evaluate_exact(mdp, &eta)?;
    let delta_alpha = eval_n.j - eval_eta.j;

    // Imitation search: minimize the expert's expected disadvantage inside
    // the beta ball. Linear in the candidate, so no solves are needed.
    let pi_next = grid_search_min(&per_state, &eval_n.d, pi_n, beta, |cand| {
        let mut total = 0.0;
        for s in 0..s_n {
            let inner: f64 = (0..a_n)
                .map(|a| cand.prob(s, a) * eval_eta.adv[s * a_n + a])
                .sum();
            total += eval_n.d[s] * inner;
        }
        Ok(total)
    })?;

    let mut a_n_val = 0.0;
    let mut epsilon = 0.0f64;
    for s in 0..s_n {
        let inner: f64 = (0..a_n)
            .map(|a| pi_next.prob(s, a) * eval_eta.adv[s * a_n + a])
            .sum();
        a_n_val += eval_n.d[s] * inner;
        epsilon = epsilon.max(inner.abs());
    }
    let j_next = evaluate_exact(mdp, &pi_next)?.j;
    let lhs = j_next - eval_n.j;
    let rhs_bound = beta * epsilon / ((1.0 - gamma) * (1.0 - gamma))
        - a_n_val.abs() / (1.0 - gamma)
        - delta_alpha;

    Ok(Theorem2Outcome {
        lhs,
        rhs_bound,
        delta_alpha,
        a_n: a_n_val,
        epsilon,
        eta,
        pi_next,
    })
}
