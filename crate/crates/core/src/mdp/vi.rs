//! Exact value iteration, used as the optimality oracle for generated
//! instances.

use super::{TabularMdp, TabularPolicy};
use crate::error::{DpiError, Result};

pub const DEFAULT_VI_CAP: usize = 1_000_000;

/// Value iteration on `Q` to sup-norm Bellman residual `tol`; the greedy
/// policy breaks ties toward the lowest action index.
pub fn exact_value_iteration(mdp: &TabularMdp, tol: f64) -> Result<(Vec<f64>, TabularPolicy)> {
    exact_value_iteration_capped(mdp, tol, DEFAULT_VI_CAP)
}

pub fn exact_value_iteration_capped(
    mdp: &TabularMdp,
    tol: f64,
    cap: usize,
) -> Result<(Vec<f64>, TabularPolicy)> {
    if !(tol > 0.0) {
        return Err(DpiError::invalid("tol must be positive"));
    }
    let s_n = mdp.num_states();
    let a_n = mdp.num_actions();
    let gamma = mdp.gamma();
    let mut q = vec![0.0f64; s_n * a_n];
    let mut vmin = vec![0.0f64; s_n];
    let mut diff = f64::INFINITY;
    let mut sweeps = 0usize;
    while sweeps < cap {
        for s in 0..s_n {
            vmin[s] = (0..a_n).map(|a| q[s * a_n + a]).fold(f64::INFINITY, f64::min);
        }
        diff = 0.0;
        for s in 0..s_n {
            for a in 0..a_n {
                let mut acc = 0.0;
                for &(tgt, p) in mdp.transition_row(s, a) {
                    acc += p * vmin[tgt as usize];
                }
                let new = mdp.cost(s, a) + gamma * acc;
                diff = diff.max((new - q[s * a_n + a]).abs());
                q[s * a_n + a] = new;
            }
        }
        sweeps += 1;
        // After a sweep with in-place change `diff`, the Bellman residual of
        // the new table is at most gamma * diff (contraction).
        if gamma * diff <= tol || diff == 0.0 {
            let greedy = greedy_policy(&q, s_n, a_n)?;
            return Ok((q, greedy));
        }
    }
    Err(DpiError::NonConvergence {
        what: "value iteration",
        iterations: cap,
        residual: diff,
    })
}

fn greedy_policy(q: &[f64], s_n: usize, a_n: usize) -> Result<TabularPolicy> {
    let mut actions = Vec::with_capacity(s_n);
    for s in 0..s_n {
        let mut best = 0usize;
        for a in 1..a_n {
            if q[s * a_n + a] < q[s * a_n + best] {
                best = a;
            }
        }
        actions.push(best);
    }
    TabularPolicy::deterministic(s_n, a_n, &actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{evaluate_exact, random_dense_mdp, TabularPolicy};
    use crate::seeding;

    #[test]
    fn one_state_geometric() {
        let rows = vec![vec![(0u32, 1.0)], vec![(0u32, 1.0)]];
        let mdp =
            TabularMdp::from_sparse(1, 2, rows, vec![0.3, 0.7], vec![1.0], 0.9).unwrap();
        let (q, greedy) = exact_value_iteration(&mdp, 1e-12).unwrap();
        // V* = 0.3 / (1 - 0.9) = 3.0; Q = c + gamma * V*
        assert!((q[0] - (0.3 + 0.9 * 3.0)).abs() <= 1e-9);
        assert!((q[0] - 3.0).abs() <= 1e-9);
        assert_eq!(greedy.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn gamma_near_zero_returns_costs() {
        // gamma = 0 is outside the valid range; a tiny gamma approximates the
        // "no lookahead" case: q ~ costs.
        let mdp = random_dense_mdp(2, 6, 3, 1e-12).unwrap();
        let (q, _) = exact_value_iteration(&mdp, 1e-13).unwrap();
        for (qa, c) in q.iter().zip(mdp.costs()) {
            assert!((qa - c).abs() <= 1e-11);
        }
    }

    #[test]
    fn greedy_beats_random_policies() {
        let mdp = random_dense_mdp(11, 100, 4, 0.9).unwrap();
        let (_, greedy) = exact_value_iteration(&mdp, 1e-10).unwrap();
        let j_star = evaluate_exact(&mdp, &greedy).unwrap().j;
        let mut rng = seeding::master_rng(4242);
        for _ in 0..200 {
            let pol = TabularPolicy::random(100, 4, &mut rng);
            let j = evaluate_exact(&mdp, &pol).unwrap().j;
            assert!(j_star <= j + 1e-8, "greedy {j_star} worse than random {j}");
        }
    }

    #[test]
    fn residual_contracts_per_sweep() {
        // Run sweeps manually and check the per-sweep sup-norm change decays
        // by at least gamma between consecutive sweeps.
        let mdp = random_dense_mdp(3, 15, 3, 0.8).unwrap();
        let s_n = 15;
        let a_n = 3;
        let mut q = vec![0.0f64; s_n * a_n];
        let mut diffs = Vec::new();
        for _ in 0..30 {
            let vmin: Vec<f64> = (0..s_n)
                .map(|s| (0..a_n).map(|a| q[s * a_n + a]).fold(f64::INFINITY, f64::min))
                .collect();
            let mut diff = 0.0f64;
            for s in 0..s_n {
                for a in 0..a_n {
                    let mut acc = 0.0;
                    for &(t, p) in mdp.transition_row(s, a) {
                        acc += p * vmin[t as usize];
                    }
                    let new = mdp.cost(s, a) + 0.8 * acc;
                    diff = diff.max((new - q[s * a_n + a]).abs());
                    q[s * a_n + a] = new;
                }
            }
            diffs.push(diff);
        }
        for w in diffs.windows(2).skip(1) {
            assert!(w[1] <= 0.8 * w[0] + 1e-12, "no contraction: {} -> {}", w[0], w[1]);
        }
    }
}
