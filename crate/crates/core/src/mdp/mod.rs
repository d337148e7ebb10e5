//! Exact tabular MDP machinery.
//!
//! Finite MDPs with sparse transition rows, exact policy evaluation by
//! linear solves, visitation distributions, value iteration, and the numeric
//! oracles behind the improvement-theory checks.

mod eval;
mod garnet;
mod io;
mod lemmas;
mod vi;

pub use eval::{
    evaluate_exact, policy_cost_vector, policy_objective, policy_transition_rows, solve_value,
    solve_visitation, EvalWorkspace, ExactEvaluation,
};
pub use garnet::{garnet_generate, random_dense_mdp};
pub use io::MdpJson;
pub use lemmas::{expectation_switch_check, pdl_gap, visitation_tv_bound_check};
pub use vi::{exact_value_iteration, exact_value_iteration_capped};

use crate::error::{DpiError, Result};
use rand::Rng;

/// Tolerance for "sums to one" checks on stochastic rows.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Sparse transition row: `(next_state, probability)` pairs with nonzero
/// probability.
pub type SparseRow = Vec<(u32, f64)>;

/// Anything that exposes row-stochastic transition rows per `(s, a)`.
///
/// Both the true MDP and the count-based empirical model implement this, so
/// the solvers in [`eval`] and the soft value iteration run against either.
pub trait TransitionModel {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn row(&self, state: usize, action: usize) -> &[(u32, f64)];
}

/// A finite discounted MDP in the cost-minimization convention.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    rows: Vec<SparseRow>,
    costs: Vec<f64>,
    rho0: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    /// Build from sparse rows. `rows` and `costs` are indexed by
    /// `s * num_actions + a`.
    pub fn from_sparse(
        num_states: usize,
        num_actions: usize,
        rows: Vec<SparseRow>,
        costs: Vec<f64>,
        rho0: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(DpiError::invalid("num_states and num_actions must be positive"));
        }
        if rows.len() != num_states * num_actions || costs.len() != num_states * num_actions {
            return Err(DpiError::invalid("transition/cost table size mismatch"));
        }
        if rho0.len() != num_states {
            return Err(DpiError::invalid("rho0 length mismatch"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(DpiError::invalid(format!("gamma must lie in (0,1), got {gamma}")));
        }
        for (i, row) in rows.iter().enumerate() {
            let mut sum = 0.0;
            for &(tgt, p) in row {
                if (tgt as usize) >= num_states {
                    return Err(DpiError::invalid("transition target out of range"));
                }
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(DpiError::invalid("transition probabilities must be nonnegative"));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(DpiError::invalid(format!(
                    "transition row {i} sums to {sum}, not 1"
                )));
            }
        }
        let rho_sum: f64 = rho0.iter().sum();
        if (rho_sum - 1.0).abs() > STOCHASTIC_TOL || rho0.iter().any(|p| *p < 0.0) {
            return Err(DpiError::invalid("rho0 is not a probability vector"));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(DpiError::invalid("costs must be finite"));
        }
        Ok(Self { num_states, num_actions, rows, costs, rho0, gamma })
    }

    /// Build from a dense row-major `[S x A x S]` transition tensor.
    pub fn from_dense(
        num_states: usize,
        num_actions: usize,
        transitions: &[f64],
        costs: Vec<f64>,
        rho0: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if transitions.len() != num_states * num_actions * num_states {
            return Err(DpiError::invalid("dense transition tensor size mismatch"));
        }
        let rows = (0..num_states * num_actions)
            .map(|i| {
                transitions[i * num_states..(i + 1) * num_states]
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p != 0.0)
                    .map(|(s, p)| (s as u32, *p))
                    .collect()
            })
            .collect();
        Self::from_sparse(num_states, num_actions, rows, costs, rho0, gamma)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Replace the discount factor, revalidating its range.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(DpiError::invalid(format!("gamma must lie in (0,1), got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn cost(&self, state: usize, action: usize) -> f64 {
        self.costs[state * self.num_actions + action]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[(u32, f64)] {
        &self.rows[state * self.num_actions + action]
    }

    /// Dense `[S x A x S]` tensor, row-major.
    pub fn dense_transitions(&self) -> Vec<f64> {
        let s = self.num_states;
        let mut out = vec![0.0; s * self.num_actions * s];
        for (i, row) in self.rows.iter().enumerate() {
            for &(tgt, p) in row {
                out[i * s + tgt as usize] = p;
            }
        }
        out
    }

    /// Sample a start state from `rho0`.
    pub fn sample_start<R: Rng>(&self, rng: &mut R) -> usize {
        sample_categorical_dense(&self.rho0, rng)
    }

    /// Sample a successor of `(state, action)`.
    pub fn sample_next<R: Rng>(&self, state: usize, action: usize, rng: &mut R) -> usize {
        let row = self.transition_row(state, action);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(tgt, p) in row {
            acc += p;
            if u < acc {
                return tgt as usize;
            }
        }
        row.last().map(|&(tgt, _)| tgt as usize).unwrap_or(state)
    }
}

impl TransitionModel for TabularMdp {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn row(&self, state: usize, action: usize) -> &[(u32, f64)] {
        self.transition_row(state, action)
    }
}

/// Per-state action distribution table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(DpiError::invalid("policy table size mismatch"));
        }
        for s in 0..num_states {
            let row = &probs[s * num_actions..(s + 1) * num_actions];
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL || row.iter().any(|p| *p < 0.0) {
                return Err(DpiError::invalid(format!(
                    "policy row {s} is not a probability distribution (sum {sum})"
                )));
            }
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            num_states,
            num_actions,
            probs: vec![p; num_states * num_actions],
        }
    }

    /// Deterministic policy from one action index per state.
    pub fn deterministic(num_states: usize, num_actions: usize, actions: &[usize]) -> Result<Self> {
        if actions.len() != num_states {
            return Err(DpiError::invalid("actions length mismatch"));
        }
        let mut probs = vec![0.0; num_states * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(DpiError::invalid("action index out of range"));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self { num_states, num_actions, probs })
    }

    /// Random policy with Dirichlet(1) rows.
    pub fn random<R: Rng>(num_states: usize, num_actions: usize, rng: &mut R) -> Self {
        let mut probs = vec![0.0; num_states * num_actions];
        for s in 0..num_states {
            let row = &mut probs[s * num_actions..(s + 1) * num_actions];
            let mut sum = 0.0;
            for p in row.iter_mut() {
                *p = -(rng.gen::<f64>().max(f64::MIN_POSITIVE)).ln();
                sum += *p;
            }
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
        Self { num_states, num_actions, probs }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Sample an action at `state`.
    pub fn sample<R: Rng>(&self, state: usize, rng: &mut R) -> usize {
        sample_categorical_dense(self.row(state), rng)
    }

    /// Per-state total variation distance to another policy.
    pub fn tv_distance_at(&self, other: &TabularPolicy, state: usize) -> f64 {
        0.5 * self
            .row(state)
            .iter()
            .zip(other.row(state))
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }
}

fn sample_categorical_dense<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Check that `(mdp, policy)` shapes agree.
pub(crate) fn check_compatible(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<()> {
    if mdp.num_states != policy.num_states || mdp.num_actions != policy.num_actions {
        return Err(DpiError::invalid("MDP and policy dimensions do not match"));
    }
    Ok(())
}
