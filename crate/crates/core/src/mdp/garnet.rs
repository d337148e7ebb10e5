//! Random MDP generators.

use super::{SparseRow, TabularMdp};
use crate::error::{DpiError, Result};
use crate::seeding::{self, tags};
use rand::Rng;

/// Default discount for generated instances; callers override via
/// [`TabularMdp::with_gamma`].
const DEFAULT_GAMMA: f64 = 0.99;

/// Generate a Garnet MDP: each `(s, a)` transitions to exactly `branches`
/// distinct successor states with probabilities drawn uniformly on the
/// simplex (sorted-uniform spacings); costs are i.i.d. uniform on `[0, 1]`;
/// the start distribution is uniform.
///
/// The same seed always produces the same instance.
pub fn garnet_generate(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    branches: usize,
) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 || branches == 0 {
        return Err(DpiError::invalid("num_states, num_actions and branches must be positive"));
    }
    if branches > num_states {
        return Err(DpiError::invalid(format!(
            "branches ({branches}) exceeds num_states ({num_states})"
        )));
    }
    let mut rng = seeding::rng(seed, tags::GARNET, 0);
    let mut rows: Vec<SparseRow> = Vec::with_capacity(num_states * num_actions);
    let mut costs = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states * num_actions {
        let mut successors: Vec<usize> =
            rand::seq::index::sample(&mut rng, num_states, branches).into_vec();
        successors.sort_unstable();
        let probs = simplex_sample(branches, &mut rng);
        rows.push(
            successors
                .into_iter()
                .zip(probs)
                .map(|(s, p)| (s as u32, p))
                .collect(),
        );
        costs.push(rng.gen::<f64>());
    }
    let rho0 = vec![1.0 / num_states as f64; num_states];
    TabularMdp::from_sparse(num_states, num_actions, rows, costs, rho0, DEFAULT_GAMMA)
}

/// Uniform sample from the (k-1)-simplex via sorted uniform spacings.
fn simplex_sample<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen::<f64>()).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut probs = Vec::with_capacity(k);
    let mut prev = 0.0;
    for c in cuts {
        probs.push(c - prev);
        prev = c;
    }
    probs.push(1.0 - prev);
    // Exact renormalization: spacings already sum to 1 up to rounding.
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

/// Dense random MDP with Dirichlet(1) transition rows and start
/// distribution; costs i.i.d. uniform on `[0, 1]`. Used by the theory
/// checks, which want fully supported transitions.
pub fn random_dense_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
) -> Result<TabularMdp> {
    let mut rng = seeding::rng(seed, tags::DENSE_MDP, 0);
    let mut rows: Vec<SparseRow> = Vec::with_capacity(num_states * num_actions);
    let mut costs = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states * num_actions {
        rows.push(
            dirichlet_row(num_states, &mut rng)
                .into_iter()
                .enumerate()
                .map(|(s, p)| (s as u32, p))
                .collect(),
        );
        costs.push(rng.gen::<f64>());
    }
    let rho0 = dirichlet_row(num_states, &mut rng);
    TabularMdp::from_sparse(num_states, num_actions, rows, costs, rho0, gamma)
}

fn dirichlet_row<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n)
        .map(|_| -(rng.gen::<f64>().max(f64::MIN_POSITIVE)).ln())
        .collect();
    let sum: f64 = row.iter().sum();
    for p in &mut row {
        *p /= sum;
    }
    row
}
