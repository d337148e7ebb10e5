//! Cost-sensitive one-against-all classification.
//!
//! Per-action ridge regression of disadvantage vectors onto binary state
//! features; the induced classifier predicts the action with the smallest
//! predicted cost.

use super::features::{binary_features, feature_dim};
use crate::error::{DpiError, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Linear cost-vector regressor over binary state features.
#[derive(Debug, Clone)]
pub struct CsoaaClassifier {
    num_states: usize,
    num_actions: usize,
    feature_dim: usize,
    /// Row-major `[A x feature_dim]`.
    weights: Vec<f64>,
}

impl CsoaaClassifier {
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Predicted cost per action at `state`.
    pub fn scores(&self, state: usize) -> Result<Vec<f64>> {
        let phi = binary_features(state, self.num_states)?;
        Ok((0..self.num_actions)
            .map(|a| {
                let w = &self.weights[a * self.feature_dim..(a + 1) * self.feature_dim];
                w.iter().zip(&phi).map(|(wi, xi)| wi * xi).sum()
            })
            .collect())
    }

    /// Action with the smallest predicted cost; ties break to the lowest
    /// index.
    pub fn predict(&self, state: usize) -> Result<usize> {
        let scores = self.scores(state)?;
        let mut best = 0usize;
        for a in 1..self.num_actions {
            if scores[a] < scores[best] {
                best = a;
            }
        }
        Ok(best)
    }
}

/// Fit per-action ridge regressions of `cost_vectors[i]` (one row of length
/// A per sampled state) onto the binary features of `states[i]`.
pub fn csoaa_fit(
    num_states: usize,
    states: &[usize],
    cost_vectors: &[Vec<f64>],
    ridge: f64,
) -> Result<CsoaaClassifier> {
    if states.is_empty() || states.len() != cost_vectors.len() {
        return Err(DpiError::invalid(
            "need at least one sample with matching states and cost vectors",
        ));
    }
    if !(ridge >= 0.0) {
        return Err(DpiError::invalid("ridge must be nonnegative"));
    }
    let num_actions = cost_vectors[0].len();
    if num_actions == 0 || cost_vectors.iter().any(|cv| cv.len() != num_actions) {
        return Err(DpiError::invalid("cost vector rows must share a positive width"));
    }
    let d = feature_dim(num_states);

    // Gram matrix and per-action right-hand sides share one pass.
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DMatrix::<f64>::zeros(d, num_actions);
    for (i, &s) in states.iter().enumerate() {
        let phi = binary_features(s, num_states)?;
        for r in 0..d {
            if phi[r] == 0.0 {
                continue;
            }
            for c in 0..d {
                gram[(r, c)] += phi[r] * phi[c];
            }
            for a in 0..num_actions {
                rhs[(r, a)] += phi[r] * cost_vectors[i][a];
            }
        }
    }
    for k in 0..d {
        gram[(k, k)] += ridge;
    }
    let chol = Cholesky::new(gram).ok_or_else(|| {
        DpiError::numerical(
            "normal equations are degenerate (rank-deficient features); use ridge > 0",
        )
    })?;
    let mut weights = vec![0.0f64; num_actions * d];
    for a in 0..num_actions {
        let w: DVector<f64> = chol.solve(&DVector::from_iterator(d, (0..d).map(|r| rhs[(r, a)])));
        for r in 0..d {
            weights[a * d + r] = w[r];
        }
    }
    Ok(CsoaaClassifier {
        num_states,
        num_actions,
        feature_dim: d,
        weights,
    })
}
