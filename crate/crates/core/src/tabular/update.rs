//! Conservative mixture update.

use super::csoaa::CsoaaClassifier;
use crate::error::{DpiError, Result};
use crate::mdp::TabularPolicy;

/// `pi_{n+1}(.|s) = (1 - beta) pi_n(.|s) + beta onehot(classifier(s))`.
///
/// The per-state total variation to `pi_n` is at most `beta` by
/// construction, so the mixture always satisfies the reactive trust region.
pub fn conservative_update(
    pi_n: &TabularPolicy,
    classifier: &CsoaaClassifier,
    beta: f64,
) -> Result<TabularPolicy> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(DpiError::invalid("beta must lie in [0, 1]"));
    }
    if classifier.num_actions() != pi_n.num_actions() {
        return Err(DpiError::invalid("classifier/policy action count mismatch"));
    }
    let s_n = pi_n.num_states();
    let a_n = pi_n.num_actions();
    let mut probs = vec![0.0f64; s_n * a_n];
    for s in 0..s_n {
        let star = classifier.predict(s)?;
        for a in 0..a_n {
            let one = if a == star { 1.0 } else { 0.0 };
            probs[s * a_n + a] = (1.0 - beta) * pi_n.prob(s, a) + beta * one;
        }
        // exact renormalization against rounding in the mixture
        let sum: f64 = probs[s * a_n..(s + 1) * a_n].iter().sum();
        for a in 0..a_n {
            probs[s * a_n + a] /= sum;
        }
    }
    TabularPolicy::new(s_n, a_n, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::csoaa_fit;

    fn classifier_picking(action: usize, num_states: usize, num_actions: usize) -> CsoaaClassifier {
        // Constant cost vectors with a unique minimum at `action`.
        let states: Vec<usize> = (0..num_states).collect();
        let cost_vectors: Vec<Vec<f64>> = states
            .iter()
            .map(|_| (0..num_actions).map(|a| if a == action { 0.0 } else { 1.0 }).collect())
            .collect();
        csoaa_fit(num_states, &states, &cost_vectors, 1e-8).unwrap()
    }

    #[test]
    fn beta_zero_is_identity() {
        let pi = TabularPolicy::uniform(4, 3);
        let clf = classifier_picking(2, 4, 3);
        let next = conservative_update(&pi, &clf, 0.0).unwrap();
        assert_eq!(next.probs(), pi.probs());
    }

    #[test]
    fn beta_one_is_classifier_policy() {
        let pi = TabularPolicy::uniform(4, 3);
        let clf = classifier_picking(1, 4, 3);
        let next = conservative_update(&pi, &clf, 1.0).unwrap();
        for s in 0..4 {
            assert_eq!(next.row(s), &[0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn mixture_arithmetic() {
        let pi = TabularPolicy::uniform(2, 2);
        let clf = classifier_picking(1, 2, 2);
        let next = conservative_update(&pi, &clf, 0.3).unwrap();
        for s in 0..2 {
            assert!((next.prob(s, 0) - 0.35).abs() <= 1e-12);
            assert!((next.prob(s, 1) - 0.65).abs() <= 1e-12);
        }
    }

    #[test]
    fn per_state_tv_bounded_by_beta() {
        let mut rng = crate::seeding::master_rng(8);
        let pi = TabularPolicy::random(16, 4, &mut rng);
        let clf = classifier_picking(3, 16, 4);
        for beta in [0.05, 0.3, 0.9] {
            let next = conservative_update(&pi, &clf, beta).unwrap();
            for s in 0..16 {
                let tv = next.tv_distance_at(&pi, s);
                assert!(tv <= beta + 1e-12, "state {s}: tv {tv} > beta {beta}");
            }
        }
    }
}
