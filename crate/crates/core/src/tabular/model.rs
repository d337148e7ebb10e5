//! Count-based transition model and rollout collection.

use crate::error::{DpiError, Result};
use crate::mdp::{SparseRow, TabularMdp, TabularPolicy, TransitionModel};
use crate::par;
use crate::seeding::{self, tags};

/// One observed transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub state: u32,
    pub action: u32,
    pub next: u32,
}

/// Rollout data in deterministic order (episode-major, time-major).
#[derive(Debug, Clone)]
pub struct DiscreteRollouts {
    pub transitions: Vec<Transition>,
    pub episodes: usize,
    pub horizon: usize,
}

impl DiscreteRollouts {
    /// Visited states in collection order; these are the samples from the
    /// current policy's visitation distribution used by the classifier fit.
    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.transitions.iter().map(|t| t.state as usize)
    }
}

/// Execute `policy` for `num_episodes` episodes of length `horizon`.
/// Episode `i` draws from the stream `(seed, i)`, so the batch content is
/// independent of how episodes are scheduled across workers.
pub fn collect_rollouts(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    num_episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<DiscreteRollouts> {
    if num_episodes == 0 || horizon == 0 {
        return Err(DpiError::invalid("num_episodes and horizon must be at least 1"));
    }
    crate::mdp::check_compatible(mdp, policy)?;
    let per_episode: Vec<Vec<Transition>> = par::map_indexed(num_episodes, |ep| {
        let mut rng = seeding::rng(seed, tags::ROLLOUT, ep as u64);
        let mut out = Vec::with_capacity(horizon);
        let mut s = mdp.sample_start(&mut rng);
        for _ in 0..horizon {
            let a = policy.sample(s, &mut rng);
            let next = mdp.sample_next(s, a, &mut rng);
            out.push(Transition {
                state: s as u32,
                action: a as u32,
                next: next as u32,
            });
            s = next;
        }
        out
    });
    let transitions = per_episode.into_iter().flatten().collect();
    Ok(DiscreteRollouts {
        transitions,
        episodes: num_episodes,
        horizon,
    })
}

/// Maximum-likelihood tabular transition model from visit counts.
///
/// Unvisited `(s, a)` pairs fall back to a self-loop so every row stays
/// stochastic without inventing mass on unseen states.
#[derive(Debug, Clone)]
pub struct EmpiricalModel {
    num_states: usize,
    num_actions: usize,
    counts: Vec<Vec<(u32, u64)>>,
    totals: Vec<u64>,
    p_hat: Vec<SparseRow>,
}

impl EmpiricalModel {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        let p_hat = (0..num_states * num_actions)
            .map(|i| vec![((i / num_actions) as u32, 1.0)])
            .collect();
        Self {
            num_states,
            num_actions,
            counts: vec![Vec::new(); num_states * num_actions],
            totals: vec![0; num_states * num_actions],
            p_hat,
        }
    }

    /// Fold observed transitions into the counts and refresh the affected
    /// rows of the normalized model.
    pub fn absorb(&mut self, transitions: &[Transition]) {
        for t in transitions {
            let idx = t.state as usize * self.num_actions + t.action as usize;
            let bucket = &mut self.counts[idx];
            match bucket.iter_mut().find(|(s, _)| *s == t.next) {
                Some((_, c)) => *c += 1,
                None => bucket.push((t.next, 1)),
            }
            self.totals[idx] += 1;
        }
        // Refresh normalized rows for every touched pair.
        let mut touched: Vec<usize> = transitions
            .iter()
            .map(|t| t.state as usize * self.num_actions + t.action as usize)
            .collect();
        touched.sort_unstable();
        touched.dedup();
        for idx in touched {
            let total = self.totals[idx] as f64;
            let mut bucket = self.counts[idx].clone();
            bucket.sort_unstable_by_key(|&(s, _)| s);
            self.counts[idx] = bucket.clone();
            self.p_hat[idx] = bucket
                .into_iter()
                .map(|(s, c)| (s, c as f64 / total))
                .collect();
        }
    }

    /// Fold a pre-aggregated count for one `(s, a, s')` triple into the
    /// model; equivalent to absorbing `count` copies of the transition.
    pub fn absorb_counted(&mut self, state: usize, action: usize, next: usize, count: u64) {
        if count == 0 {
            return;
        }
        let idx = state * self.num_actions + action;
        let bucket = &mut self.counts[idx];
        match bucket.iter_mut().find(|(s, _)| *s as usize == next) {
            Some((_, c)) => *c += count,
            None => bucket.push((next as u32, count)),
        }
        self.totals[idx] += count;
        let total = self.totals[idx] as f64;
        let mut bucket = self.counts[idx].clone();
        bucket.sort_unstable_by_key(|&(s, _)| s);
        self.counts[idx] = bucket.clone();
        self.p_hat[idx] = bucket
            .into_iter()
            .map(|(s, c)| (s, c as f64 / total))
            .collect();
    }

    pub fn visited(&self, state: usize, action: usize) -> bool {
        self.totals[state * self.num_actions + action] > 0
    }

    pub fn total_visits(&self, state: usize, action: usize) -> u64 {
        self.totals[state * self.num_actions + action]
    }

    pub fn count(&self, state: usize, action: usize, next: usize) -> u64 {
        self.counts[state * self.num_actions + action]
            .iter()
            .find(|(s, _)| *s as usize == next)
            .map(|(_, c)| *c)
            .unwrap_or(0)
    }
}

impl TransitionModel for EmpiricalModel {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn row(&self, state: usize, action: usize) -> &[(u32, f64)] {
        &self.p_hat[state * self.num_actions + action]
    }
}

/// Estimate a fresh model from `num_episodes` rollouts of `policy`.
pub fn estimate_model(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    num_episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<EmpiricalModel> {
    let rollouts = collect_rollouts(mdp, policy, num_episodes, horizon, seed)?;
    let mut model = EmpiricalModel::new(mdp.num_states(), mdp.num_actions());
    model.absorb(&rollouts.transitions);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::garnet_generate;

    #[test]
    fn deterministic_mdp_gives_one_hot_rows() {
        // 2-state deterministic flip-flop under both actions
        let rows = vec![
            vec![(1u32, 1.0)],
            vec![(1u32, 1.0)],
            vec![(0u32, 1.0)],
            vec![(0u32, 1.0)],
        ];
        let mdp = TabularMdp::from_sparse(2, 2, rows, vec![0.0; 4], vec![0.5, 0.5], 0.9).unwrap();
        let pol = TabularPolicy::uniform(2, 2);
        let model = estimate_model(&mdp, &pol, 50, 20, 3).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                if model.visited(s, a) {
                    assert_eq!(model.row(s, a), &[((1 - s) as u32, 1.0)]);
                }
            }
        }
    }

    #[test]
    fn unvisited_pairs_self_loop() {
        let model = EmpiricalModel::new(4, 2);
        for s in 0..4 {
            for a in 0..2 {
                assert_eq!(model.row(s, a), &[(s as u32, 1.0)]);
                assert!(!model.visited(s, a));
            }
        }
    }

    #[test]
    fn binomial_concentration() {
        // P(s1 | s0, a0) = 0.3; with ~1e5 visits the MLE lands within 0.01.
        let rows = vec![vec![(0u32, 0.7), (1u32, 0.3)], vec![(0u32, 1.0)]];
        let mdp = TabularMdp::from_sparse(2, 1, rows, vec![0.0; 2], vec![1.0, 0.0], 0.9).unwrap();
        let pol = TabularPolicy::uniform(2, 1);
        let model = estimate_model(&mdp, &pol, 200, 1000, 7).unwrap();
        let visits = model.total_visits(0, 0);
        assert!(visits > 90_000, "expected heavy visitation, got {visits}");
        let p_hat = model
            .row(0, 0)
            .iter()
            .find(|(s, _)| *s == 1)
            .map(|(_, p)| *p)
            .unwrap();
        assert!((p_hat - 0.3).abs() <= 0.01, "p_hat = {p_hat}");
    }

    #[test]
    fn rollouts_deterministic_in_seed() {
        let mdp = garnet_generate(5, 30, 3, 2).unwrap();
        let pol = TabularPolicy::uniform(30, 3);
        let a = collect_rollouts(&mdp, &pol, 10, 25, 11).unwrap();
        let b = collect_rollouts(&mdp, &pol, 10, 25, 11).unwrap();
        assert_eq!(a.transitions, b.transitions);
        let c = collect_rollouts(&mdp, &pol, 10, 25, 12).unwrap();
        assert_ne!(a.transitions, c.transitions);
    }
}
