//! Trajectory collection and batch storage.

use super::ContinuousEnv;
use crate::error::{DpiError, Result};
use crate::par;
use crate::seeding::{self, tags};
use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Anything that maps `(t, state)` to an action draw.
pub trait ContinuousPolicy: Sync {
    fn action(&self, t: usize, s: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64>;
}

/// One episode: `states` has length `T + 1`, `actions` and `costs` length `T`.
#[derive(Debug, Clone)]
pub struct Episode {
    pub states: Vec<DVector<f64>>,
    pub actions: Vec<DVector<f64>>,
    pub costs: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn next_state(&self, t: usize) -> &DVector<f64> {
        &self.states[t + 1]
    }

    /// `sum_t gamma^{t-1} c_t` with t starting at 1.
    pub fn discounted_cost(&self, gamma: f64) -> f64 {
        let mut disc = 1.0;
        let mut total = 0.0;
        for c in &self.costs {
            total += disc * c;
            disc *= gamma;
        }
        total
    }
}

/// K rollouts with seed provenance.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub episodes: Vec<Episode>,
    pub seed: u64,
    pub policy_id: String,
}

impl TrajectoryBatch {
    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn horizon(&self) -> usize {
        self.episodes.first().map(|e| e.len()).unwrap_or(0)
    }

    pub fn state_dim(&self) -> usize {
        self.episodes
            .first()
            .and_then(|e| e.states.first())
            .map(|s| s.len())
            .unwrap_or(0)
    }

    pub fn action_dim(&self) -> usize {
        self.episodes
            .first()
            .and_then(|e| e.actions.first())
            .map(|a| a.len())
            .unwrap_or(0)
    }

    /// Mean state over episodes at timestep `t` (0-based).
    pub fn mean_state_at(&self, t: usize) -> DVector<f64> {
        let mut acc = DVector::zeros(self.state_dim());
        for ep in &self.episodes {
            acc += &ep.states[t];
        }
        acc / self.episodes.len() as f64
    }

    pub fn mean_discounted_cost(&self, gamma: f64) -> f64 {
        self.episodes.iter().map(|e| e.discounted_cost(gamma)).sum::<f64>()
            / self.episodes.len() as f64
    }
}

/// Execute `policy` on `env` for `k` independent episodes. Episode `i` draws
/// from stream `(seed, i)`; the batch is identical no matter how episodes
/// are scheduled across workers.
pub fn collect_trajectories<E, P>(
    env: &E,
    policy: &P,
    k: usize,
    seed: u64,
    policy_id: &str,
) -> Result<TrajectoryBatch>
where
    E: ContinuousEnv + ?Sized,
    P: ContinuousPolicy + ?Sized,
{
    if k == 0 {
        return Err(DpiError::invalid("need at least one episode"));
    }
    let horizon = env.horizon();
    let episodes: Result<Vec<Episode>> = par::map_indexed(k, |ep| {
        let mut rng = seeding::rng(seed, tags::ROLLOUT, ep as u64);
        let mut states = Vec::with_capacity(horizon + 1);
        let mut actions = Vec::with_capacity(horizon);
        let mut costs = Vec::with_capacity(horizon);
        let mut s = env.start().sample(&mut rng);
        for t in 0..horizon {
            let a = policy.action(t, &s, &mut rng);
            if a.len() != env.action_dim() {
                return Err(DpiError::invalid("policy action dimension mismatch"));
            }
            let a = env.clip_action(a);
            costs.push(env.cost().eval(&s, &a));
            let next = env.step(&s, &a, &mut rng)?;
            states.push(s);
            actions.push(a);
            s = next;
        }
        states.push(s);
        Ok(Episode { states, actions, costs })
    })
    .into_iter()
    .collect();
    Ok(TrajectoryBatch {
        episodes: episodes?,
        seed,
        policy_id: policy_id.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
struct EpisodeLine {
    episode: usize,
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    costs: Vec<f64>,
}

impl TrajectoryBatch {
    /// One JSON object per line, one line per episode.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (i, ep) in self.episodes.iter().enumerate() {
            let line = EpisodeLine {
                episode: i,
                states: ep.states.iter().map(|s| s.as_slice().to_vec()).collect(),
                actions: ep.actions.iter().map(|a| a.as_slice().to_vec()).collect(),
                costs: ep.costs.clone(),
            };
            serde_json::to_writer(&mut file, &line)?;
            file.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &Path, seed: u64, policy_id: &str) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut episodes = Vec::new();
        for line in file.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: EpisodeLine = serde_json::from_str(&line)?;
            episodes.push(Episode {
                states: parsed.states.into_iter().map(DVector::from_vec).collect(),
                actions: parsed.actions.into_iter().map(DVector::from_vec).collect(),
                costs: parsed.costs,
            });
        }
        Ok(TrajectoryBatch {
            episodes,
            seed,
            policy_id: policy_id.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{lti_env, GaussianStart};
    use nalgebra::DMatrix;

    struct ZeroPolicy(usize);

    impl ContinuousPolicy for ZeroPolicy {
        fn action(&self, _t: usize, _s: &DVector<f64>, _rng: &mut dyn RngCore) -> DVector<f64> {
            DVector::zeros(self.0)
        }
    }

    fn small_env(noise: f64) -> crate::envs::LtiEnv {
        lti_env(
            DMatrix::from_element(1, 1, 0.9),
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, noise),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            20,
            0.95,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_env_zero_variance_policy_identical_episodes() {
        let env = small_env(0.0).with_start(
            GaussianStart::diagonal(DVector::from_element(1, 1.0), &DVector::zeros(1)).unwrap(),
        );
        let batch = collect_trajectories(&env, &ZeroPolicy(1), 5, 3, "zero").unwrap();
        for ep in &batch.episodes[1..] {
            assert_eq!(ep.states, batch.episodes[0].states);
            assert_eq!(ep.costs, batch.episodes[0].costs);
        }
    }

    #[test]
    fn fixed_seed_reproducible() {
        let env = small_env(0.1);
        let a = collect_trajectories(&env, &ZeroPolicy(1), 8, 42, "p").unwrap();
        let b = collect_trajectories(&env, &ZeroPolicy(1), 8, 42, "p").unwrap();
        for (x, y) in a.episodes.iter().zip(&b.episodes) {
            assert_eq!(x.states, y.states);
        }
        let c = collect_trajectories(&env, &ZeroPolicy(1), 8, 43, "p").unwrap();
        assert_ne!(a.episodes[0].states, c.episodes[0].states);
    }

    #[test]
    fn jsonl_round_trip() {
        let env = small_env(0.05);
        let batch = collect_trajectories(&env, &ZeroPolicy(1), 3, 7, "p").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.jsonl");
        batch.write_jsonl(&path).unwrap();
        let back = TrajectoryBatch::read_jsonl(&path, 7, "p").unwrap();
        assert_eq!(back.num_episodes(), 3);
        for (x, y) in batch.episodes.iter().zip(&back.episodes) {
            assert_eq!(x.states, y.states);
            assert_eq!(x.costs, y.costs);
        }
    }

    #[test]
    fn discounted_cost_accumulates() {
        let ep = Episode {
            states: vec![DVector::zeros(1); 4],
            actions: vec![DVector::zeros(1); 3],
            costs: vec![1.0, 2.0, 4.0],
        };
        let g: f64 = 0.5;
        assert!((ep.discounted_cost(g) - (1.0 + 0.5 * 2.0 + 0.25 * 4.0)).abs() <= 1e-15);
    }
}
