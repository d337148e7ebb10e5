//! Natural policy gradient baseline: identical loop shape, but the
//! disadvantage comes from Monte Carlo reward-to-go minus a least-squares
//! state-value baseline instead of the model-based expert.

use super::config::ExperimentConfig;
use super::continuous::{build_env, build_policy, cost_stats};
use super::record::{IterationRow, RunRecord};
use crate::envs::{collect_trajectories, TrajectoryBatch};
use crate::error::Result;
use crate::ngd::{ngd_update_from_values, NgdConfig};
use crate::seeding::{self, tags};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

/// Features for the value baseline: constant, normalized time, state and
/// elementwise squared state.
fn value_features(s: &DVector<f64>, t: usize, horizon: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(2 + 2 * s.len());
    f.push(1.0);
    f.push(t as f64 / horizon as f64);
    for x in s.iter() {
        f.push(*x);
    }
    for x in s.iter() {
        f.push(x * x);
    }
    f
}

/// Discounted cost-to-go per sample minus a ridge-fitted value baseline.
fn monte_carlo_advantages(batch: &TrajectoryBatch, gamma: f64) -> Vec<f64> {
    let horizon = batch.horizon();
    let mut returns: Vec<f64> = Vec::new();
    for ep in &batch.episodes {
        let mut tail = vec![0.0; ep.len()];
        let mut acc = 0.0;
        for t in (0..ep.len()).rev() {
            acc = ep.costs[t] + gamma * acc;
            tail[t] = acc;
        }
        returns.extend(tail);
    }
    // ridge least squares of returns on features
    let d = 2 + 2 * batch.state_dim();
    let n = returns.len();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut idx = 0usize;
    for ep in &batch.episodes {
        for t in 0..ep.len() {
            let f = value_features(&ep.states[t], t, horizon);
            for r in 0..d {
                for c in 0..d {
                    gram[(r, c)] += f[r] * f[c];
                }
                rhs[r] += f[r] * returns[idx];
            }
            idx += 1;
        }
    }
    for k in 0..d {
        gram[(k, k)] += 1e-6 * n as f64;
    }
    let w = gram
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(d));
    let mut advantages = Vec::with_capacity(n);
    let mut idx = 0usize;
    for ep in &batch.episodes {
        for t in 0..ep.len() {
            let f = value_features(&ep.states[t], t, horizon);
            let v: f64 = f.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            advantages.push(returns[idx] - v);
            idx += 1;
        }
    }
    advantages
}

/// Natural policy gradient with Monte Carlo advantages on a continuous
/// track.
pub fn run_npg_baseline(cfg: &ExperimentConfig, seed: u64) -> Result<(RunRecord, String)> {
    let env = build_env(cfg)?;
    let env = env.as_ref();
    let gamma = cfg.resolved_gamma();
    let mut pi = build_policy(cfg, env, seed);
    let mut cumulative = 0usize;
    let mut record = RunRecord::new("npg", seed);
    let ngd_cfg = NgdConfig {
        standardize_advantages: cfg.standardize_advantages,
        log_std_floor: cfg.log_std_floor,
        ..NgdConfig::default()
    };
    for it in 0..cfg.iterations {
        let t0 = Instant::now();
        let batch = collect_trajectories(
            env,
            &pi,
            cfg.episodes_per_iter,
            seeding::derive(seed, tags::NPG, it as u64),
            "pi",
        )?;
        cumulative += cfg.episodes_per_iter;
        let advantages = monte_carlo_advantages(&batch, gamma);
        let (next, _report) =
            ngd_update_from_values(&pi, &batch, &advantages, gamma, cfg.beta, cfg.k_steps, &ngd_cfg)?;
        pi = next;
        let eval = collect_trajectories(
            env,
            &pi,
            cfg.eval_rollouts,
            seeding::derive(seed, tags::EVAL, it as u64),
            "eval",
        )?;
        if cfg.count_eval_episodes {
            cumulative += cfg.eval_rollouts;
        }
        let (j_pi, j_pi_stderr) = cost_stats(&eval, gamma);
        record.push(IterationRow {
            iteration: it,
            cumulative_episodes: cumulative,
            j_pi,
            j_pi_stderr,
            j_eta: f64::NAN,
            kl_measured: f64::NAN,
            mu: f64::NAN,
            beta: cfg.beta,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        })?;
    }
    let policy_json = serde_json::to_string_pretty(&pi.to_json())?;
    Ok((record, policy_json))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Baseline, Track};

    #[test]
    fn centered_advantages_and_progress_on_lti() {
        let cfg = ExperimentConfig {
            track: Track::Lti,
            baseline: Baseline::Npg,
            iterations: 30,
            episodes_per_iter: 20,
            horizon: 20,
            beta: 0.05,
            eval_rollouts: 8,
            ..ExperimentConfig::default()
        };
        let (rec, _) = run_npg_baseline(&cfg, 2).unwrap();
        let first = rec.rows.first().unwrap().j_pi;
        let last = rec.rows.last().unwrap().j_pi;
        assert!(last < first, "NPG should reduce cost: {first} -> {last}");
    }

    #[test]
    fn advantages_have_near_zero_mean_after_baseline() {
        let cfg = ExperimentConfig {
            track: Track::Lti,
            baseline: Baseline::Npg,
            horizon: 15,
            ..ExperimentConfig::default()
        };
        let env = build_env(&cfg).unwrap();
        let pi = build_policy(&cfg, env.as_ref(), 0);
        let batch = collect_trajectories(env.as_ref(), &pi, 30, 4, "pi").unwrap();
        let adv = monte_carlo_advantages(&batch, cfg.resolved_gamma());
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        let scale = adv.iter().map(|a| a.abs()).fold(0.0f64, f64::max).max(1e-9);
        assert!(mean.abs() / scale <= 1e-6, "baseline fit leaves mean {mean}");
    }
}
