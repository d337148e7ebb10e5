//! Robust policy optimization: one reactive policy trained against several
//! perturbed environments at once, evaluated on held-out variants only.

use super::config::ExperimentConfig;
use super::continuous::{build_policy, cost_stats, solve_expert, ExpertSolve};
use super::record::{IterationRow, RunRecord};
use crate::envs::{
    collect_trajectories, make_robust_family, CartpoleEnv, CartpoleParams, TrajectoryBatch,
};
use crate::error::Result;
use crate::ngd::{conjugate_gradient, fisher_vector_product, imitation_gradient, NgdConfig};
use crate::policy::GaussianPolicy;
use crate::seeding::{self, tags};
use nalgebra::DVector;
use std::time::Instant;

/// Which arm of the robust comparison to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustArm {
    /// Sum the imitation gradients over every training environment.
    Robust,
    /// Train on a single randomly picked training environment (the
    /// overfitting control); still evaluated on the held-out environments.
    Single,
}

fn family(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<CartpoleEnv>> {
    let envs = make_robust_family(&CartpoleParams::default(), cfg.num_envs, cfg.perturb_scale, seed)?;
    envs.into_iter()
        .map(|e| e.with_horizon(cfg.horizon).with_gamma(cfg.resolved_gamma()))
        .collect()
}

/// Mean held-out cost over the test environments.
fn test_cost(
    test_envs: &[CartpoleEnv],
    policy: &GaussianPolicy,
    cfg: &ExperimentConfig,
    seed: u64,
    iteration: usize,
) -> Result<(f64, f64)> {
    let gamma = cfg.resolved_gamma();
    let mut means = Vec::new();
    let mut stderrs = Vec::new();
    for (i, env) in test_envs.iter().enumerate() {
        let eval = collect_trajectories(
            env,
            policy,
            cfg.eval_rollouts,
            seeding::derive(seed, tags::EVAL, (iteration * 1000 + i) as u64),
            "test-eval",
        )?;
        let (m, s) = cost_stats(&eval, gamma);
        means.push(m);
        stderrs.push(s);
    }
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    // conservative: average the per-env standard errors
    let stderr = stderrs.iter().sum::<f64>() / n;
    Ok((mean, stderr))
}

/// Run one seed of the robust track. The first `num_envs - test_envs`
/// environments train, the rest are held out; training episodes are only
/// ever collected on the training split.
pub fn run_robust(
    cfg: &ExperimentConfig,
    seed: u64,
    arm: RobustArm,
) -> Result<(RunRecord, String)> {
    let gamma = cfg.resolved_gamma();
    let envs = family(cfg, seed)?;
    let (train_envs, test_envs) = envs.split_at(cfg.num_envs - cfg.test_envs);
    let single_pick = (seeding::derive(seed, tags::ENV_FAMILY, u64::MAX) as usize) % train_envs.len();
    let active_train: Vec<&CartpoleEnv> = match arm {
        RobustArm::Robust => train_envs.iter().collect(),
        RobustArm::Single => vec![&train_envs[single_pick]],
    };
    let method = match arm {
        RobustArm::Robust => "dpi-robust",
        RobustArm::Single => "dpi-nonrobust",
    };

    let mut pi = build_policy(cfg, &envs[0], seed);
    let mut mu_warm: Vec<Option<f64>> = vec![None; active_train.len()];
    let mut cumulative = 0usize;
    let mut record = RunRecord::new(method, seed);
    let ngd_cfg = NgdConfig {
        standardize_advantages: cfg.standardize_advantages,
        log_std_floor: cfg.log_std_floor,
        ..NgdConfig::default()
    };

    for it in 0..cfg.iterations {
        let t0 = Instant::now();
        let step = (|| -> Result<(GaussianPolicy, Vec<ExpertSolve>, Vec<TrajectoryBatch>)> {
            let mut batches = Vec::with_capacity(active_train.len());
            let mut experts = Vec::with_capacity(active_train.len());
            for (i, env) in active_train.iter().enumerate() {
                let batch = collect_trajectories(
                    *env,
                    &pi,
                    cfg.episodes_per_iter,
                    seeding::derive(seed, tags::ROLLOUT, (it * 1000 + i) as u64),
                    "pi",
                )?;
                let expert = solve_expert(*env, &pi, &batch, cfg, mu_warm[i])?;
                mu_warm[i] = Some(expert.dual.mu);
                batches.push(batch);
                experts.push(expert);
            }
            // k natural-gradient steps on the summed objective, gradient and
            // Fisher recomputed per step over the pooled batches.
            let mut current = pi.clone();
            let per_step = cfg.beta * cfg.beta_decay.powi(it as i32) / cfg.k_steps as f64;
            for _ in 0..cfg.k_steps {
                let mut grad = DVector::zeros(current.param_count());
                for (batch, expert) in batches.iter().zip(&experts) {
                    let chain = &expert.chain;
                    let adv = move |t: usize, s: &DVector<f64>, a: &DVector<f64>| {
                        chain.disadvantage(t, s, a)
                    };
                    grad += imitation_gradient(
                        &current,
                        batch,
                        &adv,
                        gamma,
                        cfg.standardize_advantages,
                    )?;
                }
                if grad.norm() == 0.0 {
                    break;
                }
                let total: usize = batches
                    .iter()
                    .map(|b| b.num_episodes() * b.horizon())
                    .sum();
                let apply = |v: &DVector<f64>| -> Result<DVector<f64>> {
                    let mut out = DVector::zeros(v.len());
                    for batch in &batches {
                        let w = (batch.num_episodes() * batch.horizon()) as f64 / total as f64;
                        out += fisher_vector_product(&current, batch, v, 0.0)? * w;
                    }
                    Ok(out + v * ngd_cfg.damping)
                };
                let (direction, _) =
                    conjugate_gradient(apply, &grad, ngd_cfg.cg_iters, ngd_cfg.cg_tol)?;
                let quad = grad.dot(&direction);
                if !(quad > 0.0) {
                    break;
                }
                let step_size = (per_step / quad).sqrt();
                let mut theta = current.params() - direction * step_size;
                if let Some(floor) = ngd_cfg.log_std_floor {
                    crate::ngd::clamp_log_std(&current, &mut theta, floor);
                }
                current = current.with_params(&theta)?;
            }
            Ok((current, experts, batches))
        })();
        cumulative += cfg.episodes_per_iter * active_train.len();
        match step {
            Ok((next, experts, _)) => {
                pi = next;
                let (j_pi, j_pi_stderr) = test_cost(test_envs, &pi, cfg, seed, it)?;
                let kl = experts.iter().map(|e| e.dual.kl_measured).sum::<f64>()
                    / experts.len() as f64;
                let mu = experts.iter().map(|e| e.dual.mu).sum::<f64>() / experts.len() as f64;
                record.push(IterationRow {
                    iteration: it,
                    cumulative_episodes: cumulative,
                    j_pi,
                    j_pi_stderr,
                    j_eta: f64::NAN,
                    kl_measured: kl,
                    mu,
                    beta: cfg.beta,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                })?;
            }
            Err(err) => {
                eprintln!("[{method} seed {seed}] iteration {it} failed: {err}");
                record.push(IterationRow {
                    iteration: it,
                    cumulative_episodes: cumulative,
                    j_pi: f64::NAN,
                    j_pi_stderr: f64::NAN,
                    j_eta: f64::NAN,
                    kl_measured: f64::NAN,
                    mu: f64::NAN,
                    beta: cfg.beta,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                })?;
            }
        }
    }
    let policy_json = serde_json::to_string_pretty(&pi.to_json())?;
    Ok((record, policy_json))
}
