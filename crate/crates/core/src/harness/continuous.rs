//! Continuous-track training loop: collect on-policy trajectories, fit
//! time-varying linear dynamics, solve the bracketed trust-region expert,
//! imitate it by natural gradient.

use super::config::{AdvantageCost, ExperimentConfig, PolicyArch, Track};
use super::record::{IterationRow, RunRecord};
use crate::dual::dual_update_bracket;
use crate::envs::{
    collect_trajectories, lti_env, CartpoleEnv, CartpoleParams, ContinuousEnv, GaussianStart,
    LtiEnv, TrajectoryBatch,
};
use crate::error::Result;
use crate::lqr::{
    build_surrogate_cost, expected_kl, policy_eval_quadratic, soft_lqr_backward,
    QuadraticCostModel, QuadraticValueChain, TimeVaryingLinearGaussianPolicy,
};
use crate::ngd::{ngd_update, NgdConfig, NgdReport};
use crate::policy::GaussianPolicy;
use crate::seeding::{self, tags};
use crate::sysid::fit_time_varying_linear;
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

/// Fixed linear-quadratic benchmark system for the `lti` track: a lightly
/// damped two-state chain driven through the second state.
pub fn build_lti_env(horizon: usize, gamma: f64) -> Result<LtiEnv> {
    let a = DMatrix::from_row_slice(2, 2, &[0.95, 0.1, 0.0, 0.9]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let c = DVector::zeros(2);
    let sigma = DMatrix::identity(2, 2) * 1e-4;
    let q = DMatrix::identity(2, 2);
    let r = DMatrix::from_element(1, 1, 0.1);
    let env = lti_env(a, b, c, sigma, q, r, DVector::zeros(2), horizon, gamma)?;
    Ok(env.with_start(GaussianStart::diagonal(
        DVector::from_vec(vec![1.0, 0.5]),
        &DVector::from_element(2, 0.2),
    )?))
}

pub(crate) fn build_env(cfg: &ExperimentConfig) -> Result<Box<dyn ContinuousEnv>> {
    let gamma = cfg.resolved_gamma();
    match cfg.track {
        Track::Cartpole => {
            let env = CartpoleEnv::new(CartpoleParams::default())?
                .with_horizon(cfg.horizon)
                .with_gamma(gamma)?;
            Ok(Box::new(env))
        }
        Track::Lti => Ok(Box::new(build_lti_env(cfg.horizon, gamma)?)),
        _ => Err(crate::error::DpiError::invalid(
            "continuous runner supports the cartpole and lti tracks",
        )),
    }
}

pub(crate) fn build_policy(cfg: &ExperimentConfig, env: &dyn ContinuousEnv, seed: u64) -> GaussianPolicy {
    match cfg.policy {
        PolicyArch::Linear => {
            GaussianPolicy::linear(env.state_dim(), env.action_dim(), cfg.log_std_init)
        }
        PolicyArch::TwoLayer { hidden } => GaussianPolicy::two_layer(
            env.state_dim(),
            env.action_dim(),
            hidden,
            cfg.log_std_init,
            seed,
        ),
    }
}

/// Expert solve for one iteration: bracket the multiplier over the LQR
/// backward pass until the expected KL lands in the trust-region window.
pub(crate) struct ExpertSolve {
    pub eta: TimeVaryingLinearGaussianPolicy,
    pub chain: QuadraticValueChain,
    pub dual: crate::dual::DualState,
}

pub(crate) fn solve_expert(
    env: &dyn ContinuousEnv,
    pi: &GaussianPolicy,
    batch: &TrajectoryBatch,
    cfg: &ExperimentConfig,
    mu_warm: Option<f64>,
) -> Result<ExpertSolve> {
    let gamma = cfg.resolved_gamma();
    let window = cfg.effective_pool_window(env.state_dim(), env.action_dim());
    let (dynamics, _report) = fit_time_varying_linear(batch, cfg.ridge, window)?;
    let ((eta, chain), dual) = dual_update_bracket(
        |mu| {
            let cost_model = build_surrogate_cost(env.cost(), mu, pi, batch)?;
            let (eta, chain) = soft_lqr_backward(&dynamics, &cost_model, gamma)?;
            let kl = expected_kl(&eta, pi, batch, gamma)?;
            Ok(((eta, chain), kl))
        },
        cfg.alpha,
        (cfg.mu_min, cfg.mu_max),
        mu_warm,
    )?;
    let chain = match cfg.advantage_cost {
        // Continuous default: the solver-native chain under the surrogate.
        AdvantageCost::TrackDefault | AdvantageCost::Surrogate => chain,
        AdvantageCost::Original => {
            let cost_model = QuadraticCostModel::from_env_cost(env.cost(), dual.mu, batch.horizon())?;
            policy_eval_quadratic(&dynamics, &cost_model, &eta, gamma)?
        }
    };
    Ok(ExpertSolve { eta, chain, dual })
}

pub struct ContinuousOutcome {
    pub record: RunRecord,
    pub policy: GaussianPolicy,
    /// Dual diagnostics per iteration (useful for warm-start audits).
    pub duals: Vec<crate::dual::DualState>,
    /// Natural-gradient diagnostics per iteration.
    pub ngd_reports: Vec<NgdReport>,
}

/// Mean and standard error of discounted episode cost over a batch.
pub(crate) fn cost_stats(batch: &TrajectoryBatch, gamma: f64) -> (f64, f64) {
    let costs: Vec<f64> = batch
        .episodes
        .iter()
        .map(|e| e.discounted_cost(gamma))
        .collect();
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    if costs.len() < 2 {
        return (mean, 0.0);
    }
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Full continuous-track loop for one seed.
pub fn run_dpi_continuous(cfg: &ExperimentConfig, seed: u64) -> Result<ContinuousOutcome> {
    let env = build_env(cfg)?;
    run_dpi_continuous_on(env.as_ref(), cfg, seed, "dpi-continuous")
}

pub(crate) fn run_dpi_continuous_on(
    env: &dyn ContinuousEnv,
    cfg: &ExperimentConfig,
    seed: u64,
    method: &str,
) -> Result<ContinuousOutcome> {
    let gamma = cfg.resolved_gamma();
    let mut pi = build_policy(cfg, env, seed);
    let mut mu_warm = None;
    let mut cumulative = 0usize;
    let mut record = RunRecord::new(method, seed);
    let mut duals = Vec::new();
    let mut ngd_reports = Vec::new();
    let ngd_cfg = NgdConfig {
        standardize_advantages: cfg.standardize_advantages,
        log_std_floor: cfg.log_std_floor,
        ..NgdConfig::default()
    };
    for it in 0..cfg.iterations {
        let t0 = Instant::now();
        let train_seed = seeding::derive(seed, tags::ROLLOUT, it as u64);
        let beta_t = cfg.beta * cfg.beta_decay.powi(it as i32);
        let step = (|| -> Result<(GaussianPolicy, ExpertSolve, NgdReport)> {
            let batch = collect_trajectories(env, &pi, cfg.episodes_per_iter, train_seed, "pi")?;
            let expert = solve_expert(env, &pi, &batch, cfg, mu_warm)?;
            let chain = &expert.chain;
            let advantage =
                move |t: usize, s: &DVector<f64>, a: &DVector<f64>| chain.disadvantage(t, s, a);
            let (next, report) =
                ngd_update(&pi, &batch, &advantage, gamma, beta_t, cfg.k_steps, &ngd_cfg)?;
            Ok((next, expert, report))
        })();
        cumulative += cfg.episodes_per_iter;
        match step {
            Ok((next, expert, report)) => {
                mu_warm = Some(expert.dual.mu);
                pi = next;
                let eval = collect_trajectories(
                    env,
                    &pi,
                    cfg.eval_rollouts,
                    seeding::derive(seed, tags::EVAL, it as u64),
                    "eval",
                )?;
                let eta_eval = collect_trajectories(
                    env,
                    &expert.eta,
                    cfg.eval_rollouts,
                    seeding::derive(seed, tags::EVAL, (it as u64) | (1 << 32)),
                    "eta-eval",
                )?;
                if cfg.count_eval_episodes {
                    cumulative += 2 * cfg.eval_rollouts;
                }
                let (j_pi, j_pi_stderr) = cost_stats(&eval, gamma);
                let (j_eta, _) = cost_stats(&eta_eval, gamma);
                record.push(IterationRow {
                    iteration: it,
                    cumulative_episodes: cumulative,
                    j_pi,
                    j_pi_stderr,
                    j_eta,
                    kl_measured: expert.dual.kl_measured,
                    mu: expert.dual.mu,
                    beta: beta_t,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                })?;
                duals.push(expert.dual);
                ngd_reports.push(report);
            }
            Err(err) => {
                // Failure row: keep the loop resumable, leave the policy as
                // it was, record the failed iteration.
                log_failure(method, seed, it, &err);
                record.push(IterationRow {
                    iteration: it,
                    cumulative_episodes: cumulative,
                    j_pi: f64::NAN,
                    j_pi_stderr: f64::NAN,
                    j_eta: f64::NAN,
                    kl_measured: f64::NAN,
                    mu: f64::NAN,
                    beta: beta_t,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                })?;
            }
        }
    }
    Ok(ContinuousOutcome {
        record,
        policy: pi,
        duals,
        ngd_reports,
    })
}

fn log_failure(method: &str, seed: u64, iteration: usize, err: &crate::error::DpiError) {
    eprintln!("[{method} seed {seed}] iteration {iteration} failed: {err}");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lti_cfg() -> ExperimentConfig {
        ExperimentConfig {
            track: Track::Lti,
            iterations: 3,
            episodes_per_iter: 12,
            horizon: 20,
            alpha: 0.05,
            beta: 0.05,
            eval_rollouts: 4,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn deterministic_records() {
        let cfg = lti_cfg();
        let a = run_dpi_continuous(&cfg, 5).unwrap();
        let b = run_dpi_continuous(&cfg, 5).unwrap();
        assert!(a.record.content_equals(&b.record));
        assert_eq!(a.policy.params(), b.policy.params());
    }

    #[test]
    fn episode_accounting() {
        let mut cfg = lti_cfg();
        let out = run_dpi_continuous(&cfg, 1).unwrap();
        for (i, row) in out.record.rows.iter().enumerate() {
            assert_eq!(row.cumulative_episodes, (i + 1) * cfg.episodes_per_iter);
        }
        cfg.count_eval_episodes = true;
        let out = run_dpi_continuous(&cfg, 1).unwrap();
        assert_eq!(
            out.record.rows[0].cumulative_episodes,
            cfg.episodes_per_iter + 2 * cfg.eval_rollouts
        );
    }

    #[test]
    fn kl_window_respected() {
        let cfg = lti_cfg();
        let out = run_dpi_continuous(&cfg, 9).unwrap();
        for dual in &out.duals {
            assert!(
                dual.kl_measured <= 1.1 * cfg.alpha || dual.bracket_limit,
                "kl {} flag {}",
                dual.kl_measured,
                dual.bracket_limit
            );
        }
    }
}
