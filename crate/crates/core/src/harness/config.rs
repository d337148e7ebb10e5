//! Experiment configuration.

use crate::error::{DpiError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    Tabular,
    Cartpole,
    Lti,
    Robust,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Dpi,
    Cpi,
    Npg,
}

/// Reactive policy architecture for the continuous track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PolicyArch {
    Linear,
    TwoLayer { hidden: usize },
}

/// Cost under which the expert disadvantage is computed. `TrackDefault`
/// resolves to the original cost on the tabular track and to the surrogate
/// (the solver-native chain) on the continuous tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageCost {
    #[default]
    TrackDefault,
    Original,
    Surrogate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub track: Track,
    pub baseline: Baseline,
    pub seeds: Vec<u64>,
    /// Iterations of the outer loop.
    pub iterations: usize,
    /// Training episodes collected per iteration (per environment on the
    /// robust track).
    pub episodes_per_iter: usize,
    pub horizon: usize,
    /// Expert trust region (expected KL); zero collapses the expert.
    pub alpha: f64,
    /// Reactive trust region.
    pub beta: f64,
    /// Multiplicative per-iteration decay of the reactive trust region on
    /// the continuous tracks (1.0 keeps it constant).
    pub beta_decay: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Ridge for the dynamics fit (continuous) or classifier fit (tabular).
    pub ridge: f64,
    /// Discount; `None` resolves to 0.99 on the tabular track and 0.995 on
    /// the continuous tracks.
    pub gamma: Option<f64>,
    pub policy: PolicyArch,
    pub log_std_init: f64,
    /// Floor on the policy log-std during natural-gradient updates.
    pub log_std_floor: Option<f64>,
    /// Natural-gradient steps per iteration.
    pub k_steps: usize,
    /// Held-out evaluation rollouts per iteration.
    pub eval_rollouts: usize,
    /// Count evaluation rollouts toward the episode budget.
    pub count_eval_episodes: bool,
    /// Timestep pooling window for the dynamics fit; applied when the
    /// per-timestep sample count alone cannot identify the regression.
    pub pool_window: usize,
    pub advantage_cost: AdvantageCost,
    pub standardize_advantages: bool,
    /// Tabular expert backup: hard min instead of the entropy-regularized
    /// backup.
    pub hard_backup: bool,
    pub soft_vi_tol: f64,
    // Tabular instance shape.
    pub num_states: usize,
    pub num_actions: usize,
    pub branches: usize,
    // Robust-track family shape.
    pub num_envs: usize,
    pub test_envs: usize,
    pub perturb_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            track: Track::Tabular,
            baseline: Baseline::Dpi,
            seeds: vec![0],
            iterations: 100,
            episodes_per_iter: 20,
            horizon: 100,
            alpha: 0.05,
            beta: 0.01,
            beta_decay: 1.0,
            mu_min: 1e-3,
            mu_max: 1e3,
            ridge: 1e-4,
            gamma: None,
            policy: PolicyArch::Linear,
            log_std_init: -0.5,
            log_std_floor: Some(-1.6),
            k_steps: 1,
            eval_rollouts: 20,
            count_eval_episodes: false,
            pool_window: 5,
            advantage_cost: AdvantageCost::TrackDefault,
            standardize_advantages: true,
            hard_backup: false,
            soft_vi_tol: 1e-8,
            num_states: 1000,
            num_actions: 5,
            branches: 2,
            num_envs: 10,
            test_envs: 3,
            perturb_scale: 0.3,
        }
    }
}

impl ExperimentConfig {
    pub fn resolved_gamma(&self) -> f64 {
        self.gamma.unwrap_or(match self.track {
            Track::Tabular => 0.99,
            _ => 0.995,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(DpiError::invalid("need at least one seed"));
        }
        if self.iterations == 0 || self.episodes_per_iter == 0 || self.horizon == 0 {
            return Err(DpiError::invalid(
                "iterations, episodes_per_iter and horizon must be at least 1",
            ));
        }
        if self.alpha < 0.0 {
            return Err(DpiError::invalid("alpha must be nonnegative"));
        }
        if !(self.beta > 0.0) {
            return Err(DpiError::invalid("beta must be positive"));
        }
        if !(self.beta_decay > 0.0 && self.beta_decay <= 1.0) {
            return Err(DpiError::invalid("beta_decay must lie in (0, 1]"));
        }
        if matches!(self.track, Track::Tabular) && self.beta > 1.0 {
            return Err(DpiError::invalid("tabular beta is a mixture weight in [0, 1]"));
        }
        if !(self.mu_min > 0.0 && self.mu_max > self.mu_min) {
            return Err(DpiError::invalid("need 0 < mu_min < mu_max"));
        }
        if !(self.ridge > 0.0) {
            return Err(DpiError::invalid("ridge must be positive"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(DpiError::invalid("gamma must lie in (0,1)"));
            }
        }
        if self.k_steps == 0 {
            return Err(DpiError::invalid("k_steps must be at least 1"));
        }
        if self.eval_rollouts == 0 {
            return Err(DpiError::invalid("eval_rollouts must be at least 1"));
        }
        if matches!(self.track, Track::Tabular)
            && (self.num_states == 0 || self.num_actions == 0 || self.branches == 0)
        {
            return Err(DpiError::invalid("tabular sizes must be positive"));
        }
        if matches!(self.track, Track::Robust) {
            if self.num_envs < 2 || self.test_envs == 0 || self.test_envs >= self.num_envs {
                return Err(DpiError::invalid(
                    "robust track needs num_envs >= 2 and 0 < test_envs < num_envs",
                ));
            }
            if !(0.0..1.0).contains(&self.perturb_scale) {
                return Err(DpiError::invalid("perturb_scale must lie in [0, 1)"));
            }
        }
        match (self.track, self.baseline) {
            (Track::Tabular, Baseline::Npg) => {
                Err(DpiError::invalid("npg baseline runs on the continuous tracks"))
            }
            (Track::Cartpole | Track::Lti | Track::Robust, Baseline::Cpi) => {
                Err(DpiError::invalid("cpi baseline runs on the tabular track"))
            }
            _ => Ok(()),
        }
    }

    /// Pooling window for the dynamics fit, widened when the per-timestep
    /// sample count cannot identify the regression on its own.
    pub fn effective_pool_window(&self, d_s: usize, d_a: usize) -> usize {
        if self.episodes_per_iter < 2 * (d_s + d_a + 1) {
            self.pool_window.max(5)
        } else {
            self.pool_window
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn gamma_defaults_by_track() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.resolved_gamma(), 0.99);
        cfg.track = Track::Cartpole;
        assert_eq!(cfg.resolved_gamma(), 0.995);
        cfg.gamma = Some(0.9);
        assert_eq!(cfg.resolved_gamma(), 0.9);
    }

    #[test]
    fn invalid_combos_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.baseline = Baseline::Npg;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.track = Track::Cartpole;
        cfg.baseline = Baseline::Cpi;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let cfg = ExperimentConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back.num_states, cfg.num_states);
        // partial documents fill from defaults
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"track":"cartpole","alpha":0.2}"#).unwrap();
        assert_eq!(partial.track, Track::Cartpole);
        assert_eq!(partial.alpha, 0.2);
        assert_eq!(partial.iterations, 100);
    }

    #[test]
    fn pool_window_widens_when_underidentified() {
        let mut cfg = ExperimentConfig::default();
        cfg.pool_window = 3;
        cfg.episodes_per_iter = 20;
        assert_eq!(cfg.effective_pool_window(4, 1), 3);
        cfg.episodes_per_iter = 8;
        assert_eq!(cfg.effective_pool_window(4, 1), 5);
    }
}
