//! One iteration of the discrete track.
//!
//! Pipeline: roll out the reactive policy, fold counts into the running
//! model, solve the trust-region expert under the estimated model (dual
//! bracketing over soft value iteration), evaluate the expert's disadvantage
//! under the model with the original cost, fit the cost-sensitive
//! classifier on the visited states, and take the conservative mixture step.
//!
//! The baseline runs the same pipeline with the reactive policy's own
//! disadvantage; collapsing the expert trust region (`alpha = 0`) routes the
//! expert variant through that exact code path, so the two coincide bit for
//! bit on the same seed.

use super::csoaa::csoaa_fit;
use super::model::{collect_rollouts, EmpiricalModel};
use super::softvi::{soft_value_iteration_warm, ExpertBackup, SoftViSolution};
use super::update::conservative_update;
use super::LOG_PROB_FLOOR;
use crate::dual::{dual_update_bracket, DualState};
use crate::error::Result;
use crate::mdp::{
    policy_cost_vector, policy_transition_rows, solve_value, solve_visitation, TabularMdp,
    TabularPolicy, TransitionModel,
};
use crate::seeding::{self, tags};

/// Which policy's disadvantage drives the classifier fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvantageSource {
    /// Imitate the trust-region expert (the dual-policy update).
    Expert,
    /// Use the reactive policy's own disadvantage (the conservative
    /// policy-iteration baseline).
    Reactive,
}

/// Cost under which the expert's disadvantage is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvantageCostMode {
    /// Policy evaluation of the expert under the estimated model with the
    /// original cost.
    #[default]
    Original,
    /// Disadvantage of the soft value chain under the surrogate cost at the
    /// accepted multiplier.
    Surrogate,
}

#[derive(Debug, Clone)]
pub struct DiscreteConfig {
    /// Expert trust region (expected KL target). Zero disables the expert.
    pub alpha: f64,
    /// Reactive mixture step.
    pub beta: f64,
    pub episodes_per_iter: usize,
    pub horizon: usize,
    pub mu_bounds: (f64, f64),
    pub soft_vi_tol: f64,
    /// Ridge for the classifier fit.
    pub ridge: f64,
    pub backup: ExpertBackup,
    pub advantage_cost: AdvantageCostMode,
}

impl Default for DiscreteConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.1,
            episodes_per_iter: 20,
            horizon: 100,
            mu_bounds: (1e-3, 1e3),
            soft_vi_tol: 1e-8,
            ridge: 1e-6,
            backup: ExpertBackup::default(),
            advantage_cost: AdvantageCostMode::Original,
        }
    }
}

/// Mutable cross-iteration state: the count model accumulates over the whole
/// run, the accepted multiplier and the value-function warm starts carry
/// forward.
#[derive(Debug, Clone)]
pub struct DiscreteState {
    pub model: EmpiricalModel,
    pub mu_warm: Option<f64>,
    pub v_soft_warm: Option<Vec<f64>>,
    pub d_hat_warm: Option<Vec<f64>>,
    pub v_adv_warm: Option<Vec<f64>>,
    pub cumulative_episodes: usize,
}

impl DiscreteState {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            model: EmpiricalModel::new(num_states, num_actions),
            mu_warm: None,
            v_soft_warm: None,
            d_hat_warm: None,
            v_adv_warm: None,
            cumulative_episodes: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteIterationOutput {
    pub pi_next: TabularPolicy,
    pub eta: TabularPolicy,
    /// Present when the expert update actually ran.
    pub dual: Option<DualState>,
    pub episodes_used: usize,
}

/// Surrogate cost `c'(s,a) = c(s,a)/mu - log pi_n(a|s)` with the probability
/// floored inside the logarithm.
fn surrogate_cost(mdp: &TabularMdp, pi_n: &TabularPolicy, mu: f64) -> Vec<f64> {
    let a_n = mdp.num_actions();
    let mut out = Vec::with_capacity(mdp.num_states() * a_n);
    for s in 0..mdp.num_states() {
        for a in 0..a_n {
            out.push(mdp.cost(s, a) / mu - pi_n.prob(s, a).max(LOG_PROB_FLOOR).ln());
        }
    }
    out
}

/// Expected KL of `eta` against `pi_n` under a state distribution.
fn expected_kl_discrete(d: &[f64], eta: &TabularPolicy, pi_n: &TabularPolicy) -> f64 {
    let a_n = eta.num_actions();
    let mut kl = 0.0;
    for (s, w) in d.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let mut state_kl = 0.0;
        for a in 0..a_n {
            let e = eta.prob(s, a);
            if e > 0.0 {
                state_kl += e * (e.ln() - pi_n.prob(s, a).max(LOG_PROB_FLOOR).ln());
            }
        }
        kl += w * state_kl;
    }
    kl
}

fn dual_search_inner(
    mdp: &TabularMdp,
    model: &EmpiricalModel,
    pi_n: &TabularPolicy,
    alpha: f64,
    mu_bounds: (f64, f64),
    soft_vi_tol: f64,
    backup: ExpertBackup,
    mu_warm: Option<f64>,
    v_warm: Option<Vec<f64>>,
    d_warm: Option<&[f64]>,
) -> Result<(SoftViSolution, DualState, Vec<f64>, Option<Vec<f64>>)> {
    let gamma = mdp.gamma();
    let rows_pi = policy_transition_rows(model, pi_n);
    let d_hat = solve_visitation(&rows_pi, mdp.rho0(), gamma, d_warm)?;
    let mut warm_v = v_warm;
    let solve = |mu: f64| -> Result<(SoftViSolution, f64)> {
        let cost = surrogate_cost(mdp, pi_n, mu);
        let sol = soft_value_iteration_warm(
            model,
            &cost,
            gamma,
            soft_vi_tol,
            warm_v.as_deref(),
            backup,
            super::softvi::DEFAULT_SOFT_VI_CAP,
        )?;
        warm_v = Some(sol.v.clone());
        let kl = expected_kl_discrete(&d_hat, &sol.eta, pi_n);
        Ok((sol, kl))
    };
    let (sol, dual) = dual_update_bracket(solve, alpha, mu_bounds, mu_warm)?;
    Ok((sol, dual, d_hat, warm_v))
}

/// Trust-region expert under the estimated model: bracket the multiplier
/// until the measured expected KL (under the model's visitation of `pi_n`)
/// lands in the window around `alpha`.
pub fn dual_search_discrete(
    mdp: &TabularMdp,
    model: &EmpiricalModel,
    pi_n: &TabularPolicy,
    alpha: f64,
    mu_bounds: (f64, f64),
) -> Result<(TabularPolicy, DualState)> {
    let (sol, dual, _, _) = dual_search_inner(
        mdp,
        model,
        pi_n,
        alpha,
        mu_bounds,
        1e-8,
        ExpertBackup::default(),
        None,
        None,
        None,
    )?;
    Ok((sol.eta, dual))
}

/// One shared iteration of the discrete track; see the module docs.
pub fn discrete_iteration(
    mdp: &TabularMdp,
    pi_n: &TabularPolicy,
    cfg: &DiscreteConfig,
    state: &mut DiscreteState,
    seed: u64,
    iteration: usize,
    source: AdvantageSource,
) -> Result<DiscreteIterationOutput> {
    let gamma = mdp.gamma();
    let a_n = mdp.num_actions();
    let rollouts = collect_rollouts(
        mdp,
        pi_n,
        cfg.episodes_per_iter,
        cfg.horizon,
        seeding::derive(seed, tags::ROLLOUT, iteration as u64),
    )?;
    state.model.absorb(&rollouts.transitions);
    state.cumulative_episodes += rollouts.episodes;

    let use_expert = matches!(source, AdvantageSource::Expert) && cfg.alpha > 0.0;
    let (eta, dual, soft) = if use_expert {
        let (sol, dual, d_hat, v_warm) = dual_search_inner(
            mdp,
            &state.model,
            pi_n,
            cfg.alpha,
            cfg.mu_bounds,
            cfg.soft_vi_tol,
            cfg.backup,
            state.mu_warm,
            state.v_soft_warm.take(),
            state.d_hat_warm.as_deref(),
        )?;
        state.mu_warm = Some(dual.mu);
        state.v_soft_warm = v_warm;
        state.d_hat_warm = Some(d_hat.iter().map(|x| x / (1.0 - gamma)).collect());
        (sol.eta.clone(), Some(dual), Some(sol))
    } else {
        (pi_n.clone(), None, None)
    };

    // Disadvantage table driving the classifier fit.
    let adv: Vec<f64> = match (&soft, cfg.advantage_cost) {
        (Some(sol), AdvantageCostMode::Surrogate) => (0..mdp.num_states() * a_n)
            .map(|i| sol.q[i] - sol.v[i / a_n])
            .collect(),
        _ => {
            let target = &eta;
            let rows = policy_transition_rows(&state.model, target);
            let c_t = policy_cost_vector(mdp.costs(), target);
            let v = solve_value(&rows, &c_t, gamma, state.v_adv_warm.as_deref())?;
            let mut adv = vec![0.0f64; mdp.num_states() * a_n];
            for s in 0..mdp.num_states() {
                for a in 0..a_n {
                    let mut acc = 0.0;
                    for &(tgt, p) in state.model.row(s, a) {
                        acc += p * v[tgt as usize];
                    }
                    adv[s * a_n + a] = mdp.cost(s, a) + gamma * acc - v[s];
                }
            }
            state.v_adv_warm = Some(v);
            adv
        }
    };

    let states: Vec<usize> = rollouts.states().collect();
    let cost_vectors: Vec<Vec<f64>> = states
        .iter()
        .map(|&s| adv[s * a_n..(s + 1) * a_n].to_vec())
        .collect();
    let classifier = csoaa_fit(mdp.num_states(), &states, &cost_vectors, cfg.ridge)?;
    let pi_next = conservative_update(pi_n, &classifier, cfg.beta)?;

    Ok(DiscreteIterationOutput {
        pi_next,
        eta,
        dual,
        episodes_used: rollouts.episodes,
    })
}

/// Dual-policy iteration step: imitate the trust-region expert.
pub fn dpi_discrete_iteration(
    mdp: &TabularMdp,
    pi_n: &TabularPolicy,
    cfg: &DiscreteConfig,
    state: &mut DiscreteState,
    seed: u64,
    iteration: usize,
) -> Result<DiscreteIterationOutput> {
    discrete_iteration(mdp, pi_n, cfg, state, seed, iteration, AdvantageSource::Expert)
}

/// Conservative policy-iteration step: same pipeline, own disadvantage.
pub fn cpi_iteration(
    mdp: &TabularMdp,
    pi_n: &TabularPolicy,
    cfg: &DiscreteConfig,
    state: &mut DiscreteState,
    seed: u64,
    iteration: usize,
) -> Result<DiscreteIterationOutput> {
    discrete_iteration(mdp, pi_n, cfg, state, seed, iteration, AdvantageSource::Reactive)
}
