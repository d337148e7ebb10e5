//! Discrete-track checks above single modules: the conservative-update
//! safety bound under an exact model, and the shared-pipeline contract.

use dpi_core::mdp::{evaluate_exact, garnet_generate, TabularPolicy, TransitionModel};
use dpi_core::tabular::{
    cpi_iteration, dpi_discrete_iteration, DiscreteConfig, DiscreteState, EmpiricalModel,
};

/// Build an empirical model whose normalized rows coincide with the true
/// transition kernel up to count rounding at 1e-9 relative.
fn exact_model(mdp: &dpi_core::mdp::TabularMdp) -> EmpiricalModel {
    let mut model = EmpiricalModel::new(mdp.num_states(), mdp.num_actions());
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            for &(tgt, p) in mdp.transition_row(s, a) {
                model.absorb_counted(s, a, tgt as usize, (p * 1e9).round() as u64);
            }
        }
    }
    model
}

#[test]
fn cpi_with_exact_model_respects_improvement_slack() {
    // With the model replaced by (a proxy of) the exact kernel and beta
    // small, one conservative step cannot degrade the objective by more
    // than beta * eps / (1 - gamma)^2.
    let mdp = garnet_generate(5, 60, 3, 2).unwrap().with_gamma(0.9).unwrap();
    let gamma = 0.9;
    let beta = 0.05;
    let cfg = DiscreteConfig {
        alpha: 0.0,
        beta,
        episodes_per_iter: 20,
        horizon: 60,
        ..DiscreteConfig::default()
    };
    let mut state = DiscreteState::new(60, 3);
    // overwrite the accumulated model with the exact-kernel proxy
    state.model = exact_model(&mdp);
    // sanity: rows match the true kernel
    for s in 0..60 {
        for a in 0..3 {
            let truth = mdp.transition_row(s, a);
            let row = state.model.row(s, a);
            assert_eq!(row.len(), truth.len());
        }
    }
    let pi_n = TabularPolicy::uniform(60, 3);
    let eval_n = evaluate_exact(&mdp, &pi_n).unwrap();
    let out = cpi_iteration(&mdp, &pi_n, &cfg, &mut state, 7, 0).unwrap();
    let eval_next = evaluate_exact(&mdp, &out.pi_next).unwrap();
    // eps = max_s |E_{a~pi_next} A^{pi_n}(s,a)|
    let mut eps = 0.0f64;
    for s in 0..60 {
        let inner: f64 = (0..3)
            .map(|a| out.pi_next.prob(s, a) * eval_n.adv[s * 3 + a])
            .sum();
        eps = eps.max(inner.abs());
    }
    let slack = beta * eps / ((1.0 - gamma) * (1.0 - gamma));
    assert!(
        eval_next.j <= eval_n.j + slack,
        "J rose from {} to {} beyond slack {}",
        eval_n.j,
        eval_next.j,
        slack
    );
}

#[test]
fn dpi_and_cpi_share_the_pipeline() {
    // Identical config except the advantage source: the two iterations
    // consume identical rollout streams and produce identical classifiers
    // whenever the expert trust region collapses.
    let mdp = garnet_generate(9, 40, 3, 2).unwrap();
    let cfg = DiscreteConfig {
        alpha: 0.0,
        beta: 0.2,
        episodes_per_iter: 6,
        horizon: 30,
        ..DiscreteConfig::default()
    };
    let pi = TabularPolicy::uniform(40, 3);
    let mut st_a = DiscreteState::new(40, 3);
    let mut st_b = DiscreteState::new(40, 3);
    let a = dpi_discrete_iteration(&mdp, &pi, &cfg, &mut st_a, 3, 0).unwrap();
    let b = cpi_iteration(&mdp, &pi, &cfg, &mut st_b, 3, 0).unwrap();
    assert_eq!(a.pi_next.probs(), b.pi_next.probs());
    assert_eq!(a.episodes_used, b.episodes_used);
}
