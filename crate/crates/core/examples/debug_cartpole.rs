// scratch diagnostics for the cartpole track (removed before release)
use dpi_core::dual::dual_update_bracket;
use dpi_core::envs::{collect_trajectories, CartpoleEnv, CartpoleParams, ContinuousEnv};
use dpi_core::lqr::{build_surrogate_cost, expected_kl, soft_lqr_backward};
use dpi_core::ngd::{ngd_update, NgdConfig};
use dpi_core::policy::GaussianPolicy;
use dpi_core::sysid::fit_time_varying_linear;
use nalgebra::DVector;

fn pi_max_theta(env: &CartpoleEnv, pi: &GaussianPolicy) -> f64 {
    let b = collect_trajectories(env, pi, 10, 999, "eval").unwrap();
    b.episodes
        .iter()
        .flat_map(|e| e.states.iter().map(|s| s[2].abs()))
        .fold(0.0, f64::max)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let horizon: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(100);
    let gamma: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.995);
    let alpha: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let beta: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let k_steps: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1);
    let floor: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(-1.6);
    let sigma0: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(-0.5);
    let iters: usize = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(10);
    let pool: usize = args.get(9).map(|s| s.parse().unwrap()).unwrap_or(1);
    let ridge: f64 = args.get(10).map(|s| s.parse().unwrap()).unwrap_or(1e-4);
    let episodes: usize = args.get(11).map(|s| s.parse().unwrap()).unwrap_or(20);
    let env = CartpoleEnv::new(CartpoleParams::default())
        .unwrap()
        .with_horizon(horizon)
        .with_gamma(gamma)
        .unwrap();
    let mut pi = GaussianPolicy::linear(4, 1, sigma0);
    let mut mu_warm = None;
    for it in 0..iters {
        let batch = collect_trajectories(&env, &pi, episodes, 1000 + it as u64, "pi").unwrap();
        let (dynamics, rep) = fit_time_varying_linear(&batch, ridge, pool).unwrap();
        let ((eta, chain), dual) = dual_update_bracket(
            |mu| {
                let cm = build_surrogate_cost(env.cost(), mu, &pi, &batch).unwrap();
                let (eta, chain) = soft_lqr_backward(&dynamics, &cm, gamma).unwrap();
                let kl = expected_kl(&eta, &pi, &batch, gamma).unwrap();
                Ok(((eta, chain), kl))
            },
            alpha,
            (1e-3, 1e3),
            mu_warm,
        )
        .unwrap();
        mu_warm = Some(dual.mu);
        // execute expert on the real env
        let eta_eval = collect_trajectories(&env, &eta, 20, 777, "eta").unwrap();
        let th_max = pi_max_theta(&env, &pi);
        let pi_eval = collect_trajectories(&env, &pi, 20, 778, "pi-eval").unwrap();
        let j_eta = eta_eval.mean_discounted_cost(gamma);
        let j_pi = pi_eval.mean_discounted_cost(gamma);
        // fitted dynamics at t=0 vs finite-difference linearization at upright
        let p = env.params();
        let fd = |i: usize| {
            let mut sp = [0.0f64; 4];
            let mut sm = [0.0f64; 4];
            sp[i] += 1e-6;
            sm[i] -= 1e-6;
            let up = dpi_core::envs::cartpole_step(p, &sp, 0.0).unwrap();
            let dn = dpi_core::envs::cartpole_step(p, &sm, 0.0).unwrap();
            [
                (up[0] - dn[0]) / 2e-6,
                (up[1] - dn[1]) / 2e-6,
                (up[2] - dn[2]) / 2e-6,
                (up[3] - dn[3]) / 2e-6,
            ]
        };
        let a_true_col2 = fd(2);
        if it % 5 == 0 || it + 1 == iters {
            let w = pi.params();
            println!(
                "it {it}: mu {:.2} kl {:.3} | J(pi) {:.1} J(eta) {:.1} | K0 [{:.2} {:.2} {:.2} {:.2}] | W [{:.2} {:.2} {:.2} {:.2}] logstd {:.2}",
                dual.mu, dual.kl_measured, j_pi, j_eta,
                eta.gains[0][(0,0)], eta.gains[0][(0,1)], eta.gains[0][(0,2)], eta.gains[0][(0,3)],
                w[0], w[1], w[2], w[3], pi.log_std()[0],
            );
            println!("      max|theta| over eval: {:.3}", th_max);
        }
        let _ = (rep, a_true_col2);
        let chain_ref = &chain;
        let adv = move |t: usize, s: &DVector<f64>, a: &DVector<f64>| chain_ref.disadvantage(t, s, a);
        let (next, _) = ngd_update(
            &pi,
            &batch,
            &adv,
            gamma,
            beta,
            k_steps,
            &NgdConfig { log_std_floor: Some(floor), ..NgdConfig::default() },
        )
        .unwrap();
        pi = next;
    }
    println!("final W: {:?}", pi.params().as_slice());
}
