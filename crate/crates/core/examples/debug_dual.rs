// scratch: inner-solve counts across iterations (removed before release)
use dpi_core::harness::{run_dpi_continuous, Baseline, ExperimentConfig, PolicyArch, Track};

fn main() {
    let cfg = ExperimentConfig {
        track: Track::Cartpole,
        baseline: Baseline::Dpi,
        iterations: 14,
        episodes_per_iter: 20,
        horizon: 50,
        gamma: Some(0.95),
        alpha: 0.2,
        beta: 0.25,
        k_steps: 2,
        policy: PolicyArch::Linear,
        log_std_init: -0.7,
        log_std_floor: Some(-0.7),
        pool_window: 5,
        ridge: 1e-6,
        eval_rollouts: 4,
        ..ExperimentConfig::default()
    };
    for seed in 0..3u64 {
        println!("seed {seed}:");
        let outcome = run_dpi_continuous(&cfg, seed).unwrap();
        for (it, d) in outcome.duals.iter().enumerate() {
            println!(
                "  it {it:2}: solves {:2} mu {:9.4} kl {:.4} window [{:.3},{:.3}] flag {}",
                d.inner_solves,
                d.mu,
                d.kl_measured,
                0.9 * d.alpha_target,
                1.1 * d.alpha_target,
                d.bracket_limit
            );
        }
    }
}
