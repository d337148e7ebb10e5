// scratch sweep for the cartpole acceptance margin (removed before release)
use dpi_core::envs::{collect_trajectories, CartpoleEnv, CartpoleParams, ContinuousEnv, ContinuousPolicy};
use dpi_core::lqr::TimeVaryingLinearGaussianPolicy;
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use dpi_core::harness::{run_dpi_continuous, Baseline, ExperimentConfig, PolicyArch, Track};
use dpi_core::policy::MeanPolicy;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iterations: usize = args[1].parse().unwrap();
    let beta: f64 = args[2].parse().unwrap();
    let k_steps: usize = args[3].parse().unwrap();
    let floor: f64 = args[4].parse().unwrap();
    let alpha: f64 = args[5].parse().unwrap();
    let eps: usize = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(20);
    let decay: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(1.0);

    let cfg = ExperimentConfig {
        track: Track::Cartpole,
        baseline: Baseline::Dpi,
        iterations,
        episodes_per_iter: eps,
        horizon: 50,
        gamma: Some(0.95),
        alpha,
        beta,
        beta_decay: decay,
        k_steps,
        policy: PolicyArch::Linear,
        log_std_init: -0.7,
        log_std_floor: Some(floor),
        pool_window: args.get(8).map(|s| s.parse().unwrap()).unwrap_or(5),
        ridge: args.get(9).map(|s| s.parse().unwrap()).unwrap_or(1e-4),
        eval_rollouts: 10,
        ..ExperimentConfig::default()
    };
    let env = CartpoleEnv::new(CartpoleParams::default())
        .unwrap()
        .with_horizon(50)
        .with_gamma(0.95)
        .unwrap();
    // reference ceilings
    {
        let (a_lin, b_lin, c_lin) = linearize(env.params());
        let gains = riccati(&a_lin, &b_lin, &c_lin, env.cost().state_matrix(), env.cost().action_matrix(), 0.95, 50);
        struct Ctl(Vec<(DMatrix<f64>, DVector<f64>)>, bool);
        impl ContinuousPolicy for Ctl {
            fn action(&self, t: usize, s: &DVector<f64>, _r: &mut dyn RngCore) -> DVector<f64> {
                let idx = if self.1 { t.min(self.0.len() - 1) } else { 0 };
                &self.0[idx].0 * s + &self.0[idx].1
            }
        }
        let tv = collect_trajectories(&env, &Ctl(gains.clone(), true), 10, 424242, "tv").unwrap().mean_discounted_cost(0.95);
        let st = collect_trajectories(&env, &Ctl(gains.clone(), false), 10, 424242, "st").unwrap().mean_discounted_cost(0.95);
        println!("reference: time-varying {tv:.3}  stationary-k0 {st:.3}  k0 = {:?}", gains[0].0.as_slice());
        let _ = TimeVaryingLinearGaussianPolicy::new(vec![], vec![], vec![]);
    }
    let mut costs = Vec::new();
    for seed in 0..10u64 {
        let outcome = run_dpi_continuous(&cfg, seed).unwrap();
        let eval =
            collect_trajectories(&env, &MeanPolicy(&outcome.policy), 10, 424242, "final").unwrap();
        let cost = eval.mean_discounted_cost(0.95);
        let upright = eval
            .episodes
            .iter()
            .filter(|ep| ep.states.iter().all(|s| s[2].abs() < 0.2))
            .count();
        println!("seed {seed}: cost {cost:.3} upright {upright}/10");
        costs.push(cost);
    }
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("sorted: {:?}", costs.iter().map(|c| (c * 1000.0).round() / 1000.0).collect::<Vec<_>>());
}

fn linearize(p: &CartpoleParams) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let eps = 1e-6;
    let mut a = DMatrix::<f64>::zeros(4, 4);
    for i in 0..4 {
        let mut up = [0.0f64; 4];
        let mut dn = [0.0f64; 4];
        up[i] += eps;
        dn[i] -= eps;
        let fu = dpi_core::envs::cartpole_step(p, &up, 0.0).unwrap();
        let fd = dpi_core::envs::cartpole_step(p, &dn, 0.0).unwrap();
        for r in 0..4 {
            a[(r, i)] = (fu[r] - fd[r]) / (2.0 * eps);
        }
    }
    let fu = dpi_core::envs::cartpole_step(p, &[0.0; 4], eps).unwrap();
    let fd = dpi_core::envs::cartpole_step(p, &[0.0; 4], -eps).unwrap();
    let b = DMatrix::from_fn(4, 1, |r, _| (fu[r] - fd[r]) / (2.0 * eps));
    (a, b, DVector::zeros(4))
}

fn riccati(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DVector<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, gamma: f64, horizon: usize) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    let d_s = a.nrows();
    let mut p = DMatrix::<f64>::zeros(d_s, d_s);
    let mut pv = DVector::<f64>::zeros(d_s);
    let mut gains = Vec::new();
    for _ in 0..horizon {
        let m = r + b.transpose() * &p * b * gamma;
        let mi = m.try_inverse().unwrap();
        let kg = -(&mi * b.transpose() * &p * a) * gamma;
        let kb = -(&mi * b.transpose() * (&p * c + &pv)) * gamma;
        let acl = a + b * &kg;
        let ccl = b * &kb + c;
        let np = q + kg.transpose() * r * &kg + acl.transpose() * &p * &acl * gamma;
        let npv = kg.transpose() * r * &kb + acl.transpose() * (&p * &ccl + &pv) * gamma;
        p = (&np + np.transpose()) * 0.5;
        pv = npv;
        gains.push((kg, kb));
    }
    gains.reverse();
    gains
}
