// scratch: why do the expert gains stall below the riccati reference?
use dpi_core::envs::{collect_trajectories, CartpoleEnv, CartpoleParams, ContinuousEnv};
use dpi_core::harness::{run_dpi_continuous, Baseline, ExperimentConfig, PolicyArch, Track};
use dpi_core::lqr::{build_surrogate_cost, soft_lqr_backward, QuadraticCostModel};
use dpi_core::sysid::fit_time_varying_linear;
use nalgebra::{DMatrix, DVector};

fn riccati_k0(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    gamma: f64,
    horizon: usize,
) -> DMatrix<f64> {
    let mut p = DMatrix::<f64>::zeros(4, 4);
    let mut k0 = DMatrix::<f64>::zeros(1, 4);
    for _ in 0..horizon {
        let m = r + b.transpose() * &p * b * gamma;
        let mi = m.try_inverse().unwrap();
        k0 = -(&mi * b.transpose() * &p * a) * gamma;
        let acl = a + b * &k0;
        let np = q + k0.transpose() * r * &k0 + acl.transpose() * &p * &acl * gamma;
        p = (&np + np.transpose()) * 0.5;
    }
    k0
}

fn main() {
    let cfg = ExperimentConfig {
        track: Track::Cartpole,
        baseline: Baseline::Dpi,
        iterations: 100,
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
        eval_rollouts: 10,
        ..ExperimentConfig::default()
    };
    let env = CartpoleEnv::new(CartpoleParams::default())
        .unwrap()
        .with_horizon(50)
        .with_gamma(0.95)
        .unwrap();
    let outcome = run_dpi_continuous(&cfg, 3).unwrap();
    let pi = &outcome.policy;
    println!("final W = {:?}", pi.params().as_slice());
    println!("final mu = {}", outcome.duals.last().unwrap().mu);

    // one more expert solve from fresh data under the final policy
    let batch = collect_trajectories(&env, pi, 20, 12345, "pi").unwrap();
    let (dynamics, _) = fit_time_varying_linear(&batch, 1e-4, 5).unwrap();
    println!("fitted A[25] =\n{:.4}", dynamics.a[25]);
    println!("fitted B[25] = {:?}", dynamics.b[25].as_slice());

    // riccati on the fitted model at t=25 (treated as stationary) vs on the
    // true linearization
    let q = env.cost().state_matrix();
    let r = env.cost().action_matrix();
    let k_fit = riccati_k0(&dynamics.a[25], &dynamics.b[25], q, r, 0.95, 50);
    println!("riccati K on fitted model:  {:?}", k_fit.as_slice());

    let eps = 1e-6;
    let mut a_true = DMatrix::<f64>::zeros(4, 4);
    for i in 0..4 {
        let mut up = [0.0f64; 4];
        let mut dn = [0.0f64; 4];
        up[i] += eps;
        dn[i] -= eps;
        let fu = dpi_core::envs::cartpole_step(env.params(), &up, 0.0).unwrap();
        let fd = dpi_core::envs::cartpole_step(env.params(), &dn, 0.0).unwrap();
        for row in 0..4 {
            a_true[(row, i)] = (fu[row] - fd[row]) / (2.0 * eps);
        }
    }
    let fu = dpi_core::envs::cartpole_step(env.params(), &[0.0; 4], eps).unwrap();
    let fd = dpi_core::envs::cartpole_step(env.params(), &[0.0; 4], -eps).unwrap();
    let b_true = DMatrix::from_fn(4, 1, |row, _| (fu[row] - fd[row]) / (2.0 * eps));
    println!("true A =\n{a_true:.4}");
    println!("true B = {:?}", b_true.as_slice());
    let k_true = riccati_k0(&a_true, &b_true, q, r, 0.95, 50);
    println!("riccati K on true model:    {:?}", k_true.as_slice());

    // expert gains at t=25 with a huge mu floor removed: solve with mu tiny
    let cm = build_surrogate_cost(env.cost(), outcome.duals.last().unwrap().mu, pi, &batch).unwrap();
    let (eta, _) = soft_lqr_backward(&dynamics, &cm, 0.95).unwrap();
    println!("expert K[0]  at accepted mu: {:?}", eta.gains[0].as_slice());
    println!("expert K[25] at accepted mu: {:?}", eta.gains[25].as_slice());
    let cm_pure = QuadraticCostModel::from_env_cost(env.cost(), 1.0, 50).unwrap();
    let (eta_pure, _) = soft_lqr_backward(&dynamics, &cm_pure, 0.95).unwrap();
    println!("pure-LQR K[25] on fitted:    {:?}", eta_pure.gains[25].as_slice());
}
