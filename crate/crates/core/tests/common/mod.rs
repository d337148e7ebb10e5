//! Shared oracles for the integration suites. Everything here is an
//! independent route: textbook recursions and brute-force optimizers that
//! never call the library's solver paths they are used to check.

use dpi_core::envs::{cartpole_step, CartpoleParams};
use nalgebra::{DMatrix, DVector};

/// Affine time-varying controller from the discounted finite-horizon
/// Riccati recursion for cost `(s - s*)^T Q (s - s*) + a^T R a` and
/// deterministic dynamics `s' = A s + B a + c`.
#[allow(clippy::too_many_arguments)]
pub fn riccati_gains(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DVector<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    target: &DVector<f64>,
    gamma: f64,
    horizon: usize,
) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    let d_s = a.nrows();
    let mut p = DMatrix::<f64>::zeros(d_s, d_s);
    let mut pv = DVector::<f64>::zeros(d_s);
    let mut gains = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        // V_{t+1}(s) = s^T P s + 2 pv^T s + const
        let m = r + b.transpose() * &p * b * gamma;
        let m_inv = m.clone().try_inverse().expect("control cost must be PD");
        let k_gain = -(&m_inv * b.transpose() * &p * a) * gamma;
        let k_bias = -(&m_inv * b.transpose() * (&p * c + &pv)) * gamma;

        // plug a = K s + k back in
        let acl = a + b * &k_gain; // closed loop
        let ccl = b * &k_bias + c;
        let new_p = q
            + k_gain.transpose() * r * &k_gain
            + acl.transpose() * &p * &acl * gamma;
        let new_pv = -(q * target)
            + k_gain.transpose() * r * &k_bias
            + acl.transpose() * (&p * &ccl + &pv) * gamma;
        p = (&new_p + new_p.transpose()) * 0.5;
        pv = new_pv;
        gains.push((k_gain, k_bias));
    }
    gains.reverse();
    gains
}

/// Deterministic rollout cost of an affine controller on linear dynamics.
#[allow(clippy::too_many_arguments)]
pub fn lti_rollout_cost(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DVector<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    target: &DVector<f64>,
    gamma: f64,
    s0: &DVector<f64>,
    gains: &[(DMatrix<f64>, DVector<f64>)],
) -> f64 {
    let mut s = s0.clone();
    let mut disc = 1.0;
    let mut total = 0.0;
    for (k_gain, k_bias) in gains {
        let act = k_gain * &s + k_bias;
        let ds = &s - target;
        total += disc
            * ((ds.transpose() * q * &ds)[(0, 0)] + (act.transpose() * r * &act)[(0, 0)]);
        disc *= gamma;
        s = a * &s + b * &act + c;
    }
    total
}

/// Brute-force gradient descent on the unrolled deterministic objective
/// over the open-loop action sequence, with backtracking line search.
/// Gradients come from the adjoint recursion.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_open_loop_cost(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DVector<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    target: &DVector<f64>,
    gamma: f64,
    s0: &DVector<f64>,
    horizon: usize,
    iterations: usize,
) -> f64 {
    let d_a = b.ncols();
    let mut actions = vec![DVector::<f64>::zeros(d_a); horizon];

    let objective = |acts: &[DVector<f64>]| -> f64 {
        let mut s = s0.clone();
        let mut disc = 1.0;
        let mut total = 0.0;
        for act in acts {
            let ds = &s - target;
            total += disc
                * ((ds.transpose() * q * &ds)[(0, 0)] + (act.transpose() * r * act)[(0, 0)]);
            disc *= gamma;
            s = a * &s + b * act + c;
        }
        total
    };

    let gradient = |acts: &[DVector<f64>]| -> Vec<DVector<f64>> {
        // forward pass for states
        let mut states = Vec::with_capacity(horizon + 1);
        states.push(s0.clone());
        for act in acts {
            let s = states.last().unwrap();
            states.push(a * s + b * act + c);
        }
        // backward adjoint: lambda_t = d total / d s_t
        let mut grads = vec![DVector::<f64>::zeros(d_a); horizon];
        let mut lambda = DVector::<f64>::zeros(s0.len());
        for t in (0..horizon).rev() {
            let disc = gamma.powi(t as i32);
            let ds = &states[t] - target;
            grads[t] = (r * &acts[t]) * (2.0 * disc) + b.transpose() * &lambda;
            lambda = (q * ds) * (2.0 * disc) + a.transpose() * &lambda;
        }
        grads
    };

    let mut cost = objective(&actions);
    let mut step = 1.0;
    for _ in 0..iterations {
        let grads = gradient(&actions);
        let gnorm2: f64 = grads.iter().map(|g| g.norm_squared()).sum();
        if gnorm2 < 1e-24 {
            break;
        }
        // backtracking line search on the full gradient direction
        loop {
            let trial: Vec<DVector<f64>> = actions
                .iter()
                .zip(&grads)
                .map(|(act, g)| act - g * step)
                .collect();
            let trial_cost = objective(&trial);
            if trial_cost <= cost - 0.25 * step * gnorm2 {
                actions = trial;
                cost = trial_cost;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                return cost;
            }
        }
    }
    cost
}

/// Central-difference linearization of the cart-pole step map around the
/// upright equilibrium with zero force: `s' ~ A s + B a + c` with `c = 0`.
pub fn linearize_cartpole(params: &CartpoleParams) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let eps = 1e-6;
    let mut a = DMatrix::<f64>::zeros(4, 4);
    for i in 0..4 {
        let mut up = [0.0f64; 4];
        let mut dn = [0.0f64; 4];
        up[i] += eps;
        dn[i] -= eps;
        let fu = cartpole_step(params, &up, 0.0).unwrap();
        let fd = cartpole_step(params, &dn, 0.0).unwrap();
        for r in 0..4 {
            a[(r, i)] = (fu[r] - fd[r]) / (2.0 * eps);
        }
    }
    let fu = cartpole_step(params, &[0.0; 4], eps).unwrap();
    let fd = cartpole_step(params, &[0.0; 4], -eps).unwrap();
    let b = DMatrix::from_fn(4, 1, |r, _| (fu[r] - fd[r]) / (2.0 * eps));
    (a, b, DVector::zeros(4))
}
