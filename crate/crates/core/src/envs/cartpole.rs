//! Cart-pole balancing with a continuous force action.
//!
//! State `(x, x_dot, theta, theta_dot)` with the angle measured from
//! upright; the upright origin is an unstable equilibrium. Integration is
//! semi-implicit Euler: velocities update first, positions use the new
//! velocities.

use super::{ContinuousEnv, GaussianStart, QuadraticCost};
use crate::error::{DpiError, Result};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;

/// Physical constants for the cart-pole.
#[derive(Debug, Clone, PartialEq)]
pub struct CartpoleParams {
    /// Cart mass (kg).
    pub cart_mass: f64,
    /// Pole mass (kg).
    pub pole_mass: f64,
    /// Pole half-length (m).
    pub half_length: f64,
    /// Gravity (m/s^2).
    pub gravity: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Maximum force magnitude (N); actions clip here.
    pub force_limit: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            gravity: 9.8,
            dt: 0.02,
            force_limit: 10.0,
        }
    }
}

impl CartpoleParams {
    pub fn validate(&self) -> Result<()> {
        let all_positive = self.cart_mass > 0.0
            && self.pole_mass > 0.0
            && self.half_length > 0.0
            && self.gravity > 0.0
            && self.dt > 0.0
            && self.force_limit > 0.0;
        if !all_positive {
            return Err(DpiError::invalid("cart-pole parameters must be strictly positive"));
        }
        if self.dt > 0.05 {
            return Err(DpiError::invalid("cart-pole dt must not exceed 0.05 s"));
        }
        Ok(())
    }
}

/// One semi-implicit Euler step of the cart-pole dynamics under force `a`
/// (clipped to the force limit). Deterministic.
pub fn cartpole_step(params: &CartpoleParams, s: &[f64; 4], a: f64) -> Result<[f64; 4]> {
    if s.iter().any(|x| !x.is_finite()) || !a.is_finite() {
        return Err(DpiError::invalid("cart-pole state and action must be finite"));
    }
    let force = a.clamp(-params.force_limit, params.force_limit);
    let [x, x_dot, theta, theta_dot] = *s;
    let total_mass = params.cart_mass + params.pole_mass;
    let pml = params.pole_mass * params.half_length;
    let (sin_t, cos_t) = theta.sin_cos();
    let temp = (force + pml * theta_dot * theta_dot * sin_t) / total_mass;
    let theta_acc = (params.gravity * sin_t - cos_t * temp)
        / (params.half_length * (4.0 / 3.0 - params.pole_mass * cos_t * cos_t / total_mass));
    let x_acc = temp - pml * theta_acc * cos_t / total_mass;

    let x_dot_new = x_dot + params.dt * x_acc;
    let theta_dot_new = theta_dot + params.dt * theta_acc;
    Ok([
        x + params.dt * x_dot_new,
        x_dot_new,
        theta + params.dt * theta_dot_new,
        theta_dot_new,
    ])
}

/// Cart-pole environment with quadratic cost around upright.
#[derive(Debug, Clone)]
pub struct CartpoleEnv {
    params: CartpoleParams,
    cost: QuadraticCost,
    start: GaussianStart,
    horizon: usize,
    gamma: f64,
    /// Optional additive Gaussian state noise per step (off by default).
    noise_std: Option<DVector<f64>>,
}

impl CartpoleEnv {
    /// Default task: penalize the angle dominantly
    /// (`Q = diag(1, 0.1, 10, 0.1)`, `R = 0.01`), start near upright with
    /// std 0.05 per coordinate, horizon 100, discount 0.995.
    pub fn new(params: CartpoleParams) -> Result<Self> {
        params.validate()?;
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1, 10.0, 0.1]));
        let r = DMatrix::from_element(1, 1, 0.01);
        let cost = QuadraticCost::new(q, r, DVector::zeros(4))?;
        let start = GaussianStart::diagonal(
            DVector::zeros(4),
            &DVector::from_element(4, 0.05),
        )?;
        Ok(Self {
            params,
            cost,
            start,
            horizon: 100,
            gamma: 0.995,
            noise_std: None,
        })
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(DpiError::invalid("gamma must lie in (0,1)"));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_noise_std(mut self, std: DVector<f64>) -> Self {
        self.noise_std = Some(std);
        self
    }

    pub fn params(&self) -> &CartpoleParams {
        &self.params
    }
}

impl ContinuousEnv for CartpoleEnv {
    fn state_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn cost(&self) -> &QuadraticCost {
        &self.cost
    }

    fn start(&self) -> &GaussianStart {
        &self.start
    }

    fn clip_action(&self, mut a: DVector<f64>) -> DVector<f64> {
        a[0] = a[0].clamp(-self.params.force_limit, self.params.force_limit);
        a
    }

    fn step(
        &self,
        s: &DVector<f64>,
        a: &DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<DVector<f64>> {
        let state = [s[0], s[1], s[2], s[3]];
        let next = cartpole_step(&self.params, &state, a[0])?;
        let mut out = DVector::from_row_slice(&next);
        if let Some(std) = &self.noise_std {
            let z = super::standard_normal_vector(4, rng);
            out += std.component_mul(&z);
        }
        Ok(out)
    }
}
