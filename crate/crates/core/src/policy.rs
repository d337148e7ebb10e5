//! Parametric Gaussian reactive policies.
//!
//! Diagonal-covariance Gaussians whose mean is either linear in the state or
//! a two-layer tanh network, with a state-independent log-std vector. All
//! densities and parameter gradients are analytic (manual backprop through
//! the mean); nothing here needs an autodiff framework.

use crate::envs::ContinuousPolicy;
use crate::error::{DpiError, Result};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

const LN_2PI: f64 = 1.8378770664093453;

/// Mean function of the policy.
#[derive(Debug, Clone)]
pub enum MeanFunction {
    Linear {
        w: DMatrix<f64>,
        b: DVector<f64>,
    },
    TwoLayer {
        w1: DMatrix<f64>,
        b1: DVector<f64>,
        w2: DMatrix<f64>,
        b2: DVector<f64>,
    },
}

/// Gaussian policy `a ~ N(m_theta(s), diag(exp(2 log_std)))`.
#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    mean: MeanFunction,
    log_std: DVector<f64>,
    state_dim: usize,
    action_dim: usize,
}

impl GaussianPolicy {
    /// Linear mean initialized at zero.
    pub fn linear(state_dim: usize, action_dim: usize, log_std_init: f64) -> Self {
        Self {
            mean: MeanFunction::Linear {
                w: DMatrix::zeros(action_dim, state_dim),
                b: DVector::zeros(action_dim),
            },
            log_std: DVector::from_element(action_dim, log_std_init),
            state_dim,
            action_dim,
        }
    }

    /// Two-layer tanh mean with small random first layer and near-zero
    /// output layer.
    pub fn two_layer(
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        log_std_init: f64,
        seed: u64,
    ) -> Self {
        let mut rng = crate::seeding::rng(seed, crate::seeding::tags::POLICY_INIT, 0);
        let scale1 = 1.0 / (state_dim as f64).sqrt();
        let scale2 = 0.01 / (hidden as f64).sqrt();
        let mut draw = |scale: f64| -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        };
        let w1 = DMatrix::from_fn(hidden, state_dim, |_, _| draw(scale1));
        let w2 = DMatrix::from_fn(action_dim, hidden, |_, _| draw(scale2));
        Self {
            mean: MeanFunction::TwoLayer {
                w1,
                b1: DVector::zeros(hidden),
                w2,
                b2: DVector::zeros(action_dim),
            },
            log_std: DVector::from_element(action_dim, log_std_init),
            state_dim,
            action_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn mean_function(&self) -> &MeanFunction {
        &self.mean
    }

    pub fn log_std(&self) -> &DVector<f64> {
        &self.log_std
    }

    /// Diagonal of the covariance.
    pub fn variance(&self) -> DVector<f64> {
        self.log_std.map(|l| (2.0 * l).exp())
    }

    pub fn mean(&self, s: &DVector<f64>) -> DVector<f64> {
        match &self.mean {
            MeanFunction::Linear { w, b } => w * s + b,
            MeanFunction::TwoLayer { w1, b1, w2, b2 } => {
                let h = (w1 * s + b1).map(f64::tanh);
                w2 * h + b2
            }
        }
    }

    /// Jacobian of the mean with respect to the state.
    pub fn mean_state_jacobian(&self, s: &DVector<f64>) -> DMatrix<f64> {
        match &self.mean {
            MeanFunction::Linear { w, .. } => w.clone(),
            MeanFunction::TwoLayer { w1, b1, w2, .. } => {
                let h = (w1 * s + b1).map(f64::tanh);
                let gate = h.map(|hi| 1.0 - hi * hi);
                let mut scaled = w1.clone();
                for r in 0..scaled.nrows() {
                    for c in 0..scaled.ncols() {
                        scaled[(r, c)] *= gate[r];
                    }
                }
                w2 * scaled
            }
        }
    }

    pub fn sample(&self, s: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        let m = self.mean(s);
        let z = DVector::from_iterator(
            self.action_dim,
            (0..self.action_dim).map(|_| StandardNormal.sample(&mut *rng)),
        );
        m + self.log_std.map(f64::exp).component_mul(&z)
    }

    pub fn log_prob(&self, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        let m = self.mean(s);
        let mut lp = 0.0;
        for i in 0..self.action_dim {
            let inv_var = (-2.0 * self.log_std[i]).exp();
            let d = a[i] - m[i];
            lp -= 0.5 * (d * d * inv_var + 2.0 * self.log_std[i] + LN_2PI);
        }
        lp
    }

    /// Number of free parameters (mean parameters plus log-std).
    pub fn param_count(&self) -> usize {
        self.mean_param_count() + self.action_dim
    }

    fn mean_param_count(&self) -> usize {
        match &self.mean {
            MeanFunction::Linear { w, b } => w.len() + b.len(),
            MeanFunction::TwoLayer { w1, b1, w2, b2 } => {
                w1.len() + b1.len() + w2.len() + b2.len()
            }
        }
    }

    /// Flatten parameters: mean blocks row-major in declaration order, then
    /// log-std.
    pub fn params(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        match &self.mean {
            MeanFunction::Linear { w, b } => {
                push_row_major(&mut out, w);
                out.extend(b.iter());
            }
            MeanFunction::TwoLayer { w1, b1, w2, b2 } => {
                push_row_major(&mut out, w1);
                out.extend(b1.iter());
                push_row_major(&mut out, w2);
                out.extend(b2.iter());
            }
        }
        out.extend(self.log_std.iter());
        DVector::from_vec(out)
    }

    /// Same policy shape with replaced parameters.
    pub fn with_params(&self, theta: &DVector<f64>) -> Result<Self> {
        if theta.len() != self.param_count() {
            return Err(DpiError::invalid(format!(
                "parameter vector has length {}, expected {}",
                theta.len(),
                self.param_count()
            )));
        }
        fn take_matrix(theta: &DVector<f64>, idx: &mut usize, rows: usize, cols: usize) -> DMatrix<f64> {
            let base = *idx;
            *idx += rows * cols;
            DMatrix::from_fn(rows, cols, |r, c| theta[base + r * cols + c])
        }
        fn take_vector(theta: &DVector<f64>, idx: &mut usize, len: usize) -> DVector<f64> {
            let base = *idx;
            *idx += len;
            DVector::from_fn(len, |r, _| theta[base + r])
        }
        let mut idx = 0usize;
        let mean = match &self.mean {
            MeanFunction::Linear { w, .. } => {
                let new_w = take_matrix(theta, &mut idx, w.nrows(), w.ncols());
                let b = take_vector(theta, &mut idx, self.action_dim);
                MeanFunction::Linear { w: new_w, b }
            }
            MeanFunction::TwoLayer { w1, w2, .. } => {
                let h = w1.nrows();
                let new_w1 = take_matrix(theta, &mut idx, h, w1.ncols());
                let b1 = take_vector(theta, &mut idx, h);
                let new_w2 = take_matrix(theta, &mut idx, w2.nrows(), w2.ncols());
                let b2 = take_vector(theta, &mut idx, self.action_dim);
                MeanFunction::TwoLayer { w1: new_w1, b1, w2: new_w2, b2 }
            }
        };
        let log_std = take_vector(theta, &mut idx, self.action_dim);
        Ok(Self {
            mean,
            log_std,
            state_dim: self.state_dim,
            action_dim: self.action_dim,
        })
    }

    /// Analytic gradient of `log_prob(s, a)` with respect to the flattened
    /// parameters.
    pub fn grad_log_prob(&self, s: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        let m = self.mean(s);
        let inv_var = self.log_std.map(|l| (-2.0 * l).exp());
        // d lp / d mean
        let g_m = (a - &m).component_mul(&inv_var);
        let mut out = DVector::zeros(self.param_count());
        self.accumulate_mean_vjp(s, &g_m, &mut out);
        let base = self.mean_param_count();
        for i in 0..self.action_dim {
            let d = a[i] - m[i];
            out[base + i] = d * d * inv_var[i] - 1.0;
        }
        out
    }

    /// Directional derivative of the mean with respect to the mean
    /// parameters: `J_mean * v_mean`.
    pub fn mean_jvp(&self, s: &DVector<f64>, v_mean: &[f64]) -> DVector<f64> {
        match &self.mean {
            MeanFunction::Linear { w, .. } => {
                let (rows, cols) = (w.nrows(), w.ncols());
                let mut out = DVector::zeros(rows);
                for r in 0..rows {
                    let mut acc = 0.0;
                    for c in 0..cols {
                        acc += v_mean[r * cols + c] * s[c];
                    }
                    out[r] = acc + v_mean[rows * cols + r];
                }
                out
            }
            MeanFunction::TwoLayer { w1, b1, w2, .. } => {
                let h_dim = w1.nrows();
                let s_dim = w1.ncols();
                let a_dim = w2.nrows();
                let h_pre = w1 * s + b1;
                let h = h_pre.map(f64::tanh);
                let gate = h.map(|x| 1.0 - x * x);
                let mut dh = DVector::zeros(h_dim);
                for r in 0..h_dim {
                    let mut acc = 0.0;
                    for c in 0..s_dim {
                        acc += v_mean[r * s_dim + c] * s[c];
                    }
                    acc += v_mean[h_dim * s_dim + r]; // b1 part
                    dh[r] = gate[r] * acc;
                }
                let off2 = h_dim * s_dim + h_dim;
                let mut out = DVector::zeros(a_dim);
                for r in 0..a_dim {
                    let mut acc = 0.0;
                    for c in 0..h_dim {
                        acc += v_mean[off2 + r * h_dim + c] * h[c] + w2[(r, c)] * dh[c];
                    }
                    out[r] = acc + v_mean[off2 + a_dim * h_dim + r]; // b2 part
                }
                out
            }
        }
    }

    /// Accumulate `J_mean^T g` into the mean-parameter prefix of `out`.
    pub fn accumulate_mean_vjp(&self, s: &DVector<f64>, g: &DVector<f64>, out: &mut DVector<f64>) {
        match &self.mean {
            MeanFunction::Linear { w, .. } => {
                let (rows, cols) = (w.nrows(), w.ncols());
                for r in 0..rows {
                    for c in 0..cols {
                        out[r * cols + c] += g[r] * s[c];
                    }
                    out[rows * cols + r] += g[r];
                }
            }
            MeanFunction::TwoLayer { w1, b1, w2, .. } => {
                let h_dim = w1.nrows();
                let s_dim = w1.ncols();
                let a_dim = w2.nrows();
                let h = (w1 * s + b1).map(f64::tanh);
                let delta = {
                    let back = w2.transpose() * g;
                    DVector::from_fn(h_dim, |r, _| back[r] * (1.0 - h[r] * h[r]))
                };
                for r in 0..h_dim {
                    for c in 0..s_dim {
                        out[r * s_dim + c] += delta[r] * s[c];
                    }
                    out[h_dim * s_dim + r] += delta[r];
                }
                let off2 = h_dim * s_dim + h_dim;
                for r in 0..a_dim {
                    for c in 0..h_dim {
                        out[off2 + r * h_dim + c] += g[r] * h[c];
                    }
                    out[off2 + a_dim * h_dim + r] += g[r];
                }
            }
        }
    }

    /// Closed-form KL divergence `D_KL(self(.|s) || other(.|s))` at a state
    /// (both policies share the diagonal-Gaussian family).
    pub fn kl_to(&self, other: &GaussianPolicy, s: &DVector<f64>) -> f64 {
        let m0 = self.mean(s);
        let m1 = other.mean(s);
        let mut kl = 0.0;
        for i in 0..self.action_dim {
            let v0 = (2.0 * self.log_std[i]).exp();
            let v1 = (2.0 * other.log_std[i]).exp();
            let d = m1[i] - m0[i];
            kl += 0.5 * (v0 / v1 + d * d / v1 - 1.0) + other.log_std[i] - self.log_std[i];
        }
        kl
    }
}

fn push_row_major(out: &mut Vec<f64>, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
}

impl ContinuousPolicy for GaussianPolicy {
    fn action(&self, _t: usize, s: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        self.sample(s, rng)
    }
}

/// Deterministic wrapper executing the mean action; used for final-policy
/// evaluation.
pub struct MeanPolicy<'a>(pub &'a GaussianPolicy);

impl ContinuousPolicy for MeanPolicy<'_> {
    fn action(&self, _t: usize, s: &DVector<f64>, _rng: &mut dyn RngCore) -> DVector<f64> {
        self.0.mean(s)
    }
}

/// Checkpoint schema: architecture descriptor plus the flat parameter
/// vector in canonical order.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyJson {
    pub kind: String,
    pub state_dim: usize,
    pub action_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    pub params: Vec<f64>,
}

impl GaussianPolicy {
    pub fn to_json(&self) -> PolicyJson {
        let (kind, hidden) = match &self.mean {
            MeanFunction::Linear { .. } => ("linear".to_string(), None),
            MeanFunction::TwoLayer { w1, .. } => ("two_layer".to_string(), Some(w1.nrows())),
        };
        PolicyJson {
            kind,
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            hidden,
            params: self.params().as_slice().to_vec(),
        }
    }

    pub fn from_json(doc: &PolicyJson) -> Result<Self> {
        let template = match doc.kind.as_str() {
            "linear" => GaussianPolicy::linear(doc.state_dim, doc.action_dim, 0.0),
            "two_layer" => {
                let hidden = doc
                    .hidden
                    .ok_or_else(|| DpiError::invalid("two_layer checkpoint missing hidden"))?;
                GaussianPolicy::two_layer(doc.state_dim, doc.action_dim, hidden, 0.0, 0)
            }
            other => return Err(DpiError::invalid(format!("unknown policy kind {other}"))),
        };
        template.with_params(&DVector::from_vec(doc.params.clone()))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let doc: PolicyJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_json(&doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    fn policies() -> Vec<GaussianPolicy> {
        let mut linear = GaussianPolicy::linear(3, 2, -0.3);
        let n = linear.param_count();
        let mut rng = seeding::master_rng(5);
        let theta = DVector::from_fn(n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.4 * z
        });
        linear = linear.with_params(&theta).unwrap();
        let two = GaussianPolicy::two_layer(3, 2, 8, -0.1, 7);
        let m = two.param_count();
        let theta2 = DVector::from_fn(m, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.3 * z
        });
        vec![linear, two.with_params(&theta2).unwrap()]
    }

    #[test]
    fn log_prob_at_mean_is_normalizer() {
        for pol in policies() {
            let s = DVector::from_vec(vec![0.3, -0.7, 1.1]);
            let m = pol.mean(&s);
            let lp = pol.log_prob(&s, &m);
            let expected: f64 = -(0..2)
                .map(|i| 0.5 * (LN_2PI + 2.0 * pol.log_std()[i]))
                .sum::<f64>();
            assert!((lp - expected).abs() <= 1e-12);
            // gradient w.r.t. mean parameters vanishes at the mode
            let g = pol.grad_log_prob(&s, &m);
            for i in 0..pol.param_count() - 2 {
                assert!(g[i].abs() <= 1e-12, "mean-parameter grad {i} = {}", g[i]);
            }
        }
    }

    #[test]
    fn grad_log_prob_matches_finite_differences() {
        for pol in policies() {
            let s = DVector::from_vec(vec![0.5, -0.2, 0.8]);
            let mut rng = seeding::master_rng(11);
            let a = pol.sample(&s, &mut rng);
            let g = pol.grad_log_prob(&s, &a);
            let theta = pol.params();
            let eps = 1e-5;
            for i in 0..pol.param_count() {
                let mut up = theta.clone();
                up[i] += eps;
                let mut dn = theta.clone();
                dn[i] -= eps;
                let fd = (pol.with_params(&up).unwrap().log_prob(&s, &a)
                    - pol.with_params(&dn).unwrap().log_prob(&s, &a))
                    / (2.0 * eps);
                let denom = g[i].abs().max(1.0);
                assert!(
                    (g[i] - fd).abs() / denom <= 1e-4,
                    "param {i}: analytic {} fd {}",
                    g[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn score_has_zero_mean() {
        for pol in policies() {
            let s = DVector::from_vec(vec![0.1, 0.4, -0.9]);
            let n = 10_000;
            let mut rng = seeding::master_rng(13);
            let mut sum = DVector::<f64>::zeros(pol.param_count());
            let mut sumsq = DVector::<f64>::zeros(pol.param_count());
            for _ in 0..n {
                let a = pol.sample(&s, &mut rng);
                let g = pol.grad_log_prob(&s, &a);
                sum += &g;
                sumsq += g.component_mul(&g);
            }
            for i in 0..pol.param_count() {
                let mean = sum[i] / n as f64;
                let var = (sumsq[i] / n as f64 - mean * mean).max(1e-12);
                let se = (var / n as f64).sqrt();
                assert!(
                    mean.abs() <= 3.0 * se + 1e-9,
                    "coordinate {i}: mean {mean} se {se}"
                );
            }
        }
    }

    #[test]
    fn jvp_matches_jacobian_columns() {
        for pol in policies() {
            let s = DVector::from_vec(vec![0.2, -0.5, 0.9]);
            let p_mean = pol.param_count() - pol.action_dim();
            let eps = 1e-6;
            let theta = pol.params();
            for i in 0..p_mean {
                let mut v = vec![0.0; p_mean];
                v[i] = 1.0;
                let jvp = pol.mean_jvp(&s, &v);
                let mut up = theta.clone();
                up[i] += eps;
                let mut dn = theta.clone();
                dn[i] -= eps;
                let fd = (pol.with_params(&up).unwrap().mean(&s)
                    - pol.with_params(&dn).unwrap().mean(&s))
                    / (2.0 * eps);
                assert!((jvp - fd).abs().max() <= 1e-6, "param {i}");
            }
        }
    }

    #[test]
    fn kl_matches_half_squared_distance_for_shared_cov() {
        let p0 = GaussianPolicy::linear(2, 2, 0.0);
        let theta = p0.params();
        let mut theta1 = theta.clone();
        theta1[1] += 0.6; // shift one mean weight
        let p1 = p0.with_params(&theta1).unwrap();
        let s = DVector::from_vec(vec![0.0, 1.0]);
        let d = p1.mean(&s) - p0.mean(&s);
        let expected = 0.5 * d.norm_squared();
        assert!((p0.kl_to(&p1, &s) - expected).abs() <= 1e-12);
        assert_eq!(p0.kl_to(&p0, &s), 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        for pol in policies() {
            let doc = pol.to_json();
            let back = GaussianPolicy::from_json(&doc).unwrap();
            assert_eq!(pol.params(), back.params());
            let s = DVector::from_vec(vec![0.3, 0.1, -0.2]);
            assert_eq!(pol.mean(&s), back.mean(&s));
        }
    }

    #[test]
    fn state_jacobian_matches_fd() {
        for pol in policies() {
            let s = DVector::from_vec(vec![0.4, -0.3, 0.6]);
            let jac = pol.mean_state_jacobian(&s);
            let eps = 1e-6;
            for c in 0..3 {
                let mut up = s.clone();
                up[c] += eps;
                let mut dn = s.clone();
                dn[c] -= eps;
                let fd = (pol.mean(&up) - pol.mean(&dn)) / (2.0 * eps);
                for r in 0..2 {
                    assert!((jac[(r, c)] - fd[r]).abs() <= 1e-6);
                }
            }
        }
    }
}
