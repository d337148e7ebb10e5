//! Trust-region model-based optimal control.
//!
//! Builds the surrogate stage cost (environment cost scaled by the dual
//! multiplier plus the negative log-density of the current reactive policy,
//! quadratized around per-timestep anchor states), runs the discounted
//! maximum-entropy LQR backward recursion under fitted linear-Gaussian
//! dynamics, and measures the expected KL between the resulting expert and
//! the reactive policy. The dual bracketing loop lives in [`crate::dual`]
//! and is shared with the discrete track.

mod backward;
mod cost_model;
mod kl;

pub use backward::{
    policy_eval_quadratic, soft_lqr_backward, soft_lqr_backward_weighted, QuadraticValueChain,
    TimeVaryingLinearGaussianPolicy,
};
pub use cost_model::{build_surrogate_cost, QuadraticCostModel, QuadraticStage};
pub use kl::expected_kl;
