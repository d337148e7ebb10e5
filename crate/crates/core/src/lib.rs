//! Dual policy iteration.
//!
//! Two policies are maintained and improved in alternation: a fast reactive
//! policy deployed at rollout time, and a slow non-reactive expert rebuilt
//! every iteration by trust-region model-based optimal control under a
//! locally fitted dynamics model. The reactive policy then imitates the
//! expert under its own trust region.
//!
//! The crate ships two instantiations plus the machinery to validate the
//! underlying improvement theory numerically:
//!
//! - [`mdp`] — exact tabular MDP machinery: generators, exact policy
//!   evaluation, visitation distributions, and the lemma/theorem oracles.
//! - [`tabular`] — the discrete track: tabular model estimation, soft value
//!   iteration under a surrogate cost, dual bracketing, cost-sensitive
//!   classification, conservative mixture updates.
//! - [`envs`] — continuous-control environments with known quadratic costs
//!   (cartpole, linear-Gaussian systems, perturbed families) and trajectory
//!   collection.
//! - [`sysid`] — time-varying linear-Gaussian dynamics fits by ridge
//!   regression.
//! - [`lqr`] — the trust-region optimal control solver: surrogate cost
//!   quadratization, maximum-entropy LQR backward recursion, expected-KL
//!   measurement, and the dual bracketing loop.
//! - [`policy`] — parametric Gaussian reactive policies with analytic score
//!   gradients.
//! - [`ngd`] — natural-gradient imitation updates via conjugate gradient and
//!   Fisher-vector products.
//! - [`harness`] — experiment orchestration, persistence, plotting, and the
//!   verification suite.
//!
//! Data-parallel inner loops (rollout collection, batch reductions, instance
//! sweeps) run on rayon when the default `parallel` feature is enabled and
//! fall back to sequential loops without it. Results are identical either
//! way: per-episode RNG streams are derived from the master seed and
//! reductions run in a fixed order.

pub mod dual;
pub mod envs;
pub mod error;
pub mod harness;
pub mod lqr;
pub mod mdp;
pub mod ngd;
pub mod par;
pub mod policy;
pub mod seeding;
pub mod sysid;
pub mod tabular;

pub use error::{DpiError, Result};
