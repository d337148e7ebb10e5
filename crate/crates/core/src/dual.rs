//! Dual-variable bracketing for the trust-region constraint.
//!
//! The expert update trades off cost against divergence from the current
//! policy through a multiplier `mu`. The measured expected KL of the solved
//! expert is monotone-ish in `mu`, so instead of gradient ascent on the dual
//! we maintain a bracket `[mu_min, mu_max]`: a constraint violation raises
//! `mu` to `min(sqrt(mu_min*mu_max), 10*mu_min)` after pinning `mu_min`,
//! satisfaction lowers it to `max(sqrt(mu_min*mu_max), 0.1*mu_max)` after
//! pinning `mu_max`, and the search stops as soon as the KL lands in
//! `[0.9*alpha, 1.1*alpha]`. The accepted multiplier warm-starts the next
//! iteration.

use crate::error::{DpiError, Result};
use serde::{Deserialize, Serialize};

/// Relative bracket width below which the search gives up.
const MIN_RELATIVE_WIDTH: f64 = 1e-6;

const MAX_DUAL_ITERS: usize = 80;

/// Outcome of a bracketing run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualState {
    /// Accepted multiplier.
    pub mu: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Expected KL of the accepted expert.
    pub kl_measured: f64,
    pub alpha_target: f64,
    /// Set when the bracket collapsed before the KL entered the window.
    pub bracket_limit: bool,
    /// Number of inner solves performed.
    pub inner_solves: usize,
}

impl DualState {
    /// Whether the accepted iterate sits inside the early-termination window.
    pub fn in_window(&self) -> bool {
        self.kl_measured >= 0.9 * self.alpha_target && self.kl_measured <= 1.1 * self.alpha_target
    }
}

/// Run the bracketing loop. `solve` maps a multiplier to a candidate expert
/// and its measured expected KL against the current policy. `warm_start`
/// seeds the first multiplier (clamped into bounds); otherwise the search
/// starts at `mu_min`.
pub fn dual_update_bracket<T>(
    mut solve: impl FnMut(f64) -> Result<(T, f64)>,
    alpha: f64,
    mu_bounds: (f64, f64),
    warm_start: Option<f64>,
) -> Result<(T, DualState)> {
    if !(alpha > 0.0) {
        return Err(DpiError::invalid("alpha must be positive"));
    }
    let (mut lo, mut hi) = mu_bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(DpiError::invalid("mu bounds must satisfy 0 < mu_min < mu_max"));
    }
    // A warm start narrows the bracket around the previous accepted
    // multiplier; consecutive iterations change the constraint surface only
    // slightly, so the wide global bracket would waste solves re-walking
    // orders of magnitude. When the optimum drifts outside the narrowed
    // bracket the search flags bracket-limit and the next iteration
    // re-centers on the edge it returned.
    if let Some(w) = warm_start {
        if w > lo && w < hi {
            lo = lo.max(w / 2.0);
            hi = hi.min(w * 2.0);
        }
    }
    let mut mu = warm_start.map(|m| m.clamp(lo, hi)).unwrap_or(lo);

    let mut best: Option<(T, f64, f64)> = None; // (candidate, kl, mu)
    let mut inner = 0usize;
    let mut limit = false;
    loop {
        let (candidate, kl) = solve(mu)?;
        inner += 1;
        let in_window = kl >= 0.9 * alpha && kl <= 1.1 * alpha;
        let better = match &best {
            None => true,
            Some((_, bkl, _)) => (kl - alpha).abs() < (bkl - alpha).abs(),
        };
        if better {
            best = Some((candidate, kl, mu));
        }
        if in_window {
            break;
        }
        if kl > alpha {
            lo = mu;
            mu = (lo * hi).sqrt().min(10.0 * lo);
        } else {
            hi = mu;
            mu = (lo * hi).sqrt().max(0.1 * hi);
        }
        if (hi - lo) <= MIN_RELATIVE_WIDTH * hi || inner >= MAX_DUAL_ITERS {
            limit = true;
            break;
        }
    }
    let (candidate, kl, mu) = best.expect("at least one solve ran");
    let state = DualState {
        mu,
        mu_min: lo,
        mu_max: hi,
        kl_measured: kl,
        alpha_target: alpha,
        bracket_limit: limit,
        inner_solves: inner,
    };
    Ok((candidate, state))
}
