//! Families of perturbed environments for robust policy optimization.

use super::cartpole::{CartpoleEnv, CartpoleParams};
use crate::error::{DpiError, Result};
use crate::seeding::{self, tags};
use rand::Rng;

/// Create `m` cart-pole variants with pole mass and length scaled by
/// independent uniform factors on `[1 - perturb_scale, 1 + perturb_scale]`.
/// The convention downstream is that the first `m - k` environments train
/// and the last `k` are held out for testing.
pub fn make_robust_family(
    base: &CartpoleParams,
    m: usize,
    perturb_scale: f64,
    seed: u64,
) -> Result<Vec<CartpoleEnv>> {
    if m < 2 {
        return Err(DpiError::invalid("need at least two environments"));
    }
    if !(0.0..1.0).contains(&perturb_scale) {
        return Err(DpiError::invalid("perturb_scale must lie in [0, 1)"));
    }
    base.validate()?;
    (0..m)
        .map(|i| {
            let mut rng = seeding::rng(seed, tags::ENV_FAMILY, i as u64);
            let mass_factor = rng.gen_range(1.0 - perturb_scale..=1.0 + perturb_scale);
            let length_factor = rng.gen_range(1.0 - perturb_scale..=1.0 + perturb_scale);
            let params = CartpoleParams {
                pole_mass: base.pole_mass * mass_factor,
                half_length: base.half_length * length_factor,
                ..base.clone()
            };
            CartpoleEnv::new(params)
        })
        .collect()
}
