//! Binary state features for the reactive classifier.

use crate::error::{DpiError, Result};

/// Number of feature dimensions for a state space of the given size:
/// `ceil(log2(num_states))` bits plus one bias.
pub fn feature_dim(num_states: usize) -> usize {
    bits_for(num_states) + 1
}

fn bits_for(num_states: usize) -> usize {
    if num_states <= 1 {
        0
    } else {
        ((num_states - 1).ilog2() + 1) as usize
    }
}

/// Binary encoding of a state id, least-significant bit first, with a
/// trailing constant bias of 1.
pub fn binary_features(state_index: usize, num_states: usize) -> Result<Vec<f64>> {
    if state_index >= num_states {
        return Err(DpiError::invalid(format!(
            "state index {state_index} out of range for {num_states} states"
        )));
    }
    let bits = bits_for(num_states);
    let mut phi = Vec::with_capacity(bits + 1);
    for b in 0..bits {
        phi.push(((state_index >> b) & 1) as f64);
    }
    phi.push(1.0);
    Ok(phi)
}
