//! Discrete-track dual policy iteration.
//!
//! Tabular count-based model estimation, a value-iteration expert under the
//! surrogate cost with dual bracketing, cost-sensitive one-against-all
//! classification over binary state features, and the conservative mixture
//! update. The baseline variant runs the identical pipeline with the
//! reactive policy's own disadvantage in place of the expert's.

mod csoaa;
mod features;
mod iteration;
mod model;
mod softvi;
mod theorem2;
mod update;

pub use csoaa::{csoaa_fit, CsoaaClassifier};
pub use features::{binary_features, feature_dim};
pub use iteration::{
    cpi_iteration, discrete_iteration, dpi_discrete_iteration, dual_search_discrete,
    AdvantageCostMode, AdvantageSource, DiscreteConfig, DiscreteIterationOutput, DiscreteState,
};
pub use model::{collect_rollouts, estimate_model, DiscreteRollouts, EmpiricalModel, Transition};
pub use softvi::{soft_value_iteration, soft_value_iteration_warm, ExpertBackup, SoftViSolution};
pub use theorem2::{theorem2_check, Theorem2Outcome};
pub use update::conservative_update;

/// Probability floor applied inside logarithms of reactive-policy
/// probabilities when building the surrogate cost; keeps the soft backup
/// finite when the policy has (numerically) zero mass on an action.
pub const LOG_PROB_FLOOR: f64 = 1e-8;
