//! Local densities, feedback gains, decision-row composition, requirement
//! checks, and the Markov-chain primitives shared by every policy.

mod gain;
mod markov;
mod requirements;
mod row;
mod state;

pub use gain::{gain_from_deviation, primary_gain};
pub use markov::{dobrushin_coefficient, ergodicity_coefficient, propagate_mean_field, sample_transition, sample_weighted};
pub use requirements::{validate_requirements, Check, RequirementReport, REQUIREMENT_TOL};
pub use row::{compose_row, is_stochastic, secondary_weight, PolicyRow, STOCHASTIC_TOL};
pub use state::{local_view, LocalField, LocalView, SwarmState};
