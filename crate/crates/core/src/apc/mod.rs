//! Age-period-cohort index algebra.
//!
//! Indices exposed by this module are 1-based (`i` ages, `j` periods, `k`
//! cohorts), matching the usual APC notation. Surfaces are stored as `A x T`
//! matrices; their vectorization is column-major by period (all ages of the
//! first period, then the second period, and so on).

mod baseline;
mod design;
mod effects;
mod grid;

pub use baseline::{BaselineForm, BaselineSpec, Coordinates};
pub use design::{build_design_matrix, canonical_from_effects, exact_rank, DesignMatrix};
pub use effects::{apply_group, log_rates, second_differences, ApcEffects, CanonicalParams, GroupElement, RateSurface};
pub use grid::{cohort_index, middle_index, GridSpec};
