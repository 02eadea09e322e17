//! Model comparison and predictive checks: WAIC over the candidate grid,
//! PIT calibration, hindcasts of hidden cells and cross-strata relative
//! risks.

mod grid;
mod hindcast;
mod pit;
mod rr;
mod waic;

pub use grid::{default_models, fit_entry, fit_grid, GridConfig, GridEntry, GridScore, ModelGridResult};
pub use hindcast::{hindcast, CellForecast, HindcastResult};
pub use pit::{ks_uniform, pit, pit_value, PitResult, PIT_BINS};
pub use rr::{cross_strata_rr, licenses_contrast, rr_from_log_rates, RrCurve, AMBIGUITY_NOTE};
pub use waic::{pointwise_loglik, waic, WaicResult};
