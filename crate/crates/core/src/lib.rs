//! Identifiable stratified age-period-cohort models.
//!
//! Log rates of each stratum are written in canonical coordinates (three
//! baseline log rates plus the second differences of the age, period and
//! cohort effects). Cross-strata pooling uses matrix-normal priors with
//! independent, exchangeable or BYM2 correlation; inference is a Laplace
//! approximation with empirical-Bayes hyperparameters.

pub mod apc;
pub mod covariance;
pub mod error;
pub mod inference;
pub mod io;
pub mod priors;
pub mod scalar;
pub mod selection;

pub use error::{Error, Result};
pub use scalar::{Exact, Scalar};

pub type Effects = apc::ApcEffects<f64>;
pub type Canonical = apc::CanonicalParams<f64>;
pub type Group = apc::GroupElement<f64>;
pub type Surface = apc::RateSurface<f64>;
pub type Design = apc::DesignMatrix<f64>;
pub type ExactDesign = apc::DesignMatrix<Exact>;
