use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Variance multiple `c` of the prediction residual, `residual | tau ~ N(0, c / tau)`,
/// under which the elicited rate gives `Pr(|residual| <= epsilon) = 1 - q` exactly:
/// an exponentially mixed normal is a scaled Student-t with 2 degrees of freedom.
pub const RESIDUAL_VARIANCE_MULTIPLE: f64 = 2.0;

/// Belief that the one-step prediction residual of an effect is within
/// `epsilon` (log relative risk) with probability `1 - q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionElicitation {
    pub epsilon: f64,
    pub q: f64,
}

impl PrecisionElicitation {
    pub fn new(epsilon: f64, q: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("tail probability must lie in (0, 1), got {q}")));
        }
        Ok(Self { epsilon, q })
    }

    pub fn rate(&self) -> f64 {
        let t = t2_quantile(1.0 - self.q / 2.0);
        (self.epsilon / t).powi(2) / 2.0
    }
}

/// Quantile of the Student-t distribution with 2 degrees of freedom.
pub fn t2_quantile(p: f64) -> f64 {
    StudentsT::new(0.0, 1.0, 2.0).expect("valid t parameters").inverse_cdf(p)
}

/// Rate of the exponential prior on a precision: `(epsilon / t_{1-q/2, 2})^2 / 2`.
pub fn elicit_precision_rate(e: &PrecisionElicitation) -> f64 {
    e.rate()
}
