use crate::covariance::ScaledIcar;
use crate::error::{Error, Result};

/// Penalized-complexity prior on the BYM2 mixing parameter.
///
/// The distance from the base model (`rho = 0`) is `d(rho) = sqrt(2 KLD(rho))`
/// where KLD is the divergence of `N(0, (1-rho) I + rho Q*)` from `N(0, I)`,
/// and `d` is given an exponential prior. `d` is increasing in `rho`, so the
/// rate solving `Pr(rho < u) = alpha` is `-ln(1 - alpha) / d(u)`.
#[derive(Debug, Clone)]
pub struct PcPriorBym2 {
    /// Eigenvalues of the scaled generalized inverse, minus one.
    shifted: Vec<f64>,
    lambda: f64,
}

/// `x - ln(1 + x)` without cancellation near zero.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        x * x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x / 5.0)))
    } else {
        x - x.ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl PcPriorBym2 {
    pub fn new(icar: &ScaledIcar, u: f64, alpha: f64) -> Result<Self> {
        if !(u > 0.0 && u < 1.0 && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("PC prior needs u, alpha in (0, 1); got u = {u}, alpha = {alpha}")));
        }
        let shifted: Vec<f64> = icar.eigenvalues().iter().map(|l| l - 1.0).collect();
        let mut prior = Self { shifted, lambda: 1.0 };
        prior.lambda = -(1.0 - alpha).ln() / prior.distance(u);
        Ok(prior)
    }

    /// The calibration `Pr(rho < 0.5) = 0.5`.
    pub fn median_half(icar: &ScaledIcar) -> Result<Self> {
        Self::new(icar, 0.5, 0.5)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kld(&self, rho: f64) -> f64 {
        0.5 * self.shifted.iter().map(|&s| x_minus_log1p(rho * s)).sum::<f64>()
    }

    pub fn distance(&self, rho: f64) -> f64 {
        (2.0 * self.kld(rho)).sqrt()
    }

    /// `d'(rho)`, analytic.
    pub fn distance_derivative(&self, rho: f64) -> f64 {
        let curvature = 0.5 * self.shifted.iter().map(|s| s * s).sum::<f64>();
        if rho < 1e-10 {
            return curvature.sqrt();
        }
        let dkld = 0.5 * self.shifted.iter().map(|&s| s * (rho * s) / (1.0 + rho * s)).sum::<f64>();
        dkld / self.distance(rho)
    }

    pub fn log_density(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("BYM2 mixing parameter {rho} outside (0, 1)")));
        }
        Ok(self.lambda.ln() - self.lambda * self.distance(rho) + self.distance_derivative(rho).ln())
    }

    /// Log density of `x = logit(rho)`. The divergence grows without bound
    /// only as `rho -> 1`, and a visible share of the mass sits within
    /// machine epsilon of 1, so this keeps `1 - rho` exact instead of
    /// rounding `rho`.
    pub fn log_density_logit(&self, x: f64) -> f64 {
        let rho = sigmoid(x);
        if x < 0.0 {
            let dd = self.distance_derivative(rho) * rho * sigmoid(-x);
            return self.lambda.ln() - self.lambda * self.distance(rho) + dd.ln();
        }
        let q = sigmoid(-x);
        let log_q = -(x + (-x).exp().ln_1p());
        let (mut kld, mut dkld) = (0.0, 0.0);
        for &s in &self.shifted {
            let lam = s + 1.0;
            if lam == 0.0 {
                // the ICAR null direction: -rho - ln(1 - rho)
                kld += -rho - log_q;
                dkld += rho * rho;
            } else {
                let inner = q + rho * lam;
                kld += rho * s - inner.ln();
                dkld += s * s * rho * rho * q / inner;
            }
        }
        let d = kld.sqrt();
        self.lambda.ln() - self.lambda * d + (0.5 * dkld / d).ln()
    }

    pub fn cdf(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else if rho >= 1.0 {
            1.0
        } else {
            -(-self.lambda * self.distance(rho)).exp_m1()
        }
    }

    /// Inverse CDF by bisection on `-ln(1 - rho)`.
    pub fn quantile(&self, p: f64) -> f64 {
        let target = -(1.0 - p).ln() / self.lambda;
        let (mut lo, mut hi) = (0.0_f64, 745.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let rho = -(-mid).exp_m1();
            if self.distance(rho) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (-(-0.5 * (lo + hi)).exp_m1()).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
    }
}
