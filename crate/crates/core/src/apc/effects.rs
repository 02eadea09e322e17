use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Overparameterized APC effects for one stratum. Used for algebra and
/// testing; models are never fit in these coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ApcEffects<T> {
    pub delta: T,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
}

impl<T: Scalar> ApcEffects<T> {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            delta: T::zero(),
            alpha: vec![T::zero(); grid.ages()],
            beta: vec![T::zero(); grid.periods()],
            gamma: vec![T::zero(); grid.cohorts()],
        }
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.alpha.len() != grid.ages() || self.beta.len() != grid.periods() || self.gamma.len() != grid.cohorts() {
            return Err(Error::Dimension(format!(
                "effects of lengths ({}, {}, {}) do not match grid ({}, {}, {})",
                self.alpha.len(),
                self.beta.len(),
                self.gamma.len(),
                grid.ages(),
                grid.periods(),
                grid.cohorts()
            )));
        }
        Ok(())
    }
}

/// Element `(a, b, c, d)` of the identifiability group: levels of the age,
/// period and cohort effects plus the shared linear trend.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Scalar> GroupElement<T> {
    pub fn identity() -> Self {
        Self { a: T::zero(), b: T::zero(), c: T::zero(), d: T::zero() }
    }

    /// The element equivalent to applying `self` and then `other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            a: self.a.clone() + other.a.clone(),
            b: self.b.clone() + other.b.clone(),
            c: self.c.clone() + other.c.clone(),
            d: self.d.clone() + other.d.clone(),
        }
    }
}

/// Identifiable coordinates: three baseline values followed by the second
/// differences of the age, period and cohort effects.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalParams<T> {
    pub baseline: [T; 3],
    pub curv_age: Vec<T>,
    pub curv_period: Vec<T>,
    pub curv_cohort: Vec<T>,
}

impl<T: Scalar> CanonicalParams<T> {
    pub fn len(&self) -> usize {
        3 + self.curv_age.len() + self.curv_period.len() + self.curv_cohort.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flatten in design-column order (baseline, age, period, cohort).
    pub fn to_vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.baseline.iter().cloned());
        out.extend(self.curv_age.iter().cloned());
        out.extend(self.curv_period.iter().cloned());
        out.extend(self.curv_cohort.iter().cloned());
        out
    }

    pub fn from_slice(grid: &GridSpec, xi: &[T]) -> Result<Self> {
        if xi.len() != grid.canonical_len() {
            return Err(Error::Dimension(format!(
                "canonical vector has length {}, expected {}",
                xi.len(),
                grid.canonical_len()
            )));
        }
        let (a, t) = (grid.ages() - 2, grid.periods() - 2);
        Ok(Self {
            baseline: [xi[0].clone(), xi[1].clone(), xi[2].clone()],
            curv_age: xi[3..3 + a].to_vec(),
            curv_period: xi[3 + a..3 + a + t].to_vec(),
            curv_cohort: xi[3 + a + t..].to_vec(),
        })
    }
}

/// Values on an `A x T` grid, stored period-major, with an observed mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSurface<T> {
    grid: GridSpec,
    values: Vec<T>,
    observed: Vec<bool>,
}

impl<T: Scalar> RateSurface<T> {
    pub fn from_vec(grid: GridSpec, values: Vec<T>) -> Result<Self> {
        let observed = vec![true; values.len()];
        Self::with_mask(grid, values, observed)
    }

    pub fn with_mask(grid: GridSpec, values: Vec<T>, observed: Vec<bool>) -> Result<Self> {
        if values.len() != grid.cells() || observed.len() != grid.cells() {
            return Err(Error::Dimension(format!(
                "surface needs {} cells, got {} values and {} mask entries",
                grid.cells(),
                values.len(),
                observed.len()
            )));
        }
        Ok(Self { grid, values, observed })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Value at 1-based age `i`, period `j`.
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.values[self.grid.cell_index(i, j)]
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[self.grid.cell_index(i, j)]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.observed
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }
}

/// `mu[i][j] = delta + alpha_i + beta_j + gamma_{A-i+j}`.
pub fn log_rates<T: Scalar>(effects: &ApcEffects<T>, grid: &GridSpec) -> Result<RateSurface<T>> {
    effects.check(grid)?;
    let a = grid.ages();
    let mut values = Vec::with_capacity(grid.cells());
    for j in 1..=grid.periods() {
        for i in 1..=a {
            let k = a - i + j;
            values.push(
                effects.delta.clone()
                    + effects.alpha[i - 1].clone()
                    + effects.beta[j - 1].clone()
                    + effects.gamma[k - 1].clone(),
            );
        }
    }
    RateSurface::from_vec(*grid, values)
}

/// Act on `effects` with a group element. The log rates are unchanged.
///
/// The level moves by `-(a + b + c) - (A-1)d`; the trend terms contributed by
/// age `(i-1)d`, period `-(j-1)d` and cohort `(k-1)d` sum to `(A-1)d` for every
/// cell because `k = A - i + j`.
pub fn apply_group<T: Scalar>(effects: &ApcEffects<T>, g: &GroupElement<T>) -> ApcEffects<T> {
    let ages = effects.alpha.len();
    let idx = |n: usize| T::from_index(n);
    ApcEffects {
        delta: effects.delta.clone() - g.a.clone() - g.b.clone() - g.c.clone() - idx(ages - 1) * g.d.clone(),
        alpha: effects
            .alpha
            .iter()
            .enumerate()
            .map(|(i, v)| v.clone() + g.a.clone() + idx(i) * g.d.clone())
            .collect(),
        beta: effects
            .beta
            .iter()
            .enumerate()
            .map(|(j, v)| v.clone() + g.b.clone() - idx(j) * g.d.clone())
            .collect(),
        gamma: effects
            .gamma
            .iter()
            .enumerate()
            .map(|(k, v)| v.clone() + g.c.clone() + idx(k) * g.d.clone())
            .collect(),
    }
}

/// `out[m] = v[m+2] - 2 v[m+1] + v[m]`.
pub fn second_differences<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    if v.len() < 3 {
        return Err(Error::Domain(format!("second differences need at least 3 values, got {}", v.len())));
    }
    let two = T::from_index(2);
    Ok(v.windows(3)
        .map(|w| w[2].clone() - two.clone() * w[1].clone() + w[0].clone())
        .collect())
}
