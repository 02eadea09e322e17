use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dimensions of an equal-interval APC grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    ages: usize,
    periods: usize,
    /// Years per bin, shared by age and period.
    pub interval_width: u32,
}

impl GridSpec {
    pub fn new(ages: usize, periods: usize) -> Result<Self> {
        Self::with_width(ages, periods, 1)
    }

    pub fn with_width(ages: usize, periods: usize, interval_width: u32) -> Result<Self> {
        if ages < 3 || periods < 3 {
            return Err(Error::Domain(format!(
                "grid needs at least 3 ages and 3 periods, got {ages}x{periods}"
            )));
        }
        if interval_width == 0 {
            return Err(Error::Domain("interval width must be positive".into()));
        }
        Ok(Self { ages, periods, interval_width })
    }

    pub fn ages(&self) -> usize {
        self.ages
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn cohorts(&self) -> usize {
        self.ages + self.periods - 1
    }

    pub fn cells(&self) -> usize {
        self.ages * self.periods
    }

    /// Length of the identifiable parameter vector, `2(A+T) - 4`.
    pub fn canonical_len(&self) -> usize {
        2 * (self.ages + self.periods) - 4
    }

    /// 1-based cohort of cell `(i, j)`.
    pub fn cohort(&self, i: usize, j: usize) -> Result<usize> {
        if i == 0 || i > self.ages || j == 0 || j > self.periods {
            return Err(Error::Index(format!(
                "cell ({i}, {j}) outside {}x{} grid",
                self.ages, self.periods
            )));
        }
        Ok(self.ages - i + j)
    }

    /// Position of cell `(i, j)` in the period-major vectorization.
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.ages + (i - 1)
    }

    /// Inverse of [`GridSpec::cell_index`].
    pub fn cell_at(&self, index: usize) -> (usize, usize) {
        (index % self.ages + 1, index / self.ages + 1)
    }
}

/// Cohort index `k = A - i + j` for age `i`, period `j`.
pub fn cohort_index(i: usize, j: usize, ages: usize) -> Result<usize> {
    if ages == 0 || i == 0 || i > ages || j == 0 {
        return Err(Error::Index(format!("cell ({i}, {j}) invalid for {ages} age groups")));
    }
    Ok(ages - i + j)
}

/// Middle age index `U = (A+1)/2`; only defined for odd `A`.
pub fn middle_index(ages: usize) -> Result<usize> {
    if ages.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "middle index needs an odd number of age groups (got {ages}); supply an explicit BaselineSpec"
        )));
    }
    Ok(ages.div_ceil(2))
}
