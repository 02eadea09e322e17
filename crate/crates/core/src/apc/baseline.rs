use super::grid::{middle_index, GridSpec};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinates {
    /// Pairs are `(age i, cohort k)`.
    AgeCohort,
    /// Pairs are `(age i, period j)`.
    AgePeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineForm {
    /// Baseline columns hold the three log rates.
    ThreePoints,
    /// Baseline columns hold the first log rate and its differences to the
    /// second and third.
    PointPlusTwoSlopes,
}

/// Placement of the three baseline log rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub coordinates: Coordinates,
    /// 1-based index pairs in `coordinates`.
    pub triple: [(usize, usize); 3],
    pub form: BaselineForm,
}

impl BaselineSpec {
    /// Middle age-cohort triple `{(U,U), (U+1,U), (U,U+1)}` for odd `A`, the
    /// corner triple `{(A,1), (A-1,1), (A,2)}` in age-period coordinates otherwise.
    /// Both use the point-plus-two-slopes form.
    pub fn default_for(grid: &GridSpec) -> Self {
        match middle_index(grid.ages()) {
            Ok(u) => Self::middle(u),
            Err(_) => Self::corner(grid.ages()),
        }
    }

    pub fn middle(u: usize) -> Self {
        Self {
            coordinates: Coordinates::AgeCohort,
            triple: [(u, u), (u + 1, u), (u, u + 1)],
            form: BaselineForm::PointPlusTwoSlopes,
        }
    }

    pub fn corner(ages: usize) -> Self {
        Self {
            coordinates: Coordinates::AgePeriod,
            triple: [(ages, 1), (ages - 1, 1), (ages, 2)],
            form: BaselineForm::PointPlusTwoSlopes,
        }
    }

    pub fn with_form(mut self, form: BaselineForm) -> Self {
        self.form = form;
        self
    }

    /// The three baseline cells as 1-based `(age, period)` pairs, validated
    /// against the grid and checked to span a triangle.
    pub fn cells(&self, grid: &GridSpec) -> Result<[(usize, usize); 3]> {
        let mut out = [(0, 0); 3];
        for (slot, &(first, second)) in out.iter_mut().zip(&self.triple) {
            let i = first;
            let j = match self.coordinates {
                Coordinates::AgePeriod => second,
                Coordinates::AgeCohort => {
                    // j = k - A + i
                    let j = second as isize - grid.ages() as isize + i as isize;
                    if j < 1 {
                        return Err(Error::Index(format!(
                            "age-cohort pair ({first}, {second}) falls before the first period"
                        )));
                    }
                    j as usize
                }
            };
            if i == 0 || i > grid.ages() || j == 0 || j > grid.periods() {
                return Err(Error::Index(format!(
                    "baseline pair ({first}, {second}) maps to cell ({i}, {j}) outside the {}x{} grid",
                    grid.ages(),
                    grid.periods()
                )));
            }
            *slot = (i, j);
        }
        if twice_signed_area(&out) == 0 {
            return Err(Error::CollinearBaseline(format!("{:?}", self.triple)));
        }
        Ok(out)
    }
}

/// Twice the signed area of the triangle through three `(i, j)` cells.
pub(crate) fn twice_signed_area(p: &[(usize, usize); 3]) -> i64 {
    let (i1, j1) = (p[0].0 as i64, p[0].1 as i64);
    let (i2, j2) = (p[1].0 as i64, p[1].1 as i64);
    let (i3, j3) = (p[2].0 as i64, p[2].1 as i64);
    (i2 - i1) * (j3 - j1) - (i3 - i1) * (j2 - j1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn middle_triple_sits_in_first_two_periods() {
        let g = GridSpec::new(17, 18).unwrap();
        let spec = BaselineSpec::default_for(&g);
        assert_eq!(spec.coordinates, Coordinates::AgeCohort);
        assert_eq!(spec.cells(&g).unwrap(), [(9, 1), (10, 2), (9, 2)]);
    }

    #[test]
    fn even_ages_fall_back_to_corner() {
        let g = GridSpec::new(10, 10).unwrap();
        let spec = BaselineSpec::default_for(&g);
        assert_eq!(spec.cells(&g).unwrap(), [(10, 1), (9, 1), (10, 2)]);
    }

    #[test]
    fn collinear_triples_rejected() {
        let g = GridSpec::new(5, 5).unwrap();
        let line = BaselineSpec {
            coordinates: Coordinates::AgePeriod,
            triple: [(1, 1), (1, 2), (1, 3)],
            form: BaselineForm::ThreePoints,
        };
        assert!(matches!(line.cells(&g), Err(Error::CollinearBaseline(_))));
        // a line in age-cohort coordinates is still a line in age-period ones
        let diag = BaselineSpec { coordinates: Coordinates::AgeCohort, triple: [(1, 5), (2, 6), (3, 7)], ..line };
        assert!(matches!(diag.cells(&g), Err(Error::CollinearBaseline(_))));
        let ok = BaselineSpec { triple: [(1, 1), (1, 2), (2, 1)], ..line };
        assert!(ok.cells(&g).is_ok());
    }

    #[test]
    fn out_of_grid_pairs_rejected() {
        let g = GridSpec::new(5, 5).unwrap();
        let spec = BaselineSpec {
            coordinates: Coordinates::AgeCohort,
            triple: [(1, 1), (2, 1), (1, 2)],
            form: BaselineForm::ThreePoints,
        };
        assert!(matches!(spec.cells(&g), Err(Error::Index(_))));
    }
}
