use super::baseline::{twice_signed_area, BaselineForm, BaselineSpec};
use super::effects::{log_rates, second_differences, ApcEffects, CanonicalParams};
use super::grid::GridSpec;
use crate::error::Result;
use crate::scalar::{Exact, Scalar};
use nalgebra::DMatrix;
use num_traits::Zero;

/// Full-rank map from canonical parameters to vectorized log rates.
///
/// Columns are ordered (baseline 3, age curvatures, period curvatures, cohort
/// curvatures), each curvature block ascending in its time index. Rows follow
/// the period-major cell order of [`GridSpec::cell_index`].
#[derive(Debug, Clone)]
pub struct DesignMatrix<T: Scalar> {
    grid: GridSpec,
    spec: BaselineSpec,
    cells: [(usize, usize); 3],
    matrix: DMatrix<T>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn spec(&self) -> &BaselineSpec {
        &self.spec
    }

    /// Baseline cells as `(age, period)` pairs.
    pub fn baseline_cells(&self) -> [(usize, usize); 3] {
        self.cells
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    /// `M xi` for a flat canonical vector.
    pub fn apply(&self, xi: &[T]) -> Vec<T> {
        assert_eq!(xi.len(), self.ncols(), "canonical vector length");
        let mut out = vec![T::zero(); self.nrows()];
        for (c, x) in xi.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o = o.clone() + self.matrix[(r, c)].clone() * x.clone();
            }
        }
        out
    }
}

/// Barycentric coordinates of `(i, j)` with respect to the baseline triangle,
/// as integer numerators over the common denominator `twice_signed_area`.
fn barycentric_numerators(p: &[(usize, usize); 3], i: usize, j: usize) -> [i64; 3] {
    let (i1, j1) = (p[0].0 as i64, p[0].1 as i64);
    let (i2, j2) = (p[1].0 as i64, p[1].1 as i64);
    let (i3, j3) = (p[2].0 as i64, p[2].1 as i64);
    let (i, j) = (i as i64, j as i64);
    let den = twice_signed_area(p);
    let l2 = (i - i1) * (j3 - j1) - (i3 - i1) * (j - j1);
    let l3 = (i2 - i1) * (j - j1) - (i - i1) * (j2 - j1);
    [den - l2 - l3, l2, l3]
}

/// Effect at index `n` of a sequence that is zero at its first two entries and
/// has a single unit second difference at position `m` (both 1-based).
fn unit_curvature_profile(n: usize, m: usize) -> i64 {
    if n >= m {
        (n - m + 1) as i64
    } else {
        0
    }
}

pub fn build_design_matrix<T: Scalar>(grid: &GridSpec, spec: &BaselineSpec) -> Result<DesignMatrix<T>> {
    let cells = spec.cells(grid)?;
    let (a, t, k) = (grid.ages(), grid.periods(), grid.cohorts());
    let den = twice_signed_area(&cells);
    let den_t = T::from_int(den as isize);
    let mut matrix = DMatrix::from_element(grid.cells(), grid.canonical_len(), T::zero());

    // Curvature column c of block `which` evaluated at (i, j) before removing
    // its affine interpolant through the baseline cells.
    let raw = |which: usize, m: usize, i: usize, j: usize| -> i64 {
        match which {
            0 => unit_curvature_profile(i, m),
            1 => unit_curvature_profile(j, m),
            _ => unit_curvature_profile(a - i + j, m),
        }
    };
    let blocks = [(0usize, a, 3usize), (1, t, 3 + a - 2), (2, k, 3 + a - 2 + t - 2)];

    for j in 1..=t {
        for i in 1..=a {
            let row = grid.cell_index(i, j);
            let lam = barycentric_numerators(&cells, i, j);
            match spec.form {
                BaselineForm::ThreePoints => {
                    for q in 0..3 {
                        matrix[(row, q)] = T::from_int(lam[q] as isize) / den_t.clone();
                    }
                }
                BaselineForm::PointPlusTwoSlopes => {
                    matrix[(row, 0)] = T::one();
                    matrix[(row, 1)] = T::from_int(lam[1] as isize) / den_t.clone();
                    matrix[(row, 2)] = T::from_int(lam[2] as isize) / den_t.clone();
                }
            }
            for &(which, len, offset) in &blocks {
                for m in 3..=len {
                    // den * (f(i,j) - sum_q lambda_q f(p_q)), kept integral until the final division
                    let mut num = den * raw(which, m, i, j);
                    for q in 0..3 {
                        num -= lam[q] * raw(which, m, cells[q].0, cells[q].1);
                    }
                    if num != 0 {
                        matrix[(row, offset + m - 3)] = T::from_int(num as isize) / den_t.clone();
                    }
                }
            }
        }
    }
    Ok(DesignMatrix { grid: *grid, spec: *spec, cells, matrix })
}

/// Identifiable coordinates of `effects` under `spec`.
pub fn canonical_from_effects<T: Scalar>(
    effects: &ApcEffects<T>,
    grid: &GridSpec,
    spec: &BaselineSpec,
) -> Result<CanonicalParams<T>> {
    let cells = spec.cells(grid)?;
    let mu = log_rates(effects, grid)?;
    let at = |q: usize| mu.get(cells[q].0, cells[q].1).clone();
    let baseline = match spec.form {
        BaselineForm::ThreePoints => [at(0), at(1), at(2)],
        BaselineForm::PointPlusTwoSlopes => [at(0), at(1) - at(0), at(2) - at(0)],
    };
    Ok(CanonicalParams {
        baseline,
        curv_age: second_differences(&effects.alpha)?,
        curv_period: second_differences(&effects.beta)?,
        curv_cohort: second_differences(&effects.gamma)?,
    })
}

/// Rank by Gaussian elimination with exact zero tests.
pub fn exact_rank(matrix: &DMatrix<Exact>) -> usize {
    let (nr, nc) = matrix.shape();
    let mut rows: Vec<Vec<Exact>> = (0..nr).map(|r| (0..nc).map(|c| matrix[(r, c)].clone()).collect()).collect();
    let mut rank = 0;
    for col in 0..nc {
        let Some(pivot) = (rank..nr).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            if row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone() / pivot_row[col].clone();
            for c in col..nc {
                let delta = factor.clone() * pivot_row[c].clone();
                row[c] -= delta;
            }
        }
        rank += 1;
        if rank == nr {
            break;
        }
    }
    rank
}
