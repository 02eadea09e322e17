use crate::apc::GridSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Deaths and person-years on an `A x T` grid for each of `R` strata.
///
/// Cells are stacked stratum-major, each stratum in the grid's period-major
/// order: index `r * A * T + (j - 1) * A + (i - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortalityDataset {
    grid: GridSpec,
    strata: Vec<String>,
    deaths: Vec<u64>,
    exposure: Vec<f64>,
    observed: Vec<bool>,
}

impl MortalityDataset {
    pub fn new(grid: GridSpec, strata: Vec<String>, deaths: Vec<u64>, exposure: Vec<f64>, observed: Vec<bool>) -> Result<Self> {
        let n = grid.cells() * strata.len();
        if strata.is_empty() {
            return Err(Error::Data("dataset needs at least one stratum".into()));
        }
        if deaths.len() != n || exposure.len() != n || observed.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n} cells, got deaths {}, exposure {}, mask {}",
                deaths.len(),
                exposure.len(),
                observed.len()
            )));
        }
        for k in 0..n {
            if !exposure[k].is_finite() || exposure[k] < 0.0 {
                return Err(Error::Data(format!("cell {k}: exposure {} is not a nonnegative number", exposure[k])));
            }
            if observed[k] && exposure[k] <= 0.0 {
                return Err(Error::Data(format!("cell {k} is observed but has no exposure")));
            }
        }
        Ok(Self { grid, strata, deaths, exposure, observed })
    }

    /// Every cell observed.
    pub fn complete(grid: GridSpec, strata: Vec<String>, deaths: Vec<u64>, exposure: Vec<f64>) -> Result<Self> {
        let n = deaths.len();
        Self::new(grid, strata, deaths, exposure, vec![true; n])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn strata(&self) -> usize {
        self.strata.len()
    }

    pub fn stratum_names(&self) -> &[String] {
        &self.strata
    }

    pub fn len(&self) -> usize {
        self.deaths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deaths.is_empty()
    }

    /// Stacked index of stratum `r` (0-based) and cell `(i, j)` (1-based).
    pub fn index(&self, r: usize, i: usize, j: usize) -> usize {
        r * self.grid.cells() + self.grid.cell_index(i, j)
    }

    pub fn deaths(&self) -> &[u64] {
        &self.deaths
    }

    pub fn exposure(&self) -> &[f64] {
        &self.exposure
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Copy with the given cells hidden from the likelihood.
    pub fn masked(&self, hide: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        for &k in hide {
            if k >= out.len() {
                return Err(Error::Index(format!("cell {k} outside dataset of {} cells", out.len())));
            }
            out.observed[k] = false;
        }
        Ok(out)
    }

    /// Copy keeping only the listed strata, in the given order.
    pub fn select_strata(&self, keep: &[usize]) -> Result<Self> {
        let c = self.grid.cells();
        let mut names = Vec::new();
        let (mut d, mut e, mut o) = (Vec::new(), Vec::new(), Vec::new());
        for &r in keep {
            if r >= self.strata() {
                return Err(Error::Index(format!("stratum {r} outside 0..{}", self.strata())));
            }
            names.push(self.strata[r].clone());
            d.extend_from_slice(&self.deaths[r * c..(r + 1) * c]);
            e.extend_from_slice(&self.exposure[r * c..(r + 1) * c]);
            o.extend_from_slice(&self.observed[r * c..(r + 1) * c]);
        }
        Self::new(self.grid, names, d, e, o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let g = GridSpec::new(3, 3).unwrap();
        let names = vec!["a".to_string()];
        assert!(MortalityDataset::complete(g, names.clone(), vec![0; 9], vec![1.0; 8]).is_err());
        let mut e = vec![1.0; 9];
        e[4] = 0.0;
        assert!(MortalityDataset::complete(g, names.clone(), vec![0; 9], e.clone()).is_err());
        let mut mask = vec![true; 9];
        mask[4] = false;
        let d = MortalityDataset::new(g, names, vec![0; 9], e, mask).unwrap();
        assert_eq!(d.observed_count(), 8);
        assert_eq!(d.index(0, 2, 2), 4);
    }

    #[test]
    fn select_and_mask() {
        let g = GridSpec::new(3, 3).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let d = MortalityDataset::complete(g, names, (0..18).collect(), vec![1.0; 18]).unwrap();
        let s = d.select_strata(&[1]).unwrap();
        assert_eq!(s.deaths()[0], 9);
        assert_eq!(s.stratum_names(), &["b".to_string()]);
        let m = d.masked(&[0, 17]).unwrap();
        assert_eq!(m.observed_count(), 16);
        assert!(d.masked(&[18]).is_err());
    }
}
