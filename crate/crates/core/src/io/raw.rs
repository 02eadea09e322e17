use crate::apc::GridSpec;
use crate::error::{Error, Result};
use crate::inference::MortalityDataset;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};

/// One input row: single-year (or pre-binned) deaths and person-years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub stratum: String,
    pub age: u32,
    pub year: i32,
    pub deaths: u64,
    pub exposure: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawSeries {
    rows: Vec<RawRow>,
}

impl RawSeries {
    pub fn new(rows: Vec<RawRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (n, r) in rows.iter().enumerate() {
            if !seen.insert((r.stratum.as_str(), r.age, r.year)) {
                return Err(Error::Data(format!("row {}: duplicate key ({}, {}, {})", n + 1, r.stratum, r.age, r.year)));
            }
            if !(r.exposure.is_finite() && r.exposure >= 0.0) {
                return Err(Error::Data(format!("row {}: exposure {} must be a nonnegative number", n + 1, r.exposure)));
            }
            if r.deaths > 0 && r.exposure == 0.0 {
                return Err(Error::Data(format!("row {}: deaths recorded with zero exposure", n + 1)));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[RawRow] {
        &self.rows
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize()
            .enumerate()
            .map(|(n, r)| r.map_err(|e| Error::Data(format!("data row {}: {e}", n + 1))))
            .collect::<Result<Vec<RawRow>>>()?;
        Self::new(rows)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))
    }
}

/// Bin edges. Ages run from `age_min` to the lower edge `age_max` of the
/// last group; years from `year_min` up to `year_max` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub age_min: u32,
    pub age_max: u32,
    pub year_min: i32,
    pub year_max: i32,
    pub width: u32,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self { age_min: 0, age_max: 80, year_min: 1925, year_max: 2015, width: 5 }
    }
}

impl BinSpec {
    pub fn validate(&self) -> Result<GridSpec> {
        let w = self.width;
        if w == 0 {
            return Err(Error::Data("grid.width must be positive".into()));
        }
        if self.age_max <= self.age_min || !(self.age_max - self.age_min).is_multiple_of(w) {
            return Err(Error::Data(format!(
                "grid.width: {w} does not divide the age range {}-{}",
                self.age_min, self.age_max
            )));
        }
        if self.year_max <= self.year_min || !((self.year_max - self.year_min) as u32).is_multiple_of(w) {
            return Err(Error::Data(format!(
                "grid.width: {w} does not divide the year range {}-{}",
                self.year_min, self.year_max
            )));
        }
        let ages = ((self.age_max - self.age_min) / w + 1) as usize;
        let periods = ((self.year_max - self.year_min) as u32 / w) as usize;
        GridSpec::with_width(ages, periods, w).map_err(|e| Error::Data(format!("grid: {e}")))
    }

    /// 1-based `(age group, period)` of a row, if inside the bounds.
    pub fn bin(&self, age: u32, year: i32) -> Option<(usize, usize)> {
        let w = self.width;
        if age < self.age_min || age >= self.age_max + w || year < self.year_min || year >= self.year_max {
            return None;
        }
        Some((((age - self.age_min) / w + 1) as usize, ((year - self.year_min) as u32 / w + 1) as usize))
    }

    pub fn age_lower(&self, i: usize) -> u32 {
        self.age_min + (i as u32 - 1) * self.width
    }

    pub fn year_lower(&self, j: usize) -> i32 {
        self.year_min + ((j as u32 - 1) * self.width) as i32
    }
}

#[derive(Debug, Clone)]
pub struct Aggregated {
    pub dataset: MortalityDataset,
    /// Cells built from fewer input rows than the best-covered cell.
    pub partial: Vec<bool>,
    /// Rows outside the bin bounds.
    pub dropped: usize,
}

/// Sum deaths and exposures into bins. Strata are ordered by name. Cells
/// with no rows, or no exposure, are missing.
pub fn aggregate(raw: &RawSeries, bins: &BinSpec) -> Result<Aggregated> {
    let grid = bins.validate()?;
    let names: BTreeSet<&str> = raw.rows().iter().map(|r| r.stratum.as_str()).collect();
    if names.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(k, n)| (*n, k)).collect();
    let n = grid.cells() * names.len();
    let mut deaths = vec![0u64; n];
    let mut exposure = vec![0.0; n];
    let mut rows_in = vec![0usize; n];
    let mut dropped = 0;
    for r in raw.rows() {
        let Some((i, j)) = bins.bin(r.age, r.year) else {
            dropped += 1;
            continue;
        };
        let k = index[r.stratum.as_str()] * grid.cells() + grid.cell_index(i, j);
        deaths[k] += r.deaths;
        exposure[k] += r.exposure;
        rows_in[k] += 1;
    }
    let full = rows_in.iter().copied().max().unwrap_or(0);
    let observed: Vec<bool> = (0..n).map(|k| rows_in[k] > 0 && exposure[k] > 0.0).collect();
    let partial = (0..n).map(|k| rows_in[k] > 0 && rows_in[k] < full).collect();
    let names = names.into_iter().map(String::from).collect();
    let dataset = MortalityDataset::new(grid, names, deaths, exposure, observed)?;
    Ok(Aggregated { dataset, partial, dropped })
}

/// One row per observed cell at the lower bin edges; aggregating the result
/// with the same bins restores the dataset.
pub fn dataset_to_raw(data: &MortalityDataset, bins: &BinSpec) -> RawSeries {
    let g = data.grid();
    let mut rows = Vec::new();
    for (r, name) in data.stratum_names().iter().enumerate() {
        for j in 1..=g.periods() {
            for i in 1..=g.ages() {
                let k = data.index(r, i, j);
                if data.observed()[k] {
                    rows.push(RawRow {
                        stratum: name.clone(),
                        age: bins.age_lower(i),
                        year: bins.year_lower(j),
                        deaths: data.deaths()[k],
                        exposure: data.exposure()[k],
                    });
                }
            }
        }
    }
    RawSeries { rows }
}
