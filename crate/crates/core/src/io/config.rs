use super::raw::BinSpec;
use super::simulate::SimulationConfig;
use crate::apc::BaselineSpec;
use crate::covariance::StructureKind;
use crate::error::{Error, Result};
use crate::inference::{Block, FitOptions, SharingPattern};
use crate::priors::PriorConfig;
use serde::{Deserialize, Serialize};

/// Which cells a hindcast hides before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HindcastConfig {
    /// Stratum whose early periods are hidden; the first one when absent.
    pub stratum: Option<String>,
    /// Number of leading periods hidden for that stratum.
    pub mask_periods: usize,
    /// Share of all remaining cells hidden at random.
    pub mask_fraction: f64,
    pub samples: usize,
    pub model: SharingPattern,
    pub structure: StructureKind,
}

impl Default for HindcastConfig {
    fn default() -> Self {
        Self {
            stratum: None,
            mask_periods: 4,
            mask_fraction: 0.0,
            samples: 1000,
            model: SharingPattern::M5,
            structure: StructureKind::Exchangeable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrConfig {
    pub block: Block,
    /// Reference stratum; the first one when absent.
    pub reference: Option<String>,
    pub model: SharingPattern,
    pub structure: StructureKind,
}

impl Default for RrConfig {
    fn default() -> Self {
        Self { block: Block::Period, reference: None, model: SharingPattern::M4, structure: StructureKind::Exchangeable }
    }
}

/// Everything a run needs besides the data; read from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: BinSpec,
    pub baseline: Option<BaselineSpec>,
    pub priors: PriorConfig,
    /// Patterns for `grid`; all six when absent.
    pub models: Option<Vec<SharingPattern>>,
    /// Structures for `grid`; all three when absent.
    pub structures: Option<Vec<StructureKind>>,
    pub seed: u64,
    pub fit: FitOptions,
    pub hindcast: HindcastConfig,
    pub rr: RrConfig,
    pub simulation: SimulationConfig,
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: BinSpec::default(),
            baseline: None,
            priors: PriorConfig::default(),
            models: None,
            structures: None,
            seed: 20_190_101,
            fit: FitOptions::default(),
            hindcast: HindcastConfig::default(),
            rr: RrConfig::default(),
            simulation: SimulationConfig::default(),
            output_dir: None,
        }
    }
}

fn field(name: &str, ok: bool, why: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Data(format!("{name}: {why}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Data(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.validate()?;
        if let Some(b) = &self.baseline {
            b.cells(&grid).map_err(|e| Error::Data(format!("baseline: {e}")))?;
        }
        let p = &self.priors;
        for (name, v) in [
            ("priors.epsilon_baseline", p.epsilon_baseline),
            ("priors.epsilon_age", p.epsilon_age),
            ("priors.epsilon_period", p.epsilon_period),
            ("priors.epsilon_cohort", p.epsilon_cohort),
            ("priors.exchangeable_zeta_variance", p.exchangeable_zeta_variance),
        ] {
            field(name, v > 0.0 && v.is_finite(), "must be positive")?;
        }
        field("priors.q", p.q > 0.0 && p.q < 1.0, "must lie in (0, 1)")?;
        field("priors.pc_threshold", p.pc_threshold > 0.0 && p.pc_threshold < 1.0, "must lie in (0, 1)")?;
        field("priors.pc_probability", p.pc_probability > 0.0 && p.pc_probability < 1.0, "must lie in (0, 1)")?;
        field(
            "priors.baseline_mean.variance",
            p.baseline_mean.variance.iter().all(|v| *v > 0.0 && v.is_finite()),
            "must be positive",
        )?;
        field("fit.samples", self.fit.samples >= 2, "at least two draws are needed")?;
        field("fit.optimizer.max_evals", self.fit.optimizer.max_evals > 0, "must be positive")?;
        field("fit.newton.max_iter", self.fit.newton.max_iter > 0, "must be positive")?;
        field(
            "hindcast.mask_fraction",
            (0.0..1.0).contains(&self.hindcast.mask_fraction),
            "must lie in [0, 1)",
        )?;
        field("hindcast.samples", self.hindcast.samples >= 100, "at least 100 draws are needed")?;
        field(
            "rr.block",
            matches!(self.rr.block, Block::Period | Block::Cohort),
            "must be period or cohort",
        )?;
        field("simulation.strata", self.simulation.strata >= 1, "must be positive")?;
        field("simulation.exposure", self.simulation.exposure > 0.0, "must be positive")?;
        field(
            "simulation.tau",
            self.simulation.tau.iter().all(|t| *t > 0.0 && t.is_finite()),
            "must be positive",
        )?;
        Ok(())
    }

    /// Requested grid entries; M1 is only ever paired with independence.
    pub fn grid_models(&self) -> Vec<(SharingPattern, StructureKind)> {
        let patterns = self.models.clone().unwrap_or_else(|| SharingPattern::ALL.to_vec());
        let structures = self.structures.clone().unwrap_or_else(|| StructureKind::ALL.to_vec());
        let mut out = Vec::new();
        for p in patterns {
            if p == SharingPattern::M1 {
                if !out.contains(&(p, StructureKind::Independent)) {
                    out.push((p, StructureKind::Independent));
                }
                continue;
            }
            for &s in &structures {
                if !out.contains(&(p, s)) {
                    out.push((p, s));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.grid_models().len(), 16);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c = RunConfig::from_json(r#"{"seed": 3, "grid": {"age_min": 0, "age_max": 40, "year_min": 1950, "year_max": 2000, "width": 5}}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.grid.validate().unwrap().ages(), 9);
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::from_json(r#"{"grid": {"age_min": 0, "age_max": 80, "year_min": 1925, "year_max": 2015, "width": 3}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("grid.width"), "{e}");
        let e = RunConfig::from_json(r#"{"priors": {"q": 1.5}}"#).unwrap_err().to_string();
        assert!(e.contains("priors.q"), "{e}");
        let e = RunConfig::from_json(r#"{"bogus": 1}"#).unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
    }

    #[test]
    fn model_selection() {
        let c = RunConfig {
            models: Some(vec![SharingPattern::M1, SharingPattern::M5]),
            structures: Some(vec![StructureKind::Exchangeable]),
            ..RunConfig::default()
        };
        assert_eq!(
            c.grid_models(),
            vec![(SharingPattern::M1, StructureKind::Independent), (SharingPattern::M5, StructureKind::Exchangeable)]
        );
    }
}
