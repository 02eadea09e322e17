use super::waic::{pointwise_loglik, waic, WaicResult};
use crate::apc::BaselineSpec;
use crate::covariance::{AdjacencyGraph, CorrelationFamily, ScaledIcar, StructureKind};
use crate::error::{Error, Result};
use crate::inference::{assemble_model, fit_model, FitOptions, MortalityDataset, PosteriorFit, SharingPattern};
use crate::priors::{HyperParameters, PriorConfig};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// The candidate models: M1 once (independent), every other pattern under
/// each of the three structures.
pub fn default_models() -> Vec<(SharingPattern, StructureKind)> {
    let mut out = vec![(SharingPattern::M1, StructureKind::Independent)];
    for p in &SharingPattern::ALL[1..] {
        for s in StructureKind::ALL {
            out.push((*p, s));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub models: Vec<(SharingPattern, StructureKind)>,
    pub baseline: Option<BaselineSpec>,
    pub priors: PriorConfig,
    pub fit: FitOptions,
    /// Keep each entry's posterior draws.
    pub keep_fits: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            models: default_models(),
            baseline: None,
            priors: PriorConfig::default(),
            fit: FitOptions::default(),
            keep_fits: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridScore {
    pub waic: WaicResult,
    pub log_marginal: f64,
    pub eta_hat: HyperParameters,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridEntry {
    pub pattern: SharingPattern,
    pub structure: StructureKind,
    pub score: Option<GridScore>,
    pub error: Option<String>,
    #[serde(skip)]
    pub fit: Option<Arc<PosteriorFit>>,
}

impl GridEntry {
    pub fn label(&self) -> String {
        format!("{}-{}", self.pattern, self.structure.label())
    }

    pub fn waic(&self) -> Option<f64> {
        self.score.as_ref().map(|s| s.waic.waic)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelGridResult {
    /// In the order requested.
    pub entries: Vec<GridEntry>,
    /// Indices of successful entries by ascending WAIC.
    pub ranking: Vec<usize>,
}

impl ModelGridResult {
    pub fn best(&self) -> Option<&GridEntry> {
        self.ranking.first().map(|&i| &self.entries[i])
    }

    pub fn find(&self, pattern: SharingPattern, structure: StructureKind) -> Option<&GridEntry> {
        self.entries.iter().find(|e| e.pattern == pattern && e.structure == structure)
    }
}

fn family_for(kind: StructureKind, icar: &Option<Arc<ScaledIcar>>) -> Result<CorrelationFamily> {
    Ok(match kind {
        StructureKind::Independent => CorrelationFamily::Independent,
        StructureKind::Exchangeable => CorrelationFamily::Exchangeable,
        StructureKind::Bym2 => CorrelationFamily::Bym2(
            icar.clone().ok_or_else(|| Error::Model("BYM2 needs an adjacency graph".into()))?,
        ),
    })
}

/// Fit one grid entry and score it.
pub fn fit_entry(
    data: &MortalityDataset,
    pattern: SharingPattern,
    kind: StructureKind,
    icar: &Option<Arc<ScaledIcar>>,
    config: &GridConfig,
) -> Result<(GridScore, PosteriorFit)> {
    let family = family_for(kind, icar)?;
    let baseline = config.baseline.unwrap_or_else(|| BaselineSpec::default_for(data.grid()));
    let model = assemble_model(data.grid(), data.strata(), pattern, family, &baseline)?;
    let fit = fit_model(&model, data, &config.priors, &config.fit)?;
    let w = waic(&pointwise_loglik(&fit, data)?)?;
    let score = GridScore {
        waic: w,
        log_marginal: fit.log_marginal,
        eta_hat: fit.eta_hat.clone(),
        evaluations: fit.evaluations,
        converged: fit.converged,
    };
    Ok((score, fit))
}

/// Fit and score every requested model in parallel. Failures are recorded
/// per entry. With a single stratum only M1 is attempted.
pub fn fit_grid(data: &MortalityDataset, graph: Option<&AdjacencyGraph>, config: &GridConfig) -> Result<ModelGridResult> {
    let icar = match graph {
        Some(g) => {
            if g.strata() != data.strata() {
                return Err(Error::Dimension(format!("graph has {} strata, data {}", g.strata(), data.strata())));
            }
            ScaledIcar::from_graph(g).ok().map(Arc::new)
        }
        None => None,
    };
    let models: Vec<_> = if data.strata() == 1 {
        config.models.iter().copied().filter(|(p, _)| *p == SharingPattern::M1).collect()
    } else {
        config.models.clone()
    };
    let entries: Vec<GridEntry> = models
        .par_iter()
        .map(|&(pattern, structure)| match fit_entry(data, pattern, structure, &icar, config) {
            Ok((score, fit)) => GridEntry {
                pattern,
                structure,
                score: Some(score),
                error: None,
                fit: config.keep_fits.then(|| Arc::new(fit)),
            },
            Err(e) => GridEntry { pattern, structure, score: None, error: Some(e.to_string()), fit: None },
        })
        .collect();
    let mut ranking: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].waic().is_some_and(f64::is_finite)).collect();
    ranking.sort_by(|&a, &b| {
        let (wa, wb) = (entries[a].waic().unwrap(), entries[b].waic().unwrap());
        wa.total_cmp(&wb).then_with(|| entries[a].label().cmp(&entries[b].label()))
    });
    Ok(ModelGridResult { entries, ranking })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_candidates() {
        let m = default_models();
        assert_eq!(m.len(), 16);
        assert_eq!(m.iter().filter(|(p, _)| *p == SharingPattern::M1).count(), 1);
    }
}
