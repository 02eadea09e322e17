use super::graph_file::{graph_from_rows, EdgeRow};
use super::raw::BinSpec;
use crate::apc::BaselineSpec;
use crate::covariance::{CorrelationFamily, ScaledIcar, StructureKind};
use crate::error::{Error, Result};
use crate::inference::{assemble_model, LatentModel, MortalityDataset, SharingPattern};
use crate::priors::{BaselineMeanPrior, HyperParam, HyperParameters};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Generating model for synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub strata: usize,
    pub pattern: SharingPattern,
    pub structure: StructureKind,
    /// Precisions of the baseline, age, period and cohort blocks.
    pub tau: [f64; 4],
    /// Cross-strata correlation of every stratum-specific block.
    pub rho: f64,
    /// Population baseline: log rate and two slopes.
    pub baseline_mean: [f64; 3],
    /// Person-years per cell for a middle stratum.
    pub exposure: f64,
    /// Log-scale spread of exposure across strata.
    pub exposure_spread: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            strata: 5,
            pattern: SharingPattern::M4,
            structure: StructureKind::Exchangeable,
            tau: [100.0, 400.0, 2000.0, 5000.0],
            rho: 0.5,
            baseline_mean: [0.005f64.ln(), 0.3, -0.1],
            exposure: 2e5,
            exposure_spread: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: MortalityDataset,
    pub graph: Vec<EdgeRow>,
    pub eta: HyperParameters,
    pub xi: Vec<f64>,
    /// True stacked log rates.
    pub log_rates: Vec<f64>,
}

/// Strata on a ring; stratum `r` neighbors `r - 1` and `r + 1`.
pub fn ring_graph(names: &[String]) -> Vec<EdgeRow> {
    let n = names.len();
    let mut rows = Vec::new();
    if n < 2 {
        return rows;
    }
    for r in 0..n {
        let s = (r + 1) % n;
        if n == 2 && r == 1 {
            break;
        }
        rows.push(EdgeRow { from: names[r].clone(), to: names[s].clone(), augmented: false });
    }
    rows
}

/// Draw the latent field from its prior at `eta` with the population
/// baseline held at `baseline_mean`, then Poisson counts on every cell.
pub fn simulate_dataset(
    model: &LatentModel,
    eta: &HyperParameters,
    baseline_mean: [f64; 3],
    exposure: Vec<f64>,
    names: Vec<String>,
    seed: u64,
) -> Result<(MortalityDataset, Vec<f64>, Vec<f64>)> {
    if exposure.len() != model.stacked_cells() || names.len() != model.strata() {
        return Err(Error::Dimension("exposure or stratum names do not match the model".into()));
    }
    let fixed = BaselineMeanPrior::new(baseline_mean, [1e-14; 3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = model.latent_prior(eta, &fixed)?.sample(&mut rng)?;
    let mu = model.log_rates(&xi)?;
    let mut deaths = Vec::with_capacity(mu.len());
    for (k, m) in mu.iter().enumerate() {
        let lambda = exposure[k] * m.exp();
        if !(lambda.is_finite() && lambda < 1e15) {
            return Err(Error::NonFinite(format!("simulated rate at cell {k} overflows (log rate {m})")));
        }
        deaths.push(if lambda > 0.0 { Poisson::new(lambda).expect("positive mean").sample(&mut rng) as u64 } else { 0 });
    }
    let data = MortalityDataset::complete(*model.grid(), names, deaths, exposure)?;
    Ok((data, xi, mu))
}

/// Synthetic dataset on the bins of `bins` from `config`.
pub fn simulate(config: &SimulationConfig, bins: &BinSpec, seed: u64) -> Result<Simulation> {
    let grid = bins.validate()?;
    let r = config.strata;
    if r == 0 {
        return Err(Error::Data("simulation.strata must be positive".into()));
    }
    let names: Vec<String> = (1..=r).map(|k| format!("S{k:02}")).collect();
    let graph = ring_graph(&names);
    let family = match config.structure {
        StructureKind::Independent => CorrelationFamily::Independent,
        StructureKind::Exchangeable => CorrelationFamily::Exchangeable,
        StructureKind::Bym2 => {
            let report = graph_from_rows(&graph, &names)?;
            CorrelationFamily::Bym2(Arc::new(ScaledIcar::from_graph(&report.graph)?))
        }
    };
    let model = assemble_model(&grid, r, config.pattern, family, &BaselineSpec::default_for(&grid))?;
    let eta = truth_for(&model, config);
    let exposure: Vec<f64> = (0..r)
        .flat_map(|s| {
            let shift = if r > 1 { s as f64 / (r - 1) as f64 - 0.5 } else { 0.0 };
            let n = config.exposure * (config.exposure_spread * shift).exp();
            std::iter::repeat_n(n, grid.cells())
        })
        .collect();
    let (data, xi, log_rates) = simulate_dataset(&model, &eta, config.baseline_mean, exposure, names, seed)?;
    Ok(Simulation { data, graph, eta, xi, log_rates })
}

/// Hyperparameters of a simulation as seen by `model`.
pub fn truth_for(model: &LatentModel, config: &SimulationConfig) -> HyperParameters {
    let mut eta = HyperParameters::default();
    for &p in model.hyper_params() {
        match p {
            HyperParam::Tau(b) => eta.set(p, config.tau[b.index()]),
            HyperParam::Rho(_) => eta.set(p, config.rho),
        }
    }
    eta
}
