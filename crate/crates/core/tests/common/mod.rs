#![allow(dead_code)]

use stratapc_core::apc::{BaselineSpec, GridSpec};
use stratapc_core::covariance::CorrelationFamily;
use stratapc_core::inference::{assemble_model, LatentModel, MortalityDataset, SharingPattern};
use stratapc_core::io::simulate_dataset;
use stratapc_core::priors::{HyperParam, HyperParameters};

pub fn model(a: usize, t: usize, r: usize, p: SharingPattern, f: CorrelationFamily) -> LatentModel {
    let g = GridSpec::new(a, t).unwrap();
    assemble_model(&g, r, p, f, &BaselineSpec::default_for(&g)).unwrap()
}

/// Same precision for every block and the same correlation everywhere.
pub fn uniform_eta(model: &LatentModel, tau: f64, rho: f64) -> HyperParameters {
    let mut eta = HyperParameters::default();
    for &p in model.hyper_params() {
        match p {
            HyperParam::Tau(_) => eta.set(p, tau),
            HyperParam::Rho(_) => eta.set(p, rho),
        }
    }
    eta
}

pub fn names(r: usize) -> Vec<String> {
    (0..r).map(|k| format!("s{k}")).collect()
}

/// Poisson data from the model's prior with the baseline at a rate of 1%.
pub fn simulate(model: &LatentModel, eta: &HyperParameters, exposure: f64, seed: u64) -> (MortalityDataset, Vec<f64>, Vec<f64>) {
    simulate_dataset(
        model,
        eta,
        [0.01f64.ln(), 0.05, -0.05],
        vec![exposure; model.stacked_cells()],
        names(model.strata()),
        seed,
    )
    .unwrap()
}
