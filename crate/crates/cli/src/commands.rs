use crate::output::{read_file, sha256_hex, usage, Failure, OutDir, Outcome, Provenance};
use crate::svg::{line_chart, Series};
use crate::Common;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use stratapc_core::apc::BaselineSpec;
use stratapc_core::covariance::{CorrelationFamily, ScaledIcar, StructureKind};
use stratapc_core::inference::{
    assemble_model, fit_model, quantile, Block, LatentModel, MortalityDataset, PosteriorFit, SharingPattern,
};
use stratapc_core::io::{
    aggregate, dataset_to_raw, load_graph, simulate as simulate_data, write_graph, Aggregated, GraphReport, RawSeries,
    RunConfig,
};
use stratapc_core::priors::{sample_prior_predictive, HyperParam, HyperParameters, PriorPredictiveSummary};
use stratapc_core::selection::{
    cross_strata_rr, fit_grid, hindcast as predict_cells, ks_uniform, pit, pointwise_loglik, waic, GridConfig, PitResult,
    WaicResult, AMBIGUITY_NOTE,
};

const DEFAULT_OUT: &str = "stratapc-out";

struct Run {
    config: RunConfig,
    out: OutDir,
    prov: Provenance,
}

fn parse_list<T: FromStr<Err = stratapc_core::Error>>(text: &str, flag: &str) -> Outcome<Vec<T>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<T>().map_err(|e| usage(format!("{flag}: {e}"))))
        .collect()
}

fn setup(c: &Common, command: &str) -> Outcome<Run> {
    let mut config = match &c.config {
        Some(p) => {
            let text = String::from_utf8(read_file(p)?).map_err(|_| usage(format!("{}: not UTF-8", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if let Some(m) = &c.models {
        config.models = Some(parse_list(m, "--models")?);
    }
    if let Some(s) = &c.structures {
        config.structures = Some(parse_list(s, "--structures")?);
    }
    config.fit.seed = config.seed;
    let dir = c.out.clone().or_else(|| config.output_dir.clone().map(PathBuf::from)).unwrap_or_else(|| DEFAULT_OUT.into());
    let out = OutDir::create(dir)?;
    let prov = Provenance::new(command, &config);
    Ok(Run { config, out, prov })
}

struct Inputs {
    agg: Aggregated,
    graph: Option<GraphReport>,
}

impl Inputs {
    fn data(&self) -> &MortalityDataset {
        &self.agg.dataset
    }
}

fn load(c: &Common, run: &mut Run) -> Outcome<Inputs> {
    let path = c.data.as_ref().ok_or_else(|| usage("--data is required"))?;
    let bytes = read_file(path)?;
    run.prov.data_sha256 = Some(sha256_hex(&bytes));
    let raw = RawSeries::from_csv(&bytes[..])?;
    let agg = aggregate(&raw, &run.config.grid)?;
    let graph = match &c.graph {
        Some(p) => {
            let bytes = read_file(p)?;
            run.prov.graph_sha256 = Some(sha256_hex(&bytes));
            Some(load_graph(&bytes[..], agg.dataset.stratum_names())?)
        }
        None => None,
    };
    Ok(Inputs { agg, graph })
}

/// The model for single-fit commands: the first requested pattern and
/// structure, M4 with exchangeable correlation otherwise.
fn single_model(config: &RunConfig) -> (SharingPattern, StructureKind) {
    let p = config.models.as_ref().and_then(|m| m.first().copied()).unwrap_or(SharingPattern::M4);
    if p == SharingPattern::M1 {
        return (p, StructureKind::Independent);
    }
    (p, config.structures.as_ref().and_then(|s| s.first().copied()).unwrap_or(StructureKind::Exchangeable))
}

fn build_model(run: &Run, inputs: &Inputs, pattern: SharingPattern, kind: StructureKind) -> Outcome<LatentModel> {
    let data = inputs.data();
    let family = match kind {
        StructureKind::Independent => CorrelationFamily::Independent,
        StructureKind::Exchangeable => CorrelationFamily::Exchangeable,
        StructureKind::Bym2 => {
            let g = inputs.graph.as_ref().ok_or_else(|| usage("--graph is required for bym2"))?;
            CorrelationFamily::Bym2(Arc::new(ScaledIcar::from_graph(&g.graph)?))
        }
    };
    let baseline = run.config.baseline.unwrap_or_else(|| BaselineSpec::default_for(data.grid()));
    Ok(assemble_model(data.grid(), data.strata(), pattern, family, &baseline)?)
}

fn hyper_map(model: &LatentModel, eta: &HyperParameters) -> BTreeMap<String, f64> {
    model.hyper_params().iter().filter_map(|&p| eta.get(p).map(|v| (p.to_string(), v))).collect()
}

#[derive(Serialize)]
struct DataSummary {
    strata: Vec<String>,
    ages: usize,
    periods: usize,
    cohorts: usize,
    cells: usize,
    missing: usize,
    partial: usize,
    dropped_rows: usize,
}

fn data_summary(agg: &Aggregated) -> DataSummary {
    let d = &agg.dataset;
    DataSummary {
        strata: d.stratum_names().to_vec(),
        ages: d.grid().ages(),
        periods: d.grid().periods(),
        cohorts: d.grid().cohorts(),
        cells: d.len(),
        missing: d.len() - d.observed_count(),
        partial: agg.partial.iter().filter(|p| **p).count(),
        dropped_rows: agg.dropped,
    }
}

/// Written by `simulate`, read back by `fit --truth`.
#[derive(Serialize, Deserialize)]
struct Truth {
    pattern: SharingPattern,
    structure: StructureKind,
    strata: Vec<String>,
    hyperparameters: BTreeMap<String, f64>,
    /// Stacked stratum-major, then period-major within a stratum.
    log_rates: Vec<f64>,
}

#[derive(Serialize)]
struct CellRow {
    stratum: String,
    age: u32,
    year: i32,
    observed: bool,
    partial: bool,
    deaths: u64,
    exposure: f64,
    mean: f64,
    lower: f64,
    upper: f64,
    truth: Option<f64>,
}

#[derive(Serialize)]
struct CurveRow {
    stratum: String,
    age: u32,
    mean: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct Coverage {
    level: f64,
    cells: usize,
    covered: usize,
    fraction: f64,
    mean_abs_error: f64,
}

#[derive(Serialize)]
struct FitSummary {
    provenance: Provenance,
    model: String,
    data: DataSummary,
    hyperparameters: BTreeMap<String, f64>,
    log_marginal: f64,
    converged: bool,
    evaluations: usize,
    waic: WaicResult,
    nu0_mean: [f64; 3],
    nu0_sd: [f64; 3],
    coverage: Option<Coverage>,
    graph: Option<GraphReport>,
}

/// Log rate averaged over periods at each age, per posterior draw.
fn age_curves(fit: &PosteriorFit, data: &MortalityDataset, bins: &stratapc_core::io::BinSpec) -> Vec<CurveRow> {
    let g = data.grid();
    let mu = &fit.logrates_samples;
    let mut rows = Vec::new();
    for (r, name) in data.stratum_names().iter().enumerate() {
        for i in 1..=g.ages() {
            let draws: Vec<f64> = (0..mu.nrows())
                .map(|s| (1..=g.periods()).map(|j| mu[(s, data.index(r, i, j))]).sum::<f64>() / g.periods() as f64)
                .collect();
            rows.push(CurveRow {
                stratum: name.clone(),
                age: bins.age_lower(i),
                mean: draws.iter().sum::<f64>() / draws.len() as f64,
                lower: quantile(draws.iter().copied(), 0.025),
                upper: quantile(draws.iter().copied(), 0.975),
            });
        }
    }
    rows
}

fn curve_svg(title: &str, rows: &[CurveRow]) -> String {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        if series.last().is_none_or(|s| s.name != r.stratum) {
            series.push(Series { name: r.stratum.clone(), points: vec![], band: vec![] });
        }
        let s = series.last_mut().expect("just pushed");
        s.points.push((r.age as f64, r.mean));
        s.band.push((r.age as f64, r.lower, r.upper));
    }
    line_chart(title, "age", "log rate", &series)
}

pub fn fit(c: &Common) -> Outcome<PathBuf> {
    let mut run = setup(c, "fit")?;
    let inputs = load(c, &mut run)?;
    let data = inputs.data();
    let truth: Option<Truth> = match &c.truth {
        Some(p) => {
            let t: Truth = serde_json::from_slice(&read_file(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            if t.strata != data.stratum_names() || t.log_rates.len() != data.len() {
                return Err(usage("--truth does not describe the strata and grid of --data"));
            }
            Some(t)
        }
        None => None,
    };
    let (pattern, kind) = single_model(&run.config);
    let model = build_model(&run, &inputs, pattern, kind)?;
    let fit = fit_model(&model, data, &run.config.priors, &run.config.fit)?;
    let w = waic(&pointwise_loglik(&fit, data)?)?;
    let mean = fit.mean_log_rates();
    let lower = fit.log_rate_quantile(0.025);
    let upper = fit.log_rate_quantile(0.975);

    let bins = &run.config.grid;
    let g = data.grid();
    let mut rows = Vec::with_capacity(data.len());
    for (r, name) in data.stratum_names().iter().enumerate() {
        for j in 1..=g.periods() {
            for i in 1..=g.ages() {
                let k = data.index(r, i, j);
                rows.push(CellRow {
                    stratum: name.clone(),
                    age: bins.age_lower(i),
                    year: bins.year_lower(j),
                    observed: data.observed()[k],
                    partial: inputs.agg.partial[k],
                    deaths: data.deaths()[k],
                    exposure: data.exposure()[k],
                    mean: mean[k],
                    lower: lower[k],
                    upper: upper[k],
                    truth: truth.as_ref().map(|t| t.log_rates[k]),
                });
            }
        }
    }
    let coverage = truth.as_ref().map(|t| {
        let covered = (0..data.len()).filter(|&k| lower[k] <= t.log_rates[k] && t.log_rates[k] <= upper[k]).count();
        let mae = (0..data.len()).map(|k| (mean[k] - t.log_rates[k]).abs()).sum::<f64>() / data.len() as f64;
        Coverage { level: 0.95, cells: data.len(), covered, fraction: covered as f64 / data.len() as f64, mean_abs_error: mae }
    });
    let curves = age_curves(&fit, data, bins);
    run.out.csv("log_rates.csv", &rows)?;
    run.out.csv("age_curves.csv", &curves)?;
    if c.svg {
        run.out.write("age_curves.svg", curve_svg(&format!("{} age curves", model.label()), &curves).as_bytes())?;
    }
    let summary = FitSummary {
        provenance: run.prov.clone(),
        model: model.label(),
        data: data_summary(&inputs.agg),
        hyperparameters: hyper_map(&model, &fit.eta_hat),
        log_marginal: fit.log_marginal,
        converged: fit.converged,
        evaluations: fit.evaluations,
        waic: w,
        nu0_mean: fit.nu0_mean,
        nu0_sd: fit.nu0_var.map(f64::sqrt),
        coverage,
        graph: inputs.graph,
    };
    run.out.json("fit.json", &summary)?;
    Ok(run.out.path().to_path_buf())
}

#[derive(Serialize)]
struct GridRow {
    pattern: String,
    structure: String,
    waic: Option<f64>,
    lppd: Option<f64>,
    p_waic: Option<f64>,
    log_marginal: Option<f64>,
    rank: Option<usize>,
    converged: Option<bool>,
    error: Option<String>,
}

#[derive(Serialize)]
struct GridSummary {
    provenance: Provenance,
    data: DataSummary,
    graph: Option<GraphReport>,
    best: Option<String>,
    result: stratapc_core::selection::ModelGridResult,
}

pub fn grid(c: &Common) -> Outcome<PathBuf> {
    let mut run = setup(c, "grid")?;
    let inputs = load(c, &mut run)?;
    let gc = GridConfig {
        models: run.config.grid_models(),
        baseline: run.config.baseline,
        priors: run.config.priors.clone(),
        fit: run.config.fit.clone(),
        keep_fits: false,
    };
    let result = fit_grid(inputs.data(), inputs.graph.as_ref().map(|g| &g.graph), &gc)?;
    let mut rank = vec![None; result.entries.len()];
    for (pos, &i) in result.ranking.iter().enumerate() {
        rank[i] = Some(pos + 1);
    }
    let rows: Vec<GridRow> = result
        .entries
        .iter()
        .zip(&rank)
        .map(|(e, &rank)| GridRow {
            pattern: e.pattern.to_string(),
            structure: e.structure.label().to_string(),
            waic: e.score.as_ref().map(|s| s.waic.waic),
            lppd: e.score.as_ref().map(|s| s.waic.lppd),
            p_waic: e.score.as_ref().map(|s| s.waic.p_waic),
            log_marginal: e.score.as_ref().map(|s| s.log_marginal),
            rank,
            converged: e.score.as_ref().map(|s| s.converged),
            error: e.error.clone(),
        })
        .collect();
    run.out.csv("grid.csv", &rows)?;
    let best = result.best().map(|e| e.label());
    let failed = result.ranking.is_empty();
    let first_error = result.entries.iter().find_map(|e| e.error.clone());
    run.out.json(
        "grid.json",
        &GridSummary { provenance: run.prov.clone(), data: data_summary(&inputs.agg), graph: inputs.graph, best, result },
    )?;
    if failed {
        let why = first_error.unwrap_or_else(|| "no models requested".into());
        return Err(Failure::Numerical(format!("every grid entry failed; first error: {why}")));
    }
    Ok(run.out.path().to_path_buf())
}

#[derive(Serialize)]
struct PriorCheckSummary {
    provenance: Provenance,
    model: String,
    hyperparameters_fixed: bool,
    summary: PriorPredictiveSummary,
}

pub fn prior_check(c: &Common, sims: usize) -> Outcome<PathBuf> {
    if sims == 0 {
        return Err(usage("--sims must be positive"));
    }
    let mut run = setup(c, "prior-check")?;
    let inputs = load(c, &mut run)?;
    let (pattern, kind) = single_model(&run.config);
    let model = build_model(&run, &inputs, pattern, kind)?;
    let summary = sample_prior_predictive(&model, inputs.data(), &run.config.priors, sims, run.config.seed, None)?;
    run.out.json(
        "prior_check.json",
        &PriorCheckSummary { provenance: run.prov.clone(), model: model.label(), hyperparameters_fixed: false, summary },
    )?;
    Ok(run.out.path().to_path_buf())
}

#[derive(Serialize)]
struct HindcastRow {
    stratum: String,
    age: u32,
    year: i32,
    deaths: u64,
    median: f64,
    lower: f64,
    upper: f64,
    pit: f64,
}

#[derive(Serialize)]
struct DensityRow {
    x: f64,
    density: f64,
}

#[derive(Serialize)]
struct HindcastSummary {
    provenance: Provenance,
    model: String,
    stratum: String,
    masked_cells: usize,
    coverage: f64,
    ks_distance: f64,
    ks_critical_05: f64,
    hyperparameters: BTreeMap<String, f64>,
    pit: PitResult,
}

pub fn hindcast(c: &Common) -> Outcome<PathBuf> {
    let mut run = setup(c, "hindcast")?;
    let inputs = load(c, &mut run)?;
    let data = inputs.data();
    let hc = run.config.hindcast.clone();
    let names = data.stratum_names();
    let r = match &hc.stratum {
        Some(s) => names.iter().position(|n| n == s).ok_or_else(|| usage(format!("hindcast.stratum: unknown stratum '{s}'")))?,
        None => 0,
    };
    let g = *data.grid();
    let mut targets: Vec<usize> = (1..=hc.mask_periods.min(g.periods()))
        .flat_map(|j| (1..=g.ages()).map(move |i| (i, j)))
        .map(|(i, j)| data.index(r, i, j))
        .filter(|&k| data.observed()[k])
        .collect();
    if hc.mask_fraction > 0.0 {
        let rest: Vec<usize> = (0..data.len()).filter(|k| data.observed()[*k] && !targets.contains(k)).collect();
        let n = (hc.mask_fraction * rest.len() as f64).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(run.config.seed);
        let mut extra: Vec<usize> = rand::seq::index::sample(&mut rng, rest.len(), n).into_iter().map(|i| rest[i]).collect();
        extra.sort_unstable();
        targets.extend(extra);
    }
    if targets.is_empty() {
        return Err(usage("hindcast: no observed cells to hide"));
    }
    let masked = data.masked(&targets)?;
    let masked_inputs = Inputs { agg: Aggregated { dataset: masked, ..inputs.agg.clone() }, graph: inputs.graph.clone() };
    let model = build_model(&run, &masked_inputs, hc.model, hc.structure)?;
    let fit = fit_model(&model, masked_inputs.data(), &run.config.priors, &run.config.fit)?;
    let pred = predict_cells(&fit, data, &targets, hc.samples, run.config.seed)?;
    let observed: Vec<u64> = targets.iter().map(|&k| data.deaths()[k]).collect();
    let p = pit(&pred.samples, &observed)?;

    let bins = &run.config.grid;
    let mut covered = 0;
    let rows: Vec<HindcastRow> = pred
        .summaries
        .iter()
        .zip(&p.values)
        .map(|(s, &v)| {
            let (rr, rem) = (s.cell / g.cells(), s.cell % g.cells());
            let (i, j) = g.cell_at(rem);
            let y = data.deaths()[s.cell];
            if s.lower <= y as f64 && y as f64 <= s.upper {
                covered += 1;
            }
            HindcastRow {
                stratum: names[rr].clone(),
                age: bins.age_lower(i),
                year: bins.year_lower(j),
                deaths: y,
                median: s.median,
                lower: s.lower,
                upper: s.upper,
                pit: v,
            }
        })
        .collect();
    run.out.csv("hindcast.csv", &rows)?;
    let density: Vec<DensityRow> = p.density.iter().map(|&(x, d)| DensityRow { x, density: d }).collect();
    run.out.csv("pit_density.csv", &density)?;
    if c.svg {
        let s = Series { name: "PIT".into(), points: p.density.clone(), band: vec![] };
        let u = Series { name: "uniform".into(), points: vec![(0.0, 1.0), (1.0, 1.0)], band: vec![] };
        run.out.write("pit_density.svg", line_chart("PIT density of hidden cells", "PIT", "density", &[s, u]).as_bytes())?;
    }
    let n = targets.len();
    run.out.json(
        "hindcast.json",
        &HindcastSummary {
            provenance: run.prov.clone(),
            model: model.label(),
            stratum: names[r].clone(),
            masked_cells: n,
            coverage: covered as f64 / n as f64,
            ks_distance: ks_uniform(&p.values),
            ks_critical_05: 1.358 / (n as f64).sqrt(),
            hyperparameters: hyper_map(&model, &fit.eta_hat),
            pit: p,
        },
    )?;
    Ok(run.out.path().to_path_buf())
}

#[derive(Serialize)]
struct RrRow {
    stratum: String,
    reference: String,
    block: Block,
    index: usize,
    /// First calendar year of the period, or earliest birth year of the cohort.
    year: i32,
    median: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct RrSummary {
    provenance: Provenance,
    model: String,
    block: Block,
    reference: String,
    level_identified: bool,
    note: &'static str,
    curves: Vec<stratapc_core::selection::RrCurve>,
}

pub fn rr(c: &Common) -> Outcome<PathBuf> {
    let mut run = setup(c, "rr")?;
    let inputs = load(c, &mut run)?;
    let data = inputs.data();
    let cfg = run.config.rr.clone();
    let names = data.stratum_names();
    if names.len() < 2 {
        return Err(usage("rr needs at least two strata"));
    }
    let reference = match &cfg.reference {
        Some(s) => names.iter().position(|n| n == s).ok_or_else(|| usage(format!("rr.reference: unknown stratum '{s}'")))?,
        None => 0,
    };
    let model = build_model(&run, &inputs, cfg.model, cfg.structure)?;
    let fit = fit_model(&model, data, &run.config.priors, &run.config.fit)?;
    let g = data.grid();
    let bins = &run.config.grid;
    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for r in (0..names.len()).filter(|&r| r != reference) {
        let curve = cross_strata_rr(&fit, g, cfg.block, r, reference)?;
        for (n, &idx) in curve.index.iter().enumerate() {
            let year = match cfg.block {
                Block::Period => bins.year_lower(idx),
                _ => bins.year_min - bins.age_max as i32 + (idx as i32 - 1) * bins.width as i32,
            };
            rows.push(RrRow {
                stratum: names[r].clone(),
                reference: names[reference].clone(),
                block: cfg.block,
                index: idx,
                year,
                median: curve.median[n],
                lower: curve.lower[n],
                upper: curve.upper[n],
            });
        }
        curves.push(curve);
    }
    run.out.csv("rr.csv", &rows)?;
    if c.svg {
        let series: Vec<Series> = curves
            .iter()
            .map(|cv| Series {
                name: names[cv.stratum_1].clone(),
                points: cv.index.iter().zip(&cv.median).map(|(&i, &m)| (i as f64, m)).collect(),
                band: cv.index.iter().zip(cv.lower.iter().zip(&cv.upper)).map(|(&i, (&l, &u))| (i as f64, l, u)).collect(),
            })
            .collect();
        let title = format!("Relative risk vs {} (level not identified)", names[reference]);
        run.out.write("rr.svg", line_chart(&title, &format!("{:?} index", cfg.block), "normalized RR", &series).as_bytes())?;
    }
    run.out.json(
        "rr.json",
        &RrSummary {
            provenance: run.prov.clone(),
            model: model.label(),
            block: cfg.block,
            reference: names[reference].clone(),
            level_identified: false,
            note: AMBIGUITY_NOTE,
            curves,
        },
    )?;
    Ok(run.out.path().to_path_buf())
}

#[derive(Serialize)]
struct SimulateSummary {
    provenance: Provenance,
    strata: usize,
    ages: usize,
    periods: usize,
    total_deaths: u64,
}

pub fn simulate(c: &Common) -> Outcome<PathBuf> {
    let run = setup(c, "simulate")?;
    let cfg = &run.config.simulation;
    let sim = simulate_data(cfg, &run.config.grid, run.config.seed)?;
    let mut data_csv = Vec::new();
    dataset_to_raw(&sim.data, &run.config.grid).to_csv(&mut data_csv)?;
    run.out.write("data.csv", &data_csv)?;
    let mut graph_csv = Vec::new();
    write_graph(&sim.graph, &mut graph_csv)?;
    run.out.write("graph.csv", &graph_csv)?;
    let mut hyperparameters = BTreeMap::new();
    for b in Block::ALL {
        for p in [HyperParam::Tau(b), HyperParam::Rho(b)] {
            if let Some(v) = sim.eta.get(p) {
                hyperparameters.insert(p.to_string(), v);
            }
        }
    }
    let truth = Truth {
        pattern: cfg.pattern,
        structure: cfg.structure,
        strata: sim.data.stratum_names().to_vec(),
        hyperparameters,
        log_rates: sim.log_rates.clone(),
    };
    run.out.json("truth.json", &truth)?;
    let g = sim.data.grid();
    run.out.json(
        "simulate.json",
        &SimulateSummary {
            provenance: run.prov.clone(),
            strata: sim.data.strata(),
            ages: g.ages(),
            periods: g.periods(),
            total_deaths: sim.data.deaths().iter().sum(),
        },
    )?;
    Ok(run.out.path().to_path_buf())
}
