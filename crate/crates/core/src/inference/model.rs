use super::pattern::{Block, SharingPattern};
use crate::apc::{build_design_matrix, BaselineForm, BaselineSpec, DesignMatrix, GridSpec};
use crate::covariance::{cholesky, chol_log_det, CorrelationFamily, CrossStrataStructure, KroneckerPrecision, StructureKind};
use crate::error::{Error, Result};
use crate::priors::{BaselineMeanPrior, HyperParam, HyperParameters, HyperPrior, PriorConfig};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Where one parameter block lives in the free latent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub block: Block,
    /// Length within one stratum's canonical vector.
    pub len: usize,
    pub shared: bool,
    /// First free coordinate of the block.
    pub offset: usize,
    /// First column of the block in the design matrix.
    pub column: usize,
}

impl BlockLayout {
    pub fn free_len(&self, strata: usize) -> usize {
        if self.shared {
            self.len
        } else {
            self.len * strata
        }
    }

    /// Free coordinate of element `l` for stratum `r`.
    pub fn free_index(&self, r: usize, l: usize) -> usize {
        if self.shared {
            self.offset + l
        } else {
            self.offset + r * self.len + l
        }
    }
}

/// Stratified latent Gaussian model: canonical APC parameters per stratum,
/// with shared blocks stored once. Log rates are `(I_R (x) M) Z xi`.
#[derive(Debug, Clone)]
pub struct LatentModel {
    grid: GridSpec,
    strata: usize,
    pattern: SharingPattern,
    family: CorrelationFamily,
    design: DesignMatrix<f64>,
    layout: [BlockLayout; 4],
    free_dim: usize,
    index_map: Vec<Vec<usize>>,
    hyper: Vec<HyperParam>,
}

pub fn assemble_model(
    grid: &GridSpec,
    strata: usize,
    pattern: SharingPattern,
    family: CorrelationFamily,
    baseline: &BaselineSpec,
) -> Result<LatentModel> {
    if strata == 0 {
        return Err(Error::Model("at least one stratum is required".into()));
    }
    if strata == 1 && pattern != SharingPattern::M1 {
        return Err(Error::Model(format!("{pattern} needs at least two strata")));
    }
    if pattern == SharingPattern::M1 && family.kind() != StructureKind::Independent {
        return Err(Error::Model("M1 shares every block, so it admits no cross-strata structure".into()));
    }
    if let CorrelationFamily::Bym2(icar) = &family {
        if icar.strata() != strata {
            return Err(Error::Dimension(format!("graph has {} strata, data {strata}", icar.strata())));
        }
    }
    let design = build_design_matrix::<f64>(grid, baseline)?;
    let lens = [3, grid.ages() - 2, grid.periods() - 2, grid.cohorts() - 2];
    let mut layout = [BlockLayout { block: Block::Baseline, len: 0, shared: true, offset: 0, column: 0 }; 4];
    let (mut offset, mut column) = (0, 0);
    for b in Block::ALL {
        let l = BlockLayout { block: b, len: lens[b.index()], shared: pattern.is_shared(b), offset, column };
        offset += l.free_len(strata);
        column += l.len;
        layout[b.index()] = l;
    }
    let index_map = (0..strata)
        .map(|r| layout.iter().flat_map(|l| (0..l.len).map(move |e| l.free_index(r, e))).collect())
        .collect();
    let mut hyper = Vec::new();
    for l in &layout {
        if l.block == Block::Baseline && l.shared {
            continue;
        }
        hyper.push(HyperParam::Tau(l.block));
        if !l.shared && family.has_parameter() {
            hyper.push(HyperParam::Rho(l.block));
        }
    }
    Ok(LatentModel { grid: *grid, strata, pattern, family, design, layout, free_dim: offset, index_map, hyper })
}

impl LatentModel {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn strata(&self) -> usize {
        self.strata
    }

    pub fn pattern(&self) -> SharingPattern {
        self.pattern
    }

    pub fn family(&self) -> &CorrelationFamily {
        &self.family
    }

    pub fn structure_kind(&self) -> StructureKind {
        self.family.kind()
    }

    pub fn design(&self) -> &DesignMatrix<f64> {
        &self.design
    }

    pub fn layout(&self, b: Block) -> &BlockLayout {
        &self.layout[b.index()]
    }

    pub fn free_dim(&self) -> usize {
        self.free_dim
    }

    /// Length of the stacked log-rate vector, `A T R`.
    pub fn stacked_cells(&self) -> usize {
        self.grid.cells() * self.strata
    }

    /// Free coordinates feeding stratum `r`'s canonical vector.
    pub fn index_map(&self, r: usize) -> &[usize] {
        &self.index_map[r]
    }

    /// Active hyperparameters, in optimizer order.
    pub fn hyper_params(&self) -> &[HyperParam] {
        &self.hyper
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.pattern, self.family.kind().label())
    }

    fn check_len(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.free_dim {
            return Err(Error::Dimension(format!("latent vector has {} entries, model {}", xi.len(), self.free_dim)));
        }
        Ok(())
    }

    /// Canonical parameters of stratum `r`.
    pub fn canonical(&self, xi: &[f64], r: usize) -> Vec<f64> {
        self.index_map[r].iter().map(|&k| xi[k]).collect()
    }

    fn canonical_matrix(&self, xi: &[f64]) -> DMatrix<f64> {
        let p = self.design.ncols();
        DMatrix::from_fn(p, self.strata, |c, r| xi[self.index_map[r][c]])
    }

    /// Stacked log rates, stratum-major.
    pub fn log_rates(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi)?;
        let mu = self.design.matrix() * self.canonical_matrix(xi);
        Ok(mu.as_slice().to_vec())
    }

    /// Log rates for many latent vectors at once (rows of `xi`).
    pub fn log_rates_rows(&self, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if xi.ncols() != self.free_dim {
            return Err(Error::Dimension(format!("latent samples have {} columns, model {}", xi.ncols(), self.free_dim)));
        }
        let c = self.grid.cells();
        let mut out = DMatrix::zeros(xi.nrows(), self.stacked_cells());
        let mt = self.design.matrix().transpose();
        for r in 0..self.strata {
            let cols: Vec<usize> = self.index_map[r].clone();
            let sub = xi.select_columns(&cols);
            let mu = sub * &mt;
            out.columns_mut(r * c, c).copy_from(&mu);
        }
        Ok(out)
    }

    /// `Z' (I (x) M') v` for a stacked cell vector `v`.
    pub fn transpose_apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.stacked_cells(), "stacked cell vector length");
        let vm = DMatrix::from_column_slice(self.grid.cells(), self.strata, v);
        let g = self.design.matrix().tr_mul(&vm);
        let mut out = vec![0.0; self.free_dim];
        for r in 0..self.strata {
            for (c, &k) in self.index_map[r].iter().enumerate() {
                out[k] += g[(c, r)];
            }
        }
        out
    }

    /// `Z' (I (x) M)' W (I (x) M) Z` for per-cell weights `w`.
    pub fn weighted_gram(&self, w: &[f64]) -> DMatrix<f64> {
        let cells = self.grid.cells();
        let m = self.design.matrix();
        let mut h = DMatrix::zeros(self.free_dim, self.free_dim);
        for r in 0..self.strata {
            let wr = &w[r * cells..(r + 1) * cells];
            let mut scaled = m.clone();
            for (row, &wt) in wr.iter().enumerate() {
                scaled.row_mut(row).scale_mut(wt);
            }
            let g = m.tr_mul(&scaled);
            let map = &self.index_map[r];
            for (a, &ka) in map.iter().enumerate() {
                for (b, &kb) in map.iter().enumerate() {
                    h[(ka, kb)] += g[(a, b)];
                }
            }
        }
        h
    }

    /// Dense `(I (x) M) Z`; for tests and small instances.
    pub fn stacked_design(&self) -> DMatrix<f64> {
        let cells = self.grid.cells();
        let m = self.design.matrix();
        let mut x = DMatrix::zeros(self.stacked_cells(), self.free_dim);
        for r in 0..self.strata {
            for (c, &k) in self.index_map[r].iter().enumerate() {
                for row in 0..cells {
                    x[(r * cells + row, k)] += m[(row, c)];
                }
            }
        }
        x
    }

    pub fn hyper_prior(&self, config: &PriorConfig) -> Result<HyperPrior> {
        HyperPrior::new(self.hyper.clone(), &self.family, self.strata, config)
    }

    /// Cross-strata structure at correlation `rho`.
    pub fn structure(&self, rho: Option<f64>) -> Result<CrossStrataStructure> {
        CrossStrataStructure::new(&self.family, self.strata, rho)
    }

    /// Neutral starting point: modest precisions, no correlation.
    pub fn default_hyperparameters(&self) -> HyperParameters {
        let mut eta = HyperParameters::default();
        for &p in &self.hyper {
            let v = match p {
                HyperParam::Tau(_) => 10.0,
                HyperParam::Rho(_) => match self.family {
                    CorrelationFamily::Bym2(_) => 0.5,
                    _ => 0.0,
                },
            };
            eta.set(p, v);
        }
        eta
    }

    /// Gaussian prior of the free latent vector given the hyperparameters.
    ///
    /// The population baseline mean is integrated out: a shared baseline is
    /// `N(v, S)` directly, and stratum baselines are jointly normal with
    /// covariance `Sigma_s / tau_0 (x) I_3 + 1 1' (x) S`.
    pub fn latent_prior(&self, eta: &HyperParameters, baseline: &BaselineMeanPrior) -> Result<LatentPrior> {
        let mut pieces = Vec::with_capacity(4);
        for l in &self.layout {
            let tau = || {
                eta.get(HyperParam::Tau(l.block))
                    .ok_or_else(|| Error::Domain(format!("missing {}", HyperParam::Tau(l.block))))
            };
            let structure = || -> Result<CrossStrataStructure> {
                let rho = if self.family.has_parameter() {
                    Some(eta.get(HyperParam::Rho(l.block)).ok_or_else(|| {
                        Error::Domain(format!("missing {}", HyperParam::Rho(l.block)))
                    })?)
                } else {
                    None
                };
                self.structure(rho)
            };
            let piece = match (l.block, l.shared) {
                (Block::Baseline, true) => {
                    let (mean, cov) = self.baseline_in_form(baseline);
                    PriorPiece::dense(l.offset, mean, cov)?
                }
                (Block::Baseline, false) => {
                    let (mean, s) = self.baseline_in_form(baseline);
                    let corr = structure()?.correlation();
                    let tau0 = tau()?;
                    let n = 3 * self.strata;
                    let cov = DMatrix::from_fn(n, n, |a, b| {
                        let (ra, la, rb, lb) = (a / 3, a % 3, b / 3, b % 3);
                        let own = if la == lb { corr[(ra, rb)] / tau0 } else { 0.0 };
                        own + s[(la, lb)]
                    });
                    let mean = (0..n).map(|a| mean[a % 3]).collect();
                    PriorPiece::dense(l.offset, mean, cov)?
                }
                (_, true) => PriorPiece::kron(l.offset, KroneckerPrecision::scaled_identity(l.len, tau()?)?)?,
                (_, false) => PriorPiece::kron(l.offset, KroneckerPrecision::new(l.len, &structure()?, tau()?)?)?,
            };
            pieces.push(piece);
        }
        LatentPrior::new(self.free_dim, pieces)
    }

    /// Baseline-mean prior expressed in the baseline form of the design.
    fn baseline_in_form(&self, prior: &BaselineMeanPrior) -> (Vec<f64>, DMatrix<f64>) {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&prior.variance));
        match self.design.spec().form {
            BaselineForm::PointPlusTwoSlopes => (prior.mean.to_vec(), s),
            BaselineForm::ThreePoints => {
                // (mu1, mu1 + slope2, mu1 + slope3)
                let t = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
                let v = prior.mean;
                (vec![v[0], v[0] + v[1], v[0] + v[2]], &t * s * t.transpose())
            }
        }
    }

    /// Conditional mean and variance of the population baseline mean given
    /// the stratum baselines. For patterns with a shared baseline it is
    /// that block itself.
    pub fn nu0_conditional(&self, xi: &[f64], eta: &HyperParameters, baseline: &BaselineMeanPrior) -> Result<([f64; 3], [f64; 3])> {
        let l = self.layout(Block::Baseline);
        if l.shared {
            let mut m = [0.0; 3];
            m.copy_from_slice(&xi[l.offset..l.offset + 3]);
            return Ok((m, [0.0; 3]));
        }
        let tau0 = eta.tau_of(Block::Baseline).ok_or_else(|| Error::Domain("missing tau_0".into()))?;
        let rho = if self.family.has_parameter() { eta.rho_of(Block::Baseline) } else { None };
        let (inv, _) = self.structure(rho)?.inverse_and_log_det()?;
        let ones = nalgebra::DVector::from_element(self.strata, 1.0);
        let w = &inv * &ones;
        let total = ones.dot(&w);
        let (v, s) = self.baseline_in_form(baseline);
        if self.design.spec().form == BaselineForm::ThreePoints {
            // correlated components; solve the 3x3 system
            let s_inv = cholesky(&s, "baseline prior covariance")?.inverse();
            let prec = &s_inv + DMatrix::identity(3, 3) * (tau0 * total);
            let mut rhs = &s_inv * nalgebra::DVector::from_column_slice(&v);
            for c in 0..3 {
                rhs[c] += tau0 * (0..self.strata).map(|r| w[r] * xi[l.free_index(r, c)]).sum::<f64>();
            }
            let ch = cholesky(&prec, "baseline posterior precision")?;
            let mean = ch.solve(&rhs);
            let cov = ch.inverse();
            return Ok(([mean[0], mean[1], mean[2]], [cov[(0, 0)], cov[(1, 1)], cov[(2, 2)]]));
        }
        let mut mean = [0.0; 3];
        let mut var = [0.0; 3];
        for c in 0..3 {
            let p = 1.0 / s[(c, c)] + tau0 * total;
            let data: f64 = (0..self.strata).map(|r| w[r] * xi[l.free_index(r, c)]).sum();
            mean[c] = (v[c] / s[(c, c)] + tau0 * data) / p;
            var[c] = 1.0 / p;
        }
        Ok((mean, var))
    }
}

#[derive(Debug, Clone)]
enum PiecePrecision {
    Kron(KroneckerPrecision),
    Dense { matrix: DMatrix<f64>, log_det: f64 },
}

/// One independent Gaussian component of the latent prior.
#[derive(Debug, Clone)]
pub struct PriorPiece {
    offset: usize,
    mean: Vec<f64>,
    precision: PiecePrecision,
}

impl PriorPiece {
    /// Zero-mean piece with Kronecker precision.
    pub fn kron(offset: usize, p: KroneckerPrecision) -> Result<Self> {
        Ok(Self { offset, mean: vec![0.0; p.dim()], precision: PiecePrecision::Kron(p) })
    }

    /// Piece given by mean and covariance.
    pub fn dense(offset: usize, mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || !cov.is_square() {
            return Err(Error::Dimension("prior mean and covariance disagree".into()));
        }
        let ch = cholesky(&cov, "latent prior covariance")?;
        let log_det = -chol_log_det(&ch);
        Ok(Self { offset, mean, precision: PiecePrecision::Dense { matrix: ch.inverse(), log_det } })
    }

    /// Piece given by mean and precision.
    pub fn from_precision(offset: usize, mean: Vec<f64>, precision: DMatrix<f64>) -> Result<Self> {
        if precision.nrows() != mean.len() || !precision.is_square() {
            return Err(Error::Dimension("prior mean and precision disagree".into()));
        }
        let log_det = chol_log_det(&cholesky(&precision, "latent prior precision")?);
        Ok(Self { offset, mean, precision: PiecePrecision::Dense { matrix: precision, log_det } })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn centered(&self, x: &[f64]) -> Vec<f64> {
        x[self.offset..self.offset + self.dim()].iter().zip(&self.mean).map(|(a, m)| a - m).collect()
    }

    fn apply(&self, d: &[f64]) -> Vec<f64> {
        match &self.precision {
            PiecePrecision::Kron(k) => k.apply(d),
            PiecePrecision::Dense { matrix, .. } => (matrix * nalgebra::DVector::from_column_slice(d)).as_slice().to_vec(),
        }
    }

    fn log_det(&self) -> f64 {
        match &self.precision {
            PiecePrecision::Kron(k) => k.log_det(),
            PiecePrecision::Dense { log_det, .. } => *log_det,
        }
    }

    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let dev = match &self.precision {
            PiecePrecision::Kron(k) => k.sample(rng)?,
            PiecePrecision::Dense { matrix, .. } => {
                let ch = cholesky(matrix, "latent prior precision")?;
                let z = nalgebra::DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
                let e = ch.l().transpose().solve_upper_triangular(&z).expect("Cholesky factor is nonsingular");
                e.iter().copied().collect()
            }
        };
        Ok(dev.iter().zip(&self.mean).map(|(d, m)| d + m).collect())
    }

    fn add_to(&self, h: &mut DMatrix<f64>) {
        match &self.precision {
            PiecePrecision::Kron(k) => k.add_to(h, self.offset),
            PiecePrecision::Dense { matrix, .. } => {
                let n = self.dim();
                let mut view = h.view_mut((self.offset, self.offset), (n, n));
                view += matrix;
            }
        }
    }
}

/// Block-diagonal Gaussian prior over the free latent vector.
#[derive(Debug, Clone)]
pub struct LatentPrior {
    dim: usize,
    pieces: Vec<PriorPiece>,
}

impl LatentPrior {
    pub fn new(dim: usize, mut pieces: Vec<PriorPiece>) -> Result<Self> {
        pieces.sort_by_key(|p| p.offset);
        let mut next = 0;
        for p in &pieces {
            if p.offset != next {
                return Err(Error::Dimension(format!("prior pieces leave a gap or overlap at coordinate {next}")));
            }
            next += p.dim();
        }
        if next != dim {
            return Err(Error::Dimension(format!("prior pieces cover {next} of {dim} coordinates")));
        }
        Ok(Self { dim, pieces })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> Vec<f64> {
        self.pieces.iter().flat_map(|p| p.mean.iter().copied()).collect()
    }

    pub fn log_det_precision(&self) -> f64 {
        self.pieces.iter().map(|p| p.log_det()).sum()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for p in &self.pieces {
            let d = p.centered(x);
            quad += p.apply(&d).iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        }
        0.5 * (self.log_det_precision() - quad - self.dim as f64 * (2.0 * PI).ln())
    }

    /// `-Q (x - m)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.dim);
        for p in &self.pieces {
            g.extend(p.apply(&p.centered(x)).into_iter().map(|v| -v));
        }
        g
    }

    /// Add the prior precision into `h`.
    pub fn add_precision_to(&self, h: &mut DMatrix<f64>) {
        for p in &self.pieces {
            p.add_to(h);
        }
    }

    /// One draw from the prior.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.dim);
        for p in &self.pieces {
            x.extend(p.sample(rng)?);
        }
        Ok(x)
    }

    pub fn precision(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        self.add_precision_to(&mut h);
        h
    }
}
