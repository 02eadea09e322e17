use super::likelihood::{evaluate_likelihood, Likelihood};
use super::model::{LatentModel, LatentPrior};
use super::pattern::Block;
use crate::apc::BaselineForm;
use crate::covariance::{cholesky, chol_log_det};
use crate::error::{Error, Result};
use crate::priors::BaselineMeanPrior;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    /// Converged when the gradient max-norm drops below this.
    pub tol: f64,
    /// ... or the objective changes by less than this, relatively.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, rel_tol: 1e-12, max_iter: 100, max_halvings: 30 }
    }
}

/// Mode of `log p(y | xi) + log p(xi | eta)` and the negative Hessian there.
#[derive(Debug, Clone)]
pub struct ConditionalMode {
    pub xi: Vec<f64>,
    pub hessian: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
    pub loglik: f64,
    pub log_prior: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl ConditionalMode {
    pub fn objective(&self) -> f64 {
        self.loglik + self.log_prior
    }

    pub fn log_det_hessian(&self) -> f64 {
        chol_log_det(&self.chol)
    }
}

struct Point {
    x: Vec<f64>,
    loglik: f64,
    log_prior: f64,
    grad: Vec<f64>,
    weights: Vec<f64>,
}

impl Point {
    fn objective(&self) -> f64 {
        self.loglik + self.log_prior
    }
}

fn evaluate<L: Likelihood + ?Sized>(model: &LatentModel, prior: &LatentPrior, lik: &L, x: Vec<f64>) -> Result<Point> {
    let e = evaluate_likelihood(model, lik, &x)?;
    let log_prior = prior.log_density(&x);
    let mut grad = prior.gradient(&x);
    for (g, l) in grad.iter_mut().zip(&e.gradient) {
        *g += l;
    }
    if !log_prior.is_finite() {
        return Err(Error::NonFinite("latent prior density".into()));
    }
    Ok(Point { x, loglik: e.value, log_prior, grad, weights: e.weights })
}

fn hessian(model: &LatentModel, prior: &LatentPrior, p: &Point) -> DMatrix<f64> {
    let mut h = model.weighted_gram(&p.weights);
    prior.add_precision_to(&mut h);
    h
}

fn finish(model: &LatentModel, prior: &LatentPrior, p: Point, iterations: usize) -> Result<ConditionalMode> {
    let h = hessian(model, prior, &p);
    let chol = cholesky(&h, "negative Hessian at the mode")?;
    let grad_norm = p.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(ConditionalMode { xi: p.x, hessian: h, chol, loglik: p.loglik, log_prior: p.log_prior, iterations, grad_norm })
}

/// Newton iterations with step halving from `init` (the prior mean when
/// absent).
pub fn conditional_mode<L: Likelihood + ?Sized>(
    model: &LatentModel,
    prior: &LatentPrior,
    lik: &L,
    init: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<ConditionalMode> {
    let x0 = match init {
        Some(x) => x.to_vec(),
        None => prior.mean(),
    };
    if x0.len() != model.free_dim() {
        return Err(Error::Dimension(format!("initial latent vector has {} entries, model {}", x0.len(), model.free_dim())));
    }
    let mut cur = evaluate(model, prior, lik, x0)?;
    for iter in 0..opts.max_iter {
        let grad_norm = cur.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < opts.tol {
            return finish(model, prior, cur, iter);
        }
        let h = hessian(model, prior, &cur);
        let chol = cholesky(&h, "negative Hessian during Newton iterations")?;
        let step = chol.solve(&DVector::from_column_slice(&cur.grad));
        let decrement: f64 = step.iter().zip(&cur.grad).map(|(a, b)| a * b).sum();
        let f0 = cur.objective();
        let scale = f0.abs().max(1.0);
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..=opts.max_halvings {
            let x: Vec<f64> = cur.x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if let Ok(p) = evaluate(model, prior, lik, x) {
                if p.objective() >= f0 - 1e-14 * scale {
                    next = Some(p);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = next else {
            // No ascent left along the Newton direction: at the mode up to
            // rounding if the predicted gain is negligible.
            if decrement <= 1e-10 * scale {
                return finish(model, prior, cur, iter);
            }
            return Err(Error::NonConvergence { iterations: iter, grad_norm });
        };
        let change = (next.objective() - f0).abs();
        cur = next;
        if change <= opts.rel_tol * scale {
            return finish(model, prior, cur, iter + 1);
        }
    }
    let grad_norm = cur.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Err(Error::NonConvergence { iterations: opts.max_iter, grad_norm })
}

/// Starting point: curvatures zero, baseline at the crude rate of the
/// baseline cells with zero slopes; the baseline prior mean when those cells
/// carry no data.
pub fn initial_latent<L: Likelihood + ?Sized>(model: &LatentModel, lik: &L, prior: &BaselineMeanPrior) -> Vec<f64> {
    let mut xi = vec![0.0; model.free_dim()];
    let grid = model.grid();
    let cells = model.design().baseline_cells();
    let layout = *model.layout(Block::Baseline);
    let level = |strata: &[usize]| -> Option<f64> {
        let crude: Vec<f64> = strata
            .iter()
            .flat_map(|&r| cells.iter().map(move |&(i, j)| r * grid.cells() + grid.cell_index(i, j)))
            .filter(|&k| lik.is_observed(k))
            .filter_map(|k| lik.crude_log_rate(k))
            .collect();
        if crude.is_empty() {
            None
        } else {
            Some(crude.iter().sum::<f64>() / crude.len() as f64)
        }
    };
    let fill = |xi: &mut Vec<f64>, r: usize, lvl: Option<f64>| {
        let v = match lvl {
            Some(c) => [c, 0.0, 0.0],
            None => prior.mean,
        };
        let coords = match model.design().spec().form {
            BaselineForm::PointPlusTwoSlopes => v,
            BaselineForm::ThreePoints => [v[0], v[0] + v[1], v[0] + v[2]],
        };
        for (l, c) in coords.into_iter().enumerate() {
            xi[layout.free_index(r, l)] = c;
        }
    };
    if layout.shared {
        let all: Vec<usize> = (0..model.strata()).collect();
        fill(&mut xi, 0, level(&all));
    } else {
        for r in 0..model.strata() {
            fill(&mut xi, r, level(&[r]));
        }
    }
    xi
}
