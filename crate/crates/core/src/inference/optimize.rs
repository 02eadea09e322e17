use super::laplace::{InferenceProblem, LaplaceEval};
use super::likelihood::Likelihood;
use crate::error::{Error, Result};
use crate::priors::{HyperParam, HyperParameters};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeOptions {
    pub max_evals: usize,
    pub rel_tol: f64,
    /// Initial simplex edge in transformed coordinates.
    pub initial_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { max_evals: 2000, rel_tol: 1e-6, initial_step: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex search for a minimum. Non-finite values are treated
/// as `+inf`, so the objective may fail outside its domain. One restart from
/// the best vertex guards against a collapsed simplex.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    rel_tol: f64,
    max_evals: usize,
) -> MinimizeResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return MinimizeResult { x: vec![], value: v, evaluations: evals, converged: true };
    }
    let mut best = (x0.to_vec(), eval(x0, &mut evals));
    let mut converged = false;
    for _restart in 0..2 {
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![best.clone()];
        for k in 0..n {
            let mut x = best.0.clone();
            x[k] += step;
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        converged = false;
        while evals < max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            if hi.is_finite() && (hi - lo).abs() <= rel_tol * 0.5 * (lo.abs() + hi.abs()) + 1e-12 {
                converged = true;
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = along(1.0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = x_best.iter().zip(&v.0).map(|(b, p)| b + 0.5 * (p - b)).collect();
                        let fx = eval(&x, &mut evals);
                        *v = (x, fx);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best.1 - rel_tol * best.1.abs();
        if simplex[0].1 <= best.1 {
            best = simplex[0].clone();
        }
        if !converged || !improved {
            break;
        }
    }
    MinimizeResult { x: best.0, value: best.1, evaluations: evals, converged }
}

/// Best hyperparameters under the Laplace objective, with the mode there.
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub eta: HyperParameters,
    /// Transformed coordinates of `eta`.
    pub theta: Vec<f64>,
    /// Laplace log marginal plus log Jacobian of the transform.
    pub objective: f64,
    pub evaluations: usize,
    /// False when the budget ran out before the tolerance was met.
    pub converged: bool,
    pub laplace: LaplaceEval,
}

/// Maximizes the Laplace log marginal over (log tau, transformed rho) by
/// simplex search. Each evaluation warm-starts Newton from the best mode
/// found so far, so the result is deterministic given `init`.
pub fn optimize_hyperparameters<L: Likelihood + ?Sized>(
    problem: &InferenceProblem<'_, L>,
    init: &HyperParameters,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    optimize_subset(problem, init, problem.hyper_prior().params(), opts)
}

/// As [`optimize_hyperparameters`], moving only `free` and holding the other
/// hyperparameters at their `init` values.
pub fn optimize_subset<L: Likelihood + ?Sized>(
    problem: &InferenceProblem<'_, L>,
    init: &HyperParameters,
    free: &[HyperParam],
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    let hyper = problem.hyper_prior();
    let params = hyper.params();
    let slots: Vec<usize> = free
        .iter()
        .map(|p| params.iter().position(|q| q == p).ok_or_else(|| Error::Model(format!("{p} is not a parameter of this model"))))
        .collect::<Result<_>>()?;
    let theta0 = hyper.to_unconstrained(init)?;
    let full = |sub: &[f64]| -> Vec<f64> {
        let mut t = theta0.clone();
        for (&s, &v) in slots.iter().zip(sub) {
            t[s] = v;
        }
        t
    };
    let first = problem.laplace(init, None)?;
    let start_xi = first.mode.xi.clone();
    let best: RefCell<(f64, Vec<f64>, Vec<f64>)> =
        RefCell::new((first.log_marginal + hyper.log_jacobian(&theta0), theta0.clone(), start_xi));
    let objective = |sub: &[f64]| -> f64 {
        let theta = full(sub);
        let eta = hyper.from_unconstrained(&theta);
        let warm = best.borrow().2.clone();
        match problem.laplace(&eta, Some(&warm)) {
            Ok(ev) => {
                let v = ev.log_marginal + hyper.log_jacobian(&theta);
                let mut b = best.borrow_mut();
                if v > b.0 {
                    *b = (v, theta, ev.mode.xi);
                }
                -v
            }
            Err(_) => f64::INFINITY,
        }
    };
    let sub0: Vec<f64> = slots.iter().map(|&s| theta0[s]).collect();
    let res = nelder_mead(objective, &sub0, opts.initial_step, opts.rel_tol, opts.max_evals);
    let (_, theta, xi) = best.into_inner();
    let eta = hyper.from_unconstrained(&theta);
    let laplace = problem.laplace(&eta, Some(&xi))?;
    let objective = laplace.log_marginal + hyper.log_jacobian(&theta);
    Ok(OptimizeResult { eta, theta, objective, evaluations: res.evaluations + 1, converged: res.converged, laplace })
}

/// A hyperparameter configuration with its integration weight.
#[derive(Debug, Clone)]
pub struct WeightedPoint {
    pub theta: Vec<f64>,
    pub eta: HyperParameters,
    pub weight: f64,
    pub laplace: LaplaceEval,
}

/// Central-composite style design around the optimum: the center plus two
/// points per principal axis of the curvature of the objective, one standard
/// deviation out. Weights are proportional to `exp(objective)` and sum to 1.
pub fn ccd_points<L: Likelihood + ?Sized>(
    problem: &InferenceProblem<'_, L>,
    opt: &OptimizeResult,
) -> Result<Vec<WeightedPoint>> {
    let hyper = problem.hyper_prior();
    let d = opt.theta.len();
    let xi0 = opt.laplace.mode.xi.clone();
    let f = |t: &[f64]| -> Result<(f64, LaplaceEval)> {
        let eta = hyper.from_unconstrained(t);
        let ev = problem.laplace(&eta, Some(&xi0))?;
        Ok((ev.log_marginal + hyper.log_jacobian(t), ev))
    };
    let h = 0.05;
    let f0 = opt.objective;
    let mut hess = DMatrix::zeros(d, d);
    let shifted = |a: usize, sa: f64, b: usize, sb: f64| -> Result<f64> {
        let mut t = opt.theta.clone();
        t[a] += sa;
        t[b] += sb;
        Ok(f(&t)?.0)
    };
    for a in 0..d {
        let fp = shifted(a, h, a, 0.0)?;
        let fm = shifted(a, -h, a, 0.0)?;
        hess[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
        for b in 0..a {
            let v = (shifted(a, h, b, h)? - shifted(a, h, b, -h)? - shifted(a, -h, b, h)? + shifted(a, -h, b, -h)?)
                / (4.0 * h * h);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(-hess);
    let mut points = vec![(opt.theta.clone(), f0, opt.laplace.clone())];
    for k in 0..d {
        let lambda = eig.eigenvalues[k];
        if !(lambda > 0.0) {
            return Err(Error::NotPositiveDefinite("curvature of the hyperparameter objective".into()));
        }
        let sd = 1.0 / lambda.sqrt();
        for sign in [-1.0, 1.0] {
            let t: Vec<f64> = (0..d).map(|c| opt.theta[c] + sign * sd * eig.eigenvectors[(c, k)]).collect();
            if let Ok((v, ev)) = f(&t) {
                points.push((t, v, ev));
            }
        }
    }
    let top = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = points.iter().map(|p| (p.1 - top).exp()).sum();
    Ok(points
        .into_iter()
        .map(|(theta, v, laplace)| WeightedPoint {
            eta: hyper.from_unconstrained(&theta),
            theta,
            weight: (v - top).exp() / total,
            laplace,
        })
        .collect())
}
