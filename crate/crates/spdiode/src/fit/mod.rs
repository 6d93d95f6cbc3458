//! Nonlinear least squares (Levenberg-Marquardt) and the toolkit's fit
//! models.
//!
//! The solver is deliberately pinned down so results reproduce across
//! machines: finite-difference (central) Jacobian with step
//! `sqrt(eps) * max(|p|, 1e-4)`, Marquardt damping on the scaled normal
//! matrix starting at 1e-3 (x10 on rejection, /10 on acceptance), at most
//! 500 iterations, convergence when the relative step drops below 1e-8 or
//! the relative chi-square change of an accepted step below 1e-10.
//! Standard errors are `sqrt(diag((J^T W J)^-1) * chi2/dof)`.

mod models;

pub use models::{
    fit_biexp_irf, fit_g2, fit_g2_unweighted, fit_lorentzian, fit_stark, StarkFit,
};

use serde::Serialize;
use thiserror::Error;

/// One named fit parameter with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: Vec<Param>,
    /// Quantities computed from the fitted parameters (with propagated
    /// errors), e.g. a quality factor.
    pub derived: Vec<Param>,
    /// Weighted residual 2-norm `sqrt(chi2)` at the optimum.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Row-major covariance of the fitted parameters.
    pub covariance: Vec<f64>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> f64 {
        self.param(name).value
    }

    pub fn std_error(&self, name: &str) -> f64 {
        self.param(name).std_error
    }

    pub fn param(&self, name: &str) -> &Param {
        self.params
            .iter()
            .chain(self.derived.iter())
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("no fit parameter named `{name}`"))
    }

    /// Fit report as pretty JSON (parameter names, values, standard errors,
    /// residual norm, convergence flag, warnings).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {need} data points for {params} parameters (got {got})")]
    TooFewPoints { need: usize, got: usize, params: usize },
    #[error("sigma must be positive everywhere (found {0})")]
    NonPositiveSigma(f64),
    #[error("model returned a non-finite value at x = {x} with the initial parameters")]
    ModelNotFinite { x: f64 },
    #[error("{0}")]
    BadInput(String),
}

const FD_STEP_SCALE: f64 = 1.4901161193847656e-8; // sqrt(f64::EPSILON)

/// Central-difference gradient of `model` with respect to the parameters at
/// one sample point.
pub fn finite_difference_gradient<F>(model: &F, params: &[f64], x: f64) -> Vec<f64>
where
    F: Fn(&[f64], f64) -> f64,
{
    let mut grad = Vec::with_capacity(params.len());
    let mut p = params.to_vec();
    for j in 0..params.len() {
        let h = FD_STEP_SCALE * params[j].abs().max(1e-4);
        let orig = p[j];
        p[j] = orig + h;
        let fp = model(&p, x);
        p[j] = orig - h;
        let fm = model(&p, x);
        p[j] = orig;
        grad.push((fp - fm) / (2.0 * h));
    }
    grad
}

/// Solve `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is singular.
fn solve_linear(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[piv * n + col].abs() {
                piv = row;
            }
        }
        if m[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row * n + k] * x[k];
        }
        x[row] = s / m[row * n + row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve_linear(a, &e, n)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

fn chi2_of<F>(model: &F, params: &[f64], data: &[(f64, f64, f64)]) -> f64
where
    F: Fn(&[f64], f64) -> f64,
{
    let mut chi2 = 0.0;
    for &(x, y, sigma) in data {
        let f = model(params, x);
        if f.is_nan() {
            return f64::INFINITY;
        }
        let r = (y - f) / sigma;
        chi2 += r * r;
    }
    chi2
}

/// Weighted Levenberg-Marquardt fit of `model(params, x)` to
/// `(x, y, sigma)` triples.
pub fn least_squares<F>(
    model: F,
    data: &[(f64, f64, f64)],
    init: &[f64],
    names: &[&str],
) -> Result<FitResult, FitError>
where
    F: Fn(&[f64], f64) -> f64,
{
    let k = init.len();
    assert_eq!(names.len(), k, "one name per parameter");
    if data.len() < k + 1 {
        return Err(FitError::TooFewPoints {
            need: k + 1,
            got: data.len(),
            params: k,
        });
    }
    for &(_, _, sigma) in data {
        if !(sigma > 0.0) {
            return Err(FitError::NonPositiveSigma(sigma));
        }
    }
    for &(x, _, _) in data {
        if !model(init, x).is_finite() {
            return Err(FitError::ModelNotFinite { x });
        }
    }

    let n = data.len();
    let mut params = init.to_vec();
    let mut chi2 = chi2_of(&model, &params, data);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = chi2 == 0.0;
    let mut warnings = Vec::new();
    let mut singular = false;

    while !converged && iterations < 500 {
        iterations += 1;
        // Weighted Jacobian and residual vector at the current point.
        let mut jtj = vec![0.0; k * k];
        let mut jtr = vec![0.0; k];
        for &(x, y, sigma) in data {
            let g = finite_difference_gradient(&model, &params, x);
            let r = (y - model(&params, x)) / sigma;
            for a in 0..k {
                let ga = g[a] / sigma;
                jtr[a] += ga * r;
                for b in a..k {
                    jtj[a * k + b] += ga * g[b] / sigma;
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                jtj[a * k + b] = jtj[b * k + a];
            }
        }

        // Try damped steps until one is accepted or damping saturates.
        let mut accepted = false;
        while lambda < 1e13 {
            let mut damped = jtj.clone();
            for a in 0..k {
                damped[a * k + a] = jtj[a * k + a] * (1.0 + lambda);
            }
            let Some(step) = solve_linear(&damped, &jtr, k) else {
                singular = true;
                break;
            };
            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
            let trial_chi2 = chi2_of(&model, &trial, data);
            if trial_chi2 < chi2 {
                let rel_step = step
                    .iter()
                    .zip(&params)
                    .map(|(s, p)| s.abs() / p.abs().max(1e-12))
                    .fold(0.0, f64::max);
                let rel_drop = (chi2 - trial_chi2) / chi2.max(1e-300);
                params = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_step < 1e-8 || rel_drop < 1e-10 || chi2 == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if singular {
            warnings.push("singular normal matrix; fit aborted".into());
            break;
        }
        if !accepted {
            // Damping saturated without improvement: we are at (or pinned
            // to) a stationary point.
            converged = true;
        }
    }
    if iterations == 500 && !converged {
        warnings.push("iteration limit (500) reached".into());
    }

    // Covariance from the undamped normal matrix at the optimum.
    let mut jtj = vec![0.0; k * k];
    for &(x, _, sigma) in data {
        let g = finite_difference_gradient(&model, &params, x);
        for a in 0..k {
            for b in a..k {
                jtj[a * k + b] += g[a] * g[b] / (sigma * sigma);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            jtj[a * k + b] = jtj[b * k + a];
        }
    }
    let dof = n.saturating_sub(k);
    let scale = if dof > 0 { chi2 / dof as f64 } else { 1.0 };
    let covariance = match invert(&jtj, k) {
        Some(mut inv) => {
            for v in inv.iter_mut() {
                *v *= scale;
            }
            inv
        }
        None => {
            warnings.push("singular normal matrix; standard errors unavailable".into());
            vec![f64::NAN; k * k]
        }
    };
    let result_params: Vec<Param> = names
        .iter()
        .zip(&params)
        .enumerate()
        .map(|(i, (name, &value))| Param {
            name: (*name).to_string(),
            value,
            std_error: covariance[i * k + i].max(0.0).sqrt(),
        })
        .collect();
    Ok(FitResult {
        params: result_params,
        derived: Vec::new(),
        residual_norm: chi2.sqrt(),
        iterations,
        converged: converged && !singular,
        warnings,
        covariance,
    })
}
