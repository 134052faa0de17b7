//! Maximum-likelihood probit regression.
//!
//! Newton–Raphson on the log-likelihood with the observed information as the
//! Hessian and step halving as a safeguard. The fit keeps the per-observation
//! scores so that several fits on the same rows can be combined in a
//! stacked sandwich covariance.

use crate::error::{Error, Result};
use crate::numerics::{log_cdf_and_mills, std_normal_quantile, Cholesky, Matrix, Vector};

/// Coefficients this large give fitted probabilities that are exactly 0 or 1
/// in double precision.
pub const DIVERGENCE_BOUND: f64 = 25.0;
const MAX_HALVINGS: usize = 30;
const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute score component.
    pub tol: f64,
}

impl Default for ProbitOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct ProbitFit {
    /// Intercept first, then regressors in design order.
    pub coefficients: Vec<f64>,
    /// Inverse observed information at the optimum.
    pub covariance: Matrix,
    /// Observed information (negative Hessian) summed over observations.
    pub information: Matrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// n × p matrix of score contributions at the optimum.
    pub per_observation_scores: Matrix,
    /// Log-likelihood at the start and after every accepted step.
    pub log_likelihood_trace: Vec<f64>,
}

impl ProbitFit {
    pub fn n_obs(&self) -> usize {
        self.per_observation_scores.nrows()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }

    /// Sum of the per-observation scores.
    pub fn score(&self) -> Vec<f64> {
        self.per_observation_scores.row_sum().iter().copied().collect()
    }

    /// Asymptotic covariance of `√n (β̂ − β)`: `A⁻¹ M A⁻¹` with `A` the mean
    /// information and `M` the mean outer product of scores.
    pub fn sandwich_covariance(&self) -> Matrix {
        let scores = &self.per_observation_scores;
        let meat = scores.transpose() * scores;
        &self.covariance * meat * &self.covariance * self.n_obs() as f64
    }

    pub fn robust_std_errors(&self) -> Vec<f64> {
        let n = self.n_obs() as f64;
        self.sandwich_covariance().diagonal().iter().map(|v| (v / n).sqrt()).collect()
    }
}

struct Evaluation {
    log_likelihood: f64,
    gradient: Vector,
    information: Matrix,
}

fn check_inputs(y: &[bool], x: &Matrix) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "response has {} rows, design has {}",
            y.len(),
            x.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("design matrix has non-finite entries".into()));
    }
    Ok(())
}

fn linear_predictor(x: &Matrix, coefs: &[f64]) -> Vector {
    x * Vector::from_column_slice(coefs)
}

/// Sum of `y·log Φ(xβ) + (1 − y)·log Φ(−xβ)`.
pub fn probit_loglik(coefs: &[f64], y: &[bool], x: &Matrix) -> Result<f64> {
    check_inputs(y, x)?;
    if coefs.len() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} columns",
            coefs.len(),
            x.ncols()
        )));
    }
    let eta = linear_predictor(x, coefs);
    Ok(y.iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| log_cdf_and_mills(if yi { e } else { -e }).0)
        .sum())
}

fn evaluate(coefs: &[f64], y: &[bool], x: &Matrix, with_information: bool) -> Evaluation {
    let eta = linear_predictor(x, coefs);
    let n = y.len();
    let p = x.ncols();
    let mut log_likelihood = 0.0;
    let mut g = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(if with_information { n } else { 0 });
    for (&yi, &e) in y.iter().zip(eta.iter()) {
        let sign = if yi { 1.0 } else { -1.0 };
        let t = sign * e;
        let (log_cdf, mills) = log_cdf_and_mills(t);
        log_likelihood += log_cdf;
        g.push(sign * mills);
        if with_information {
            w.push(mills * (t + mills));
        }
    }

    let mut gradient = Vector::zeros(p);
    for j in 0..p {
        let col = x.column(j);
        gradient[j] = col.iter().zip(&g).map(|(a, b)| a * b).sum();
    }
    let mut information = Matrix::zeros(p, p);
    if with_information {
        for j in 0..p {
            let cj = x.column(j);
            for k in 0..=j {
                let ck = x.column(k);
                let v: f64 = cj.iter().zip(ck.iter()).zip(&w).map(|((a, b), wi)| a * b * wi).sum();
                information[(j, k)] = v;
                information[(k, j)] = v;
            }
        }
    }
    Evaluation { log_likelihood, gradient, information }
}

fn check_rank(x: &Matrix) -> Result<()> {
    let gram = x.transpose() * x;
    let p = gram.nrows();
    let scale: Vec<f64> = (0..p).map(|j| gram[(j, j)].sqrt()).collect();
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::RankDeficientDesign);
    }
    let normalized = Matrix::from_fn(p, p, |i, j| gram[(i, j)] / (scale[i] * scale[j]));
    let chol = Cholesky::new(&normalized).map_err(|_| Error::RankDeficientDesign)?;
    if chol.lower().diagonal().iter().any(|&d| d * d < 1e-12) {
        return Err(Error::RankDeficientDesign);
    }
    Ok(())
}

/// Fits `P(y = 1 | x) = Φ(xβ)` by maximum likelihood.
///
/// `x` must carry the intercept as its first column when one is wanted; the
/// starting point is then `(Φ⁻¹(ȳ), 0, …, 0)`.
pub fn fit_probit(y: &[bool], x: &Matrix, opts: &ProbitOptions) -> Result<ProbitFit> {
    check_inputs(y, x)?;
    let n = y.len();
    let p = x.ncols();
    if p == 0 || n <= p {
        return Err(Error::InvalidParameter(format!("need n > p, got n = {n}, p = {p}")));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        // an intercept alone separates a single-class response
        return Err(Error::SeparationDetected {
            coefficient: 0,
            value: if positives == 0 { f64::NEG_INFINITY } else { f64::INFINITY },
        });
    }
    check_rank(x)?;

    let mut coefs = vec![0.0; p];
    if x.column(0).iter().all(|&v| v == 1.0) {
        coefs[0] = std_normal_quantile(positives as f64 / n as f64)?;
    }

    let mut current = evaluate(&coefs, y, x, true);
    let mut trace = vec![current.log_likelihood];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        if current.gradient.amax() <= opts.tol {
            converged = true;
            break;
        }
        let step = Cholesky::new(&current.information)
            .map_err(|_| Error::RankDeficientDesign)?
            .solve(&current.gradient)?;
        iterations += 1;

        let small_step = step.amax() <= STEP_TOL;
        // Accept ties at rounding level: near the optimum the change in the
        // log-likelihood is below its floating-point resolution.
        let slack = 64.0 * f64::EPSILON * current.log_likelihood.abs();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = coefs.iter().zip(step.iter()).map(|(c, s)| c + scale * s).collect();
            let eval = evaluate(&trial, y, x, true);
            if eval.log_likelihood.is_finite()
                && eval.log_likelihood >= current.log_likelihood - slack
            {
                accepted = Some((trial, eval));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, eval)) = accepted else {
            return Err(Error::NotConverged { iterations, coefficients: coefs });
        };
        let improved = eval.log_likelihood > current.log_likelihood;
        coefs = trial;
        current = eval;
        trace.push(current.log_likelihood);

        if improved {
            if let Some((j, &v)) = coefs.iter().enumerate().find(|(_, v)| v.abs() > DIVERGENCE_BOUND) {
                return Err(Error::SeparationDetected { coefficient: j, value: v });
            }
        }
        if small_step {
            converged = current.gradient.amax() <= opts.tol.max(STEP_TOL);
            break;
        }
    }
    if !converged {
        if current.gradient.amax() <= opts.tol {
            converged = true;
        } else {
            return Err(Error::NotConverged { iterations, coefficients: coefs });
        }
    }

    let covariance = Cholesky::new(&current.information)
        .map_err(|_| Error::RankDeficientDesign)?
        .inverse();
    let eta = linear_predictor(x, &coefs);
    let mut scores = Matrix::zeros(n, p);
    for (i, (&yi, &e)) in y.iter().zip(eta.iter()).enumerate() {
        let sign = if yi { 1.0 } else { -1.0 };
        let g = sign * log_cdf_and_mills(sign * e).1;
        for j in 0..p {
            scores[(i, j)] = g * x[(i, j)];
        }
    }

    Ok(ProbitFit {
        coefficients: coefs,
        covariance,
        information: current.information,
        log_likelihood: current.log_likelihood,
        iterations,
        converged,
        per_observation_scores: scores,
        log_likelihood_trace: trace,
    })
}

/// Builds `[1, columns...]` as an n × (k + 1) design.
pub fn design_with_intercept(columns: &[&[f64]]) -> Result<Matrix> {
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch("design columns differ in length".into()));
    }
    let mut x = Matrix::zeros(n, columns.len() + 1);
    x.column_mut(0).fill(1.0);
    for (j, col) in columns.iter().enumerate() {
        x.column_mut(j + 1).copy_from_slice(col);
    }
    Ok(x)
}

/// Sandwich covariance of the stacked coefficients of two fits on the same
/// rows, restricted to (intercept, first slope, second slope) of each fit:
/// `Λ = (ξx0, ξxz, ξxw, ξy0, ξyz, ξyw)`.
///
/// Scaled for `√n (Λ̂ − Λ)`. Off-diagonal blocks carry the dependence
/// induced by fitting both models to the same observations.
pub fn stacked_score_covariance(fit_x: &ProbitFit, fit_y: &ProbitFit) -> Result<Matrix> {
    let full = stacked_score_covariance_full(fit_x, fit_y)?;
    let px = fit_x.coefficients.len();
    if px < 3 || fit_y.coefficients.len() < 3 {
        return Err(Error::DimensionMismatch(
            "each fit needs an intercept and two instrument slopes".into(),
        ));
    }
    let idx = [0, 1, 2, px, px + 1, px + 2];
    Ok(Matrix::from_fn(6, 6, |i, j| full[(idx[i], idx[j])]))
}

/// Same as [`stacked_score_covariance`] over every coefficient of both fits.
pub fn stacked_score_covariance_full(fit_x: &ProbitFit, fit_y: &ProbitFit) -> Result<Matrix> {
    let n = fit_x.n_obs();
    if n != fit_y.n_obs() {
        return Err(Error::AlignmentError { left: n, right: fit_y.n_obs() });
    }
    let px = fit_x.coefficients.len();
    let py = fit_y.coefficients.len();
    let mut bread = Matrix::zeros(px + py, px + py);
    bread.view_mut((0, 0), (px, px)).copy_from(&fit_x.covariance);
    bread.view_mut((px, px), (py, py)).copy_from(&fit_y.covariance);
    let mut scores = Matrix::zeros(n, px + py);
    scores.view_mut((0, 0), (n, px)).copy_from(&fit_x.per_observation_scores);
    scores.view_mut((0, px), (n, py)).copy_from(&fit_y.per_observation_scores);
    let meat = scores.transpose() * scores;
    Ok(&bread * meat * &bread * n as f64)
}
