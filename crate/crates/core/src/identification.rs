//! Point identification when both instruments are valid and the
//! confounders are independent with equal variance, the plug-in estimator
//! built on it, and the naive comparator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, ProbitCoefVector};
use crate::probit::{fit_probit, ProbitFit, ProbitOptions};
use crate::sensitivity::{SensitivityParams, SolverKind};

/// Denominators below this magnitude are treated as zero.
pub const RATIO_TOL: f64 = 1e-12;

/// Square-root arguments of the closed-form map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    /// `ξxz²(ξxw² − ξyw²) / (ξyw²(ξyz² − ξxz²))`
    pub arg_xy: f64,
    /// `ξyw²(ξyz² − ξxz²) / (ξxz²(ξxw² − ξyw²))`
    pub arg_yx: f64,
}

pub fn feasibility(xi: &ProbitCoefVector) -> Result<Feasibility> {
    if xi.xi_xz.abs() < RATIO_TOL {
        return Err(Error::DegenerateRatio("xi_xz is zero"));
    }
    if xi.xi_yw.abs() < RATIO_TOL {
        return Err(Error::DegenerateRatio("xi_yw is zero"));
    }
    let (xz2, xw2, yz2, yw2) = (xi.xi_xz.powi(2), xi.xi_xw.powi(2), xi.xi_yz.powi(2), xi.xi_yw.powi(2));
    let d_w = xw2 - yw2;
    let d_z = yz2 - xz2;
    if d_w == 0.0 || d_z == 0.0 {
        return Err(Error::DegenerateRatio("equal squared slopes"));
    }
    Ok(Feasibility {
        arg_xy: xz2 * d_w / (yw2 * d_z),
        arg_yx: yw2 * d_z / (xz2 * d_w),
    })
}

/// Closed-form `(β_xy, β_yx)` from the four instrument slopes:
///
/// ```text
/// β_xy = (ξyz/ξxz)·√[ξxz²(ξxw² − ξyw²) / (ξyw²(ξyz² − ξxz²))]
/// β_yx = (ξxw/ξyw)·√[ξyw²(ξyz² − ξxz²) / (ξxz²(ξxw² − ξyw²))]
/// ```
///
/// The ratios carry the signs; the square roots are nonnegative.
pub fn identify_prop1(xi: &ProbitCoefVector) -> Result<(f64, f64)> {
    let f = feasibility(xi)?;
    if f.arg_xy < 0.0 || f.arg_yx < 0.0 {
        return Err(Error::InfeasibleIdentification {
            sign_xy: (xi.xi_xw.powi(2) - xi.xi_yw.powi(2)).signum(),
            sign_yx: (xi.xi_yz.powi(2) - xi.xi_xz.powi(2)).signum(),
        });
    }
    Ok((
        xi.xi_yz / xi.xi_xz * f.arg_xy.sqrt(),
        xi.xi_xw / xi.xi_yw * f.arg_yx.sqrt(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimationMethod {
    /// Instrumental-variable plug-in estimator.
    Iv,
    /// Single-equation probits with the other outcome as a regressor.
    Naive,
    /// Sensitivity-analysis solver at fixed sensitivity parameters.
    Sensitivity { solver: SolverKind, params: SensitivityParams },
}

impl EstimationMethod {
    pub fn label(&self) -> &'static str {
        match self {
            EstimationMethod::Iv => "IV",
            EstimationMethod::Naive => "Naive",
            EstimationMethod::Sensitivity { .. } => "Sensitivity",
        }
    }

    /// Alternate name used in comparison tables.
    pub fn alias(&self) -> Option<&'static str> {
        match self {
            EstimationMethod::Naive => Some("GLS"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitSummary {
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl From<&ProbitFit> for FitSummary {
    fn from(f: &ProbitFit) -> Self {
        Self { converged: f.converged, iterations: f.iterations, log_likelihood: f.log_likelihood }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Diagnostics {
    pub n: usize,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub feasibility: Option<Feasibility>,
    pub fit_x: Option<FitSummary>,
    pub fit_y: Option<FitSummary>,
    pub lambda_hat: Option<ProbitCoefVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub beta_xy: f64,
    pub beta_yx: f64,
    pub se_xy: Option<f64>,
    pub se_yx: Option<f64>,
    pub ci_xy: Option<(f64, f64)>,
    pub ci_yx: Option<(f64, f64)>,
    pub method: EstimationMethod,
    pub diagnostics: Diagnostics,
}

impl EffectEstimate {
    pub fn point(beta_xy: f64, beta_yx: f64, method: EstimationMethod) -> Self {
        Self {
            beta_xy,
            beta_yx,
            se_xy: None,
            se_yx: None,
            ci_xy: None,
            ci_yx: None,
            method,
            diagnostics: Diagnostics::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg1Options {
    /// Add the dataset's covariates to both probit designs.
    pub include_q: bool,
    pub probit: ProbitOptions,
}

impl Default for Alg1Options {
    fn default() -> Self {
        Self { include_q: true, probit: ProbitOptions::default() }
    }
}

/// Probits of `X` and of `Y` on `(1, Z, W[, Q])`.
pub fn fit_reduced_probits(d: &Dataset, opts: &Alg1Options) -> Result<(ProbitFit, ProbitFit)> {
    let design = d.design(None, opts.include_q);
    let fx = fit_probit(&d.x, &design, &opts.probit)?;
    let fy = fit_probit(&d.y, &design, &opts.probit)?;
    Ok((fx, fy))
}

/// `Λ̂` from the two reduced probits: intercepts and the `Z`, `W` slopes.
pub fn lambda_hat(fit_x: &ProbitFit, fit_y: &ProbitFit) -> ProbitCoefVector {
    let (a, b) = (&fit_x.coefficients, &fit_y.coefficients);
    ProbitCoefVector { xi_x0: a[0], xi_xz: a[1], xi_xw: a[2], xi_y0: b[0], xi_yz: b[1], xi_yw: b[2] }
}

fn reduced_diagnostics(d: &Dataset, fx: &ProbitFit, fy: &ProbitFit, xi: &ProbitCoefVector) -> Diagnostics {
    Diagnostics {
        n: d.n(),
        k1: Some(xi.xi_yz / xi.xi_xz),
        k2: Some(xi.xi_xw / xi.xi_yw),
        feasibility: feasibility(xi).ok(),
        fit_x: Some(fx.into()),
        fit_y: Some(fy.into()),
        lambda_hat: Some(*xi),
    }
}

/// Plug-in estimator: fit the two reduced probits, then map the instrument
/// slopes through [`identify_prop1`].
pub fn estimate_alg1(d: &Dataset, opts: &Alg1Options) -> Result<EffectEstimate> {
    let (fx, fy) = fit_reduced_probits(d, opts)?;
    let xi = lambda_hat(&fx, &fy);
    let (beta_xy, beta_yx) = identify_prop1(&xi)?;
    let mut est = EffectEstimate::point(beta_xy, beta_yx, EstimationMethod::Iv);
    est.diagnostics = reduced_diagnostics(d, &fx, &fy, &xi);
    Ok(est)
}

/// Plug-in estimator with a sensitivity solver in place of the closed form.
pub fn estimate_sensitivity(
    d: &Dataset,
    solver: SolverKind,
    params: &SensitivityParams,
    opts: &Alg1Options,
) -> Result<EffectEstimate> {
    let (fx, fy) = fit_reduced_probits(d, opts)?;
    let xi = lambda_hat(&fx, &fy);
    let (beta_xy, beta_yx) = solver.solve(&xi, params)?;
    let method = match solver {
        SolverKind::Prop1 => EstimationMethod::Iv,
        _ => EstimationMethod::Sensitivity { solver, params: *params },
    };
    let mut est = EffectEstimate::point(beta_xy, beta_yx, method);
    est.diagnostics = reduced_diagnostics(d, &fx, &fy, &xi);
    Ok(est)
}

/// Probit of `Y` on `(1, X, Z, W[, Q])` and of `X` on `(1, Y, Z, W[, Q])`;
/// the coefficients on the other outcome are reported with their
/// model-based standard errors.
pub fn estimate_naive(d: &Dataset, opts: &Alg1Options) -> Result<EffectEstimate> {
    let fy = fit_probit(&d.y, &d.design(Some(&d.x), opts.include_q), &opts.probit)?;
    let fx = fit_probit(&d.x, &d.design(Some(&d.y), opts.include_q), &opts.probit)?;
    let mut est = EffectEstimate::point(fy.coefficients[1], fx.coefficients[1], EstimationMethod::Naive);
    est.se_xy = Some(fy.std_errors()[1]);
    est.se_yx = Some(fx.std_errors()[1]);
    est.diagnostics = Diagnostics {
        n: d.n(),
        fit_x: Some((&fx).into()),
        fit_y: Some((&fy).into()),
        ..Diagnostics::default()
    };
    Ok(est)
}
