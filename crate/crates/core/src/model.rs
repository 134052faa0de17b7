//! Structural model, reduced form, probit forward map and data generator.
//!
//! ```text
//! X° = μx0 + βyx·Y° + μxz·Z + δ·W + μxq·Q + U
//! Y° = μy0 + βxy·X° + η·Z + μyw·W + μyq·Q + V
//! X = 1{X° > 0},  Y = 1{Y° > 0}
//! ```
//!
//! `Var(V) = σ²`, `Var(U) = γ1σ²`, `Cov(U, V) = γ2σ²`. With `η = δ = 0` the
//! instruments satisfy the exclusion restriction.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_confounder_structure, draw_bivariate_confounders, Matrix, RngStream};

/// Smallest admissible `|1 − βxy·βyx|`.
pub const FEEDBACK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    pub mu_x0: f64,
    pub mu_y0: f64,
    /// Effect of `X°` on `Y°`.
    pub beta_xy: f64,
    /// Effect of `Y°` on `X°`.
    pub beta_yx: f64,
    pub mu_xz: f64,
    pub mu_yw: f64,
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Direct effect of `Z` on `Y°`.
    #[serde(default)]
    pub eta: f64,
    /// Direct effect of `W` on `X°`.
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub mu_xq: f64,
    #[serde(default)]
    pub mu_yq: f64,
}

impl StructuralParams {
    /// The simulation benchmark: `βxy = −0.25`, `βyx = 0.45`, instrument
    /// strengths 0.65, `σ = 0.75`, independent confounders with equal
    /// variance and covariate coefficients 0.15.
    pub fn benchmark() -> Self {
        Self {
            mu_x0: 0.0,
            mu_y0: 0.0,
            beta_xy: -0.25,
            beta_yx: 0.45,
            mu_xz: 0.65,
            mu_yw: 0.65,
            sigma: 0.75,
            gamma1: 1.0,
            gamma2: 0.0,
            eta: 0.0,
            delta: 0.0,
            mu_xq: 0.15,
            mu_yq: 0.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mu_x0", self.mu_x0),
            ("mu_y0", self.mu_y0),
            ("beta_xy", self.beta_xy),
            ("beta_yx", self.beta_yx),
            ("mu_xz", self.mu_xz),
            ("mu_yw", self.mu_yw),
            ("sigma", self.sigma),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("eta", self.eta),
            ("delta", self.delta),
            ("mu_xq", self.mu_xq),
            ("mu_yq", self.mu_yq),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} is not finite ({v})")));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        check_confounder_structure(self.gamma1, self.gamma2)?;
        let product = self.beta_xy * self.beta_yx;
        if (1.0 - product).abs() < FEEDBACK_TOL {
            return Err(Error::FeedbackSingular { product });
        }
        Ok(())
    }
}

/// Coefficients of the solved system
/// `X° = θx0 + θxz·Z + θxw·W + θxq·Q + θxu·U + θxv·V` (and likewise `Y°`),
/// with `λ1 = Var(θxu·U + θxv·V)` and `λ2 = Var(θyu·U + θyv·V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedForm {
    pub c: f64,
    pub theta_x0: f64,
    pub theta_xz: f64,
    pub theta_xw: f64,
    pub theta_xq: f64,
    pub theta_y0: f64,
    pub theta_yz: f64,
    pub theta_yw: f64,
    pub theta_yq: f64,
    pub theta_xu: f64,
    pub theta_xv: f64,
    pub theta_yu: f64,
    pub theta_yv: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

pub fn reduced_form(p: &StructuralParams) -> Result<ReducedForm> {
    p.validate()?;
    let (bxy, byx) = (p.beta_xy, p.beta_yx);
    let c = 1.0 / (1.0 - bxy * byx);
    let s2 = p.sigma * p.sigma;
    Ok(ReducedForm {
        c,
        theta_x0: c * (p.mu_x0 + byx * p.mu_y0),
        theta_xz: c * (p.mu_xz + byx * p.eta),
        theta_xw: c * (p.delta + byx * p.mu_yw),
        theta_xq: c * (p.mu_xq + byx * p.mu_yq),
        theta_y0: c * (bxy * p.mu_x0 + p.mu_y0),
        theta_yz: c * (bxy * p.mu_xz + p.eta),
        theta_yw: c * (bxy * p.delta + p.mu_yw),
        theta_yq: c * (bxy * p.mu_xq + p.mu_yq),
        theta_xu: c,
        theta_xv: c * byx,
        theta_yu: c * bxy,
        theta_yv: c,
        lambda1: c * c * s2 * (p.gamma1 + 2.0 * p.gamma2 * byx + byx * byx),
        lambda2: c * c * s2 * (p.gamma1 * bxy * bxy + 2.0 * p.gamma2 * bxy + 1.0),
    })
}

/// The identifiable parameter `Λ = (ξx0, ξxz, ξxw, ξy0, ξyz, ξyw)`: the
/// intercept and instrument slopes of the probits of `X` and `Y` on `(Z, W)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbitCoefVector {
    pub xi_x0: f64,
    pub xi_xz: f64,
    pub xi_xw: f64,
    pub xi_y0: f64,
    pub xi_yz: f64,
    pub xi_yw: f64,
}

impl ProbitCoefVector {
    /// Slopes only; intercepts set to zero.
    pub fn from_slopes(xi_xz: f64, xi_xw: f64, xi_yz: f64, xi_yw: f64) -> Self {
        Self { xi_x0: 0.0, xi_xz, xi_xw, xi_y0: 0.0, xi_yz, xi_yw }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.xi_x0, self.xi_xz, self.xi_xw, self.xi_y0, self.xi_yz, self.xi_yw]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match *v {
            [xi_x0, xi_xz, xi_xw, xi_y0, xi_yz, xi_yw] => {
                Ok(Self { xi_x0, xi_xz, xi_xw, xi_y0, xi_yz, xi_yw })
            }
            _ => Err(Error::DimensionMismatch(format!("probit coefficient vector needs 6 entries, got {}", v.len()))),
        }
    }
}

/// Population probit coefficients of `X` and `Y` on `(1, Z, W)`, plus the
/// covariate slopes `(ξxq, ξyq)`.
pub fn probit_coefs_with_covariate(p: &StructuralParams) -> Result<(ProbitCoefVector, [f64; 2])> {
    let rf = reduced_form(p)?;
    let sx = rf.lambda1.sqrt();
    let sy = rf.lambda2.sqrt();
    Ok((
        ProbitCoefVector {
            xi_x0: rf.theta_x0 / sx,
            xi_xz: rf.theta_xz / sx,
            xi_xw: rf.theta_xw / sx,
            xi_y0: rf.theta_y0 / sy,
            xi_yz: rf.theta_yz / sy,
            xi_yw: rf.theta_yw / sy,
        },
        [rf.theta_xq / sx, rf.theta_yq / sy],
    ))
}

/// Forward map from structural truth to the identifiable probit parameter.
pub fn probit_coefs(p: &StructuralParams) -> Result<ProbitCoefVector> {
    Ok(probit_coefs_with_covariate(p)?.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub x: String,
    pub y: String,
    pub z: String,
    pub w: String,
    pub q: Vec<String>,
}

impl ColumnNames {
    pub fn standard(q_cols: usize) -> Self {
        let q = match q_cols {
            1 => vec!["q".to_string()],
            k => (1..=k).map(|i| format!("q{i}")).collect(),
        };
        Self { x: "x".into(), y: "y".into(), z: "z".into(), w: "w".into(), q }
    }
}

/// Column store of the observed variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<bool>,
    pub y: Vec<bool>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// n × k extra covariates, if any.
    pub q: Option<Matrix>,
    pub names: ColumnNames,
}

impl Dataset {
    pub fn new(x: Vec<bool>, y: Vec<bool>, z: Vec<f64>, w: Vec<f64>, q: Option<Matrix>) -> Result<Self> {
        let k = q.as_ref().map_or(0, |m| m.ncols());
        Self::with_names(x, y, z, w, q, ColumnNames::standard(k))
    }

    pub fn with_names(
        x: Vec<bool>,
        y: Vec<bool>,
        z: Vec<f64>,
        w: Vec<f64>,
        q: Option<Matrix>,
        names: ColumnNames,
    ) -> Result<Self> {
        let n = x.len();
        let q_rows = q.as_ref().map_or(n, |m| m.nrows());
        if y.len() != n || z.len() != n || w.len() != n || q_rows != n {
            return Err(Error::DimensionMismatch(format!(
                "column lengths differ: x {n}, y {}, z {}, w {}, q {q_rows}",
                y.len(),
                z.len(),
                w.len()
            )));
        }
        if names.q.len() != q.as_ref().map_or(0, |m| m.ncols()) {
            return Err(Error::DimensionMismatch("covariate names do not match covariate columns".into()));
        }
        Ok(Self { x, y, z, w, q, names })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.q.as_ref().map_or(0, |m| m.ncols())
    }

    /// Rows `indices`, in that order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let q = self
            .q
            .as_ref()
            .map(|m| Matrix::from_fn(indices.len(), m.ncols(), |i, j| m[(indices[i], j)]));
        Dataset {
            x: indices.iter().map(|&i| self.x[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            z: indices.iter().map(|&i| self.z[i]).collect(),
            w: indices.iter().map(|&i| self.w[i]).collect(),
            q,
            names: self.names.clone(),
        }
    }

    /// Design `[1, lead?, Z, W, Q?]` where `lead` is an optional binary
    /// regressor placed right after the intercept.
    pub fn design(&self, lead: Option<&[bool]>, include_q: bool) -> Matrix {
        let n = self.n();
        let k = if include_q { self.n_covariates() } else { 0 };
        let offset = usize::from(lead.is_some());
        let mut m = Matrix::zeros(n, 3 + offset + k);
        m.column_mut(0).fill(1.0);
        if let Some(b) = lead {
            for (i, &v) in b.iter().enumerate() {
                m[(i, 1)] = if v { 1.0 } else { 0.0 };
            }
        }
        m.column_mut(1 + offset).copy_from_slice(&self.z);
        m.column_mut(2 + offset).copy_from_slice(&self.w);
        if let (true, Some(q)) = (k > 0, &self.q) {
            m.columns_mut(3 + offset, k).copy_from(q);
        }
        m
    }
}

/// How the instruments are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IvScenario {
    /// `Z, W ~ N(0, 1)` independently.
    GaussianIvs,
    /// `Z, W ~ Unif(−1, 1)` independently.
    UniformIvs,
    /// Fixed instrument values supplied by the caller, one per row.
    Custom { z: Vec<f64>, w: Vec<f64> },
}

/// Draws `n` rows from the structural model.
///
/// Draw order is: covariate `Q ~ N(0, 1)`, confounders, then instruments,
/// so a given stream always produces the same data. Latent indices come
/// from the reduced form, the exact solution of the simultaneous system.
pub fn simulate(p: &StructuralParams, scenario: &IvScenario, n: usize, stream: RngStream) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let rf = reduced_form(p)?;
    let mut rng = stream.rng();

    let q: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let uv = draw_bivariate_confounders(&mut rng, n, p.sigma, p.gamma1, p.gamma2)?;
    let (z, w): (Vec<f64>, Vec<f64>) = match scenario {
        IvScenario::GaussianIvs => (0..n)
            .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .unzip(),
        IvScenario::UniformIvs => (0..n)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .unzip(),
        IvScenario::Custom { z, w } => {
            if z.len() != n || w.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "custom instruments have lengths ({}, {}) for n = {n}",
                    z.len(),
                    w.len()
                )));
            }
            (z.clone(), w.clone())
        }
    };

    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (u, v) = uv[i];
        let xs = rf.theta_x0 + rf.theta_xz * z[i] + rf.theta_xw * w[i] + rf.theta_xq * q[i] + rf.theta_xu * u + rf.theta_xv * v;
        let ys = rf.theta_y0 + rf.theta_yz * z[i] + rf.theta_yw * w[i] + rf.theta_yq * q[i] + rf.theta_yu * u + rf.theta_yv * v;
        x.push(xs > 0.0);
        y.push(ys > 0.0);
    }
    Dataset::new(x, y, z, w, Some(Matrix::from_vec(n, 1, q)))
}
