//! Grid sweeps over sensitivity parameters.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identification::{fit_reduced_probits, lambda_hat, Alg1Options};
use crate::inference::{percentile_interval, resample_indices, sample_sd};
use crate::model::{probit_coefs_with_covariate, simulate, Dataset, IvScenario, ProbitCoefVector, StructuralParams};
use crate::numerics::RngStream;

use super::{EtaDeltaMode, SensitivityParams, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Gamma1,
    Gamma2,
    Eta0,
    Delta0,
}

impl Param {
    pub fn name(&self) -> &'static str {
        match self {
            Param::Gamma1 => "gamma1",
            Param::Gamma2 => "gamma2",
            Param::Eta0 => "eta0",
            Param::Delta0 => "delta0",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gamma1" => Ok(Param::Gamma1),
            "gamma2" => Ok(Param::Gamma2),
            "eta0" => Ok(Param::Eta0),
            "delta0" => Ok(Param::Delta0),
            other => Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        }
    }

    fn set(&self, sp: &mut SensitivityParams, v: f64) {
        match self {
            Param::Gamma1 => sp.gamma1 = v,
            Param::Gamma2 => sp.gamma2 = v,
            Param::Eta0 => sp.eta0 = v,
            Param::Delta0 => sp.delta0 = v,
        }
    }
}

/// One grid dimension. Several parameters on one axis move together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub params: Vec<Param>,
    pub values: Vec<f64>,
}

/// Inclusive grid `min, min + step, …, max`. Values are rounded to 12
/// decimals so that accumulated steps print cleanly.
pub fn grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || min > max || !(step > 0.0) {
        return Err(Error::Config(format!("malformed grid {min}:{max}:{step}")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| ((min + i as f64 * step) * 1e12).round() / 1e12).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    /// Values of parameters not on any axis.
    pub base: SensitivityParams,
    pub axes: Vec<Axis>,
}

impl SweepPlan {
    /// Cartesian product of the axes, first axis slowest.
    pub fn cells(&self) -> Result<Vec<SensitivityParams>> {
        if self.axes.iter().any(|a| a.values.is_empty() || a.params.is_empty()) {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        let mut seen = Vec::new();
        for p in self.axes.iter().flat_map(|a| &a.params) {
            if seen.contains(p) {
                return Err(Error::Config(format!("parameter {} appears on two axes", p.name())));
            }
            seen.push(*p);
        }
        let mut cells = vec![self.base];
        for axis in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    axis.values.iter().map(move |&v| {
                        let mut c = cell;
                        for p in &axis.params {
                            p.set(&mut c, v);
                        }
                        c
                    })
                })
                .collect();
        }
        Ok(cells)
    }
}

pub enum SweepSource<'a> {
    /// Fixed probit coefficients; `truth` enables the bias columns.
    Coefficients { xi: ProbitCoefVector, truth: Option<(f64, f64)> },
    /// Observed data. Point estimates come from the full sample; with
    /// `replicates ≥ 2` the same bootstrap resamples are reused in every cell.
    Data { data: &'a Dataset, replicates: usize, stream: RngStream, truth: Option<(f64, f64)> },
    /// Fresh data per cell and replicate from `params` with the cell's
    /// confounder structure and instrument violations substituted in.
    Simulation { params: StructuralParams, scenario: IvScenario, n: usize, replicates: usize, stream: RngStream },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub solver: SolverKind,
    pub level: f64,
    pub estimation: Alg1Options,
}

impl SweepOptions {
    pub fn new(solver: SolverKind) -> Self {
        Self { solver, level: 0.95, estimation: Alg1Options::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub params: SensitivityParams,
    /// Point estimate, or the replicate mean for simulation sweeps.
    pub beta_xy: f64,
    pub beta_yx: f64,
    pub bias_xy: Option<f64>,
    pub bias_yx: Option<f64>,
    pub sd_xy: Option<f64>,
    pub sd_yx: Option<f64>,
    pub ci_xy: Option<(f64, f64)>,
    pub ci_yx: Option<(f64, f64)>,
    pub n_success: usize,
    pub n_fail: usize,
    pub failures: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axes: Vec<Axis>,
    pub solver: SolverKind,
    pub rows: Vec<CellResult>,
}

/// The structural truth behind a simulation cell.
pub fn cell_truth(base: &StructuralParams, sp: &SensitivityParams) -> StructuralParams {
    let (eta, delta) = match sp.mode {
        EtaDeltaMode::RelativeToIv => (sp.eta0 * base.mu_xz, sp.delta0 * base.mu_yw),
        EtaDeltaMode::SignalToNoise => (sp.eta0 * base.sigma, sp.delta0 * base.sigma),
    };
    StructuralParams { gamma1: sp.gamma1, gamma2: sp.gamma2, eta, delta, ..*base }
}

struct Tally {
    estimates: Vec<(f64, f64)>,
    failures: BTreeMap<String, usize>,
}

impl Tally {
    fn new() -> Self {
        Self { estimates: Vec::new(), failures: BTreeMap::new() }
    }

    fn push(&mut self, r: Result<(f64, f64)>) -> Result<()> {
        match r {
            Ok(p) => self.estimates.push(p),
            Err(Error::Config(m)) => return Err(Error::Config(m)),
            Err(e) => *self.failures.entry(e.code().to_string()).or_insert(0) += 1,
        }
        Ok(())
    }

    fn n_fail(&self) -> usize {
        self.failures.values().sum()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn spread(t: &Tally, level: f64) -> Result<Spread> {
    if t.estimates.len() < 2 {
        return Ok((None, None, None, None));
    }
    let xs: Vec<f64> = t.estimates.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = t.estimates.iter().map(|p| p.1).collect();
    Ok((
        Some(sample_sd(&xs)),
        Some(sample_sd(&ys)),
        Some(percentile_interval(&xs, level)?),
        Some(percentile_interval(&ys, level)?),
    ))
}

fn bias(point: (f64, f64), truth: Option<(f64, f64)>) -> (Option<f64>, Option<f64>) {
    match truth {
        Some((tx, ty)) if point.0.is_finite() => (Some(point.0 - tx), Some(point.1 - ty)),
        _ => (None, None),
    }
}

/// Only configuration errors; an infeasible cell is a per-cell failure.
fn check_configuration(solver: &SolverKind, sp: &SensitivityParams) -> Result<()> {
    match solver.check_params(sp) {
        Err(Error::Config(m)) => Err(Error::Config(m)),
        _ => Ok(()),
    }
}

/// Evaluates `opts.solver` at every cell of `plan`.
///
/// Cells are independent; per-cell failures are tallied in the row and
/// never abort the sweep. Configuration errors, such as a solver applied
/// outside the parameter region it assumes, abort.
pub fn sweep(source: &SweepSource<'_>, plan: &SweepPlan, opts: &SweepOptions) -> Result<SweepTable> {
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::Config(format!("level must be in (0, 1), got {}", opts.level)));
    }
    let cells = plan.cells()?;
    for sp in &cells {
        check_configuration(&opts.solver, sp)?;
    }
    let rows = match source {
        SweepSource::Coefficients { xi, truth } => cells
            .iter()
            .map(|sp| {
                let mut t = Tally::new();
                t.push(opts.solver.solve(xi, sp))?;
                let point = t.estimates.first().copied().unwrap_or((f64::NAN, f64::NAN));
                let (bias_xy, bias_yx) = bias(point, *truth);
                Ok(row(*sp, point, bias_xy, bias_yx, (None, None, None, None), &t))
            })
            .collect::<Result<Vec<_>>>()?,
        SweepSource::Data { data, replicates, stream, truth } => {
            sweep_data(data, *replicates, *stream, *truth, &cells, opts)?
        }
        SweepSource::Simulation { params, scenario, n, replicates, stream } => {
            params.validate()?;
            if *replicates == 0 || *n == 0 {
                return Err(Error::Config("simulation sweep needs n >= 1 and replicates >= 1".into()));
            }
            cells
                .par_iter()
                .enumerate()
                .map(|(i, sp)| sweep_simulated_cell(params, scenario, *n, *replicates, stream.substream(i as u64), sp, opts))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(SweepTable { axes: plan.axes.clone(), solver: opts.solver, rows })
}

type Spread = (Option<f64>, Option<f64>, Option<(f64, f64)>, Option<(f64, f64)>);

fn row(sp: SensitivityParams, point: (f64, f64), bias_xy: Option<f64>, bias_yx: Option<f64>, s: Spread, t: &Tally) -> CellResult {
    CellResult {
        params: sp,
        beta_xy: point.0,
        beta_yx: point.1,
        bias_xy,
        bias_yx,
        sd_xy: s.0,
        sd_yx: s.1,
        ci_xy: s.2,
        ci_yx: s.3,
        n_success: t.estimates.len(),
        n_fail: t.n_fail(),
        failures: t.failures.clone(),
    }
}

fn sweep_data(
    data: &Dataset,
    replicates: usize,
    stream: RngStream,
    truth: Option<(f64, f64)>,
    cells: &[SensitivityParams],
    opts: &SweepOptions,
) -> Result<Vec<CellResult>> {
    let full = fit_reduced_probits(data, &opts.estimation).map(|(fx, fy)| lambda_hat(&fx, &fy));
    let boot: Vec<Result<ProbitCoefVector>> = if replicates >= 2 {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let sample = data.select_rows(&resample_indices(data.n(), stream.substream(r as u64)));
                fit_reduced_probits(&sample, &opts.estimation).map(|(fx, fy)| lambda_hat(&fx, &fy))
            })
            .collect()
    } else {
        Vec::new()
    };
    cells
        .iter()
        .map(|sp| {
            let point = full.as_ref().map_err(Clone::clone).and_then(|xi| opts.solver.solve(xi, sp));
            let mut t = Tally::new();
            if boot.is_empty() {
                t.push(point.clone())?;
            }
            for xi in &boot {
                t.push(xi.as_ref().map_err(Clone::clone).and_then(|xi| opts.solver.solve(xi, sp)))?;
            }
            let point = point.unwrap_or((f64::NAN, f64::NAN));
            let (bias_xy, bias_yx) = bias(point, truth);
            Ok(row(*sp, point, bias_xy, bias_yx, spread(&t, opts.level)?, &t))
        })
        .collect()
}

fn sweep_simulated_cell(
    base: &StructuralParams,
    scenario: &IvScenario,
    n: usize,
    replicates: usize,
    stream: RngStream,
    sp: &SensitivityParams,
    opts: &SweepOptions,
) -> Result<CellResult> {
    let truth = cell_truth(base, sp);
    let mut t = Tally::new();
    // an infeasible cell (for instance γ2² > γ1) fails every replicate
    let feasible = opts.solver.check_params(sp).and_then(|_| probit_coefs_with_covariate(&truth));
    for r in 0..replicates {
        let outcome = feasible.clone().and_then(|_| {
            let d = simulate(&truth, scenario, n, stream.substream(r as u64))?;
            let (fx, fy) = fit_reduced_probits(&d, &opts.estimation)?;
            opts.solver.solve(&lambda_hat(&fx, &fy), sp)
        });
        t.push(outcome)?;
    }
    let point = if t.estimates.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            mean(&t.estimates.iter().map(|p| p.0).collect::<Vec<_>>()),
            mean(&t.estimates.iter().map(|p| p.1).collect::<Vec<_>>()),
        )
    };
    let (bias_xy, bias_yx) = bias(point, Some((truth.beta_xy, truth.beta_yx)));
    Ok(row(*sp, point, bias_xy, bias_yx, spread(&t, opts.level)?, &t))
}
