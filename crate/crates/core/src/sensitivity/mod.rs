//! Sensitivity analysis for correlated or unequal confounders and for
//! instruments with direct effects on the other outcome.
//!
//! With `R = √(λ1/λ2)` and the instrument violations written relative to the
//! instrument strengths (`η0 = η/μxz`, `δ0 = δ/μyw`), the slope ratios obey
//!
//! ```text
//! k1 = ξyz/ξxz = R·(βxy + η0)/(1 + βyx·η0)
//! k2 = ξxw/ξyw = (βyx + δ0)/((1 + βxy·δ0)·R)
//! R² = (γ1 + 2γ2·βyx + βyx²)/(γ1·βxy² + 2γ2·βxy + 1)
//! ```
//!
//! Every solver here inverts a special case of this system.

mod solvers;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identification::{identify_prop1, RATIO_TOL};
use crate::model::ProbitCoefVector;
use crate::numerics::check_confounder_structure;

pub use solvers::{
    constraint_residual, prop4_printed_beta_xy, solve_corollary1, solve_corollary2, solve_corollary2_printed,
    solve_corollary3, solve_general, solve_general_with, solve_prop3, solve_prop3_printed, GeneralSolverOptions,
};
pub use sweep::{cell_truth, grid, sweep, Axis, CellResult, Param, SweepOptions, SweepPlan, SweepSource, SweepTable};

/// Residual bound every reported candidate must meet.
pub const CERTIFY_TOL: f64 = 1e-8;

/// How `η` and `δ` are scaled into `η0` and `δ0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaDeltaMode {
    /// `η0 = η/μxz`, `δ0 = δ/μyw`.
    RelativeToIv,
    /// `η0 = η/σ`, `δ0 = δ/σ`.
    SignalToNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub eta0: f64,
    pub delta0: f64,
    pub mode: EtaDeltaMode,
}

impl Default for SensitivityParams {
    fn default() -> Self {
        Self::baseline()
    }
}

impl SensitivityParams {
    /// Independent equal-variance confounders, valid instruments.
    pub fn baseline() -> Self {
        Self { gamma1: 1.0, gamma2: 0.0, eta0: 0.0, delta0: 0.0, mode: EtaDeltaMode::RelativeToIv }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta0.is_finite() || !self.delta0.is_finite() {
            return Err(Error::InvalidParameter("eta0 and delta0 must be finite".into()));
        }
        check_confounder_structure(self.gamma1, self.gamma2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratios {
    pub k1: f64,
    pub k2: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

fn checked_div(num: f64, den: f64, what: &'static str) -> Result<f64> {
    if den.abs() < RATIO_TOL {
        return Err(Error::DegenerateRatio(what));
    }
    Ok(num / den)
}

/// `(k1, k2) = (ξyz/ξxz, ξxw/ξyw)`.
pub fn k_ratios(xi: &ProbitCoefVector) -> Result<(f64, f64)> {
    Ok((
        checked_div(xi.xi_yz, xi.xi_xz, "xi_xz is zero")?,
        checked_div(xi.xi_xw, xi.xi_yw, "xi_yw is zero")?,
    ))
}

/// All slope ratios. `t3 = ξxz/ξyz` needs `ξyz ≠ 0`.
pub fn ratios(xi: &ProbitCoefVector) -> Result<Ratios> {
    let (k1, k2) = k_ratios(xi)?;
    Ok(Ratios {
        k1,
        k2,
        t1: xi.xi_xw / xi.xi_xz,
        t2: xi.xi_yz / xi.xi_yw,
        t3: checked_div(xi.xi_xz, xi.xi_yz, "xi_yz is zero")?,
        t4: k2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// `sgn(β_xy) = sgn(k1)`
    SignK1,
    /// `sgn(β_xy) = sgn(t3)`
    SignT3,
    /// `sgn(β_yx) = sgn(t4)`
    SignT4,
    BranchProductLtOne,
    BranchProductGtOne,
    /// Several candidates pass the rule; none is chosen.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `β_xy·β_yx < 1`
    ProductLtOne,
    /// `β_xy·β_yx > 1`
    ProductGtOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub beta_xy: f64,
    pub beta_yx: f64,
    /// Largest absolute residual of the defining equations.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// The branch formula returned a pair whose product lies on the other
    /// side of 1.
    BranchInconsistent { product: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSolutions {
    pub candidates: Vec<Candidate>,
    pub selected: Option<usize>,
    pub selection_rule: SelectionRule,
    pub warnings: Vec<Warning>,
}

impl CandidateSolutions {
    /// Applies `rule` via `passes`: a unique passing candidate is selected,
    /// several leave the selection unresolved.
    fn select(candidates: Vec<Candidate>, rule: SelectionRule, passes: impl Fn(&Candidate) -> bool) -> Self {
        let passing: Vec<usize> = (0..candidates.len()).filter(|&i| passes(&candidates[i])).collect();
        let (selected, selection_rule) = match passing.as_slice() {
            [i] => (Some(*i), rule),
            [] => (None, rule),
            _ => (None, SelectionRule::Unresolved),
        };
        Self { candidates, selected, selection_rule, warnings: Vec::new() }
    }

    /// The selected pair.
    pub fn selected_pair(&self) -> Result<(f64, f64)> {
        match self.selected {
            Some(i) => Ok((self.candidates[i].beta_xy, self.candidates[i].beta_yx)),
            None if self.selection_rule == SelectionRule::Unresolved => Err(Error::Unresolved),
            None => Err(Error::NoRealSolution("no candidate satisfies the sign rule")),
        }
    }

    /// Whether some candidate is within `tol` of `(beta_xy, beta_yx)`.
    pub fn contains(&self, beta_xy: f64, beta_yx: f64, tol: f64) -> bool {
        self.candidates
            .iter()
            .any(|c| (c.beta_xy - beta_xy).abs() <= tol && (c.beta_yx - beta_yx).abs() <= tol)
    }
}

/// Identification map used by estimators and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SolverKind {
    /// Closed form for independent equal-variance confounders.
    Prop1,
    /// Correlated or unequal confounders, valid instruments.
    Prop3,
    /// Direct effect of `Z` on `Y°` only.
    Cor1,
    /// Direct effect of `W` on `X°` only.
    Cor2,
    /// Perfectly correlated confounders, both instruments violated.
    Cor3 { branch: Branch },
    /// Numeric solution of the full constraint system.
    General,
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.to_string()))
    }
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Prop1 => "prop1",
            SolverKind::Prop3 => "prop3",
            SolverKind::Cor1 => "cor1",
            SolverKind::Cor2 => "cor2",
            SolverKind::Cor3 { .. } => "cor3",
            SolverKind::General => "general",
        }
    }

    /// The most specific solver whose configuration contains `sp`.
    pub fn matching(sp: &SensitivityParams) -> SolverKind {
        let baseline_conf = sp.gamma1 == 1.0 && sp.gamma2 == 0.0;
        let relative = sp.mode == EtaDeltaMode::RelativeToIv;
        match (sp.eta0 == 0.0, sp.delta0 == 0.0) {
            _ if !relative => SolverKind::Cor3 { branch: Branch::ProductLtOne },
            (true, true) if baseline_conf => SolverKind::Prop1,
            (true, true) => SolverKind::Prop3,
            (false, true) if baseline_conf => SolverKind::Cor1,
            (true, false) if baseline_conf => SolverKind::Cor2,
            _ => SolverKind::General,
        }
    }

    /// Checks that `sp` lies in the configuration this solver assumes.
    pub fn check_params(&self, sp: &SensitivityParams) -> Result<()> {
        sp.validate()?;
        let baseline_conf = sp.gamma1 == 1.0 && sp.gamma2 == 0.0;
        match self {
            SolverKind::Prop1 => require(
                baseline_conf && sp.eta0 == 0.0 && sp.delta0 == 0.0,
                "prop1 assumes gamma1 = 1, gamma2 = 0, eta0 = delta0 = 0",
            ),
            SolverKind::Prop3 => require(sp.eta0 == 0.0 && sp.delta0 == 0.0, "prop3 assumes eta0 = delta0 = 0"),
            SolverKind::Cor1 => {
                require(baseline_conf && sp.delta0 == 0.0, "cor1 assumes gamma1 = 1, gamma2 = 0, delta0 = 0")?;
                require(sp.mode == EtaDeltaMode::RelativeToIv, "cor1 needs relative-to-IV eta0")
            }
            SolverKind::Cor2 => {
                require(baseline_conf && sp.eta0 == 0.0, "cor2 assumes gamma1 = 1, gamma2 = 0, eta0 = 0")?;
                require(sp.mode == EtaDeltaMode::RelativeToIv, "cor2 needs relative-to-IV delta0")
            }
            SolverKind::Cor3 { .. } => {
                require(sp.gamma1 == 1.0 && sp.gamma2 == 1.0, "cor3 assumes gamma1 = gamma2 = 1")?;
                require(sp.mode == EtaDeltaMode::SignalToNoise, "cor3 needs signal-to-noise eta0 and delta0")
            }
            SolverKind::General => {
                require(sp.mode == EtaDeltaMode::RelativeToIv, "general solver needs relative-to-IV eta0 and delta0")
            }
        }
    }

    /// All candidates at `sp`. For `Prop1` the single closed-form pair.
    pub fn candidates(&self, xi: &ProbitCoefVector, sp: &SensitivityParams) -> Result<CandidateSolutions> {
        self.check_params(sp)?;
        match *self {
            SolverKind::Prop1 => {
                let (beta_xy, beta_yx) = identify_prop1(xi)?;
                let residual = constraint_residual(xi, beta_xy, beta_yx, sp)?;
                Ok(CandidateSolutions {
                    candidates: vec![Candidate { beta_xy, beta_yx, residual }],
                    selected: Some(0),
                    selection_rule: SelectionRule::SignK1,
                    warnings: Vec::new(),
                })
            }
            SolverKind::Prop3 => solve_prop3(xi, sp.gamma1, sp.gamma2),
            SolverKind::Cor1 => solve_corollary1(xi, sp.eta0),
            SolverKind::Cor2 => solve_corollary2(xi, sp.delta0),
            SolverKind::Cor3 { branch } => solve_corollary3(xi, sp.eta0, sp.delta0, branch),
            SolverKind::General => solve_general(xi, sp),
        }
    }

    /// The selected pair at `sp`.
    pub fn solve(&self, xi: &ProbitCoefVector, sp: &SensitivityParams) -> Result<(f64, f64)> {
        self.candidates(xi, sp)?.selected_pair()
    }
}
