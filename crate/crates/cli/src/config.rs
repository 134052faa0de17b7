//! Run configurations. Each command reads one document, flags override its
//! fields, and the resolved document is written back as the run manifest.

use std::path::{Path, PathBuf};

use bicausal::model::{IvScenario, StructuralParams};
use bicausal::sensitivity::{grid, Axis, Branch, EtaDeltaMode, Param, SensitivityParams, SolverKind};
use serde::{Deserialize, Serialize};

use crate::dataset::ColumnSchema;
use crate::error::{CliError, Result};

pub const TOOL: &str = "bicausal";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Iv,
    Naive,
    Both,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "iv" => Ok(Method::Iv),
            "naive" => Ok(Method::Naive),
            "both" => Ok(Method::Both),
            other => Err(CliError::Usage(format!("unknown method '{other}' (iv, naive, both)"))),
        }
    }

    pub fn iv(self) -> bool {
        self != Method::Naive
    }

    pub fn naive(self) -> bool {
        self != Method::Iv
    }
}

pub fn parse_branch(s: &str) -> Result<Branch> {
    match s {
        "lt1" => Ok(Branch::ProductLtOne),
        "gt1" => Ok(Branch::ProductGtOne),
        other => Err(CliError::Usage(format!("unknown branch '{other}' (lt1, gt1)"))),
    }
}

pub fn parse_solver(s: &str, branch: Branch) -> Result<SolverKind> {
    Ok(match s {
        "prop1" => SolverKind::Prop1,
        "prop3" => SolverKind::Prop3,
        "cor1" => SolverKind::Cor1,
        "cor2" => SolverKind::Cor2,
        "cor3" => SolverKind::Cor3 { branch },
        "general" => SolverKind::General,
        other => return Err(CliError::Usage(format!("unknown solver '{other}'"))),
    })
}

pub fn parse_mode(s: &str) -> Result<EtaDeltaMode> {
    match s {
        "relative" => Ok(EtaDeltaMode::RelativeToIv),
        "snr" => Ok(EtaDeltaMode::SignalToNoise),
        other => Err(CliError::Usage(format!("unknown eta/delta mode '{other}' (relative, snr)"))),
    }
}

pub fn parse_scenario(s: &str) -> Result<IvScenario> {
    match s {
        "gaussian" => Ok(IvScenario::GaussianIvs),
        "uniform" => Ok(IvScenario::UniformIvs),
        other => Err(CliError::Usage(format!("unknown scenario '{other}' (gaussian, uniform)"))),
    }
}

/// Sets a structural parameter by field name, e.g. `beta_xy=0.3`.
pub fn set_param(p: &mut StructuralParams, assignment: &str) -> Result<()> {
    let (key, value) = split_assignment(assignment)?;
    let v: f64 = value.parse().map_err(|_| CliError::Usage(format!("'{value}' is not a number")))?;
    let mut doc = serde_json::to_value(*p).expect("params serialize");
    match doc.get_mut(key) {
        Some(slot) => *slot = serde_json::json!(v),
        None => return Err(CliError::Usage(format!("unknown structural parameter '{key}'"))),
    }
    *p = serde_json::from_value(doc).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(())
}

fn split_assignment(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Usage(format!("expected key=value, got '{s}'")))
}

/// One sweep axis, `name=min:max:step`; `a+b=…` moves `a` and `b` together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub params: Vec<Param>,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (names, range) = split_assignment(s)?;
        let params = names.split('+').map(|n| Param::parse(n.trim())).collect::<bicausal::Result<Vec<_>>>()?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad grid bound '{v}' in '{s}'"))))
            .collect::<Result<_>>()?;
        match parts[..] {
            [min, max, step] => Ok(Self { params, min, max, step }),
            _ => Err(CliError::Usage(format!("grid '{s}' must look like axis=min:max:step"))),
        }
    }

    pub fn axis(&self) -> Result<Axis> {
        Ok(Axis { params: self.params.clone(), values: grid(self.min, self.max, self.step)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub n: usize,
    pub params: StructuralParams,
    pub scenario: IvScenario,
    pub out: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n: 10_000,
            params: StructuralParams::benchmark(),
            scenario: IvScenario::GaussianIvs,
            out: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub seed: u64,
    pub input: PathBuf,
    pub schema: ColumnSchema,
    pub method: Method,
    pub solver: SolverKind,
    pub sensitivity: SensitivityParams,
    pub include_covariates: bool,
    /// Delta-method standard errors for the IV block.
    pub delta: bool,
    /// Bootstrap replicates for the IV block; 0 disables.
    pub bootstrap: usize,
    pub level: f64,
    pub max_failure_rate: f64,
    /// Report path; the table always goes to stdout.
    pub out: Option<PathBuf>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            input: PathBuf::new(),
            schema: ColumnSchema::default(),
            method: Method::Both,
            solver: SolverKind::Prop1,
            sensitivity: SensitivityParams::baseline(),
            include_covariates: true,
            delta: false,
            bootstrap: 0,
            level: 0.95,
            max_failure_rate: 0.1,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub seed: u64,
    pub input: PathBuf,
    pub schema: ColumnSchema,
    pub solver: SolverKind,
    pub sensitivity: SensitivityParams,
    pub include_covariates: bool,
    pub replicates: usize,
    pub level: f64,
    pub max_failure_rate: f64,
    pub out: PathBuf,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            input: PathBuf::new(),
            schema: ColumnSchema::default(),
            solver: SolverKind::Prop1,
            sensitivity: SensitivityParams::baseline(),
            include_covariates: true,
            replicates: 200,
            level: 0.95,
            max_failure_rate: 0.1,
            out: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSourceConfig {
    /// Fresh data per cell from `params` with the cell's sensitivity values.
    Simulation { params: StructuralParams, scenario: IvScenario, n: usize, replicates: usize },
    /// One dataset; `replicates ≥ 2` adds bootstrap spread to every cell.
    Data { input: PathBuf, schema: ColumnSchema, replicates: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub source: SweepSourceConfig,
    pub solver: SolverKind,
    /// Values of the sensitivity parameters not on any axis.
    pub base: SensitivityParams,
    pub grid: Vec<GridSpec>,
    pub level: f64,
    pub include_covariates: bool,
    pub out: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            source: SweepSourceConfig::Simulation {
                params: StructuralParams::benchmark(),
                scenario: IvScenario::GaussianIvs,
                n: 10_000,
                replicates: 200,
            },
            solver: SolverKind::Prop3,
            base: SensitivityParams::baseline(),
            grid: Vec::new(),
            level: 0.95,
            include_covariates: true,
            out: PathBuf::new(),
        }
    }
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Estimate(EstimateConfig),
    Sweep(SweepConfig),
    Bootstrap(BootstrapConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Simulate(_) => "simulate",
            RunConfig::Estimate(_) => "estimate",
            RunConfig::Sweep(_) => "sweep",
            RunConfig::Bootstrap(_) => "bootstrap",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RunConfig::Simulate(c) => c.seed,
            RunConfig::Estimate(c) => c.seed,
            RunConfig::Sweep(c) => c.seed,
            RunConfig::Bootstrap(c) => c.seed,
        }
    }
}

/// Written beside every output; `replay` re-runs it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    #[serde(flatten)]
    pub run: RunConfig,
}

impl Manifest {
    pub fn new(run: RunConfig) -> Self {
        Self { tool: TOOL.into(), version: VERSION.into(), seed: run.seed(), run }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
    }

    /// `out.csv` → `out.csv.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

/// Reads a command's config document, or starts from the defaults.
pub fn read_config<T: Default + serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::parse(p, e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parsing() {
        let g = GridSpec::parse("eta0+delta0=-0.16:0.16:0.02").unwrap();
        assert_eq!(g.params, vec![Param::Eta0, Param::Delta0]);
        assert_eq!(g.axis().unwrap().values.len(), 17);
        assert!(GridSpec::parse("gamma1=0.1:1").is_err());
        assert!(GridSpec::parse("beta=0:1:0.1").is_err());
        assert!(GridSpec::parse("gamma1=1:0:0.1").unwrap().axis().is_err());
    }

    #[test]
    fn structural_assignment() {
        let mut p = StructuralParams::benchmark();
        set_param(&mut p, "beta_xy=0.3").unwrap();
        assert_eq!(p.beta_xy, 0.3);
        assert!(set_param(&mut p, "beta=0.3").is_err());
        assert!(set_param(&mut p, "beta_xy=abc").is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = SweepConfig { grid: vec![GridSpec::parse("gamma2=-0.5:0.5:0.1").unwrap()], ..SweepConfig::default() };
        let m = Manifest::new(RunConfig::Sweep(cfg));
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"command\":\"sweep\""));
        assert_eq!(serde_json::from_str::<Manifest>(&text).unwrap(), m);
        assert_eq!(Manifest::path_for(Path::new("a/b.csv")), PathBuf::from("a/b.csv.manifest.json"));
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c: EstimateConfig = serde_json::from_str(r#"{"input": "d.csv", "bootstrap": 50}"#).unwrap();
        assert_eq!(c.bootstrap, 50);
        assert_eq!(c.method, Method::Both);
        assert!(serde_json::from_str::<EstimateConfig>(r#"{"bootstrp": 50}"#).is_err());
    }
}
