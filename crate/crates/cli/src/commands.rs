use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use bicausal::identification::{
    estimate_alg1, estimate_naive, estimate_sensitivity, fit_reduced_probits, Alg1Options, EffectEstimate,
};
use bicausal::inference::{bootstrap, delta_method_se, BootstrapOptions, BootstrapResult};
use bicausal::model::{reduced_form, simulate, Dataset};
use bicausal::numerics::RngStream;
use bicausal::sensitivity::{sweep, SensitivityParams, SolverKind, SweepOptions, SweepPlan, SweepSource, SweepTable};
use serde::Serialize;

use crate::config::{
    BootstrapConfig, EstimateConfig, GridSpec, Manifest, RunConfig, SimulateConfig, SweepConfig, SweepSourceConfig, TOOL,
    VERSION,
};
use crate::dataset::{load_csv, write_dataset_csv, Provenance};
use crate::error::{CliError, Result};
use crate::format::{fmt17, fmt17_opt, to_json, write_text};

/// Column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 16] = [
    "gamma1", "gamma2", "eta0", "delta0", "beta_xy", "beta_yx", "bias_xy", "bias_yx", "sd_xy", "sd_yx", "ci_lo_xy",
    "ci_hi_xy", "ci_lo_yx", "ci_hi_yx", "n_success", "n_fail",
];

/// Runs one resolved command and returns the text for stdout.
pub fn run(cfg: &RunConfig) -> Result<String> {
    match cfg {
        RunConfig::Simulate(c) => cmd_simulate(c),
        RunConfig::Estimate(c) => cmd_estimate(c),
        RunConfig::Sweep(c) => cmd_sweep(c),
        RunConfig::Bootstrap(c) => cmd_bootstrap(c),
    }
}

fn require_path(p: &Path, what: &str) -> Result<()> {
    if p.as_os_str().is_empty() {
        return Err(CliError::Usage(format!("{what} path is required")));
    }
    Ok(())
}

fn write_manifest(output: &Path, cfg: RunConfig) -> Result<()> {
    write_text(&Manifest::path_for(output), &to_json(&Manifest::new(cfg)))
}

fn alg1_options(include_covariates: bool) -> Alg1Options {
    Alg1Options { include_q: include_covariates, ..Alg1Options::default() }
}

fn iv_estimate(d: &Dataset, solver: SolverKind, sp: &SensitivityParams, opts: &Alg1Options) -> bicausal::Result<EffectEstimate> {
    match solver {
        SolverKind::Prop1 => estimate_alg1(d, opts),
        _ => estimate_sensitivity(d, solver, sp, opts),
    }
}

pub fn cmd_simulate(c: &SimulateConfig) -> Result<String> {
    require_path(&c.out, "output")?;
    reduced_form(&c.params)?;
    let d = simulate(&c.params, &c.scenario, c.n, RngStream::new(c.seed, 0))?;
    write_dataset_csv(&c.out, &d)?;
    write_manifest(&c.out, RunConfig::Simulate(c.clone()))?;
    Ok(format!("wrote {} rows to {}\n", d.n(), c.out.display()))
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub successes: usize,
    pub level: f64,
    pub sd_xy: f64,
    pub sd_yx: f64,
    pub ci_xy: (f64, f64),
    pub ci_yx: (f64, f64),
    pub failures: BTreeMap<String, usize>,
}

impl From<&BootstrapResult> for BootstrapSummary {
    fn from(b: &BootstrapResult) -> Self {
        Self {
            replicates: b.replicates,
            successes: b.successes,
            level: b.level,
            sd_xy: b.sd_xy,
            sd_yx: b.sd_yx,
            ci_xy: b.ci_xy,
            ci_yx: b.ci_yx,
            failures: b.failure_reasons.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateBlock {
    pub label: &'static str,
    pub alias: Option<&'static str>,
    #[serde(flatten)]
    pub estimate: EffectEstimate,
    /// Where `se_xy`/`se_yx` come from: `model`, `delta` or `bootstrap`.
    pub se_source: Option<&'static str>,
    pub delta_se: Option<(f64, f64)>,
    pub bootstrap: Option<BootstrapSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: EstimateConfig,
    pub provenance: Provenance,
    pub estimates: Vec<EstimateBlock>,
}

fn table(blocks: &[EstimateBlock]) -> String {
    let mut s = format!("{:<12} {:<6} {:>10} {:>10} {:>10} {:>10}\n", "method", "effect", "estimate", "se", "ci_lo", "ci_hi");
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |a| format!("{a:.4}"));
    for b in blocks {
        let e = &b.estimate;
        let rows = [("x->y", e.beta_xy, e.se_xy, e.ci_xy), ("y->x", e.beta_yx, e.se_yx, e.ci_yx)];
        for (name, est, se, ci) in rows {
            let _ = writeln!(
                s,
                "{:<12} {:<6} {:>10.4} {:>10} {:>10} {:>10}",
                b.label,
                name,
                est,
                cell(se),
                cell(ci.map(|c| c.0)),
                cell(ci.map(|c| c.1))
            );
        }
    }
    s
}

/// The estimate report and its table, without writing anything.
pub fn estimate_report(c: &EstimateConfig) -> Result<(EstimateReport, String)> {
    if !c.method.iv() && (c.delta || c.bootstrap > 0) {
        return Err(CliError::Usage("--delta and --bootstrap apply to the IV block; use --method iv or both".into()));
    }
    let loaded = load_csv(&c.input, &c.schema)?;
    let d = &loaded.data;
    let opts = alg1_options(c.include_covariates);
    let mut blocks = Vec::new();
    if c.method.iv() {
        let mut estimate = iv_estimate(d, c.solver, &c.sensitivity, &opts)?;
        let mut se_source = None;
        let delta_se = if c.delta {
            let (fx, fy) = fit_reduced_probits(d, &opts)?;
            let se = delta_method_se(&fx, &fy, |xi| c.solver.solve(xi, &c.sensitivity))?;
            (estimate.se_xy, estimate.se_yx, se_source) = (Some(se.0), Some(se.1), Some("delta"));
            Some(se)
        } else {
            None
        };
        let boot = if c.bootstrap > 0 {
            let bopts = BootstrapOptions { replicates: c.bootstrap, level: c.level, max_failure_rate: c.max_failure_rate };
            let b = bootstrap(
                d,
                |s| iv_estimate(s, c.solver, &c.sensitivity, &opts).map(|e| (e.beta_xy, e.beta_yx)),
                &bopts,
                RngStream::new(c.seed, 0),
            )?;
            (estimate.se_xy, estimate.se_yx, se_source) = (Some(b.sd_xy), Some(b.sd_yx), Some("bootstrap"));
            (estimate.ci_xy, estimate.ci_yx) = (Some(b.ci_xy), Some(b.ci_yx));
            Some(BootstrapSummary::from(&b))
        } else {
            None
        };
        blocks.push(EstimateBlock {
            label: estimate.method.label(),
            alias: estimate.method.alias(),
            estimate,
            se_source,
            delta_se,
            bootstrap: boot,
        });
    }
    if c.method.naive() {
        let estimate = estimate_naive(d, &opts)?;
        blocks.push(EstimateBlock {
            label: estimate.method.label(),
            alias: estimate.method.alias(),
            estimate,
            se_source: Some("model"),
            delta_se: None,
            bootstrap: None,
        });
    }
    let text = table(&blocks);
    let report = EstimateReport {
        tool: TOOL,
        version: VERSION,
        command: "estimate",
        seed: c.seed,
        config: c.clone(),
        provenance: loaded.provenance,
        estimates: blocks,
    };
    Ok((report, text))
}

pub fn cmd_estimate(c: &EstimateConfig) -> Result<String> {
    let (report, mut text) = estimate_report(c)?;
    if let Some(out) = &c.out {
        write_text(out, &to_json(&report))?;
        write_manifest(out, RunConfig::Estimate(c.clone()))?;
        let _ = writeln!(text, "report written to {}", out.display());
    }
    Ok(text)
}

pub fn sweep_table(c: &SweepConfig) -> Result<SweepTable> {
    let axes = c.grid.iter().map(GridSpec::axis).collect::<Result<Vec<_>>>()?;
    let plan = SweepPlan { base: c.base, axes };
    let opts = SweepOptions { solver: c.solver, level: c.level, estimation: alg1_options(c.include_covariates) };
    let stream = RngStream::new(c.seed, 0);
    Ok(match &c.source {
        SweepSourceConfig::Simulation { params, scenario, n, replicates } => sweep(
            &SweepSource::Simulation { params: *params, scenario: scenario.clone(), n: *n, replicates: *replicates, stream },
            &plan,
            &opts,
        )?,
        SweepSourceConfig::Data { input, schema, replicates } => {
            let loaded = load_csv(input, schema)?;
            sweep(&SweepSource::Data { data: &loaded.data, replicates: *replicates, stream, truth: None }, &plan, &opts)?
        }
    })
}

/// Long format: one row per cell, columns in [`SWEEP_COLUMNS`] order.
pub fn write_sweep_csv(path: &Path, t: &SweepTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    w.write_record(SWEEP_COLUMNS).map_err(|e| CliError::csv(path, e))?;
    for r in &t.rows {
        let p = &r.params;
        let lo_hi = |ci: Option<(f64, f64)>| (fmt17_opt(ci.map(|c| c.0)), fmt17_opt(ci.map(|c| c.1)));
        let (lo_xy, hi_xy) = lo_hi(r.ci_xy);
        let (lo_yx, hi_yx) = lo_hi(r.ci_yx);
        let rec = [
            fmt17(p.gamma1),
            fmt17(p.gamma2),
            fmt17(p.eta0),
            fmt17(p.delta0),
            fmt17_opt(Some(r.beta_xy)),
            fmt17_opt(Some(r.beta_yx)),
            fmt17_opt(r.bias_xy),
            fmt17_opt(r.bias_yx),
            fmt17_opt(r.sd_xy),
            fmt17_opt(r.sd_yx),
            lo_xy,
            hi_xy,
            lo_yx,
            hi_yx,
            r.n_success.to_string(),
            r.n_fail.to_string(),
        ];
        w.write_record(&rec).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn cmd_sweep(c: &SweepConfig) -> Result<String> {
    require_path(&c.out, "output")?;
    let t = sweep_table(c)?;
    write_sweep_csv(&c.out, &t)?;
    write_manifest(&c.out, RunConfig::Sweep(c.clone()))?;
    let mut failures: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &t.rows {
        for (k, v) in &r.failures {
            *failures.entry(k.as_str()).or_insert(0) += v;
        }
    }
    let mut text = format!("wrote {} cells to {}\n", t.rows.len(), c.out.display());
    for (k, v) in failures {
        let _ = writeln!(text, "  {v} failed estimates: {k}");
    }
    Ok(text)
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: BootstrapConfig,
    pub provenance: Provenance,
    pub beta_xy: f64,
    pub beta_yx: f64,
    pub result: BootstrapResult,
}

pub fn bootstrap_report(c: &BootstrapConfig) -> Result<BootstrapReport> {
    let loaded = load_csv(&c.input, &c.schema)?;
    let opts = alg1_options(c.include_covariates);
    let point = iv_estimate(&loaded.data, c.solver, &c.sensitivity, &opts)?;
    let bopts = BootstrapOptions { replicates: c.replicates, level: c.level, max_failure_rate: c.max_failure_rate };
    let result = bootstrap(
        &loaded.data,
        |s| iv_estimate(s, c.solver, &c.sensitivity, &opts).map(|e| (e.beta_xy, e.beta_yx)),
        &bopts,
        RngStream::new(c.seed, 0),
    )?;
    Ok(BootstrapReport {
        tool: TOOL,
        version: VERSION,
        command: "bootstrap",
        seed: c.seed,
        config: c.clone(),
        provenance: loaded.provenance,
        beta_xy: point.beta_xy,
        beta_yx: point.beta_yx,
        result,
    })
}

pub fn cmd_bootstrap(c: &BootstrapConfig) -> Result<String> {
    require_path(&c.out, "output")?;
    let r = bootstrap_report(c)?;
    write_text(&c.out, &to_json(&r))?;
    write_manifest(&c.out, RunConfig::Bootstrap(c.clone()))?;
    let b = &r.result;
    Ok(format!(
        "{} of {} replicates succeeded\nx->y {:.4} sd {:.4} ci [{:.4}, {:.4}]\ny->x {:.4} sd {:.4} ci [{:.4}, {:.4}]\n",
        b.successes, b.replicates, r.beta_xy, b.sd_xy, b.ci_xy.0, b.ci_xy.1, r.beta_yx, b.sd_yx, b.ci_yx.0, b.ci_yx.1
    ))
}
