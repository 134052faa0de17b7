use std::path::PathBuf;
use std::process::ExitCode;

use bicausal::sensitivity::{Branch, SensitivityParams, SolverKind};
use bicausal_cli::commands::run;
use bicausal_cli::config::{
    parse_branch, parse_mode, parse_scenario, parse_solver, read_config, set_param, BootstrapConfig, EstimateConfig,
    GridSpec, Manifest, Method, RunConfig, SimulateConfig, SweepConfig, SweepSourceConfig, VERSION,
};
use bicausal_cli::dataset::ColumnSchema;
use bicausal_cli::{CliError, Result};
use clap::{Args, Parser, Subcommand};

/// Environment variable holding the default worker-thread count.
const THREADS_ENV: &str = "BICAUSAL_THREADS";

#[derive(Parser)]
#[command(name = "bicausal", version, about = "Bidirectional causal effects between two binary outcomes")]
struct Cli {
    /// Worker threads; defaults to $BICAUSAL_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from the structural model.
    Simulate(SimulateArgs),
    /// Estimate both effects on a CSV dataset.
    Estimate(EstimateArgs),
    /// Evaluate a solver over a grid of sensitivity parameters.
    Sweep(SweepArgs),
    /// Row bootstrap of the IV estimator.
    Bootstrap(BootstrapArgs),
    /// Re-run a command from its manifest.
    Replay { manifest: PathBuf },
}

#[derive(Args)]
struct SchemaArgs {
    #[arg(long)]
    x_col: Option<String>,
    #[arg(long)]
    y_col: Option<String>,
    #[arg(long)]
    z_col: Option<String>,
    #[arg(long)]
    w_col: Option<String>,
    /// Comma-separated covariates; empty for none. Default: all other columns.
    #[arg(long)]
    covariates: Option<String>,
    /// Recode a literal, e.g. `Yes=1`. Repeatable.
    #[arg(long = "recode")]
    recode: Vec<String>,
    /// Z-score a column. Repeatable.
    #[arg(long = "standardize")]
    standardize: Vec<String>,
}

impl SchemaArgs {
    fn apply(&self, s: &mut ColumnSchema) -> Result<()> {
        for (slot, v) in [
            (&mut s.x_column, &self.x_col),
            (&mut s.y_column, &self.y_col),
            (&mut s.z_column, &self.z_col),
            (&mut s.w_column, &self.w_col),
        ] {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        if let Some(c) = &self.covariates {
            s.covariate_columns = Some(c.split(',').map(str::trim).filter(|c| !c.is_empty()).map(String::from).collect());
        }
        for r in &self.recode {
            let (lit, v) = r.rsplit_once('=').ok_or_else(|| CliError::Usage(format!("expected LITERAL=0|1, got '{r}'")))?;
            let v: u8 = v.trim().parse().map_err(|_| CliError::Usage(format!("recoding '{r}' must map to 0 or 1")))?;
            s.binary_recodings.insert(lit.to_string(), v);
        }
        s.standardize_columns.extend(self.standardize.iter().cloned());
        Ok(())
    }
}

#[derive(Args)]
struct SensitivityArgs {
    /// prop1, prop3, cor1, cor2, cor3 or general.
    #[arg(long)]
    solver: Option<String>,
    /// Root branch for cor3: lt1 or gt1.
    #[arg(long)]
    branch: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta0: Option<f64>,
    /// Scaling of eta0/delta0: relative (to the instrument strength) or snr.
    #[arg(long)]
    mode: Option<String>,
}

impl SensitivityArgs {
    fn apply(&self, solver: &mut SolverKind, sp: &mut SensitivityParams) -> Result<()> {
        let branch = match (&self.branch, *solver) {
            (Some(b), _) => parse_branch(b)?,
            (None, SolverKind::Cor3 { branch }) => branch,
            (None, _) => Branch::ProductLtOne,
        };
        *solver = match &self.solver {
            Some(s) => parse_solver(s, branch)?,
            None => match *solver {
                SolverKind::Cor3 { .. } => SolverKind::Cor3 { branch },
                other => other,
            },
        };
        for (slot, v) in [
            (&mut sp.gamma1, self.gamma1),
            (&mut sp.gamma2, self.gamma2),
            (&mut sp.eta0, self.eta0),
            (&mut sp.delta0, self.delta0),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(m) = &self.mode {
            sp.mode = parse_mode(m)?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config document; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// gaussian or uniform instruments.
    #[arg(long)]
    scenario: Option<String>,
    /// Structural parameter, e.g. `beta_xy=0.3`. Repeatable.
    #[arg(long = "set", allow_hyphen_values = true)]
    set: Vec<String>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Report path (JSON); a manifest is written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// iv, naive or both.
    #[arg(long)]
    method: Option<String>,
    /// Delta-method standard errors for the IV block.
    #[arg(long)]
    delta: bool,
    /// Bootstrap replicates for the IV block.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    /// Leave covariates out of the probit designs.
    #[arg(long)]
    no_covariates: bool,
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    sensitivity: SensitivityArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep over a dataset instead of simulating each cell.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample size per simulated replicate.
    #[arg(long)]
    n: Option<usize>,
    /// Replications per cell (simulation) or bootstrap replicates (data).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long = "set", allow_hyphen_values = true)]
    set: Vec<String>,
    /// Axis `name=min:max:step`; `a+b=min:max:step` ties two parameters. Repeatable.
    #[arg(long = "grid", allow_hyphen_values = true)]
    grid: Vec<String>,
    #[arg(long)]
    no_covariates: bool,
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    sensitivity: SensitivityArgs,
}

#[derive(Args)]
struct BootstrapArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicates.
    #[arg(long, visible_alias = "reps")]
    bootstrap: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    no_covariates: bool,
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    sensitivity: SensitivityArgs,
}

fn set_if<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn resolve_simulate(a: SimulateArgs) -> Result<RunConfig> {
    let mut c: SimulateConfig = read_config(a.config.as_deref())?;
    set_if(&mut c.out, a.out);
    set_if(&mut c.n, a.n);
    set_if(&mut c.seed, a.seed);
    if let Some(s) = &a.scenario {
        c.scenario = parse_scenario(s)?;
    }
    for s in &a.set {
        set_param(&mut c.params, s)?;
    }
    Ok(RunConfig::Simulate(c))
}

fn resolve_estimate(a: EstimateArgs) -> Result<RunConfig> {
    let mut c: EstimateConfig = read_config(a.config.as_deref())?;
    set_if(&mut c.input, a.input);
    if a.out.is_some() {
        c.out = a.out;
    }
    set_if(&mut c.seed, a.seed);
    if let Some(m) = &a.method {
        c.method = Method::parse(m)?;
    }
    c.delta |= a.delta;
    set_if(&mut c.bootstrap, a.bootstrap);
    set_if(&mut c.level, a.level);
    c.include_covariates &= !a.no_covariates;
    a.schema.apply(&mut c.schema)?;
    a.sensitivity.apply(&mut c.solver, &mut c.sensitivity)?;
    Ok(RunConfig::Estimate(c))
}

fn resolve_sweep(a: SweepArgs) -> Result<RunConfig> {
    let mut c: SweepConfig = read_config(a.config.as_deref())?;
    set_if(&mut c.out, a.out);
    set_if(&mut c.seed, a.seed);
    set_if(&mut c.level, a.level);
    c.include_covariates &= !a.no_covariates;
    if let Some(input) = a.input {
        if !matches!(c.source, SweepSourceConfig::Data { .. }) {
            c.source = SweepSourceConfig::Data { input: PathBuf::new(), schema: ColumnSchema::default(), replicates: 0 };
        }
        if let SweepSourceConfig::Data { input: slot, .. } = &mut c.source {
            *slot = input;
        }
    }
    match &mut c.source {
        SweepSourceConfig::Simulation { params, scenario, n, replicates } => {
            set_if(n, a.n);
            set_if(replicates, a.reps);
            if let Some(s) = &a.scenario {
                *scenario = parse_scenario(s)?;
            }
            for s in &a.set {
                set_param(params, s)?;
            }
        }
        SweepSourceConfig::Data { schema, replicates, .. } => {
            if a.n.is_some() || a.scenario.is_some() || !a.set.is_empty() {
                return Err(CliError::Usage("--n, --scenario and --set apply to simulation sweeps only".into()));
            }
            set_if(replicates, a.reps);
            a.schema.apply(schema)?;
        }
    }
    if !a.grid.is_empty() {
        c.grid = a.grid.iter().map(|g| GridSpec::parse(g)).collect::<Result<_>>()?;
    }
    a.sensitivity.apply(&mut c.solver, &mut c.base)?;
    Ok(RunConfig::Sweep(c))
}

fn resolve_bootstrap(a: BootstrapArgs) -> Result<RunConfig> {
    let mut c: BootstrapConfig = read_config(a.config.as_deref())?;
    set_if(&mut c.input, a.input);
    set_if(&mut c.out, a.out);
    set_if(&mut c.seed, a.seed);
    set_if(&mut c.replicates, a.bootstrap);
    set_if(&mut c.level, a.level);
    c.include_covariates &= !a.no_covariates;
    a.schema.apply(&mut c.schema)?;
    a.sensitivity.apply(&mut c.solver, &mut c.sensitivity)?;
    Ok(RunConfig::Bootstrap(c))
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a count, got '{v}'")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<String> {
    configure_threads(cli.threads)?;
    let cfg = match cli.command {
        Command::Simulate(a) => resolve_simulate(a)?,
        Command::Estimate(a) => resolve_estimate(a)?,
        Command::Sweep(a) => resolve_sweep(a)?,
        Command::Bootstrap(a) => resolve_bootstrap(a)?,
        Command::Replay { manifest } => {
            let m = Manifest::read(&manifest)?;
            if m.version != VERSION {
                eprintln!("note: manifest written by version {}, running {VERSION}", m.version);
            }
            m.run
        }
    };
    run(&cfg)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
