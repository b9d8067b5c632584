//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on a numerical failure (residual,
//! convergence, failed identity), 2 on an input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::approx;
use crate::config::{ConfigError, ModelConfig};
use crate::exact::{self, ExactError, SolveOptions};
use crate::model::{ModelError, SystemParams};
use crate::reference::{self, TABLE_ROWS, THREE_CELL};
use crate::report::{
    ComparisonDoc, ObservablesDoc, Render, RunManifest, SimulateDoc, Table1Doc, VerifyDoc,
};
use crate::sim::{self, SimConfig, SimError, DEFAULT_BATCHES};
use crate::theorems::{self, Eq23Variant, Precondition, TheoremError};

/// Largest flow-estimator disagreement accepted by `exact`.
pub const FLOW_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Model configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the document here and print a table to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum number of states to enumerate.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
    /// Accept boundary parameters that break ergodicity.
    #[arg(long, global = true)]
    pub force: bool,
    /// Run theorem checks outside their special case and report residuals.
    #[arg(long, global = true)]
    pub allow_mismatch: bool,
    /// Use the as-printed (0,2) arrival term in the (2,0) balance equation.
    #[arg(long, global = true)]
    pub eq23_paper_literal: bool,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Exact stationary densities and flow rate.
    Exact,
    /// Exact values against the harmonic-mean approximation.
    Approx,
    /// Monte Carlo estimates with batch-means error bars.
    Simulate {
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 10_000)]
        warmup: u64,
        #[arg(long, default_value_t = DEFAULT_BATCHES)]
        batches: usize,
    },
    /// Special-case identities and balance equations.
    Verify {
        /// Number of randomized draws in the built-in suite.
        #[arg(long, default_value_t = 100)]
        draws: usize,
    },
    /// Reproduce the published two- and three-cell values.
    Table1,
}

#[derive(Debug, Parser)]
#[command(
    name = "tasep",
    version,
    about = "Multi-type synchronous exclusion process on an open lattice"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::Singular(_) | ExactError::DidNotConverge { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<TheoremError> for CliError {
    fn from(e: TheoremError) -> Self {
        match e {
            TheoremError::Exact(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("i/o error: {e}"))
    }
}

/// Parses `args` and runs the command, writing to the given streams.
/// Returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<(ModelConfig, SystemParams), CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Input("--config <path> is required".into()))?;
    let config = ModelConfig::load(path)?;
    let params = config.to_params(common.force)?;
    Ok((config, params))
}

fn solve_options(common: &CommonArgs) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(cap) = common.cap {
        opts.state_cap = cap;
    }
    opts
}

fn force_warnings(
    common: &CommonArgs,
    params: &SystemParams,
    stderr: &mut dyn Write,
) -> Vec<String> {
    if common.force && !params.is_ergodic_range() {
        let msg = "parameters are outside the ergodic range; results are exploratory".to_string();
        let _ = writeln!(stderr, "warning: {msg}");
        vec![msg]
    } else {
        Vec::new()
    }
}

/// A document that carries a manifest.
trait Document: Serialize + Render {
    fn manifest_mut(&mut self) -> &mut RunManifest;
}

macro_rules! document {
    ($($t:ty),*) => {$(
        impl Document for $t {
            fn manifest_mut(&mut self) -> &mut RunManifest {
                &mut self.manifest
            }
        }
    )*};
}
document!(
    ObservablesDoc,
    ComparisonDoc,
    SimulateDoc,
    VerifyDoc,
    Table1Doc
);

fn render<D: Document>(doc: &D, format: Format) -> Result<String, CliError> {
    Ok(match format {
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(doc).map_err(|e| CliError::Input(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => doc.csv().map_err(|e| CliError::Input(e.to_string()))?,
        Format::Table => doc.table(),
    })
}

fn emit<D: Document>(
    mut doc: D,
    common: &CommonArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    {
        let manifest = doc.manifest_mut();
        if let Some(out) = &common.out {
            manifest.outputs.push(out.display().to_string());
        }
        manifest.finish();
    }
    let text = render(&doc, common.format)?;
    match &common.out {
        Some(path) => {
            std::fs::write(path, text)?;
            stdout.write_all(doc.table().as_bytes())?;
        }
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let common = &cli.common;
    match &cli.command {
        Command::Exact => cmd_exact(common, stdout, stderr),
        Command::Approx => cmd_approx(common, stdout, stderr),
        Command::Simulate {
            steps,
            warmup,
            batches,
        } => cmd_simulate(common, *steps, *warmup, *batches, stdout, stderr),
        Command::Verify { draws } => cmd_verify(common, *draws, stdout),
        Command::Table1 => cmd_table1(common, stdout),
    }
}

fn cmd_exact(
    common: &CommonArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let (config, params) = load_config(common)?;
    force_warnings(common, &params, stderr);
    let mut manifest = RunManifest::start("exact");
    manifest.config = Some(config);
    let result = exact::analyze(&params, &solve_options(common))?;
    let spread = result.observables.flow.spread();
    let doc = ObservablesDoc::new(manifest, result);
    emit(doc, common, stdout)?;
    if spread > FLOW_CHECK_TOL {
        return Err(CliError::Numerical(format!(
            "flow estimators disagree by {spread:e}"
        )));
    }
    Ok(0)
}

fn cmd_approx(
    common: &CommonArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let (config, params) = load_config(common)?;
    force_warnings(common, &params, stderr);
    if !params.is_ergodic_range() {
        return Err(CliError::Input(
            "approximation needs parameters in the ergodic range".into(),
        ));
    }
    let mut manifest = RunManifest::start("approx");
    manifest.config = Some(config);
    let cmp = approx::compare(&params, &solve_options(common))?;
    emit(ComparisonDoc::new(manifest, cmp), common, stdout)?;
    Ok(0)
}

fn cmd_simulate(
    common: &CommonArgs,
    steps: u64,
    warmup: u64,
    batches: usize,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let (config, params) = load_config(common)?;
    let warnings = force_warnings(common, &params, stderr);
    let sim_config = SimConfig {
        seed: common.seed.unwrap_or(1),
        warmup_steps: warmup,
        sample_steps: steps,
        batches,
    };
    let mut manifest = RunManifest::start("simulate");
    manifest.config = Some(config);
    manifest.seed = Some(sim_config.seed);
    let est = sim::run(&params, &sim_config)?;
    emit(SimulateDoc::new(manifest, est, warnings), common, stdout)?;
    Ok(0)
}

fn verify_config(
    params: &SystemParams,
    common: &CommonArgs,
) -> Result<Vec<theorems::Report>, CliError> {
    let pre = if common.allow_mismatch {
        Precondition::AllowMismatch
    } else {
        Precondition::Enforce
    };
    let eq23 = eq23_variant(common);
    let mut reports = Vec::new();
    if params.n_cells() == 2 {
        if params.n_types() == 2 {
            reports.push(theorems::verify_theorem2(params, pre)?);
            reports.push(theorems::verify_theorem3(params, pre)?);
        } else if params.n_types() > 2 {
            reports.push(theorems::probe_gset_sums(params)?);
        }
        reports.push(theorems::verify_theorems4_5(params, pre)?);
        if params.n_types() <= 2 {
            reports.push(theorems::verify_balance_equations(params, eq23)?);
        }
    } else if pre == Precondition::AllowMismatch {
        reports.push(theorems::probe_gset_sums(params)?);
        reports.push(theorems::verify_theorems4_5(params, pre)?);
    } else {
        return Err(TheoremError::PreconditionViolated("requires N = 2".into()).into());
    }
    Ok(reports)
}

fn eq23_variant(common: &CommonArgs) -> Eq23Variant {
    if common.eq23_paper_literal {
        Eq23Variant::PaperLiteral
    } else {
        Eq23Variant::Corrected
    }
}

fn cmd_verify(common: &CommonArgs, draws: usize, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut manifest = RunManifest::start("verify");
    let reports = if common.config.is_some() {
        let (config, params) = load_config(common)?;
        manifest.config = Some(config);
        verify_config(&params, common)?
    } else {
        let seed = common.seed.unwrap_or(theorems::DEFAULT_SEED);
        manifest.seed = Some(seed);
        let eq23 = eq23_variant(common);
        let mut reports = theorems::run_special_case_suite(seed, draws, eq23)?.reports;
        for case in &TABLE_ROWS {
            let params = case.config().to_params(false)?;
            reports.push(theorems::verify_balance_equations(&params, eq23)?);
        }
        let single = SystemParams::single(2, 0.3, 0.6, 0.45)?;
        reports.push(theorems::verify_balance_equations(&single, eq23)?);
        reports
    };
    let all_pass = reports.iter().all(theorems::Report::all_pass);
    emit(
        VerifyDoc {
            manifest,
            all_pass,
            reports,
        },
        common,
        stdout,
    )?;
    Ok(if all_pass { 0 } else { 1 })
}

/// All published cases reproduced.
pub fn table1_document(opts: &SolveOptions) -> Result<Table1Doc, ExactError> {
    let rows = TABLE_ROWS
        .iter()
        .map(|case| reference::reproduce(case, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let three_cell = reference::reproduce(&THREE_CELL, opts)?;
    let all_checks = || {
        rows.iter()
            .chain(std::iter::once(&three_cell))
            .flat_map(|c| &c.checks)
    };
    let matched = all_checks().filter(|c| c.pass).count();
    let total = all_checks().count();
    Ok(Table1Doc {
        manifest: RunManifest::start("table1"),
        rows,
        three_cell,
        matched,
        total,
    })
}

fn cmd_table1(common: &CommonArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let doc = table1_document(&solve_options(common))?;
    emit(doc, common, stdout)?;
    Ok(0)
}
