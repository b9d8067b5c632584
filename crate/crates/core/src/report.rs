//! Output documents. Every document embeds a [`RunManifest`] and is stable
//! ordered (codec order for states, cell order for densities).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::approx::{Comparison, ErrorBlock};
use crate::config::ModelConfig;
use crate::exact::{ExactResult, Flow, SolveMethod};
use crate::reference::{round4, CaseReproduction, ValueKind};
use crate::sim::{Estimate, SimEstimate};
use crate::theorems::Report;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: Option<ModelConfig>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        let now = chrono::Utc::now().to_rfc3339();
        Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            seed: None,
            config: None,
            started_at: now.clone(),
            finished_at: now,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_at = chrono::Utc::now().to_rfc3339();
    }
}

/// Removes the manifest timestamps from a serialized document, for
/// byte-level comparison of repeated runs.
pub fn strip_timestamps(doc: &mut serde_json::Value) {
    if let Some(manifest) = doc.get_mut("manifest").and_then(|m| m.as_object_mut()) {
        manifest.remove("started_at");
        manifest.remove("finished_at");
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservablesDoc {
    pub manifest: RunManifest,
    pub pi: Vec<f64>,
    pub density: Vec<f64>,
    pub density_by_type: Vec<Vec<f64>>,
    pub flow: Flow,
    pub residual: f64,
    pub method: SolveMethod,
}

impl ObservablesDoc {
    pub fn new(manifest: RunManifest, result: ExactResult) -> Self {
        Self {
            manifest,
            pi: result.distribution.probabilities,
            density: result.observables.density,
            density_by_type: result.observables.density_by_type,
            flow: result.observables.flow,
            residual: result.distribution.residual,
            method: result.distribution.method,
        }
    }
}

/// Densities and flow of one system inside a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservablesBlock {
    pub density: Vec<f64>,
    pub density_by_type: Vec<Vec<f64>>,
    pub flow: Flow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryBlock {
    pub p_star: f64,
    pub beta_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDoc {
    pub manifest: RunManifest,
    pub exact: ObservablesBlock,
    pub approx: ObservablesBlock,
    pub auxiliary: AuxiliaryBlock,
    pub error: ErrorBlock,
}

impl ComparisonDoc {
    pub fn new(manifest: RunManifest, cmp: Comparison) -> Self {
        let block = |o: crate::exact::Observables| ObservablesBlock {
            density: o.density,
            density_by_type: o.density_by_type,
            flow: o.flow,
        };
        Self {
            manifest,
            auxiliary: AuxiliaryBlock {
                p_star: cmp.auxiliary.hop_prob,
                beta_star: cmp.auxiliary.exit_prob,
            },
            exact: block(cmp.exact),
            approx: block(cmp.approx),
            error: cmp.error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFlow {
    #[serde(rename = "in")]
    pub inflow: f64,
    pub in_stderr: f64,
    #[serde(rename = "out")]
    pub outflow: f64,
    pub out_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateDoc {
    pub manifest: RunManifest,
    pub seed: u64,
    pub density: Vec<f64>,
    pub density_stderr: Vec<f64>,
    pub flow: SimFlow,
    pub batches: usize,
    pub total_steps: u64,
    pub warnings: Vec<String>,
}

impl SimulateDoc {
    pub fn new(manifest: RunManifest, est: SimEstimate, warnings: Vec<String>) -> Self {
        Self {
            manifest,
            seed: est.seed,
            density: est.density.iter().map(|e| e.mean).collect(),
            density_stderr: est.density.iter().map(|e| e.stderr).collect(),
            flow: SimFlow {
                inflow: est.flow_in.mean,
                in_stderr: est.flow_in.stderr,
                outflow: est.flow_out.mean,
                out_stderr: est.flow_out.stderr,
            },
            batches: est.batches,
            total_steps: est.total_steps,
            warnings,
        }
    }

    pub fn density_estimates(&self) -> Vec<Estimate> {
        self.density
            .iter()
            .zip(&self.density_stderr)
            .map(|(&mean, &stderr)| Estimate { mean, stderr })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyDoc {
    pub manifest: RunManifest,
    pub all_pass: bool,
    pub reports: Vec<Report>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Doc {
    pub manifest: RunManifest,
    pub rows: Vec<CaseReproduction>,
    pub three_cell: CaseReproduction,
    pub matched: usize,
    pub total: usize,
}

/// Text renderings.
pub trait Render {
    fn table(&self) -> String;
    fn csv(&self) -> Result<String, csv::Error>;
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(Vec::new());
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

impl Render for ObservablesDoc {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>6}  {:>10}  by type", "cell", "density");
        for (i, (r, by)) in self.density.iter().zip(&self.density_by_type).enumerate() {
            let by: Vec<String> = by.iter().map(|v| fmt(*v)).collect();
            let _ = writeln!(s, "{:>6}  {:>10}  {}", i + 1, fmt(*r), by.join(" "));
        }
        let cross: Vec<String> = self.flow.cross.iter().map(|v| fmt(*v)).collect();
        let _ = writeln!(
            s,
            "flow in {}  cross [{}]  out {}",
            fmt(self.flow.inflow),
            cross.join(", "),
            fmt(self.flow.outflow)
        );
        let _ = writeln!(s, "method {}  residual {:.3e}", self.method, self.residual);
        s
    }

    fn csv(&self) -> Result<String, csv::Error> {
        let k = self.density_by_type.first().map_or(0, Vec::len);
        let mut header = vec!["cell".to_string(), "density".to_string()];
        header.extend((1..=k).map(|t| format!("density_type{t}")));
        header.push("flow_cross".into());
        let mut rows = vec![header];
        for (i, (r, by)) in self.density.iter().zip(&self.density_by_type).enumerate() {
            let mut row = vec![(i + 1).to_string(), r.to_string()];
            row.extend(by.iter().map(f64::to_string));
            row.push(self.flow.cross.get(i).map_or(String::new(), f64::to_string));
            rows.push(row);
        }
        rows.push(vec!["flow_in".into(), self.flow.inflow.to_string()]);
        rows.push(vec!["flow_out".into(), self.flow.outflow.to_string()]);
        csv_string(rows)
    }
}

impl Render for ComparisonDoc {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "p* = {}  beta* = {}",
            fmt(self.auxiliary.p_star),
            fmt(self.auxiliary.beta_star)
        );
        let _ = writeln!(
            s,
            "{:>8}  {:>8}  {:>8}  {:>10}",
            "", "exact", "approx", "abs err"
        );
        for (i, (e, a)) in self
            .exact
            .density
            .iter()
            .zip(&self.approx.density)
            .enumerate()
        {
            let _ = writeln!(
                s,
                "{:>8}  {:>8.4}  {:>8.4}  {:>10.2e}",
                format!("rho{}", i + 1),
                e,
                a,
                self.error.density_abs[i]
            );
        }
        let _ = writeln!(
            s,
            "{:>8}  {:>8.4}  {:>8.4}  {:>10.2e}",
            "J", self.exact.flow.inflow, self.approx.flow.inflow, self.error.flow_abs
        );
        s
    }

    fn csv(&self) -> Result<String, csv::Error> {
        let mut rows = vec![vec![
            "quantity".to_string(),
            "exact".into(),
            "approx".into(),
            "abs_err".into(),
            "rel_err".into(),
        ]];
        for i in 0..self.exact.density.len() {
            rows.push(vec![
                format!("rho{}", i + 1),
                self.exact.density[i].to_string(),
                self.approx.density[i].to_string(),
                self.error.density_abs[i].to_string(),
                self.error.density_rel[i].to_string(),
            ]);
        }
        rows.push(vec![
            "J".into(),
            self.exact.flow.inflow.to_string(),
            self.approx.flow.inflow.to_string(),
            self.error.flow_abs.to_string(),
            self.error.flow_rel.to_string(),
        ]);
        csv_string(rows)
    }
}

impl Render for SimulateDoc {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "seed {}  steps {}  batches {}",
            self.seed, self.total_steps, self.batches
        );
        for (i, (m, e)) in self.density.iter().zip(&self.density_stderr).enumerate() {
            let _ = writeln!(s, "rho{:<3} {} ± {:.2e}", i + 1, fmt(*m), e);
        }
        let _ = writeln!(
            s,
            "J in   {} ± {:.2e}",
            fmt(self.flow.inflow),
            self.flow.in_stderr
        );
        let _ = writeln!(
            s,
            "J out  {} ± {:.2e}",
            fmt(self.flow.outflow),
            self.flow.out_stderr
        );
        s
    }

    fn csv(&self) -> Result<String, csv::Error> {
        let mut rows = vec![vec!["quantity".to_string(), "mean".into(), "stderr".into()]];
        for (i, (m, e)) in self.density.iter().zip(&self.density_stderr).enumerate() {
            rows.push(vec![format!("rho{}", i + 1), m.to_string(), e.to_string()]);
        }
        rows.push(vec![
            "J_in".into(),
            self.flow.inflow.to_string(),
            self.flow.in_stderr.to_string(),
        ]);
        rows.push(vec![
            "J_out".into(),
            self.flow.outflow.to_string(),
            self.flow.out_stderr.to_string(),
        ]);
        csv_string(rows)
    }
}

impl Render for VerifyDoc {
    fn table(&self) -> String {
        let mut s = String::new();
        for report in &self.reports {
            let failed = report.records.iter().filter(|r| !r.pass).count();
            let _ = writeln!(
                s,
                "{:<14} {:>3} identities  max residual {:.2e}  {}",
                report.name,
                report.records.len(),
                report.max_residual(),
                if failed == 0 {
                    "ok".to_string()
                } else {
                    format!("{failed} FAILED")
                }
            );
            for r in report.records.iter().filter(|r| !r.pass) {
                let _ = writeln!(
                    s,
                    "    {}: lhs {:e} rhs {:e} residual {:e}",
                    r.id, r.lhs, r.rhs, r.residual
                );
            }
        }
        let _ = writeln!(
            s,
            "{}",
            if self.all_pass {
                "all pass"
            } else {
                "FAILURES"
            }
        );
        s
    }

    fn csv(&self) -> Result<String, csv::Error> {
        let mut rows = vec![vec![
            "report".to_string(),
            "id".into(),
            "lhs".into(),
            "rhs".into(),
            "residual".into(),
            "pass".into(),
        ]];
        for report in &self.reports {
            for r in &report.records {
                rows.push(vec![
                    report.name.clone(),
                    r.id.clone(),
                    r.lhs.to_string(),
                    r.rhs.to_string(),
                    r.residual.to_string(),
                    r.pass.to_string(),
                ]);
            }
        }
        csv_string(rows)
    }
}

fn case_lines(s: &mut String, case: &CaseReproduction) {
    let quantities: Vec<&str> = case
        .checks
        .iter()
        .filter(|c| c.kind == ValueKind::Exact)
        .map(|c| c.quantity.as_str())
        .collect();
    let _ = write!(s, "{:>4}", case.id);
    for q in &quantities {
        let e = case.check(q, ValueKind::Exact).unwrap();
        let a = case.check(q, ValueKind::Approx).unwrap();
        let mark = if e.pass && a.pass { "" } else { " !" };
        let _ = write!(
            s,
            "  {:>5} {:.4}/{:.4} ({:.4}/{:.4}){}",
            q,
            round4(e.computed),
            round4(a.computed),
            e.printed,
            a.printed,
            mark
        );
    }
    let _ = writeln!(s);
}

impl Render for Table1Doc {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "computed exact/approx (printed exact/approx), ! marks a mismatch"
        );
        for row in &self.rows {
            case_lines(&mut s, row);
        }
        case_lines(&mut s, &self.three_cell);
        let _ = writeln!(
            s,
            "{}/{} printed values reproduced",
            self.matched, self.total
        );
        s
    }

    fn csv(&self) -> Result<String, csv::Error> {
        let mut rows = vec![vec![
            "case".to_string(),
            "quantity".into(),
            "kind".into(),
            "computed".into(),
            "rounded".into(),
            "printed".into(),
            "pass".into(),
        ]];
        for case in self.rows.iter().chain(std::iter::once(&self.three_cell)) {
            for c in &case.checks {
                rows.push(vec![
                    case.id.clone(),
                    c.quantity.clone(),
                    match c.kind {
                        ValueKind::Exact => "exact".into(),
                        ValueKind::Approx => "approx".into(),
                    },
                    c.computed.to_string(),
                    format!("{:.4}", c.rounded),
                    format!("{:.4}", c.printed),
                    c.pass.to_string(),
                ]);
            }
        }
        csv_string(rows)
    }
}
