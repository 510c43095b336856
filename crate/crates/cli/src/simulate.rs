//! `simulate`: run study and meta cells described in a TOML or JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use metamed::{BootstrapConfig, Distribution, Method, Scenario, SeedStream};
use metamed_sim::{
    run_meta_cell, run_study_cell, write_cell, write_combined_csv, CellConfig, MetaSimConfig, SimCellResult,
    StudySimConfig,
};

use crate::args::{Format, SimulateArgs};
use crate::{emit, fmt2, CliError, CliResult};

fn default_methods() -> Vec<Method> {
    Method::TRANSFORMATION.to_vec()
}
fn default_study_reps() -> usize {
    200
}
fn default_oracle_reps() -> usize {
    10_000
}
fn default_b() -> usize {
    200
}
fn default_meta_reps() -> usize {
    300
}
fn default_tau2() -> f64 {
    6.0
}
fn default_base() -> Distribution {
    Distribution::LogNormal { meanlog: 5.0, sdlog: 0.25 }
}
fn default_n_min() -> usize {
    100
}
fn default_n_max() -> usize {
    500
}

/// A study-level cell. `b = 0` scores naive SEs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyCellSpec {
    pub dist: Distribution,
    pub n: usize,
    pub scenario: Scenario,
    #[serde(default = "default_study_reps")]
    pub reps: usize,
    #[serde(default = "default_oracle_reps")]
    pub oracle_reps: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_b", rename = "B", alias = "b")]
    pub b: usize,
    pub seed: Option<u64>,
}

/// A meta-analytic cell. `b = 0` scores naive SEs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaCellSpec {
    pub k: usize,
    pub p: f64,
    pub scenario: Scenario,
    #[serde(default = "default_tau2")]
    pub tau2: f64,
    #[serde(default = "default_base")]
    pub base: Distribution,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_meta_reps")]
    pub reps: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_b", rename = "B", alias = "b")]
    pub b: usize,
    pub seed: Option<u64>,
    /// Replicates per study size for the true-I² oracle; omitted skips it.
    pub i2_oracle_reps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub study: Vec<StudyCellSpec>,
    #[serde(default)]
    pub meta: Vec<MetaCellSpec>,
}

impl SimulateConfig {
    /// Parse TOML, or JSON when the text starts with `{` or the path ends in `.json`.
    pub fn parse(text: &str, path: Option<&Path>) -> CliResult<Self> {
        let is_json = path.and_then(|p| p.extension()).is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let bad = |e: String| CliError::Usage(format!("invalid configuration: {e}"));
        if is_json {
            serde_json::from_str(text).map_err(|e| bad(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| bad(e.to_string()))
        }
    }

    /// Resolve every cell, validating all of them before anything runs.
    pub fn cells(&self) -> CliResult<Vec<CellConfig>> {
        let root = SeedStream::new(self.seed);
        let boot = |b: usize| (b > 0).then(|| BootstrapConfig::new(b, 0));
        let mut out = Vec::new();
        for (i, s) in self.study.iter().enumerate() {
            let cfg = StudySimConfig {
                dist: s.dist.validated().map_err(|e| CliError::Usage(format!("study cell {i}: {e}")))?,
                n: s.n,
                scenario: s.scenario,
                reps: s.reps,
                oracle_reps: s.oracle_reps,
                methods: s.methods.clone(),
                bootstrap: boot(s.b),
                seed: s.seed.unwrap_or_else(|| root.named("study").child(i as u64).key()),
            };
            cfg.validate().map_err(|e| CliError::Usage(format!("study cell {i}: {e}")))?;
            out.push(CellConfig::Study(cfg));
        }
        for (i, m) in self.meta.iter().enumerate() {
            let cfg = MetaSimConfig {
                k: m.k,
                p: m.p,
                scenario: m.scenario,
                tau2_true: m.tau2,
                base: m.base.validated().map_err(|e| CliError::Usage(format!("meta cell {i}: {e}")))?,
                n_range: (m.n_min, m.n_max),
                reps: m.reps,
                methods: m.methods.clone(),
                bootstrap: boot(m.b),
                seed: m.seed.unwrap_or_else(|| root.named("meta").child(i as u64).key()),
                i2_oracle_reps: m.i2_oracle_reps,
            };
            cfg.validate().map_err(|e| CliError::Usage(format!("meta cell {i}: {e}")))?;
            out.push(CellConfig::Meta(cfg));
        }
        Ok(out)
    }
}

/// Estimator runs a cell will perform (fits, including bootstrap and oracle fits).
pub fn planned_fits(cell: &CellConfig) -> u64 {
    match cell {
        CellConfig::Study(c) => {
            let b = c.bootstrap.map_or(0, |b| b.b) as u64;
            let m = c.methods.len() as u64;
            m * (c.oracle_reps as u64 + c.reps as u64 * (1 + b))
        }
        CellConfig::Meta(c) => {
            let b = c.bootstrap.map_or(0, |b| b.b) as u64;
            let m = c.methods.len() as u64;
            let oracle = c.i2_oracle_reps.map_or(0, |r| 5 * r as u64);
            m * (c.reps as u64 * c.median_count() as u64 * (1 + b) + oracle)
        }
    }
}

fn cell_id(cell: &CellConfig) -> String {
    match cell {
        CellConfig::Study(c) => c.cell_id(),
        CellConfig::Meta(c) => c.cell_id(),
    }
}

fn reps(cell: &CellConfig) -> usize {
    match cell {
        CellConfig::Study(c) => c.reps,
        CellConfig::Meta(c) => c.reps,
    }
}

pub fn dry_run_plan(cells: &[CellConfig]) -> String {
    let mut out = String::from("| cell | reps | estimator fits |\n|---|---:|---:|\n");
    for c in cells {
        out += &format!("| {} | {} | {} |\n", cell_id(c), reps(c), planned_fits(c));
    }
    out
}

pub fn summary_markdown(results: &[SimCellResult]) -> String {
    let mut out = String::new();
    let study: Vec<_> = results.iter().flat_map(|r| r.study.iter().map(move |m| (r, m))).collect();
    if !study.is_empty() {
        out += "| cell | method | SE | true SE | median % error | mean % error |\n|---|---|---|---:|---:|---:|\n";
        for (r, m) in study {
            out += &format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                r.cell_id,
                m.method,
                m.se_kind,
                fmt2(m.true_se),
                fmt2(m.median_pct_err),
                fmt2(m.mean_pct_err)
            );
        }
        out += "\n";
    }
    let meta: Vec<_> = results.iter().flat_map(|r| r.meta.iter().map(move |m| (r, m))).collect();
    if !meta.is_empty() {
        out += "| cell | method | SE | mu bias | mu coverage | tau2 bias | tau2 coverage | mean I2 |\n";
        out += "|---|---|---|---:|---:|---:|---:|---:|\n";
        for (r, m) in meta {
            out += &format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} |{}\n",
                r.cell_id,
                m.method,
                m.se_kind,
                fmt2(m.mu_bias),
                fmt2(m.mu_coverage),
                fmt2(m.tau2_bias),
                fmt2(m.tau2_coverage),
                fmt2(m.mean_i2),
                if m.flagged { " flagged" } else { "" }
            );
        }
    }
    out
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.config.display())))?;
    let cfg = SimulateConfig::parse(&text, Some(&a.config))?;
    let cells = cfg.cells()?;
    if cells.is_empty() {
        eprintln!("warning: configuration lists no cells; nothing to do");
        return Ok(());
    }
    if a.dry_run {
        return emit(&dry_run_plan(&cells), None);
    }
    let mut results = Vec::with_capacity(cells.len());
    for cell in &cells {
        eprintln!("running {} ({} estimator fits)", cell_id(cell), planned_fits(cell));
        let r = match cell {
            CellConfig::Study(c) => run_study_cell(c)?,
            CellConfig::Meta(c) => run_meta_cell(c)?,
        };
        write_cell(&r, &a.out)?;
        results.push(r);
    }
    write_combined_csv(&results, &a.out.join("combined.csv"))?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&results).map_err(|e| CliError::Data(e.to_string()))? + "\n",
        Format::Csv => std::fs::read_to_string(a.out.join("combined.csv"))?,
        Format::Markdown => summary_markdown(&results),
    };
    emit(&text, None)
}
