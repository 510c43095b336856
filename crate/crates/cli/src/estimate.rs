use std::io::Read;

use serde::Serialize;

use metamed::bootstrap::bootstrap_se_from_fit;
use metamed::estimators::{estimate, naive_se};
use metamed::{BootstrapConfig, Method, MeanSdEstimate, QuantileSummary, Scenario};

use crate::args::{EstimateArgs, Format};
use crate::{emit, fmt2, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    pub scenario: Scenario,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub naive_se: f64,
    pub bootstrap_se: f64,
    pub bootstrap_b: usize,
    pub bootstrap_failures: usize,
    pub seed: u64,
    pub model: String,
    pub estimate: MeanSdEstimate,
}

#[derive(Debug, Default)]
struct Fields {
    min: Option<f64>,
    q1: Option<f64>,
    median: Option<f64>,
    q3: Option<f64>,
    max: Option<f64>,
    n: Option<usize>,
}

/// Parse whitespace- or comma-separated `key=value` pairs.
fn parse_pairs(text: &str) -> CliResult<Fields> {
    let mut f = Fields::default();
    for tok in text.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, got '{tok}'")))?;
        let num = || v.parse::<f64>().map_err(|_| CliError::Usage(format!("'{v}' is not a number")));
        match k.trim().to_ascii_lowercase().as_str() {
            "min" => f.min = Some(num()?),
            "q1" => f.q1 = Some(num()?),
            "median" => f.median = Some(num()?),
            "q3" => f.q3 = Some(num()?),
            "max" => f.max = Some(num()?),
            "n" => f.n = Some(v.parse().map_err(|_| CliError::Usage(format!("'{v}' is not a sample size")))?),
            other => return Err(CliError::Usage(format!("unknown field '{other}'"))),
        }
    }
    Ok(f)
}

fn summary_from_args(a: &EstimateArgs) -> CliResult<QuantileSummary> {
    let f = if a.median.is_none() && a.n.is_none() {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        parse_pairs(&text)?
    } else {
        Fields { min: a.min, q1: a.q1, median: a.median, q3: a.q3, max: a.max, n: a.n }
    };
    let median = f.median.ok_or_else(|| CliError::Usage("--median is required".into()))?;
    let n = f.n.ok_or_else(|| CliError::Usage("--n is required".into()))?;
    let s = QuantileSummary::from_parts(f.min, f.q1, median, f.q3, f.max, n)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(sc) = a.scenario {
        if sc != s.scenario() {
            return Err(CliError::Usage(format!("--scenario {sc} does not match the quantiles given ({})", s.scenario())));
        }
    }
    Ok(s)
}

pub fn run_estimate(s: &QuantileSummary, method: Method, b: usize, seed: u64) -> CliResult<EstimateReport> {
    let e = estimate(s, method)?;
    let boot = bootstrap_se_from_fit(s, &e, &BootstrapConfig::new(b, seed))?;
    Ok(EstimateReport {
        method,
        scenario: s.scenario(),
        n: s.n(),
        mean: e.mean,
        sd: e.sd,
        naive_se: naive_se(&e, s.n()),
        bootstrap_se: boot.se,
        bootstrap_b: b,
        bootstrap_failures: boot.failures,
        seed,
        model: e.fitted.describe(),
        estimate: e,
    })
}

pub fn render_estimate(r: &EstimateReport, format: Format) -> CliResult<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(r).map_err(|e| CliError::Data(e.to_string()))? + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let row = [
                r.method.to_string(),
                r.scenario.to_string(),
                r.n.to_string(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.naive_se.to_string(),
                r.bootstrap_se.to_string(),
                r.bootstrap_b.to_string(),
                r.seed.to_string(),
                r.model.clone(),
            ];
            let header = ["method", "scenario", "n", "mean", "sd", "naive_se", "bootstrap_se", "B", "seed", "model"];
            let res: csv::Result<()> = (|| {
                w.write_record(header)?;
                w.write_record(row)?;
                Ok(())
            })();
            res.map_err(|e| CliError::Data(e.to_string()))?;
            String::from_utf8(w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)
                .expect("csv output is UTF-8")
        }
        Format::Markdown => {
            let mut out = format!(
                "method: {}  scenario: {}  n: {}  B: {}  seed: {}\n\n",
                r.method, r.scenario, r.n, r.bootstrap_b, r.seed
            );
            out += "| mean | sd | naive SE | bootstrap SE |\n|---:|---:|---:|---:|\n";
            out += &format!("| {} | {} | {} | {} |\n\n", fmt2(r.mean), fmt2(r.sd), fmt2(r.naive_se), fmt2(r.bootstrap_se));
            out += &format!("model: {}\n", r.model);
            let d = &r.estimate.diagnostics;
            if let Some(l) = d.lambda {
                out += &format!("lambda: {l:.4}{}\n", if d.lambda_at_boundary { " (at search boundary)" } else { "" });
            }
            for (fam, obj) in &d.family_objectives {
                out += &format!("objective {fam}: {obj:.3e}\n");
            }
            if r.bootstrap_failures > 0 {
                out += &format!("bootstrap replicates dropped: {}\n", r.bootstrap_failures);
            }
            out
        }
    })
}

pub fn cmd_estimate(a: &EstimateArgs) -> CliResult<()> {
    let s = summary_from_args(a)?;
    let r = run_estimate(&s, a.method, a.b, a.seed)?;
    emit(&render_estimate(&r, a.format)?, a.out.as_deref())
}
