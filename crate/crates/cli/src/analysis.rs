//! The two-group application pipeline: tie breaking, screening, per-group
//! estimation, differences of means and random-effects pooling per outcome.

use serde::{Deserialize, Serialize};

use metamed::bootstrap::bootstrap_se_from_fit;
use metamed::estimators::{estimate, naive_se};
use metamed::meta::{difference_of_means, meta_analyze};
use metamed::summaries::{break_ties, screen_study, GroupSummary, ScreenDecision};
use metamed::{BootstrapConfig, EstimateWithSe, Method, SeKind, SeedStream, StudyInput};

use crate::args::{Format, MetaArgs};
use crate::data::{pair_groups, read_records, StudyPair};
use crate::report::{render_meta, render_studies_csv};
use crate::{emit, CliError, CliResult};

/// Everything that determines a `meta` run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub se: SeKind,
    pub b: usize,
    pub seed: u64,
    pub min_n: usize,
    pub skew_cap: f64,
    pub min_studies: usize,
    pub level: f64,
    pub format: Format,
}

impl RunConfig {
    pub fn from_args(a: &MetaArgs) -> CliResult<Self> {
        let cfg = Self {
            method: a.method,
            se: a.se,
            b: a.b,
            seed: a.seed,
            min_n: a.min_n,
            skew_cap: a.skew_cap,
            min_studies: a.min_studies,
            level: a.level,
            format: a.format,
        };
        if !(cfg.level > 0.0 && cfg.level < 1.0) {
            return Err(CliError::Usage(format!("--level must be in (0, 1), got {}", cfg.level)));
        }
        if cfg.min_studies < 2 {
            return Err(CliError::Usage("--min-studies must be at least 2".into()));
        }
        if cfg.se == SeKind::Bootstrap {
            BootstrapConfig::new(cfg.b, cfg.seed).validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(cfg)
    }
}

/// Pooled result for one outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub outcome: String,
    pub k: usize,
    pub method: Method,
    pub se_kind: SeKind,
    pub diff: f64,
    pub diff_se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub tau2: f64,
    pub tau2_lo: f64,
    pub tau2_hi: f64,
    pub i2: f64,
    /// `tau2` is a local maximum of the restricted likelihood.
    pub tau2_local_mode: bool,
}

/// Per-study inputs and weight within its outcome's analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub outcome: String,
    pub study_id: String,
    pub n1: usize,
    pub mean1: f64,
    pub sd1: f64,
    pub se1: f64,
    pub n2: usize,
    pub mean2: f64,
    pub sd2: f64,
    pub se2: f64,
    pub diff: f64,
    pub se: f64,
    pub weight: f64,
}

/// A study removed before pooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedStudy {
    pub outcome: String,
    pub study_id: String,
    pub reason: String,
}

/// An outcome left with too few studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedOutcome {
    pub outcome: String,
    pub studies: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaReport {
    pub tool: String,
    pub version: String,
    pub input: String,
    pub config: RunConfig,
    pub outcomes: Vec<OutcomeRow>,
    pub studies: Vec<StudyRow>,
    pub dropped: Vec<DroppedStudy>,
    pub skipped: Vec<SkippedOutcome>,
}

struct GroupFit {
    n: usize,
    mean: f64,
    sd: f64,
    est: EstimateWithSe,
}

fn fit_group(g: &GroupSummary, cfg: &RunConfig, seed: SeedStream) -> metamed::Result<GroupFit> {
    match g {
        GroupSummary::MeanSd(m) => Ok(GroupFit {
            n: m.n,
            mean: m.mean,
            sd: m.sd,
            est: EstimateWithSe { estimate: m.mean, se: m.sd / (m.n as f64).sqrt(), kind: cfg.se },
        }),
        GroupSummary::Quantiles(q) => {
            let e = estimate(q, cfg.method)?;
            let se = match cfg.se {
                SeKind::Naive => naive_se(&e, q.n()),
                SeKind::Bootstrap => bootstrap_se_from_fit(q, &e, &BootstrapConfig::new(cfg.b, seed.key()))?.se,
            };
            Ok(GroupFit { n: q.n(), mean: e.mean, sd: e.sd, est: EstimateWithSe { estimate: e.mean, se, kind: cfg.se } })
        }
    }
}

fn untie(g: &GroupSummary) -> metamed::Result<GroupSummary> {
    Ok(match g {
        GroupSummary::Quantiles(q) => GroupSummary::Quantiles(break_ties(q)?),
        other => *other,
    })
}

/// Run the full pipeline over already paired study records.
pub fn analyze(pairs: &[StudyPair], cfg: &RunConfig, input: &str) -> CliResult<MetaReport> {
    let root = SeedStream::new(cfg.seed);
    let mut outcomes_order: Vec<String> = Vec::new();
    for p in pairs {
        if !outcomes_order.contains(&p.outcome) {
            outcomes_order.push(p.outcome.clone());
        }
    }
    let mut report = MetaReport {
        tool: "metamed".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input: input.into(),
        config: cfg.clone(),
        outcomes: Vec::new(),
        studies: Vec::new(),
        dropped: Vec::new(),
        skipped: Vec::new(),
    };
    for outcome in &outcomes_order {
        let mut kept: Vec<(StudyInput, GroupFit, GroupFit)> = Vec::new();
        for p in pairs.iter().filter(|p| &p.outcome == outcome) {
            let drop = |reason: String| DroppedStudy { outcome: outcome.clone(), study_id: p.study_id.clone(), reason };
            let untied = untie(&p.summary.group1).and_then(|g1| Ok((g1, untie(&p.summary.group2)?)));
            let (g1, g2) = untied.map_err(|e| {
                CliError::Data(format!("lines {}/{}: {e}", p.lines[0], p.lines[1]))
            })?;
            let t = metamed::summaries::TwoGroupSummary { group1: g1, group2: g2 };
            if let ScreenDecision::Drop { reason, group } = screen_study(&t, cfg.min_n, cfg.skew_cap) {
                report.dropped.push(drop(format!("{reason} (group {group})")));
                continue;
            }
            let stream = root.named(outcome).named(&p.study_id);
            let fits = fit_group(&g1, cfg, stream.child(1)).and_then(|f1| Ok((f1, fit_group(&g2, cfg, stream.child(2))?)));
            let (f1, f2) = match fits {
                Ok(f) => f,
                Err(e) => {
                    report.dropped.push(drop(format!("estimation failed: {e}")));
                    continue;
                }
            };
            match difference_of_means(&f1.est, &f2.est, p.study_id.clone()) {
                Ok(si) => kept.push((si, f1, f2)),
                Err(e) => report.dropped.push(drop(format!("invalid difference: {e}"))),
            }
        }
        if kept.len() < cfg.min_studies {
            report.skipped.push(SkippedOutcome { outcome: outcome.clone(), studies: kept.len() });
            continue;
        }
        let inputs: Vec<StudyInput> = kept.iter().map(|(s, _, _)| s.clone()).collect();
        let res = meta_analyze(&inputs, cfg.level)
            .map_err(|e| CliError::Numerical(format!("outcome '{outcome}': {e}")))?;
        report.outcomes.push(OutcomeRow {
            outcome: outcome.clone(),
            k: inputs.len(),
            method: cfg.method,
            se_kind: cfg.se,
            diff: res.mu_pool,
            diff_se: res.se_pool,
            ci_lo: res.mu_ci.0,
            ci_hi: res.mu_ci.1,
            tau2: res.tau2,
            tau2_lo: res.tau2_ci.0,
            tau2_hi: res.tau2_ci.1,
            i2: res.i2,
            tau2_local_mode: res.tau2_local_mode,
        });
        for ((si, f1, f2), w) in kept.iter().zip(&res.weights) {
            report.studies.push(StudyRow {
                outcome: outcome.clone(),
                study_id: si.label.clone(),
                n1: f1.n,
                mean1: f1.mean,
                sd1: f1.sd,
                se1: f1.est.se,
                n2: f2.n,
                mean2: f2.mean,
                sd2: f2.sd,
                se2: f2.est.se,
                diff: si.y,
                se: si.se,
                weight: *w,
            });
        }
    }
    Ok(report)
}

pub fn cmd_meta(a: &MetaArgs) -> CliResult<()> {
    let cfg = RunConfig::from_args(a)?;
    let records = read_records(&a.csv)?;
    let pairs = pair_groups(&records)?;
    let report = analyze(&pairs, &cfg, &a.csv.display().to_string())?;
    for d in &report.dropped {
        eprintln!("dropped study '{}' ({}): {}", d.study_id, d.outcome, d.reason);
    }
    for s in &report.skipped {
        eprintln!("skipped outcome '{}': {} studies after screening, {} required", s.outcome, s.studies, cfg.min_studies);
    }
    emit(&render_meta(&report)?, a.out.as_deref())?;
    if let (Format::Csv, Some(out)) = (cfg.format, &a.out) {
        let mut path = out.clone().into_os_string();
        path.push(".studies.csv");
        emit(&render_studies_csv(&report.studies)?, Some(std::path::Path::new(&path)))?;
    }
    Ok(())
}
