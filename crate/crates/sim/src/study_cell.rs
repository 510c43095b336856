use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use metamed::bootstrap::{bootstrap_se_from_fit, true_se_oracle};
use metamed::estimators::{estimate, naive_se};
use metamed::summaries::extract_summary_in_place;
use metamed::{BootstrapConfig, Distribution, Method, Scenario, SeKind, SeedStream};

use crate::{
    mean, median, CellConfig, CellDiagnostics, SimError, SimResult, SimCellResult, StudyMetrics,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySimConfig {
    pub dist: Distribution,
    pub n: usize,
    pub scenario: Scenario,
    pub reps: usize,
    pub oracle_reps: usize,
    pub methods: Vec<Method>,
    /// `None` scores naive SEs only.
    pub bootstrap: Option<BootstrapConfig>,
    pub seed: u64,
}

impl StudySimConfig {
    pub fn validate(&self) -> SimResult<()> {
        if self.reps < 10 {
            return Err(SimError::Config(format!("reps must be at least 10, got {}", self.reps)));
        }
        if self.oracle_reps < 100 {
            return Err(SimError::Config(format!("oracle_reps must be at least 100, got {}", self.oracle_reps)));
        }
        if self.n < 5 {
            return Err(SimError::Config(format!("n must be at least 5, got {}", self.n)));
        }
        if self.methods.is_empty() {
            return Err(SimError::Config("no methods selected".into()));
        }
        if let Some(b) = &self.bootstrap {
            b.validate()?;
        }
        Ok(())
    }

    pub fn cell_id(&self) -> String {
        let p: Vec<String> = self.dist.params().iter().map(|v| format!("{v}")).collect();
        format!("study-{}({})-n{}-{}", self.dist.family(), p.join(","), self.n, self.scenario)
    }
}

/// Per-replicate SE estimates: `[method][kind]`, `None` when that estimate failed.
type RepRecord = Vec<[Option<f64>; 2]>;

fn score(method: Method, kind: SeKind, truth: f64, ses: &[f64]) -> StudyMetrics {
    let pct: Vec<f64> = ses.iter().map(|se| (se - truth) / truth * 100.0).collect();
    let mse = ses.iter().map(|se| (se - truth).powi(2)).sum::<f64>() / ses.len() as f64;
    StudyMetrics {
        method,
        se_kind: kind,
        true_se: truth,
        median_pct_err: median(&pct),
        mean_pct_err: mean(&pct),
        rmse: mse.sqrt(),
        mean_se: mean(ses),
        used: ses.len(),
    }
}

/// Run a study-level cell: for every replicate data set, estimate each
/// method's naive (and optionally bootstrap) SE and compare it with the
/// method's true SE.
pub fn run_study_cell(cfg: &StudySimConfig) -> SimResult<SimCellResult> {
    cfg.validate()?;
    let root = SeedStream::new(cfg.seed);
    let truths: Vec<f64> = cfg
        .methods
        .iter()
        .map(|&m| {
            true_se_oracle(&cfg.dist, cfg.n, cfg.scenario, m, cfg.oracle_reps, root.named("oracle").named(m.name()))
        })
        .collect::<Result<_, _>>()?;

    let data_stream = root.named("data");
    let boot_stream = root.named("bootstrap");
    let records: Vec<(RepRecord, usize, usize)> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = data_stream.child(r).rng();
            let mut data = Vec::with_capacity(cfg.n);
            cfg.dist.sample_into(cfg.n, &mut rng, &mut data);
            let mut rec = vec![[None, None]; cfg.methods.len()];
            let (mut est_fail, mut boot_fail) = (0, 0);
            let Ok(s) = extract_summary_in_place(&mut data, cfg.scenario) else {
                return (rec, cfg.methods.len(), 0);
            };
            for (slot, &m) in rec.iter_mut().zip(&cfg.methods) {
                let Ok(e) = estimate(&s, m) else {
                    est_fail += 1;
                    continue;
                };
                slot[0] = Some(naive_se(&e, cfg.n));
                if let Some(b) = &cfg.bootstrap {
                    let bc = BootstrapConfig { seed: boot_stream.child(r).named(m.name()).key(), ..*b };
                    match bootstrap_se_from_fit(&s, &e, &bc) {
                        Ok(out) => slot[1] = Some(out.se),
                        Err(_) => boot_fail += 1,
                    }
                }
            }
            (rec, est_fail, boot_fail)
        })
        .collect();

    let mut study = Vec::new();
    for (i, &m) in cfg.methods.iter().enumerate() {
        for (k, kind) in [SeKind::Naive, SeKind::Bootstrap].into_iter().enumerate() {
            if kind == SeKind::Bootstrap && cfg.bootstrap.is_none() {
                continue;
            }
            let ses: Vec<f64> = records.iter().filter_map(|(rec, _, _)| rec[i][k]).collect();
            if !ses.is_empty() {
                study.push(score(m, kind, truths[i], &ses));
            }
        }
    }
    let diagnostics = CellDiagnostics {
        reps: cfg.reps,
        estimator_failures: records.iter().map(|r| r.1).sum(),
        bootstrap_failures: records.iter().map(|r| r.2).sum(),
        redraws: 0,
    };
    Ok(SimCellResult {
        cell_id: cfg.cell_id(),
        config: CellConfig::Study(cfg.clone()),
        study,
        meta: Vec::new(),
        diagnostics,
    })
}
