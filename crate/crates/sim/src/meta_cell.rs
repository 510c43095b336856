use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use metamed::bootstrap::{bootstrap_se_from_fit, true_se_oracle};
use metamed::estimators::{estimate, naive_se};
use metamed::meta::{meta_analyze, StudyInput};
use metamed::summaries::extract_summary_in_place;
use metamed::{BootstrapConfig, Distribution, Method, Scenario, SeKind, SeedStream};

use crate::{
    mean, median, variance, CellConfig, CellDiagnostics, MetaMetrics, SimError, SimResult, SimCellResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSimConfig {
    /// Studies per meta-analysis.
    pub k: usize,
    /// Fraction of studies reporting a median summary; `round(p·k)` of them do.
    pub p: f64,
    pub scenario: Scenario,
    pub tau2_true: f64,
    pub base: Distribution,
    /// Inclusive range of the discrete uniform study sizes.
    pub n_range: (usize, usize),
    pub reps: usize,
    pub methods: Vec<Method>,
    /// `None` scores naive SEs only.
    pub bootstrap: Option<BootstrapConfig>,
    pub seed: u64,
    /// Replicates per sample size for the true-`I²` oracle; `None` skips it.
    pub i2_oracle_reps: Option<usize>,
}

impl MetaSimConfig {
    /// Desk-scale defaults for the log-normal base distribution.
    pub fn desk(k: usize, p: f64, scenario: Scenario, methods: Vec<Method>, seed: u64) -> Self {
        Self {
            k,
            p,
            scenario,
            tau2_true: 6.0,
            base: Distribution::lognormal(5.0, 0.25).expect("valid parameters"),
            n_range: (100, 500),
            reps: 300,
            methods,
            bootstrap: Some(BootstrapConfig::new(200, 0)),
            seed,
            i2_oracle_reps: None,
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.k < 2 {
            return Err(SimError::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(SimError::Config(format!("p must be in [0, 1], got {}", self.p)));
        }
        if !(self.tau2_true >= 0.0 && self.tau2_true.is_finite()) {
            return Err(SimError::Config(format!("tau2_true must be non-negative, got {}", self.tau2_true)));
        }
        let (lo, hi) = self.n_range;
        if lo < 5 || lo > hi {
            return Err(SimError::Config(format!("invalid n_range ({lo}, {hi})")));
        }
        if self.reps < 10 {
            return Err(SimError::Config(format!("reps must be at least 10, got {}", self.reps)));
        }
        if self.methods.is_empty() {
            return Err(SimError::Config("no methods selected".into()));
        }
        if let Some(b) = &self.bootstrap {
            b.validate()?;
        }
        Ok(())
    }

    /// Number of median-reporting studies.
    pub fn median_count(&self) -> usize {
        (self.p * self.k as f64).round() as usize
    }

    pub fn cell_id(&self) -> String {
        format!("meta-k{}-m{}-{}", self.k, self.median_count(), self.scenario)
    }
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    mu: f64,
    mu_covered: bool,
    tau2: f64,
    tau2_covered: bool,
    i2: f64,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Done(RepOutcome),
    EstimatorFailed,
    RemlFailed,
    Skipped,
}

struct Rep {
    slots: Vec<[Slot; 2]>,
    estimator_failures: usize,
    bootstrap_failures: usize,
    redraws: usize,
}

/// One simulated meta-analysis: per-study inputs for every (method, kind).
fn simulate_rep(cfg: &MetaSimConfig, root: SeedStream, r: u64, true_mu: f64) -> Rep {
    let m_count = cfg.median_count();
    let tau = cfg.tau2_true.sqrt();
    let nm = cfg.methods.len();
    let data_stream = root.named("data").child(r);
    let boot_stream = root.named("bootstrap").child(r);
    // inputs[method][kind] -> studies; None when an estimate failed
    let mut inputs: Vec<[Option<Vec<StudyInput>>; 2]> =
        (0..nm).map(|_| [Some(Vec::with_capacity(cfg.k)), Some(Vec::with_capacity(cfg.k))]).collect();
    let (mut estimator_failures, mut bootstrap_failures, mut redraws) = (0, 0, 0);
    let mut data = Vec::new();
    for k in 0..cfg.k {
        let mut rng = data_stream.child(k as u64).rng();
        let median_reporting = k < m_count;
        let n = loop {
            let z: f64 = rng.sample(StandardNormal);
            let gamma = tau * z;
            let n = rng.random_range(cfg.n_range.0..=cfg.n_range.1);
            cfg.base.sample_into(n, &mut rng, &mut data);
            data.iter_mut().for_each(|x| *x += gamma);
            if median_reporting && data.iter().any(|&x| x <= 0.0) {
                redraws += 1;
                continue;
            }
            break n;
        };
        let label = format!("study{k}");
        if !median_reporting {
            let m = mean(&data);
            let se = (variance(&data) / n as f64).sqrt();
            for slot in inputs.iter_mut() {
                for v in slot.iter_mut().flatten() {
                    v.push(StudyInput { y: m, se, label: label.clone() });
                }
            }
            continue;
        }
        let Ok(s) = extract_summary_in_place(&mut data, cfg.scenario) else {
            estimator_failures += nm;
            inputs.iter_mut().for_each(|slot| *slot = [None, None]);
            continue;
        };
        for (i, &method) in cfg.methods.iter().enumerate() {
            let Ok(e) = estimate(&s, method) else {
                estimator_failures += 1;
                inputs[i] = [None, None];
                continue;
            };
            let naive = naive_se(&e, n);
            if let Some(v) = inputs[i][0].as_mut() {
                match StudyInput::new(e.mean, naive, label.clone()) {
                    Ok(st) => v.push(st),
                    Err(_) => inputs[i][0] = None,
                }
            }
            if let Some(b) = &cfg.bootstrap {
                let bc = BootstrapConfig { seed: boot_stream.child(k as u64).named(method.name()).key(), ..*b };
                let boot = bootstrap_se_from_fit(&s, &e, &bc).ok().and_then(|o| StudyInput::new(e.mean, o.se, label.clone()).ok());
                match (boot, inputs[i][1].as_mut()) {
                    (Some(st), Some(v)) => v.push(st),
                    (None, _) => {
                        bootstrap_failures += 1;
                        inputs[i][1] = None;
                    }
                    _ => {}
                }
            }
        }
    }
    let analyze = |studies: &Option<Vec<StudyInput>>| -> Slot {
        let Some(studies) = studies else { return Slot::EstimatorFailed };
        match meta_analyze(studies, 0.95) {
            Ok(res) => Slot::Done(RepOutcome {
                mu: res.mu_pool,
                mu_covered: res.mu_ci.0 <= true_mu && true_mu <= res.mu_ci.1,
                tau2: res.tau2,
                tau2_covered: res.tau2_ci.0 <= cfg.tau2_true && cfg.tau2_true <= res.tau2_ci.1,
                i2: res.i2,
            }),
            Err(_) => Slot::RemlFailed,
        }
    };
    let slots = inputs
        .iter()
        .map(|[naive, boot]| {
            [analyze(naive), if cfg.bootstrap.is_some() { analyze(boot) } else { Slot::Skipped }]
        })
        .collect();
    Rep { slots, estimator_failures, bootstrap_failures, redraws }
}

/// Run a meta-analytic cell.
pub fn run_meta_cell(cfg: &MetaSimConfig) -> SimResult<SimCellResult> {
    cfg.validate()?;
    let root = SeedStream::new(cfg.seed);
    let true_mu = cfg.base.mean();
    let reps: Vec<Rep> =
        (0..cfg.reps as u64).into_par_iter().map(|r| simulate_rep(cfg, root, r, true_mu)).collect();

    let mut meta = Vec::new();
    for (i, &method) in cfg.methods.iter().enumerate() {
        let true_i2 = match cfg.i2_oracle_reps {
            Some(n) => Some(true_i2_oracle(cfg, method, n)?),
            None => None,
        };
        for (j, kind) in [SeKind::Naive, SeKind::Bootstrap].into_iter().enumerate() {
            if kind == SeKind::Bootstrap && cfg.bootstrap.is_none() {
                continue;
            }
            let done: Vec<RepOutcome> = reps
                .iter()
                .filter_map(|rep| match rep.slots[i][j] {
                    Slot::Done(o) => Some(o),
                    _ => None,
                })
                .collect();
            let reml_failures = reps.iter().filter(|rep| matches!(rep.slots[i][j], Slot::RemlFailed)).count();
            if done.is_empty() {
                continue;
            }
            let col = |f: fn(&RepOutcome) -> f64| done.iter().map(f).collect::<Vec<f64>>();
            let frac = |f: fn(&RepOutcome) -> bool| done.iter().filter(|o| f(o)).count() as f64 / done.len() as f64;
            let (mus, tau2s, i2s) = (col(|o| o.mu), col(|o| o.tau2), col(|o| o.i2));
            meta.push(MetaMetrics {
                method,
                se_kind: kind,
                mu_bias: mean(&mus) - true_mu,
                mu_variance: variance(&mus),
                mu_coverage: frac(|o| o.mu_covered),
                tau2_bias: mean(&tau2s) - cfg.tau2_true,
                tau2_variance: variance(&tau2s),
                tau2_coverage: frac(|o| o.tau2_covered),
                mean_i2: mean(&i2s),
                true_i2,
                i2_bias: true_i2.map(|t| mean(&i2s) - t),
                i2_median_bias: true_i2.map(|t| median(&i2s) - t),
                used: done.len(),
                reml_failures,
                flagged: reml_failures as f64 > 0.01 * cfg.reps as f64,
            });
        }
    }
    let diagnostics = CellDiagnostics {
        reps: cfg.reps,
        estimator_failures: reps.iter().map(|r| r.estimator_failures).sum(),
        bootstrap_failures: reps.iter().map(|r| r.bootstrap_failures).sum(),
        redraws: reps.iter().map(|r| r.redraws).sum(),
    };
    Ok(SimCellResult { cell_id: cfg.cell_id(), config: CellConfig::Meta(cfg.clone()), study: Vec::new(), meta, diagnostics })
}

/// Study sizes at which the oracle evaluates the true SE; `n·SE²` is
/// interpolated linearly between them.
const ORACLE_SIZES: usize = 5;

/// True `I²` for a cell: `τ² / (τ² + E[v])`, with `E[v]` the average true
/// sampling variance of a study's reported mean over the study-size
/// distribution and the mix of reporting types.
pub fn true_i2_oracle(cfg: &MetaSimConfig, method: Method, reps_per_size: usize) -> SimResult<f64> {
    cfg.validate()?;
    let (lo, hi) = cfg.n_range;
    let base_var = cfg.base.sd().powi(2);
    let sizes: Vec<usize> = if lo == hi {
        vec![lo]
    } else {
        (0..ORACLE_SIZES).map(|j| lo + (hi - lo) * j / (ORACLE_SIZES - 1)).collect()
    };
    let m_frac = cfg.median_count() as f64 / cfg.k as f64;
    let scaled: Vec<f64> = if m_frac > 0.0 {
        let stream = SeedStream::new(cfg.seed).named("i2-oracle").named(method.name());
        sizes
            .iter()
            .map(|&n| {
                true_se_oracle(&cfg.base, n, cfg.scenario, method, reps_per_size, stream.child(n as u64))
                    .map(|se| n as f64 * se * se)
            })
            .collect::<Result<_, _>>()?
    } else {
        vec![0.0; sizes.len()]
    };
    let interp = |n: usize| -> f64 {
        if sizes.len() == 1 {
            return scaled[0];
        }
        let j = sizes.iter().rposition(|&s| s <= n).unwrap_or(0).min(sizes.len() - 2);
        let t = (n - sizes[j]) as f64 / (sizes[j + 1] - sizes[j]) as f64;
        scaled[j] + t * (scaled[j + 1] - scaled[j])
    };
    let count = (hi - lo + 1) as f64;
    let ev = (lo..=hi)
        .map(|n| (m_frac * interp(n) + (1.0 - m_frac) * base_var) / n as f64)
        .sum::<f64>()
        / count;
    Ok(cfg.tau2_true / (cfg.tau2_true + ev))
}
