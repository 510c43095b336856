//! Parametric bootstrap standard errors, and the Monte Carlo "true SE" oracle
//! used to score them.
//!
//! Replicate `b` draws from its own child of the configured [`SeedStream`], so
//! the result does not depend on how rayon schedules the work.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::estimators::{estimate, FittedDistribution, MeanSdEstimate, Method};
use crate::rng::SeedStream;
use crate::summaries::{extract_summary_in_place, QuantileSummary, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of replicates.
    pub b: usize,
    pub seed: u64,
    /// Fraction of replicates that must succeed for the SE to be reported.
    pub min_success_fraction: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { b: 1000, seed: 0, min_success_fraction: 0.95 }
    }
}

impl BootstrapConfig {
    pub fn new(b: usize, seed: u64) -> Self {
        Self { b, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(Error::Input(format!("bootstrap needs B >= 2, got {}", self.b)));
        }
        if !(self.min_success_fraction > 0.0 && self.min_success_fraction <= 1.0) {
            return Err(Error::Input(format!(
                "min_success_fraction must be in (0, 1], got {}",
                self.min_success_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutcome {
    pub se: f64,
    pub requested: usize,
    pub failures: usize,
    /// First quartile, median and third quartile of the replicate estimates.
    pub quartiles: [f64; 3],
}

/// Sample SD with the `m - 1` denominator.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
}

fn quartiles(xs: &mut [f64]) -> [f64; 3] {
    if xs.is_empty() {
        return [f64::NAN; 3];
    }
    xs.sort_by(f64::total_cmp);
    [0.25, 0.5, 0.75].map(|p| crate::summaries::interpolated_quantile(xs, p))
}

/// Run `stat` on `cfg.b` samples of size `n` from `model` and summarize the
/// spread of the successful results.
pub fn bootstrap_statistic<F>(
    model: &FittedDistribution,
    n: usize,
    cfg: &BootstrapConfig,
    stat: F,
) -> Result<BootstrapOutcome>
where
    F: Fn(&mut [f64]) -> Option<f64> + Sync,
{
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Input("bootstrap sample size must be positive".into()));
    }
    let stream = SeedStream::new(cfg.seed);
    let results: Vec<Option<f64>> = (0..cfg.b as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, i| {
                let mut rng = stream.child(i).rng();
                model.sample_into(n, &mut rng, buf);
                stat(buf).filter(|v| v.is_finite())
            },
        )
        .collect();
    let mut ok: Vec<f64> = results.into_iter().flatten().collect();
    let failures = cfg.b - ok.len();
    if (ok.len() as f64) < cfg.min_success_fraction * cfg.b as f64 {
        return Err(Error::BootstrapUnstable { successes: ok.len(), requested: cfg.b, partial: ok });
    }
    let se = sample_sd(&ok);
    Ok(BootstrapOutcome { se, requested: cfg.b, failures, quartiles: quartiles(&mut ok) })
}

/// Re-run the estimator on one simulated data set; `None` on failure.
pub(crate) fn replicate_mean(data: &mut [f64], scenario: Scenario, method: Method) -> Option<f64> {
    let s = extract_summary_in_place(data, scenario).ok()?;
    let e = estimate(&s, method).ok()?;
    (!e.diagnostics.lambda_at_boundary).then_some(e.mean)
}

/// Bootstrap SE of an estimate already computed from `s`.
pub fn bootstrap_se_from_fit(
    s: &QuantileSummary,
    fit: &MeanSdEstimate,
    cfg: &BootstrapConfig,
) -> Result<BootstrapOutcome> {
    let (scenario, method) = (s.scenario(), fit.method);
    bootstrap_statistic(&fit.fitted, s.n(), cfg, |d| replicate_mean(d, scenario, method))
}

/// Parametric bootstrap SE of `method`'s mean estimate for summary `s`.
///
/// Each replicate draws `n` observations from the fitted model, recomputes
/// the same scenario's summary, and re-runs the whole estimator (including
/// QE's family selection). Failed replicates are dropped.
pub fn bootstrap_se(s: &QuantileSummary, method: Method, cfg: &BootstrapConfig) -> Result<BootstrapOutcome> {
    let fit = estimate(s, method)?;
    bootstrap_se_from_fit(s, &fit, cfg)
}

/// Monte Carlo SD of `stat` over `reps` fresh samples of size `n` from `dist`.
pub fn true_se_oracle_with<F>(dist: &Distribution, n: usize, reps: usize, seed: SeedStream, stat: F) -> Result<f64>
where
    F: Fn(&mut [f64]) -> Option<f64> + Sync,
{
    if reps < 100 {
        return Err(Error::Input(format!("oracle needs at least 100 replicates, got {reps}")));
    }
    if n == 0 {
        return Err(Error::Input("oracle sample size must be positive".into()));
    }
    let results: Vec<Option<f64>> = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, i| {
                let mut rng = seed.child(i).rng();
                dist.sample_into(n, &mut rng, buf);
                stat(buf).filter(|v| v.is_finite())
            },
        )
        .collect();
    let ok: Vec<f64> = results.into_iter().flatten().collect();
    let failures = reps - ok.len();
    if failures as f64 > 0.05 * reps as f64 {
        return Err(Error::OracleUnreliable { failures, reps });
    }
    Ok(sample_sd(&ok))
}

/// True SE of `method`'s mean estimate when data are `n` draws from `dist`
/// and only the `scenario` summary is reported.
pub fn true_se_oracle(
    dist: &Distribution,
    n: usize,
    scenario: Scenario,
    method: Method,
    reps: usize,
    seed: SeedStream,
) -> Result<f64> {
    true_se_oracle_with(dist, n, reps, seed, |d| replicate_mean(d, scenario, method))
}
