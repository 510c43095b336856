//! Monte Carlo experiments for the quantile-summary estimators.
//!
//! Two kinds of cell are supported. A study cell ([`run_study_cell`]) scores
//! naive and bootstrap SEs of each estimator against a Monte Carlo true SE. A
//! meta cell ([`run_meta_cell`]) simulates whole random-effects meta-analyses
//! in which some studies report medians, and scores the pooled mean, `τ²` and
//! `I²`.
//!
//! Every replicate draws from its own [`SeedStream`] child and metrics are
//! computed from the collected per-replicate records, so results are identical
//! for any number of worker threads.

mod meta_cell;
mod output;
mod study_cell;

use serde::{Deserialize, Serialize};

use metamed::{Method, SeKind};

pub use meta_cell::{run_meta_cell, true_i2_oracle, MetaSimConfig};
pub use output::{write_cell, write_combined_csv};
pub use study_cell::{run_study_cell, StudySimConfig};

/// Errors from the harness.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] metamed::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type SimResult<T> = std::result::Result<T, SimError>;

/// SE metrics of one estimator and SE variant in a study cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetrics {
    pub method: Method,
    pub se_kind: SeKind,
    pub true_se: f64,
    pub median_pct_err: f64,
    pub mean_pct_err: f64,
    pub rmse: f64,
    pub mean_se: f64,
    /// Replicates that produced an SE.
    pub used: usize,
}

/// Pooled-mean, `τ²` and `I²` metrics of one estimator and SE variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaMetrics {
    pub method: Method,
    pub se_kind: SeKind,
    pub mu_bias: f64,
    pub mu_variance: f64,
    pub mu_coverage: f64,
    pub tau2_bias: f64,
    pub tau2_variance: f64,
    pub tau2_coverage: f64,
    pub mean_i2: f64,
    pub true_i2: Option<f64>,
    pub i2_bias: Option<f64>,
    pub i2_median_bias: Option<f64>,
    pub used: usize,
    pub reml_failures: usize,
    /// REML failed in more than 1% of replicates.
    pub flagged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostics {
    pub reps: usize,
    pub estimator_failures: usize,
    pub bootstrap_failures: usize,
    /// Simulated studies redrawn because a value was not positive.
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CellConfig {
    Study(StudySimConfig),
    Meta(MetaSimConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCellResult {
    pub cell_id: String,
    pub config: CellConfig,
    pub study: Vec<StudyMetrics>,
    pub meta: Vec<MetaMetrics>,
    pub diagnostics: CellDiagnostics,
}

/// Cap rayon's global pool at `METAMED_THREADS` workers when that variable is
/// set. Returns the cap applied, if any. Safe to call more than once.
pub fn configure_threads() -> Option<usize> {
    let n = std::env::var("METAMED_THREADS").ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Some(n)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Variance with the `m - 1` denominator.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
        assert_eq!(variance(&[1.0, 2.0, 3.0]), 1.0);
    }
}
