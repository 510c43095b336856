//! Luo et al. mean and Wan et al. SD estimators for summaries assumed to come
//! from a normal distribution.

use crate::special::norm_ppf;
use crate::summaries::{QuantileSummary, Scenario};

/// Quantiles in a fixed `[min, q1, median, q3, max]` layout; absent entries
/// are ignored according to the scenario.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Five {
    pub scenario: Scenario,
    pub v: [f64; 5],
    pub n: f64,
}

impl Five {
    pub fn from_summary(s: &QuantileSummary) -> Self {
        let nan = f64::NAN;
        Self {
            scenario: s.scenario(),
            v: [
                s.min().unwrap_or(nan),
                s.q1().unwrap_or(nan),
                s.median(),
                s.q3().unwrap_or(nan),
                s.max().unwrap_or(nan),
            ],
            n: s.n() as f64,
        }
    }

    /// Indices into `v` of the quantiles present in this scenario.
    pub fn present(&self) -> &'static [usize] {
        match self.scenario {
            Scenario::S1 => &[0, 2, 4],
            Scenario::S2 => &[1, 2, 3],
            Scenario::S3 => &[0, 1, 2, 3, 4],
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = *self;
        for &i in self.present() {
            out.v[i] = f(self.v[i]);
        }
        out
    }
}

/// Denominators of the Wan range and IQR estimators, which depend only on `n`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WanConstants {
    range: f64,
    iqr: f64,
}

impl WanConstants {
    pub fn new(n: f64) -> Self {
        Self {
            range: 2.0 * norm_ppf((n - 0.375) / (n + 0.25)),
            iqr: 2.0 * norm_ppf((0.75 * n - 0.125) / (n + 0.25)),
        }
    }
}

pub(crate) fn luo_mean_five(f: &Five) -> f64 {
    let n = f.n;
    let [min, q1, med, q3, max] = f.v;
    match f.scenario {
        Scenario::S1 => {
            let w = 4.0 / (4.0 + n.powf(0.75));
            w * 0.5 * (min + max) + (1.0 - w) * med
        }
        Scenario::S2 => {
            let w = 0.7 + 0.39 / n;
            w * 0.5 * (q1 + q3) + (1.0 - w) * med
        }
        Scenario::S3 => {
            let w1 = 2.2 / (2.2 + n.powf(0.75));
            let w2 = 0.7 - 0.72 / n.powf(0.55);
            w1 * 0.5 * (min + max) + w2 * 0.5 * (q1 + q3) + (1.0 - w1 - w2) * med
        }
    }
}

pub(crate) fn wan_sd_five(f: &Five, c: &WanConstants) -> f64 {
    let [min, q1, _, q3, max] = f.v;
    let by_range = || if max > min { (max - min) / c.range } else { 0.0 };
    let by_iqr = || if q3 > q1 { (q3 - q1) / c.iqr } else { 0.0 };
    match f.scenario {
        Scenario::S1 => by_range(),
        Scenario::S2 => by_iqr(),
        Scenario::S3 => 0.5 * (by_range() + by_iqr()),
    }
}

/// Luo et al. estimate of the mean from a quantile summary.
pub fn luo_mean(s: &QuantileSummary) -> f64 {
    luo_mean_five(&Five::from_summary(s))
}

/// Wan et al. estimate of the standard deviation from a quantile summary.
/// Returns 0 when the relevant spread is zero.
pub fn wan_sd(s: &QuantileSummary) -> f64 {
    wan_sd_five(&Five::from_summary(s), &WanConstants::new(s.n() as f64))
}
