//! Reported quantile summaries and the screening rules applied to them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which subset of the five-number summary a study reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// minimum, median, maximum
    #[serde(alias = "s1")]
    S1,
    /// first quartile, median, third quartile
    #[serde(alias = "s2")]
    S2,
    /// all five
    #[serde(alias = "s3")]
    S3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::S1, Scenario::S2, Scenario::S3];

    pub fn has_extremes(self) -> bool {
        matches!(self, Scenario::S1 | Scenario::S3)
    }

    pub fn has_quartiles(self) -> bool {
        matches!(self, Scenario::S2 | Scenario::S3)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(Scenario::S1),
            "S2" => Ok(Scenario::S2),
            "S3" => Ok(Scenario::S3),
            _ => Err(Error::Input(format!("unknown scenario '{s}' (expected s1, s2 or s3)"))),
        }
    }
}

/// A study's reported quantiles plus its sample size.
///
/// Which fields are present is fixed by `scenario`; the constructors enforce it
/// together with the weak ordering `min ≤ q1 ≤ median ≤ q3 ≤ max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    scenario: Scenario,
    min: Option<f64>,
    q1: Option<f64>,
    median: f64,
    q3: Option<f64>,
    max: Option<f64>,
    n: usize,
}

impl QuantileSummary {
    pub fn s1(min: f64, median: f64, max: f64, n: usize) -> Result<Self> {
        Self::from_parts(Some(min), None, median, None, Some(max), n)
    }

    pub fn s2(q1: f64, median: f64, q3: f64, n: usize) -> Result<Self> {
        Self::from_parts(None, Some(q1), median, Some(q3), None, n)
    }

    pub fn s3(min: f64, q1: f64, median: f64, q3: f64, max: f64, n: usize) -> Result<Self> {
        Self::from_parts(Some(min), Some(q1), median, Some(q3), Some(max), n)
    }

    /// Build from optional fields, inferring the scenario from which are present.
    pub fn from_parts(
        min: Option<f64>,
        q1: Option<f64>,
        median: f64,
        q3: Option<f64>,
        max: Option<f64>,
        n: usize,
    ) -> Result<Self> {
        let scenario = match (min.is_some(), q1.is_some(), q3.is_some(), max.is_some()) {
            (true, false, false, true) => Scenario::S1,
            (false, true, true, false) => Scenario::S2,
            (true, true, true, true) => Scenario::S3,
            _ => {
                return Err(Error::Input(
                    "quantiles must form {min, median, max}, {q1, median, q3}, or all five".into(),
                ))
            }
        };
        if n == 0 {
            return Err(Error::Input("sample size must be positive".into()));
        }
        let s = Self { scenario, min, q1, median, q3, max, n };
        let vals = s.values();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("quantiles must be finite".into()));
        }
        if vals.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Input(format!("quantiles are not ordered: {vals:?}")));
        }
        Ok(s)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn min(&self) -> Option<f64> {
        self.min
    }

    pub fn q1(&self) -> Option<f64> {
        self.q1
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    pub fn q3(&self) -> Option<f64> {
        self.q3
    }

    pub fn max(&self) -> Option<f64> {
        self.max
    }

    /// Present quantiles in increasing order.
    pub fn values(&self) -> Vec<f64> {
        [self.min, self.q1, Some(self.median), self.q3, self.max].into_iter().flatten().collect()
    }

    /// Present quantiles paired with the probability a quantile-matching fit
    /// assigns them (`1/n` and `1 - 1/n` for the extremes).
    pub fn probability_pairs(&self) -> Vec<(f64, f64)> {
        let n = self.n as f64;
        let mut out = Vec::with_capacity(5);
        if let Some(v) = self.min {
            out.push((1.0 / n, v));
        }
        if let Some(v) = self.q1 {
            out.push((0.25, v));
        }
        out.push((0.5, self.median));
        if let Some(v) = self.q3 {
            out.push((0.75, v));
        }
        if let Some(v) = self.max {
            out.push((1.0 - 1.0 / n, v));
        }
        out
    }

    /// Apply `f` to every quantile, keeping scenario and `n`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_parts(
            self.min.map(&f),
            self.q1.map(&f),
            f(self.median),
            self.q3.map(&f),
            self.max.map(&f),
            self.n,
        )
    }

    fn with_values(&self, vals: &[f64]) -> Result<Self> {
        let mut it = vals.iter().copied();
        let min = self.min.map(|_| it.next().unwrap());
        let q1 = self.q1.map(|_| it.next().unwrap());
        let median = it.next().unwrap();
        let q3 = self.q3.map(|_| it.next().unwrap());
        let max = self.max.map(|_| it.next().unwrap());
        Self::from_parts(min, q1, median, q3, max, self.n)
    }
}

/// Sample quantile by linear interpolation of order statistics at position
/// `1 + (n - 1)·p` (1-based), on already sorted data.
pub fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Order statistics at the given 0-based ranks (ascending), via successive
/// selection. Reorders `data`.
fn order_statistics(data: &mut [f64], ranks: &[usize], out: &mut [f64]) {
    let mut start = 0;
    for (slot, &r) in out.iter_mut().zip(ranks) {
        if r < start {
            // repeated rank: already placed
            *slot = data[r];
            continue;
        }
        let (_, v, _) = data[start..].select_nth_unstable_by(r - start, |a, b| a.total_cmp(b));
        *slot = *v;
        start = r + 1;
    }
}

fn interpolated_from_selection(data: &mut [f64], probs: &[f64]) -> Vec<f64> {
    let n = data.len();
    let mut ranks = Vec::with_capacity(2 * probs.len());
    let mut spans = Vec::with_capacity(probs.len());
    for &p in probs {
        let h = (n - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let hi = (lo + 1).min(n - 1);
        spans.push((lo, hi, frac));
        ranks.push(lo);
        ranks.push(hi);
    }
    ranks.sort_unstable();
    ranks.dedup();
    let mut stats = vec![0.0; ranks.len()];
    order_statistics(data, &ranks, &mut stats);
    let at = |r: usize| stats[ranks.binary_search(&r).unwrap()];
    spans
        .into_iter()
        .map(|(lo, hi, frac)| {
            let (a, b) = (at(lo), at(hi));
            if frac == 0.0 {
                a
            } else {
                a + frac * (b - a)
            }
        })
        .collect()
}

/// Summary statistics of a raw sample for the given scenario.
///
/// Median and quartiles use the `1 + (n - 1)·p` interpolation rule, so the
/// median of an even-sized sample is the mean of the two central values.
pub fn extract_summary(data: &[f64], scenario: Scenario) -> Result<QuantileSummary> {
    let mut buf = data.to_vec();
    extract_summary_in_place(&mut buf, scenario)
}

/// As [`extract_summary`], reordering `data` instead of copying it.
pub fn extract_summary_in_place(data: &mut [f64], scenario: Scenario) -> Result<QuantileSummary> {
    if data.len() < 5 {
        return Err(Error::Input(format!("need at least 5 observations, got {}", data.len())));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("data contain non-finite values".into()));
    }
    let n = data.len();
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    match scenario {
        Scenario::S1 => {
            let m = interpolated_from_selection(data, &[0.5]);
            QuantileSummary::s1(lo, m[0], hi, n)
        }
        Scenario::S2 => {
            let q = interpolated_from_selection(data, &[0.25, 0.5, 0.75]);
            QuantileSummary::s2(q[0], q[1], q[2], n)
        }
        Scenario::S3 => {
            let q = interpolated_from_selection(data, &[0.25, 0.5, 0.75]);
            QuantileSummary::s3(lo, q[0], q[1], q[2], hi, n)
        }
    }
}

/// Bowley's quartile skewness `(q3 + q1 - 2·q2) / (q3 - q1)`.
pub fn bowley_skewness(s: &QuantileSummary) -> Result<f64> {
    let (q1, q3) = match (s.q1, s.q3) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Input("Bowley skewness needs both quartiles".into())),
    };
    if q3 <= q1 {
        return Err(Error::Input("degenerate interquartile range (q3 = q1)".into()));
    }
    Ok((q3 + q1 - 2.0 * s.median) / (q3 - q1))
}

/// Relative bump applied to the upper member of a tied pair of quantiles.
pub const TIE_BUMP: f64 = 0.025;

/// Make present quantiles strictly increasing by raising the higher member of
/// each tied pair by 2.5% of its value, cascading upwards.
pub fn break_ties(s: &QuantileSummary) -> Result<QuantileSummary> {
    let mut v = s.values();
    let mut changed = false;
    for i in 1..v.len() {
        if v[i] <= v[i - 1] {
            let base = v[i - 1];
            if base == 0.0 {
                return Err(Error::Input(
                    "cannot break a tie at zero by a relative adjustment".into(),
                ));
            }
            v[i] = base + TIE_BUMP * base.abs();
            changed = true;
        }
    }
    if changed {
        s.with_values(&v)
    } else {
        Ok(*s)
    }
}

/// Mean/SD/n as reported by a study that did not report quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSdSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSdSummary {
    pub fn new(mean: f64, sd: f64, n: usize) -> Result<Self> {
        if !mean.is_finite() || !(sd >= 0.0 && sd.is_finite()) || n == 0 {
            return Err(Error::Input(format!("invalid mean/sd/n: {mean}, {sd}, {n}")));
        }
        Ok(Self { mean, sd, n })
    }
}

/// One group's reported data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroupSummary {
    Quantiles(QuantileSummary),
    MeanSd(MeanSdSummary),
}

impl GroupSummary {
    pub fn n(&self) -> usize {
        match self {
            GroupSummary::Quantiles(q) => q.n(),
            GroupSummary::MeanSd(m) => m.n,
        }
    }
}

/// A two-group comparison (e.g. non-survivors vs survivors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoGroupSummary {
    pub group1: GroupSummary,
    pub group2: GroupSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    SmallSample,
    Skewness,
    DegenerateIqr,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::SmallSample => "small-sample",
            DropReason::Skewness => "skewness",
            DropReason::DegenerateIqr => "degenerate-iqr",
        }
    }
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of [`screen_study`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScreenDecision {
    Keep,
    Drop { reason: DropReason, group: u8 },
}

impl ScreenDecision {
    pub fn is_keep(&self) -> bool {
        matches!(self, ScreenDecision::Keep)
    }
}

pub const DEFAULT_MIN_N: usize = 10;
pub const DEFAULT_SKEW_CAP: f64 = 0.75;

/// Drop a study when a quantile-reporting group has fewer than `min_n`
/// subjects or a Bowley coefficient above `skew_cap`. Groups reporting a mean
/// and SD are never screened.
pub fn screen_study(t: &TwoGroupSummary, min_n: usize, skew_cap: f64) -> ScreenDecision {
    let groups = [(1u8, &t.group1), (2u8, &t.group2)];
    for (g, grp) in groups {
        if let GroupSummary::Quantiles(q) = grp {
            if q.n() < min_n {
                return ScreenDecision::Drop { reason: DropReason::SmallSample, group: g };
            }
        }
    }
    for (g, grp) in groups {
        if let GroupSummary::Quantiles(q) = grp {
            if q.scenario().has_quartiles() {
                match bowley_skewness(q) {
                    Ok(b) if b > skew_cap => {
                        return ScreenDecision::Drop { reason: DropReason::Skewness, group: g }
                    }
                    Ok(_) => {}
                    Err(_) => {
                        return ScreenDecision::Drop { reason: DropReason::DegenerateIqr, group: g }
                    }
                }
            }
        }
    }
    ScreenDecision::Keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn construction_rules() {
        assert!(QuantileSummary::s1(1.0, 2.0, 3.0, 10).is_ok());
        assert!(QuantileSummary::s2(3.0, 2.0, 4.0, 10).is_err());
        assert!(QuantileSummary::s1(1.0, 2.0, 3.0, 0).is_err());
        assert!(QuantileSummary::from_parts(Some(1.0), Some(2.0), 3.0, None, Some(5.0), 9).is_err());
        let s = QuantileSummary::from_parts(None, Some(1.0), 2.0, Some(3.0), None, 9).unwrap();
        assert_eq!(s.scenario(), Scenario::S2);
        assert_eq!("s3".parse::<Scenario>().unwrap(), Scenario::S3);
    }

    #[test]
    fn extract_examples() {
        let s = extract_summary(&[1.0, 2.0, 3.0, 4.0, 5.0], Scenario::S1).unwrap();
        assert_eq!((s.min(), s.median(), s.max(), s.n()), (Some(1.0), 3.0, Some(5.0), 5));
        // n = 8: positions 1 + 7p → 2.75, 4.5, 6.25 (1-based)
        let data = [8.0, 3.0, 1.0, 6.0, 2.0, 7.0, 5.0, 4.0];
        let s = extract_summary(&data, Scenario::S2).unwrap();
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let oracle = |pos: f64| {
            let i = pos.floor() as usize;
            sorted[i - 1] + (pos - i as f64) * (sorted[i] - sorted[i - 1])
        };
        assert_eq!(s.q1(), Some(oracle(2.75)));
        assert_eq!(s.median(), oracle(4.5));
        assert_eq!(s.q3(), Some(oracle(6.25)));
        assert_eq!(s.q1(), Some(2.75));
        let c = extract_summary(&[7.0; 9], Scenario::S3).unwrap();
        assert!(c.values().iter().all(|&v| v == 7.0));
        assert!(extract_summary(&[1.0, 2.0, 3.0, 4.0], Scenario::S1).is_err());
        assert!(extract_summary(&[1.0, 2.0, f64::NAN, 4.0, 5.0], Scenario::S1).is_err());
    }

    #[test]
    fn bowley_examples() {
        let b = |a, m, c| bowley_skewness(&QuantileSummary::s2(a, m, c, 20).unwrap()).unwrap();
        assert_eq!(b(1.0, 2.0, 3.0), 0.0);
        assert_eq!(b(1.0, 1.5, 3.0), 0.5);
        assert_eq!(b(1.0, 3.0, 3.0), -1.0);
        assert!(bowley_skewness(&QuantileSummary::s2(1.0, 1.0, 1.0, 20).unwrap()).is_err());
        assert!(bowley_skewness(&QuantileSummary::s1(1.0, 2.0, 3.0, 20).unwrap()).is_err());
    }

    #[test]
    fn tie_breaking_examples() {
        let s = QuantileSummary::s2(50.0, 100.0, 100.0, 30).unwrap();
        assert_eq!(break_ties(&s).unwrap().q3(), Some(102.5));
        let strict = QuantileSummary::s2(1.0, 2.0, 3.0, 30).unwrap();
        assert_eq!(break_ties(&strict).unwrap(), strict);
        let s3 = QuantileSummary::s3(4.0, 4.0, 5.0, 6.0, 9.0, 30).unwrap();
        let t = break_ties(&s3).unwrap();
        assert!((t.q1().unwrap() - 4.1).abs() < 1e-12);
        assert!(t.values().windows(2).all(|w| w[0] < w[1]));
        let zeros = QuantileSummary::s2(0.0, 0.0, 0.0, 30).unwrap();
        assert!(break_ties(&zeros).is_err());
        // cascade into the maximum
        let c = QuantileSummary::s3(1.0, 2.0, 3.0, 3.0, 3.05, 30).unwrap();
        let t = break_ties(&c).unwrap();
        assert_eq!(t.q3(), Some(3.075));
        assert!(t.max().unwrap() > 3.075);
    }

    fn quant_group(q1: f64, m: f64, q3: f64, n: usize) -> GroupSummary {
        GroupSummary::Quantiles(QuantileSummary::s2(q1, m, q3, n).unwrap())
    }

    #[test]
    fn screening_examples() {
        let ok = quant_group(1.0, 2.0, 3.0, 40);
        let small = TwoGroupSummary { group1: quant_group(1.0, 2.0, 3.0, 9), group2: ok };
        assert_eq!(
            screen_study(&small, 10, 0.75),
            ScreenDecision::Drop { reason: DropReason::SmallSample, group: 1 }
        );
        // Bowley = (10 + 0 - 2·0.12)/10 = 0.976 → drop; 0.76 exactly via q2 = 1.2
        let skewed = TwoGroupSummary { group1: ok, group2: quant_group(0.0, 1.2, 10.0, 50) };
        assert!((bowley_skewness(&QuantileSummary::s2(0.0, 1.2, 10.0, 50).unwrap()).unwrap() - 0.76).abs() < 1e-12);
        match screen_study(&skewed, 10, 0.75) {
            ScreenDecision::Drop { reason, group } => {
                assert_eq!(reason.as_str(), "skewness");
                assert_eq!(group, 2);
            }
            ScreenDecision::Keep => panic!("should drop"),
        }
        let ms = GroupSummary::MeanSd(MeanSdSummary::new(3.0, 1.0, 5).unwrap());
        let both_means = TwoGroupSummary { group1: ms, group2: ms };
        assert!(screen_study(&both_means, 10, 0.75).is_keep());
    }

    proptest! {
        #[test]
        fn bowley_location_scale_invariant(
            q1 in -50.0..50.0f64, d1 in 0.01..20.0f64, d2 in 0.0..20.0f64,
            shift in -100.0..100.0f64, scale in 0.01..100.0f64,
        ) {
            let s = QuantileSummary::s2(q1, q1 + d1, q1 + d1 + d2, 20).unwrap();
            let t = s.map(|v| shift + scale * v).unwrap();
            let (a, b) = (bowley_skewness(&s).unwrap(), bowley_skewness(&t).unwrap());
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&a));
        }

        #[test]
        fn extract_then_break_ties_is_idempotent(
            data in proptest::collection::vec(prop_oneof![1.0..5.0f64, Just(3.0)], 5..60),
            which in 0usize..3,
        ) {
            let s = extract_summary(&data, Scenario::ALL[which]).unwrap();
            let once = break_ties(&s).unwrap();
            let twice = break_ties(&once).unwrap();
            prop_assert_eq!(once, twice);
            prop_assert!(once.values().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn selection_matches_sorting(data in proptest::collection::vec(-1e3..1e3f64, 5..200)) {
            let s = extract_summary(&data, Scenario::S3).unwrap();
            let mut sorted = data.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assert_eq!(s.q1().unwrap(), interpolated_quantile(&sorted, 0.25));
            prop_assert_eq!(s.median(), interpolated_quantile(&sorted, 0.5));
            prop_assert_eq!(s.q3().unwrap(), interpolated_quantile(&sorted, 0.75));
            prop_assert_eq!(s.min().unwrap(), sorted[0]);
            prop_assert_eq!(s.max().unwrap(), *sorted.last().unwrap());
        }
    }
}
