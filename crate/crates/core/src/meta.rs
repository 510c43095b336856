//! Inverse-variance meta-analysis with a random-effects between-study
//! variance.
//!
//! `τ²` is estimated by REML (Fisher scoring from the DerSimonian–Laird
//! value), its confidence interval by the Q-profile method, and the pooled
//! mean gets a Wald interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimateWithSe;
use crate::optimize::brent_root;
use crate::special::{chi2_ppf, norm_ppf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyInput {
    pub y: f64,
    /// Within-study SE, treated as known.
    pub se: f64,
    pub label: String,
}

impl StudyInput {
    pub fn new(y: f64, se: f64, label: impl Into<String>) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::Input(format!("study estimate must be finite, got {y}")));
        }
        if !(se > 0.0 && se.is_finite()) {
            return Err(Error::Input(format!("study SE must be positive and finite, got {se}")));
        }
        Ok(Self { y, se, label: label.into() })
    }

    fn var(&self) -> f64 {
        self.se * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub mu_pool: f64,
    pub se_pool: f64,
    pub mu_ci: (f64, f64),
    pub tau2: f64,
    pub tau2_ci: (f64, f64),
    /// The Q statistic at `τ² = 0` was below the lower χ² quantile.
    pub tau2_ci_degenerate: bool,
    pub i2: f64,
    /// Normalized random-effects weights, in input order.
    pub weights: Vec<f64>,
    pub typical_var: f64,
    pub reml_iterations: usize,
    /// The restricted likelihood is higher somewhere else on a `τ²` grid, so
    /// `tau2` is a local maximum only.
    pub tau2_local_mode: bool,
}

fn check(studies: &[StudyInput]) -> Result<()> {
    if studies.len() < 2 {
        return Err(Error::Input(format!("meta-analysis needs at least 2 studies, got {}", studies.len())));
    }
    for s in studies {
        if !(s.se > 0.0 && s.se.is_finite() && s.y.is_finite()) {
            return Err(Error::Input(format!("study '{}' has invalid estimate or SE", s.label)));
        }
    }
    Ok(())
}

/// Inverse-variance pooled mean and its SE at between-study variance `tau2`.
pub fn pool(studies: &[StudyInput], tau2: f64) -> Result<(f64, f64)> {
    check(studies)?;
    if !(tau2 >= 0.0 && tau2.is_finite()) {
        return Err(Error::Input(format!("tau2 must be non-negative, got {tau2}")));
    }
    Ok(pool_unchecked(studies, tau2))
}

fn pool_unchecked(studies: &[StudyInput], tau2: f64) -> (f64, f64) {
    let (mut sw, mut swy) = (0.0, 0.0);
    for s in studies {
        let w = 1.0 / (s.var() + tau2);
        sw += w;
        swy += w * s.y;
    }
    (swy / sw, sw.powf(-0.5))
}

/// Generalized Cochran statistic `Σ (y_k - μ̂(τ²))² / (σ_k² + τ²)`.
pub fn q_gen(studies: &[StudyInput], tau2: f64) -> f64 {
    let (mu, _) = pool_unchecked(studies, tau2);
    studies.iter().map(|s| (s.y - mu).powi(2) / (s.var() + tau2)).sum()
}

/// DerSimonian–Laird moment estimate, truncated at zero.
pub fn dl_tau2(studies: &[StudyInput]) -> Result<f64> {
    check(studies)?;
    let w: Vec<f64> = studies.iter().map(|s| 1.0 / s.var()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let q = q_gen(studies, 0.0);
    let k = studies.len() as f64;
    Ok(((q - (k - 1.0)) / (sw - sw2 / sw)).max(0.0))
}

/// Restricted log-likelihood of `τ²`, up to a constant.
pub fn reml_log_likelihood(studies: &[StudyInput], tau2: f64) -> f64 {
    let (mu, _) = pool_unchecked(studies, tau2);
    let mut ll = 0.0;
    let mut sw = 0.0;
    for s in studies {
        let v = s.var() + tau2;
        ll -= 0.5 * (v.ln() + (s.y - mu).powi(2) / v);
        sw += 1.0 / v;
    }
    ll - 0.5 * sw.ln()
}

/// Score step of Fisher scoring: `(y'PPy - tr P) / tr(PP)`.
fn fisher_step(studies: &[StudyInput], tau2: f64) -> f64 {
    let (mu, _) = pool_unchecked(studies, tau2);
    let (mut s1, mut s2, mut s3, mut ypy) = (0.0, 0.0, 0.0, 0.0);
    for s in studies {
        let w = 1.0 / (s.var() + tau2);
        s1 += w;
        s2 += w * w;
        s3 += w * w * w;
        ypy += w * w * (s.y - mu).powi(2);
    }
    let tr_p = s1 - s2 / s1;
    let tr_pp = s2 - 2.0 * s3 / s1 + (s2 / s1).powi(2);
    (ypy - tr_p) / tr_pp
}

/// REML estimate of `τ²` with the number of scoring iterations used.
///
/// Fisher scoring from the DerSimonian–Laird value, with step halving. When
/// scoring zig-zags across the mode or creeps towards it, the score is
/// bracketed and its root found directly.
pub fn reml_tau2_detail(studies: &[StudyInput]) -> Result<(f64, usize)> {
    const TOL: f64 = 1e-8;
    const SCORING_ITER: usize = 25;
    let mut tau2 = dl_tau2(studies)?;
    let mut ll = reml_log_likelihood(studies, tau2);
    let mut trace = vec![tau2];
    let score = |t: f64| fisher_step(studies, t);
    for it in 1..=SCORING_ITER {
        let mut step = score(tau2);
        if !step.is_finite() {
            return Err(Error::NoConvergence { iterations: it, context: "REML score is not finite".into(), trace });
        }
        let mut next = (tau2 + step).max(0.0);
        let mut next_ll = reml_log_likelihood(studies, next);
        let mut halvings = 0;
        while next_ll < ll && halvings < 30 {
            step *= 0.5;
            next = (tau2 + step).max(0.0);
            next_ll = reml_log_likelihood(studies, next);
            halvings += 1;
        }
        trace.push(next);
        if next_ll < ll {
            return Ok((tau2, it));
        }
        if (next - tau2).abs() < TOL {
            return Ok((next, it));
        }
        if next > 0.0 && score(next).signum() != step.signum() {
            if let Some(r) = brent_root(score, tau2, next, TOL * 1e-4, 200) {
                return Ok((r, it));
            }
        }
        tau2 = next;
        ll = next_ll;
    }
    // slow progress: walk the current direction until the score changes sign
    let step = score(tau2);
    let mut reach = step.abs().max(TOL);
    for _ in 0..200 {
        let far = (tau2 + step.signum() * reach).max(0.0);
        let s_far = score(far);
        if far == 0.0 && s_far <= 0.0 {
            return Ok((0.0, SCORING_ITER));
        }
        if s_far.signum() != step.signum() {
            return brent_root(score, tau2, far, TOL * 1e-4, 200).map(|r| (r, SCORING_ITER)).ok_or_else(|| {
                Error::NoConvergence { iterations: SCORING_ITER, context: "REML score root".into(), trace }
            });
        }
        reach *= 2.0;
    }
    Err(Error::NoConvergence { iterations: SCORING_ITER, context: "REML Fisher scoring".into(), trace })
}

/// REML estimate of the between-study variance, truncated at zero.
pub fn reml_tau2(studies: &[StudyInput]) -> Result<f64> {
    reml_tau2_detail(studies).map(|r| r.0)
}

/// Q-profile confidence interval for `τ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tau2Interval {
    pub lo: f64,
    pub hi: f64,
    pub degenerate: bool,
}

/// Solve `q_gen(τ²) = target` on `[0, hi]` for decreasing `q_gen`.
fn solve_q(studies: &[StudyInput], target: f64, mut hi: f64) -> f64 {
    let mut lo = 0.0;
    let mut grow = 0;
    while q_gen(studies, hi) > target && grow < 60 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if q_gen(studies, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn tau2_ci_qprofile(studies: &[StudyInput], level: f64) -> Result<Tau2Interval> {
    check(studies)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!("confidence level must be in (0, 1), got {level}")));
    }
    let df = (studies.len() - 1) as f64;
    let alpha = 1.0 - level;
    let upper_q = chi2_ppf(df, 1.0 - alpha / 2.0);
    let lower_q = chi2_ppf(df, alpha / 2.0);
    let q0 = q_gen(studies, 0.0);
    if q0 < lower_q {
        return Ok(Tau2Interval { lo: 0.0, hi: 0.0, degenerate: true });
    }
    let k = studies.len() as f64;
    let ybar = studies.iter().map(|s| s.y).sum::<f64>() / k;
    let var_y = studies.iter().map(|s| (s.y - ybar).powi(2)).sum::<f64>() / (k - 1.0);
    let max_se = studies.iter().map(|s| s.se).fold(0.0, f64::max);
    let cap = (100.0 * max_se * max_se + 100.0 * var_y).max(f64::MIN_POSITIVE);
    let lo = if q0 <= upper_q { 0.0 } else { solve_q(studies, upper_q, cap) };
    let hi = solve_q(studies, lower_q, cap);
    Ok(Tau2Interval { lo, hi, degenerate: false })
}

/// Typical within-study variance `(K-1)Σw / ((Σw)² - Σw²)`, `w = 1/σ²`.
pub fn typical_variance(studies: &[StudyInput]) -> Result<f64> {
    check(studies)?;
    let k = studies.len() as f64;
    let (mut sw, mut sw2) = (0.0, 0.0);
    for s in studies {
        let w = 1.0 / s.var();
        sw += w;
        sw2 += w * w;
    }
    let denom = sw * sw - sw2;
    if denom <= 0.0 {
        return Err(Error::Input("typical variance undefined for these weights".into()));
    }
    Ok((k - 1.0) * sw / denom)
}

/// `τ² / (τ² + s²)` with `s²` the typical within-study variance.
pub fn i_squared(studies: &[StudyInput], tau2: f64) -> Result<f64> {
    let s2 = typical_variance(studies)?;
    if tau2 <= 0.0 {
        return Ok(0.0);
    }
    Ok(tau2 / (tau2 + s2))
}

/// Normal-theory interval `mu ± z·se`.
pub fn wald_ci_mu(mu: f64, se: f64, level: f64) -> (f64, f64) {
    let z = norm_ppf(0.5 + 0.5 * level);
    (mu - z * se, mu + z * se)
}

/// Difference of two independent group estimates as a study-level input.
pub fn difference_of_means(g1: &EstimateWithSe, g2: &EstimateWithSe, label: impl Into<String>) -> Result<StudyInput> {
    StudyInput::new(g1.estimate - g2.estimate, g1.se.hypot(g2.se), label)
}

/// Whether a log-spaced grid over `(0, 100·max(σ²_max, var(y))]` finds a
/// restricted likelihood above the one at `tau2`.
pub fn reml_has_higher_mode(studies: &[StudyInput], tau2: f64) -> bool {
    let k = studies.len() as f64;
    let ybar = studies.iter().map(|s| s.y).sum::<f64>() / k;
    let var_y = studies.iter().map(|s| (s.y - ybar).powi(2)).sum::<f64>() / (k - 1.0);
    let max_var = studies.iter().map(|s| s.var()).fold(0.0, f64::max);
    let hi = 100.0 * max_var.max(var_y);
    let lo = 1e-6 * hi;
    let at = reml_log_likelihood(studies, tau2);
    let slack = 1e-6 * at.abs().max(1.0);
    (0..=200).any(|i| {
        let t = lo * (hi / lo).powf(i as f64 / 200.0);
        reml_log_likelihood(studies, t) > at + slack
    })
}

/// Full random-effects analysis at confidence `level`.
pub fn meta_analyze(studies: &[StudyInput], level: f64) -> Result<MetaResult> {
    check(studies)?;
    let (tau2, reml_iterations) = reml_tau2_detail(studies)?;
    let (mu_pool, se_pool) = pool_unchecked(studies, tau2);
    let ci = tau2_ci_qprofile(studies, level)?;
    let typical_var = typical_variance(studies)?;
    let raw: Vec<f64> = studies.iter().map(|s| 1.0 / (s.var() + tau2)).collect();
    let total: f64 = raw.iter().sum();
    Ok(MetaResult {
        mu_pool,
        se_pool,
        mu_ci: wald_ci_mu(mu_pool, se_pool, level),
        tau2,
        tau2_ci: (ci.lo, ci.hi),
        tau2_ci_degenerate: ci.degenerate,
        i2: if tau2 > 0.0 { tau2 / (tau2 + typical_var) } else { 0.0 },
        weights: raw.iter().map(|w| w / total).collect(),
        typical_var,
        reml_iterations,
        tau2_local_mode: reml_has_higher_mode(studies, tau2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::SeKind;

    fn studies(pairs: &[(f64, f64)]) -> Vec<StudyInput> {
        pairs.iter().enumerate().map(|(i, &(y, se))| StudyInput::new(y, se, format!("s{i}")).unwrap()).collect()
    }

    #[test]
    fn two_equal_studies() {
        let s = studies(&[(0.0, 1.0), (2.0, 1.0)]);
        let (mu, se) = pool(&s, 0.0).unwrap();
        assert!((mu - 1.0).abs() < 1e-15 && (se - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(pool(&s[..1], 0.0).is_err());
    }

    #[test]
    fn identical_estimates_have_no_heterogeneity() {
        let s = studies(&[(3.0, 0.5), (3.0, 1.0), (3.0, 2.0), (3.0, 0.1)]);
        assert_eq!(reml_tau2(&s).unwrap(), 0.0);
        for t in [0.0, 1.0, 10.0] {
            assert!((pool(&s, t).unwrap().0 - 3.0).abs() < 1e-14);
        }
        let ci = tau2_ci_qprofile(&s, 0.95).unwrap();
        assert!(ci.degenerate && ci.lo == 0.0 && ci.hi == 0.0);
    }

    #[test]
    fn i_squared_examples() {
        let s = studies(&[(1.0, 1.0), (2.0, 2.0), (0.5, 0.7)]);
        let s2 = typical_variance(&s).unwrap();
        assert_eq!(i_squared(&s, 0.0).unwrap(), 0.0);
        assert!((i_squared(&s, s2).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wald_intervals() {
        let (lo, hi) = wald_ci_mu(0.0, 1.0, 0.95);
        assert!((hi - 1.959_963_984_540_054).abs() < 1e-12 && (lo + hi).abs() < 1e-15);
        let (_, hi) = wald_ci_mu(0.0, 2.0, 0.5);
        assert!((hi - 2.0 * 0.674_489_750_196_081_7).abs() < 1e-12);
    }

    #[test]
    fn difference_combines_independent_ses() {
        let g = |m, se| EstimateWithSe { estimate: m, se, kind: SeKind::Naive };
        let d = difference_of_means(&g(5.0, 3.0), &g(2.0, 4.0), "x").unwrap();
        assert_eq!((d.y, d.se), (3.0, 5.0));
        let d = difference_of_means(&g(1.0, 2.0), &g(1.0, 2.0), "x").unwrap();
        assert_eq!(d.y, 0.0);
        assert!((d.se - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reml_agrees_with_a_fine_grid() {
        let s = studies(&[(1.2, 0.4), (-0.3, 0.6), (2.5, 0.3), (0.8, 0.9), (1.9, 0.5), (0.1, 0.35)]);
        let tau2 = reml_tau2(&s).unwrap();
        let ys: Vec<f64> = s.iter().map(|x| x.y).collect();
        let m = ys.iter().sum::<f64>() / 6.0;
        let var_y = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / 5.0;
        let hi = 10.0 * var_y;
        let best = (0..=100_000)
            .map(|i| hi * i as f64 / 100_000.0)
            .max_by(|a, b| reml_log_likelihood(&s, *a).total_cmp(&reml_log_likelihood(&s, *b)))
            .unwrap();
        assert!((tau2 - best).abs() < 1e-4, "{tau2} vs {best}");
    }
}
