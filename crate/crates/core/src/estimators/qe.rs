//! Quantile matching: least-squares fit of each candidate family to the
//! reported quantiles, then selection of the best-fitting family.
//!
//! Normal is solved in closed form. For the scale families (log-normal, gamma,
//! Weibull) every quantile is `scale · a(shape, p)`, so the optimal scale for a
//! given shape is a one-line regression through the origin and only the shape
//! needs a numerical search. Beta has no scale and gets a 2-D simplex search.

use super::luowan::{luo_mean_five, wan_sd_five, Five, WanConstants};
use super::{Diagnostics, FittedDistribution, MeanSdEstimate, Method};
use crate::distributions::{Distribution, Family};
use crate::error::{Error, Result};
use crate::optimize::{grid_brent_min, nelder_mead};
use crate::special::{inv_beta_inc, inv_gamma_p_with, ln_gamma, norm_ppf};
use crate::summaries::QuantileSummary;

/// Candidate families in the order they are tried (ties go to the earlier one).
pub const CANDIDATES: [Family; 5] =
    [Family::Normal, Family::LogNormal, Family::Gamma, Family::Beta, Family::Weibull];

const SHAPE_GRID: usize = 12;
const SHAPE_TOL: f64 = 1e-9;

/// Sum of squared differences between `d`'s quantiles and the summary.
pub fn qe_objective(d: &Distribution, s: &QuantileSummary) -> f64 {
    s.probability_pairs().iter().map(|&(p, q)| (d.quantile_unchecked(p) - q).powi(2)).sum()
}

struct Points {
    p: [f64; 5],
    q: [f64; 5],
    len: usize,
}

impl Points {
    fn new(s: &QuantileSummary) -> Self {
        let mut pts = Points { p: [0.0; 5], q: [0.0; 5], len: 0 };
        for (p, q) in s.probability_pairs() {
            pts.p[pts.len] = p;
            pts.q[pts.len] = q;
            pts.len += 1;
        }
        pts
    }

    fn p(&self) -> &[f64] {
        &self.p[..self.len]
    }

    fn q(&self) -> &[f64] {
        &self.q[..self.len]
    }
}

/// Profile out the scale: for base quantiles `a`, the best scale and the
/// residual sum of squares.
fn profile_scale(a: &[f64], q: &[f64]) -> Option<(f64, f64)> {
    let (mut saq, mut saa) = (0.0, 0.0);
    for (&ai, &qi) in a.iter().zip(q) {
        if !(ai.is_finite() && ai >= 0.0) {
            return None;
        }
        saq += ai * qi;
        saa += ai * ai;
    }
    let c = saq / saa;
    if !(c > 0.0 && c.is_finite()) {
        return None;
    }
    let rss = a.iter().zip(q).map(|(&ai, &qi)| (c * ai - qi).powi(2)).sum();
    Some((c, rss))
}

/// Search `ln shape` on `[ln lo, ln hi]` for a scale family; `base(shape, a)`
/// fills `a` with the unit-scale quantiles at the summary's probabilities.
fn fit_scale_family(
    pts: &Points,
    lo: f64,
    hi: f64,
    base: impl Fn(f64, &mut [f64]),
) -> Option<(f64, f64, f64)> {
    let q = pts.q();
    let eval = |t: f64| -> Option<(f64, f64)> {
        let mut a = [0.0; 5];
        base(t.exp(), &mut a[..pts.len]);
        profile_scale(&a[..pts.len], q)
    };
    let r = grid_brent_min(
        |t| eval(t).map_or(f64::INFINITY, |(_, rss)| rss),
        lo.ln(),
        hi.ln(),
        SHAPE_GRID,
        SHAPE_TOL,
    );
    let (scale, rss) = eval(r.x)?;
    Some((r.x.exp(), scale, rss))
}

fn fit_normal(pts: &Points) -> (f64, f64) {
    let z: Vec<f64> = pts.p().iter().map(|&p| norm_ppf(p)).collect();
    let k = pts.len as f64;
    let zbar = z.iter().sum::<f64>() / k;
    let qbar = pts.q().iter().sum::<f64>() / k;
    let (mut szq, mut szz) = (0.0, 0.0);
    for (&zi, &qi) in z.iter().zip(pts.q()) {
        szq += (zi - zbar) * (qi - qbar);
        szz += (zi - zbar).powi(2);
    }
    let sd = (szq / szz).max(0.0);
    (qbar - sd * zbar, sd)
}

fn fit_beta(pts: &Points, s: &QuantileSummary) -> Option<(Distribution, f64)> {
    const LOG_LO: f64 = -6.9; // ≈ ln 1e-3
    const LOG_HI: f64 = 9.9; // ≈ ln 2e4
    let objective = |x: &[f64]| {
        if x.iter().any(|v| !(LOG_LO..=LOG_HI).contains(v)) {
            return f64::INFINITY;
        }
        let (a, b) = (x[0].exp(), x[1].exp());
        pts.p().iter().zip(pts.q()).map(|(&p, &q)| (inv_beta_inc(a, b, p) - q).powi(2)).sum()
    };
    let five = Five::from_summary(s);
    let m = luo_mean_five(&five);
    let v = wan_sd_five(&five, &WanConstants::new(five.n)).powi(2);
    let mut starts = vec![[0.0, 0.0]];
    if m > 0.0 && m < 1.0 && v > 0.0 && v < m * (1.0 - m) {
        let c = m * (1.0 - m) / v - 1.0;
        starts.insert(0, [(m * c).ln().clamp(LOG_LO, LOG_HI), ((1.0 - m) * c).ln().clamp(LOG_LO, LOG_HI)]);
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in starts {
        let mut r = nelder_mead(objective, &x0, &[0.5, 0.5], 1e-12, 600);
        for _ in 0..2 {
            let again = nelder_mead(objective, &r.x, &[0.1, 0.1], 1e-12, 600);
            let improved = again.fx < r.fx;
            r = if again.fx <= r.fx { again } else { r };
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| r.fx < b.1) {
            best = Some((r.x, r.fx));
        }
    }
    let (x, fx) = best?;
    if !fx.is_finite() {
        return None;
    }
    Distribution::beta(x[0].exp(), x[1].exp()).ok().map(|d| (d, fx))
}

/// Whether `family` can describe data with these quantiles.
pub fn admissible(family: Family, s: &QuantileSummary) -> bool {
    let vals = s.values();
    match family {
        Family::Normal => true,
        Family::LogNormal | Family::Gamma | Family::Weibull => vals.iter().all(|&v| v > 0.0),
        Family::Beta => vals.iter().all(|&v| v > 0.0 && v < 1.0),
        Family::HalfNormal => false,
    }
}

/// Least-squares quantile fit of a single candidate family. `None` when the
/// family is inadmissible or the search produced no finite objective.
pub fn qe_fit_family(s: &QuantileSummary, family: Family) -> Option<(Distribution, f64)> {
    if !admissible(family, s) {
        return None;
    }
    let pts = Points::new(s);
    let fitted = match family {
        Family::Normal => {
            let (mean, sd) = fit_normal(&pts);
            let sd = if sd > 0.0 { sd } else { f64::MIN_POSITIVE.sqrt() };
            Distribution::normal(mean, sd).ok()
        }
        Family::LogNormal => {
            let z: Vec<f64> = pts.p().iter().map(|&p| norm_ppf(p)).collect();
            fit_scale_family(&pts, 1e-6, 10.0, |s, a| {
                a.iter_mut().zip(&z).for_each(|(ai, zi)| *ai = (s * zi).exp())
            })
                .and_then(|(sdlog, scale, _)| Distribution::lognormal(scale.ln(), sdlog).ok())
        }
        Family::Gamma => fit_scale_family(&pts, 0.02, 1e4, |k, a| {
            let gln = ln_gamma(k);
            a.iter_mut().zip(pts.p()).for_each(|(ai, &p)| *ai = inv_gamma_p_with(k, p, gln))
        })
        .and_then(|(shape, scale, _)| Distribution::gamma(shape, scale).ok()),
        Family::Weibull => {
            let ll: Vec<f64> = pts.p().iter().map(|&p| (-(-p).ln_1p()).ln()).collect();
            fit_scale_family(&pts, 0.02, 500.0, |k, a| {
                a.iter_mut().zip(&ll).for_each(|(ai, l)| *ai = (l / k).exp())
            })
                .and_then(|(shape, scale, _)| Distribution::weibull(shape, scale).ok())
        }
        Family::Beta => return fit_beta(&pts, s),
        Family::HalfNormal => None,
    }?;
    let obj = qe_objective(&fitted, s);
    obj.is_finite().then_some((fitted, obj))
}

/// Quantile-matching estimate: fit every admissible candidate and keep the one
/// with the smallest objective.
pub fn qe_estimate(s: &QuantileSummary) -> Result<MeanSdEstimate> {
    let mut objectives = Vec::with_capacity(CANDIDATES.len());
    let mut best: Option<(Distribution, f64)> = None;
    for family in CANDIDATES {
        if let Some((d, obj)) = qe_fit_family(s, family) {
            objectives.push((family, obj));
            if best.as_ref().is_none_or(|b| obj < b.1) {
                best = Some((d, obj));
            }
        }
    }
    let diagnostics = Diagnostics { family_objectives: objectives, ..Default::default() };
    let Some((dist, _)) = best else {
        return Err(Error::Estimation(format!("qe: no candidate family could be fitted to {:?}", s.values())));
    };
    let vals = s.values();
    if vals.first() == vals.last() {
        let value = vals[0];
        return Ok(MeanSdEstimate {
            mean: value,
            sd: 0.0,
            method: Method::Qe,
            fitted: FittedDistribution::Degenerate { value },
            diagnostics,
        });
    }
    let (mean, sd) = dist.moments();
    if !(mean.is_finite() && sd.is_finite()) {
        return Err(Error::Estimation(format!("qe: selected {} has non-finite moments", dist.family())));
    }
    Ok(MeanSdEstimate { mean, sd, method: Method::Qe, fitted: FittedDistribution::Parametric { dist }, diagnostics })
}
