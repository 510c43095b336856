//! Box-Cox symmetrization: pick `λ` so the transformed quantiles are
//! equidistant from the transformed median, estimate the normal parameters on
//! that scale, and transform back.

use super::luowan::{luo_mean_five, wan_sd_five, Five, WanConstants};
use super::{from_box_cox, MeanSdEstimate, Method, LAMBDA_GRID, LAMBDA_RANGE};
use crate::distributions::{BoxCox, BoxCoxNormal};
use crate::error::{Error, Result};
use crate::optimize::{brent_root, grid_brent_min};
use crate::summaries::{QuantileSummary, Scenario};

/// Normalized asymmetry `(g(hi) + g(lo) - 2 g(mid)) / (g(hi) - g(lo))` of three
/// transformed quantiles; zero exactly when they are equidistant.
fn asymmetry(bc: BoxCox, lo: f64, mid: f64, hi: f64) -> f64 {
    let (a, b, c) = (bc.apply(lo), bc.apply(mid), bc.apply(hi));
    (c + a - 2.0 * b) / (c - a)
}

/// Residuals whose zeros define `λ̂` for the scenario.
pub(crate) fn bc_residuals(f: &Five, lambda: f64) -> (f64, Option<f64>) {
    let bc = BoxCox::new(lambda);
    let [min, q1, med, q3, max] = f.v;
    match f.scenario {
        Scenario::S1 => (asymmetry(bc, min, med, max), None),
        Scenario::S2 => (asymmetry(bc, q1, med, q3), None),
        Scenario::S3 => (asymmetry(bc, q1, med, q3), Some(asymmetry(bc, min, med, max))),
    }
}

/// Solve for `λ̂`. Returns the estimate and whether it fell back to an end of
/// the search interval.
fn solve_lambda(f: &Five) -> (f64, bool) {
    let (lo, hi) = LAMBDA_RANGE;
    if f.scenario != Scenario::S3 {
        let r = |l: f64| bc_residuals(f, l).0;
        // Scan for a sign change, preferring the bracket closest to λ = 1.
        let step = (hi - lo) / (LAMBDA_GRID - 1) as f64;
        let vals: Vec<f64> = (0..LAMBDA_GRID).map(|i| r(lo + step * i as f64)).collect();
        let mut bracket: Option<(usize, f64)> = None;
        for i in 0..LAMBDA_GRID - 1 {
            let (a, b) = (vals[i], vals[i + 1]);
            if a == 0.0 || a.signum() != b.signum() && b.is_finite() && a.is_finite() {
                let centre = lo + step * (i as f64 + 0.5);
                let dist = (centre - 1.0).abs();
                if bracket.is_none_or(|(_, d)| dist < d) {
                    bracket = Some((i, dist));
                }
            }
        }
        if let Some((i, _)) = bracket {
            // the scanned points themselves, so the bracket keeps its sign change
            let (a, b) = (lo + step * i as f64, lo + step * (i + 1) as f64);
            if let Some(root) = brent_root(r, a, b, 1e-12, 200) {
                return (root, false);
            }
        }
        if vals[LAMBDA_GRID - 1] == 0.0 {
            return (hi, false);
        }
        // No root: the end where the asymmetry is smallest.
        let at_lo = vals[0].abs() <= vals[LAMBDA_GRID - 1].abs();
        return (if at_lo { lo } else { hi }, true);
    }
    let obj = |l: f64| {
        let (a, b) = bc_residuals(f, l);
        a * a + b.unwrap_or(0.0).powi(2)
    };
    let r = grid_brent_min(obj, lo, hi, LAMBDA_GRID, 1e-12);
    let edge = (r.x - lo).abs() < 1e-6 || (hi - r.x).abs() < 1e-6;
    (r.x, edge)
}

/// Box-Cox estimate of the mean and SD.
pub fn bc_estimate(s: &QuantileSummary) -> Result<MeanSdEstimate> {
    let vals = s.values();
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain(format!("bc: quantiles must be positive, got {vals:?}")));
    }
    let five = Five::from_summary(s);
    let wan = WanConstants::new(five.n);
    if vals.first() == vals.last() {
        let bc = BoxCox::new(1.0);
        let model = BoxCoxNormal::new(1.0, bc.apply(vals[0]), 0.0)?;
        return from_box_cox(model, Method::Bc, false);
    }
    let (lambda, at_boundary) = solve_lambda(&five);
    let bc = BoxCox::new(lambda);
    let t = five.map(|x| bc.apply(x));
    let mu = luo_mean_five(&t);
    let sigma = wan_sd_five(&t, &wan);
    let model = BoxCoxNormal::new(lambda, mu, sigma)
        .map_err(|e| Error::Estimation(format!("bc: cannot back-transform: {e}")))?;
    from_box_cox(model, Method::Bc, at_boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Distribution;

    #[test]
    fn symmetric_raw_quartiles_give_identity_transform() {
        let s = QuantileSummary::s2(8.0, 10.0, 12.0, 100).unwrap();
        let e = bc_estimate(&s).unwrap();
        assert!((e.diagnostics.lambda.unwrap() - 1.0).abs() < 1e-9);
        assert!(!e.diagnostics.lambda_at_boundary);
    }

    #[test]
    fn log_normal_quartiles_give_log_transform() {
        let d = Distribution::lognormal(5.0, 0.25).unwrap();
        let q = |p: f64| d.quantile(p).unwrap();
        let s = QuantileSummary::s2(q(0.25), q(0.5), q(0.75), 1000).unwrap();
        let e = bc_estimate(&s).unwrap();
        assert!(e.diagnostics.lambda.unwrap().abs() < 1e-8);
        assert!((e.mean - d.mean()).abs() < 0.02 * d.mean());
    }

    #[test]
    fn nonpositive_quantiles_are_rejected() {
        let s = QuantileSummary::s2(-1.0, 2.0, 3.0, 40).unwrap();
        assert!(matches!(bc_estimate(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn root_on_a_grid_point_is_found() {
        // log-symmetric values put the root exactly at λ = 0
        let s = QuantileSummary::s1(40.051874508356406, 84.69061751266975, 179.08027483659626, 171).unwrap();
        let (l, edge) = solve_lambda(&Five::from_summary(&s));
        assert!(l.abs() < 1e-9 && !edge, "{l}");
    }

    #[test]
    fn no_root_falls_back_to_an_end() {
        // extreme right skew that no λ ≥ -3 symmetrizes
        let s = QuantileSummary::s2(1.0, 1.000_001, 1e6, 40).unwrap();
        assert_eq!(solve_lambda(&Five::from_summary(&s)), (-3.0, true));
        // the λ = -3 fit puts its pole inside the fitted normal's bulk
        assert!(matches!(bc_estimate(&s), Err(Error::Estimation(_))));
        // a fit with a root carries the solver's λ and flag
        let s = QuantileSummary::s1(1.0, 5.0, 30.0, 40).unwrap();
        let (l, edge) = solve_lambda(&Five::from_summary(&s));
        let e = bc_estimate(&s).unwrap();
        assert_eq!(e.diagnostics.lambda_at_boundary, edge);
        assert_eq!(e.diagnostics.lambda, Some(l));
    }
}
