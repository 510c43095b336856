//! Order-statistic likelihood method: choose `λ` by maximizing the likelihood
//! of the reported quantiles under a transformed normal, refit `(μ, σ)` by
//! maximum likelihood at that `λ`, and transform back.

use std::f64::consts::PI;

use super::luowan::{luo_mean_five, wan_sd_five, Five, WanConstants};
use super::{from_box_cox, MeanSdEstimate, Method, LAMBDA_GRID, LAMBDA_RANGE};
use crate::distributions::{BoxCox, BoxCoxNormal};
use crate::error::{Error, Result};
use crate::optimize::{grid_brent_min, nelder_mead};
use crate::special::{norm_log_cdf, norm_log_diff};
use crate::summaries::{QuantileSummary, Scenario};

/// Log-likelihood of the transformed quantiles in `t` as order statistics of
/// `n` draws from `Normal(mu, sigma²)`, up to a constant.
fn order_log_likelihood(t: &Five, mu: f64, sigma: f64) -> f64 {
    if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let n = t.n;
    let z = t.v.map(|y| (y - mu) / sigma);
    let [zmin, z1, z2, z3, zmax] = z;
    let present = t.present();
    let density: f64 = present.iter().map(|&i| -0.5 * z[i] * z[i]).sum::<f64>()
        - present.len() as f64 * (sigma.ln() + 0.5 * (2.0 * PI).ln());
    let spacing = match t.scenario {
        Scenario::S1 => (0.5 * n - 1.0) * (norm_log_diff(zmin, z2) + norm_log_diff(z2, zmax)),
        Scenario::S2 => {
            0.25 * n * (norm_log_cdf(z1) + norm_log_cdf(-z3))
                + (0.25 * n - 1.0) * (norm_log_diff(z1, z2) + norm_log_diff(z2, z3))
        }
        Scenario::S3 => {
            (0.25 * n - 1.0)
                * (norm_log_diff(zmin, z1)
                    + norm_log_diff(z1, z2)
                    + norm_log_diff(z2, z3)
                    + norm_log_diff(z3, zmax))
        }
    };
    let ll = spacing + density;
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

fn profile(five: &Five, wan: &WanConstants, log_q: f64, lambda: f64) -> f64 {
    let bc = BoxCox::new(lambda);
    let t = five.map(|x| bc.apply(x));
    let sigma = wan_sd_five(&t, wan);
    if sigma <= 0.0 {
        return f64::NEG_INFINITY;
    }
    order_log_likelihood(&t, luo_mean_five(&t), sigma) + (lambda - 1.0) * log_q
}

fn checked(s: &QuantileSummary) -> Result<()> {
    let vals = s.values();
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain(format!("mln: quantiles must be positive, got {vals:?}")));
    }
    if s.n() < 5 {
        return Err(Error::Input(format!("mln: needs n >= 5, got {}", s.n())));
    }
    Ok(())
}

fn sum_log_q(five: &Five) -> f64 {
    five.present().iter().map(|&i| five.v[i].ln()).sum()
}

/// Conditional log-likelihood of `λ` given the summary, with the normal
/// parameters plugged in from the Luo/Wan estimators on the transformed scale.
/// Includes the Jacobian of the transform so values are comparable across `λ`.
pub fn mln_log_likelihood(s: &QuantileSummary, lambda: f64) -> Result<f64> {
    checked(s)?;
    let five = Five::from_summary(s);
    Ok(profile(&five, &WanConstants::new(five.n), sum_log_q(&five), lambda))
}

/// MLN estimate of the mean and SD.
pub fn mln_estimate(s: &QuantileSummary) -> Result<MeanSdEstimate> {
    checked(s)?;
    let five = Five::from_summary(s);
    let vals = s.values();
    if vals.first() == vals.last() {
        let model = BoxCoxNormal::new(1.0, vals[0] - 1.0, 0.0)?;
        return from_box_cox(model, Method::Mln, false);
    }
    let wan = WanConstants::new(five.n);
    let log_q = sum_log_q(&five);
    let (lo, hi) = LAMBDA_RANGE;
    let r = grid_brent_min(|l| -profile(&five, &wan, log_q, l), lo, hi, LAMBDA_GRID, 1e-10);
    if !r.fx.is_finite() {
        return Err(Error::Estimation(
            "mln: likelihood is zero for every lambda in the search interval".into(),
        ));
    }
    let lambda = r.x;
    let bc = BoxCox::new(lambda);
    let t = five.map(|x| bc.apply(x));
    let (mu0, sigma0) = (luo_mean_five(&t), wan_sd_five(&t, &wan));
    // Standardized coordinates keep the simplex scale-free.
    let fit = nelder_mead(
        |x| -order_log_likelihood(&t, mu0 + x[0] * sigma0, sigma0 * x[1].exp()),
        &[0.0, 0.0],
        &[0.1, 0.1],
        0.0,
        2000,
    );
    let (mu, sigma) = if fit.fx.is_finite() {
        (mu0 + fit.x[0] * sigma0, sigma0 * fit.x[1].exp())
    } else {
        (mu0, sigma0)
    };
    let model = BoxCoxNormal::new(lambda, mu, sigma)
        .map_err(|e| Error::Estimation(format!("mln: cannot back-transform: {e}")))?;
    let edge = (lambda - lo).abs() < 1e-6 || (hi - lambda).abs() < 1e-6;
    from_box_cox(model, Method::Mln, edge)
}
