//! Gauss–Legendre quadrature for expectations under a truncated normal law.

use std::sync::OnceLock;

use crate::special::{norm_cdf, norm_ppf, norm_sf};

/// Result of a (possibly truncated) normal expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub mean: f64,
    pub sd: f64,
    /// Normal probability mass outside the integration range.
    pub dropped_mass: f64,
}

/// Nodes used by [`truncated_normal_expectation`].
pub const GL_NODES: usize = 96;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        Self { nodes: x, weights: w }
    }
}

fn legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(GL_NODES))
}

/// Normal tail mass excluded, split evenly, by [`central_half_width`].
pub const EXCLUDED_TAIL_MASS: f64 = 1e-4;

/// Half-width `t` of the standardized interval `[-t, t]` holding all but
/// [`EXCLUDED_TAIL_MASS`] of a normal law.
pub fn central_half_width() -> f64 {
    static T: OnceLock<f64> = OnceLock::new();
    *T.get_or_init(|| -norm_ppf(0.5 * EXCLUDED_TAIL_MASS))
}

/// Mean and SD of `h(mu + sigma·T)` for `T` standard normal restricted to
/// `[t_lo, t_hi]`. `dropped_mass` is the normal mass outside the interval.
pub fn truncated_normal_expectation(
    mu: f64,
    sigma: f64,
    h: impl Fn(f64) -> f64,
    t_lo: f64,
    t_hi: f64,
) -> TruncatedMoments {
    let (mid, half) = (0.5 * (t_hi + t_lo), 0.5 * (t_hi - t_lo));
    let nodes = legendre().nodes.iter().zip(&legendre().weights).map(|(&x, &w)| (mid + half * x, w * half));
    weighted_moments(mu, sigma, h, t_lo, t_hi, nodes)
}

fn weighted_moments(
    mu: f64,
    sigma: f64,
    h: impl Fn(f64) -> f64,
    t_lo: f64,
    t_hi: f64,
    nodes: impl Iterator<Item = (f64, f64)>,
) -> TruncatedMoments {
    let inside = if t_lo > 0.0 { norm_sf(t_lo) - norm_sf(t_hi) } else { norm_cdf(t_hi) - norm_cdf(t_lo) };
    if !(t_hi > t_lo) || !(inside > 0.0) {
        return TruncatedMoments { mean: f64::NAN, sd: f64::NAN, dropped_mass: 1.0 };
    }
    let mut mass = 0.0;
    let mut values = Vec::with_capacity(GL_NODES);
    for (t, w) in nodes {
        let wt = w * (-0.5 * t * t).exp();
        let v = h(mu + sigma * t);
        if !v.is_finite() {
            return TruncatedMoments { mean: f64::NAN, sd: f64::NAN, dropped_mass: 1.0 - inside };
        }
        mass += wt;
        values.push((v, wt));
    }
    let mean = values.iter().map(|(v, w)| v * w).sum::<f64>() / mass;
    let var = values.iter().map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / mass;
    TruncatedMoments { mean, sd: var.max(0.0).sqrt(), dropped_mass: (1.0 - inside).max(0.0) }
}
