//! Parametric families and the Box-Cox transform.

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use crate::error::{Error, Result};
use crate::quadrature::{central_half_width, truncated_normal_expectation, TruncatedMoments};
use crate::special;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    LogNormal,
    Gamma,
    Beta,
    Weibull,
    HalfNormal,
}

impl Family {
    pub fn arity(self) -> usize {
        match self {
            Family::HalfNormal => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::LogNormal => "lognormal",
            Family::Gamma => "gamma",
            Family::Beta => "beta",
            Family::Weibull => "weibull",
            Family::HalfNormal => "halfnormal",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A member of one of the supported parametric families.
///
/// `LogNormal` is parametrized on the log scale (`meanlog`, `sdlog`); `Gamma`
/// and `Weibull` by shape and scale; `HalfNormal` by its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    LogNormal { meanlog: f64, sdlog: f64 },
    Gamma { shape: f64, scale: f64 },
    Beta { alpha: f64, beta: f64 },
    Weibull { shape: f64, scale: f64 },
    HalfNormal { mean: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite, got {v}")))
    }
}

impl Distribution {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::Normal { mean, sd }.validated()
    }

    pub fn lognormal(meanlog: f64, sdlog: f64) -> Result<Self> {
        Self::LogNormal { meanlog, sdlog }.validated()
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        Self::Gamma { shape, scale }.validated()
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::Beta { alpha, beta }.validated()
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        Self::Weibull { shape, scale }.validated()
    }

    pub fn half_normal(mean: f64) -> Result<Self> {
        Self::HalfNormal { mean }.validated()
    }

    /// Build from a family tag and its parameter vector.
    pub fn from_params(family: Family, params: &[f64]) -> Result<Self> {
        if params.len() != family.arity() {
            return Err(Error::Parameter(format!(
                "{family} takes {} parameters, got {}",
                family.arity(),
                params.len()
            )));
        }
        let d = match family {
            Family::Normal => Self::Normal { mean: params[0], sd: params[1] },
            Family::LogNormal => Self::LogNormal { meanlog: params[0], sdlog: params[1] },
            Family::Gamma => Self::Gamma { shape: params[0], scale: params[1] },
            Family::Beta => Self::Beta { alpha: params[0], beta: params[1] },
            Family::Weibull => Self::Weibull { shape: params[0], scale: params[1] },
            Family::HalfNormal => Self::HalfNormal { mean: params[0] },
        };
        d.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Normal { mean, sd } => {
                finite("mean", mean)?;
                positive("sd", sd)?;
            }
            Self::LogNormal { meanlog, sdlog } => {
                finite("meanlog", meanlog)?;
                positive("sdlog", sdlog)?;
            }
            Self::Gamma { shape, scale } | Self::Weibull { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)?;
            }
            Self::Beta { alpha, beta } => {
                positive("alpha", alpha)?;
                positive("beta", beta)?;
            }
            Self::HalfNormal { mean } => positive("mean", mean)?,
        }
        Ok(self)
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Normal { .. } => Family::Normal,
            Self::LogNormal { .. } => Family::LogNormal,
            Self::Gamma { .. } => Family::Gamma,
            Self::Beta { .. } => Family::Beta,
            Self::Weibull { .. } => Family::Weibull,
            Self::HalfNormal { .. } => Family::HalfNormal,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Normal { mean, sd } => vec![mean, sd],
            Self::LogNormal { meanlog, sdlog } => vec![meanlog, sdlog],
            Self::Gamma { shape, scale } | Self::Weibull { shape, scale } => vec![shape, scale],
            Self::Beta { alpha, beta } => vec![alpha, beta],
            Self::HalfNormal { mean } => vec![mean],
        }
    }

    fn half_normal_scale(mean: f64) -> f64 {
        mean * (PI / 2.0).sqrt()
    }

    /// Lower and upper edges of the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Beta { .. } => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match *self {
            Self::Normal { mean, sd } => special::norm_cdf((x - mean) / sd),
            Self::LogNormal { meanlog, sdlog } => {
                if x <= 0.0 {
                    0.0
                } else {
                    special::norm_cdf((x.ln() - meanlog) / sdlog)
                }
            }
            Self::Gamma { shape, scale } => special::gamma_p(shape, x / scale),
            Self::Beta { alpha, beta } => special::beta_inc(alpha, beta, x),
            Self::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
            Self::HalfNormal { mean } => {
                if x <= 0.0 {
                    0.0
                } else {
                    special::erf(x / (Self::half_normal_scale(mean) * SQRT_2))
                }
            }
        }
    }

    /// Inverse CDF; `p` must lie strictly inside (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile probability must be in (0, 1), got {p}")));
        }
        Ok(self.quantile_unchecked(p))
    }

    /// Inverse CDF without the probability check; hot loops in the estimators
    /// call this with probabilities they have already validated.
    pub fn quantile_unchecked(&self, p: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => mean + sd * special::norm_ppf(p),
            Self::LogNormal { meanlog, sdlog } => (meanlog + sdlog * special::norm_ppf(p)).exp(),
            Self::Gamma { shape, scale } => scale * special::inv_gamma_p(shape, p),
            Self::Beta { alpha, beta } => special::inv_beta_inc(alpha, beta, p),
            Self::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Self::HalfNormal { mean } => {
                Self::half_normal_scale(mean) * special::norm_ppf(0.5 * (1.0 + p))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Normal { mean, .. } => mean,
            Self::LogNormal { meanlog, sdlog } => (meanlog + 0.5 * sdlog * sdlog).exp(),
            Self::Gamma { shape, scale } => shape * scale,
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
            Self::Weibull { shape, scale } => scale * special::ln_gamma(1.0 + 1.0 / shape).exp(),
            Self::HalfNormal { mean } => mean,
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            Self::Normal { sd, .. } => sd,
            Self::LogNormal { sdlog, .. } => self.mean() * (sdlog * sdlog).exp_m1().sqrt(),
            Self::Gamma { shape, scale } => shape.sqrt() * scale,
            Self::Beta { alpha, beta } => {
                let s = alpha + beta;
                (alpha * beta / (s * s * (s + 1.0))).sqrt()
            }
            Self::Weibull { shape, scale } => {
                let g1 = special::ln_gamma(1.0 + 1.0 / shape).exp();
                let g2 = special::ln_gamma(1.0 + 2.0 / shape).exp();
                scale * (g2 - g1 * g1).max(0.0).sqrt()
            }
            Self::HalfNormal { mean } => Self::half_normal_scale(mean) * (1.0 - FRAC_2_PI).sqrt(),
        }
    }

    /// `(mean, sd)` of the distribution.
    pub fn moments(&self) -> (f64, f64) {
        (self.mean(), self.sd())
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Self::LogNormal { meanlog, sdlog } => {
                let z: f64 = StandardNormal.sample(rng);
                (meanlog + sdlog * z).exp()
            }
            Self::Gamma { shape, scale } => {
                // parameters validated at construction
                rand_distr::Gamma::new(shape, scale).expect("valid gamma").sample(rng)
            }
            Self::Beta { alpha, beta } => {
                rand_distr::Beta::new(alpha, beta).expect("valid beta").sample(rng)
            }
            Self::Weibull { shape, scale } => {
                let u: f64 = rng.random();
                scale * (-(1.0 - u).ln()).powf(1.0 / shape)
            }
            Self::HalfNormal { mean } => {
                let z: f64 = StandardNormal.sample(rng);
                Self::half_normal_scale(mean) * z.abs()
            }
        }
    }

    /// Fill `out` with `n` i.i.d. draws, reusing its allocation.
    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(n);
        match *self {
            Self::Gamma { shape, scale } => {
                let g = rand_distr::Gamma::new(shape, scale).expect("valid gamma");
                out.extend((0..n).map(|_| g.sample(rng)));
            }
            Self::Beta { alpha, beta } => {
                let b = rand_distr::Beta::new(alpha, beta).expect("valid beta");
                out.extend((0..n).map(|_| b.sample(rng)));
            }
            _ => out.extend((0..n).map(|_| self.sample_one(rng))),
        }
    }

    /// `n` i.i.d. draws; `n = 0` is rejected.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::Input("sample size must be at least 1".into()));
        }
        let mut out = Vec::with_capacity(n);
        self.sample_into(n, rng, &mut out);
        Ok(out)
    }
}

/// Box-Cox power transform `g_λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCox {
    pub lambda: f64,
}

impl BoxCox {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }

    /// `g_λ(x)`; requires `x > 0`.
    pub fn transform(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("Box-Cox transform needs x > 0, got {x}")));
        }
        Ok(self.apply(x))
    }

    /// `g_λ(x)` without the positivity check.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        let l = self.lambda;
        if l == 0.0 {
            x.ln()
        } else {
            (l * x.ln()).exp_m1() / l
        }
    }

    /// Whether `y` lies in the range of `g_λ`.
    #[inline]
    pub fn in_range(&self, y: f64) -> bool {
        self.lambda == 0.0 || self.lambda * y + 1.0 > 0.0
    }

    /// `g_λ⁻¹(y)`; requires `λ·y + 1 > 0` when `λ ≠ 0`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !self.in_range(y) {
            return Err(Error::Domain(format!(
                "Box-Cox inverse needs lambda*y + 1 > 0 (lambda = {}, y = {y})",
                self.lambda
            )));
        }
        Ok(self.invert(y))
    }

    #[inline]
    pub fn invert(&self, y: f64) -> f64 {
        let l = self.lambda;
        if l == 0.0 {
            y.exp()
        } else {
            ((l * y).ln_1p() / l).exp()
        }
    }

    /// `ln g_λ'(x) = (λ - 1) ln x`.
    #[inline]
    pub fn log_jacobian(&self, x: f64) -> f64 {
        (self.lambda - 1.0) * x.ln()
    }
}

/// Law of `X` when `g_λ(X) ~ Normal(mu, sigma²)`, truncated to the range of
/// `g_λ` (the part of the normal where `λ·y + 1 > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoxNormal {
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl BoxCoxNormal {
    pub fn new(lambda: f64, mu: f64, sigma: f64) -> Result<Self> {
        finite("lambda", lambda)?;
        finite("mu", mu)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be non-negative, got {sigma}")));
        }
        let d = Self { lambda, mu, sigma };
        if d.valid_mass() <= 0.0 {
            return Err(Error::Parameter(
                "transformed normal has no mass inside the Box-Cox range".into(),
            ));
        }
        Ok(d)
    }

    pub fn transform(&self) -> BoxCox {
        BoxCox::new(self.lambda)
    }

    /// Standardized cut point `(−1/λ − μ)/σ` of the admissible region, if any.
    fn cut(&self) -> Option<f64> {
        if self.lambda == 0.0 {
            None
        } else {
            Some((-1.0 / self.lambda - self.mu) / self.sigma.max(f64::MIN_POSITIVE))
        }
    }

    /// Probability that the untruncated normal falls inside the range of `g_λ`.
    pub fn valid_mass(&self) -> f64 {
        if self.sigma == 0.0 {
            return if self.transform().in_range(self.mu) { 1.0 } else { 0.0 };
        }
        match self.cut() {
            None => 1.0,
            Some(c) if self.lambda > 0.0 => special::norm_sf(c),
            Some(c) => special::norm_cdf(c),
        }
    }

    /// Mean, SD and dropped mass of the back-transformed law.
    ///
    /// Moments are taken over the central part of the normal, `|z| ≤ t` with
    /// `t` from [`central_half_width`], intersected with the range of `g_λ`.
    /// For `λ < 0` the inverse transform has a pole at `y = −1/λ` and the
    /// untruncated moments are infinite; when the pole falls inside the central
    /// part the result is NaN.
    pub fn moments_detail(&self) -> TruncatedMoments {
        let bc = self.transform();
        if self.sigma == 0.0 {
            return TruncatedMoments { mean: bc.invert(self.mu), sd: 0.0, dropped_mass: 0.0 };
        }
        let t = central_half_width();
        let (lo, hi) = match self.cut() {
            Some(c) if self.lambda > 0.0 => (c.max(-t), t),
            Some(c) if c <= t => {
                return TruncatedMoments { mean: f64::NAN, sd: f64::NAN, dropped_mass: 1.0 - self.valid_mass() };
            }
            _ => (-t, t),
        };
        truncated_normal_expectation(self.mu, self.sigma, |y| bc.invert(y), lo, hi)
    }

    pub fn moments(&self) -> (f64, f64) {
        let m = self.moments_detail();
        (m.mean, m.sd)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let y = BoxCox::new(self.lambda).apply(x);
        if self.sigma == 0.0 {
            return if y >= self.mu { 1.0 } else { 0.0 };
        }
        let z = (y - self.mu) / self.sigma;
        let mass = self.valid_mass();
        match self.cut() {
            Some(c) if self.lambda > 0.0 => {
                ((special::norm_cdf(z) - special::norm_cdf(c)) / mass).clamp(0.0, 1.0)
            }
            _ => (special::norm_cdf(z) / mass).clamp(0.0, 1.0),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile probability must be in (0, 1), got {p}")));
        }
        let bc = self.transform();
        if self.sigma == 0.0 {
            return Ok(bc.invert(self.mu));
        }
        let mass = self.valid_mass();
        let u = match self.cut() {
            Some(c) if self.lambda > 0.0 => special::norm_cdf(c) + p * mass,
            _ => p * mass,
        };
        Ok(bc.invert(self.mu + self.sigma * special::norm_ppf(u)))
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let bc = self.transform();
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let y = self.mu + self.sigma * z;
            if bc.in_range(y) {
                let x = bc.invert(y);
                if x > 0.0 && x.is_finite() {
                    return x;
                }
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..n).map(|_| self.sample_one(rng)));
    }
}
