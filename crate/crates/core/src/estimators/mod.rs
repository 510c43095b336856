//! Mean and SD estimators for studies that report quantile summaries.
//!
//! Three transformation-based estimators are provided: quantile matching
//! ([`qe`]), Box-Cox symmetrization ([`bc`]) and the order-statistic likelihood
//! method ([`mln`]). Each returns a [`MeanSdEstimate`] that carries the fitted
//! model so the parametric bootstrap can resample from it.

mod bc;
mod luowan;
mod mln;
mod qe;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{BoxCoxNormal, Distribution, Family};
use crate::error::{Error, Result};
use crate::summaries::QuantileSummary;

pub use bc::bc_estimate;
pub use luowan::{luo_mean, wan_sd};
pub use mln::{mln_estimate, mln_log_likelihood};
pub use qe::{qe_estimate, qe_fit_family, qe_objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qe,
    Bc,
    Mln,
    LuoWan,
}

impl Method {
    /// The three transformation-based estimators.
    pub const TRANSFORMATION: [Method; 3] = [Method::Qe, Method::Bc, Method::Mln];

    pub fn name(self) -> &'static str {
        match self {
            Method::Qe => "qe",
            Method::Bc => "bc",
            Method::Mln => "mln",
            Method::LuoWan => "luowan",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qe" => Ok(Method::Qe),
            "bc" => Ok(Method::Bc),
            "mln" => Ok(Method::Mln),
            "luowan" | "luo-wan" => Ok(Method::LuoWan),
            other => Err(Error::Input(format!("unknown method '{other}' (expected qe, bc, mln)"))),
        }
    }
}

/// How a within-study standard error was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeKind {
    Naive,
    Bootstrap,
}

impl SeKind {
    pub fn name(self) -> &'static str {
        match self {
            SeKind::Naive => "naive",
            SeKind::Bootstrap => "bootstrap",
        }
    }
}

impl std::fmt::Display for SeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(SeKind::Naive),
            "bootstrap" | "boot" => Ok(SeKind::Bootstrap),
            other => Err(Error::Input(format!("unknown SE variant '{other}' (expected naive, bootstrap)"))),
        }
    }
}

/// The model an estimator settled on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedDistribution {
    Parametric { dist: Distribution },
    BoxCoxNormal { model: BoxCoxNormal },
    /// Every observation equals `value` (zero spread in the summary).
    Degenerate { value: f64 },
}

impl FittedDistribution {
    pub fn moments(&self) -> (f64, f64) {
        match self {
            Self::Parametric { dist } => dist.moments(),
            Self::BoxCoxNormal { model } => model.moments(),
            Self::Degenerate { value } => (*value, 0.0),
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            Self::Parametric { dist } => Some(dist.family()),
            _ => None,
        }
    }

    /// Replace the contents of `out` with `n` draws.
    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Self::Parametric { dist } => dist.sample_into(n, rng, out),
            Self::BoxCoxNormal { model } => model.sample_into(n, rng, out),
            Self::Degenerate { value } => {
                out.clear();
                out.resize(n, *value);
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Parametric { dist } => {
                let p: Vec<String> = dist.params().iter().map(|v| format!("{v:.6}")).collect();
                format!("{}({})", dist.family(), p.join(", "))
            }
            Self::BoxCoxNormal { model } => format!(
                "boxcox-normal(lambda={:.4}, mu={:.6}, sigma={:.6})",
                model.lambda, model.mu, model.sigma
            ),
            Self::Degenerate { value } => format!("point mass at {value}"),
        }
    }
}

/// Estimator-specific details useful for diagnosing a fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Box-Cox parameter (BC, MLN).
    pub lambda: Option<f64>,
    /// `λ̂` sits on the edge of the search interval (BC had no root inside).
    pub lambda_at_boundary: bool,
    /// Normal mass dropped when back-transforming (BC, MLN).
    pub dropped_mass: f64,
    /// Objective at the optimum for every QE candidate that was fitted.
    pub family_objectives: Vec<(Family, f64)>,
}

/// Estimated mean and SD of a study's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSdEstimate {
    pub mean: f64,
    pub sd: f64,
    pub method: Method,
    pub fitted: FittedDistribution,
    pub diagnostics: Diagnostics,
}

/// A point estimate (a mean or a difference of means) with its SE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithSe {
    pub estimate: f64,
    pub se: f64,
    pub kind: SeKind,
}

/// Run `method` on `s`.
pub fn estimate(s: &QuantileSummary, method: Method) -> Result<MeanSdEstimate> {
    match method {
        Method::Qe => qe_estimate(s),
        Method::Bc => bc_estimate(s),
        Method::Mln => mln_estimate(s),
        Method::LuoWan => luo_wan_estimate(s),
    }
}

/// Luo mean and Wan SD on the raw scale, with a normal fitted model.
pub fn luo_wan_estimate(s: &QuantileSummary) -> Result<MeanSdEstimate> {
    let mean = luo_mean(s);
    let sd = wan_sd(s);
    let fitted = if sd > 0.0 {
        FittedDistribution::Parametric { dist: Distribution::normal(mean, sd)? }
    } else {
        FittedDistribution::Degenerate { value: mean }
    };
    Ok(MeanSdEstimate { mean, sd, method: Method::LuoWan, fitted, diagnostics: Diagnostics::default() })
}

/// SD over root-n: the SE a sample mean would have.
pub fn naive_se(e: &MeanSdEstimate, n: usize) -> f64 {
    e.sd / (n as f64).sqrt()
}

/// Back-transform a transformed-normal fit into a [`MeanSdEstimate`].
pub(crate) fn from_box_cox(
    model: BoxCoxNormal,
    method: Method,
    at_boundary: bool,
) -> Result<MeanSdEstimate> {
    let m = model.moments_detail();
    if !(m.mean.is_finite() && m.sd.is_finite()) {
        return Err(Error::Estimation(format!(
            "{method}: back-transformed moments are undefined (lambda = {}, pole inside the fitted normal's central range)",
            model.lambda
        )));
    }
    let fitted = if model.sigma > 0.0 {
        FittedDistribution::BoxCoxNormal { model }
    } else {
        FittedDistribution::Degenerate { value: m.mean }
    };
    Ok(MeanSdEstimate {
        mean: m.mean,
        sd: m.sd,
        method,
        fitted,
        diagnostics: Diagnostics {
            lambda: Some(model.lambda),
            lambda_at_boundary: at_boundary,
            dropped_mass: m.dropped_mass,
            family_objectives: Vec::new(),
        },
    })
}

/// Lower and upper end of the Box-Cox parameter search.
pub const LAMBDA_RANGE: (f64, f64) = (-3.0, 3.0);
/// Grid points scanned over [`LAMBDA_RANGE`] before polishing.
pub const LAMBDA_GRID: usize = 61;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_se_is_sd_over_root_n() {
        let s = QuantileSummary::s2(1.0, 2.0, 4.0, 100).unwrap();
        let mut e = luo_wan_estimate(&s).unwrap();
        e.sd = 10.0;
        assert_eq!(naive_se(&e, 100), 1.0);
        e.sd = 0.0;
        assert_eq!(naive_se(&e, 100), 0.0);
    }

    #[test]
    fn method_names_roundtrip() {
        for m in [Method::Qe, Method::Bc, Method::Mln, Method::LuoWan] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("hozo".parse::<Method>().is_err());
    }
}
