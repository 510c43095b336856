//! Mean and standard deviation estimation from quantile summaries, with
//! parametric bootstrap standard errors and a random-effects meta-analysis
//! engine.
//!
//! The pieces, bottom up:
//!
//! - [`distributions`]: the parametric families, the Box-Cox transform, and
//!   the transformed-normal law used by the Box-Cox based estimators.
//! - [`summaries`]: five-number-summary subsets (`S1`, `S2`, `S3`), their
//!   extraction from raw samples, and data screening rules.
//! - [`estimators`]: the quantile-matching (QE), Box-Cox (BC) and MLN
//!   estimators, plus the Luo/Wan building blocks and the naive SE.
//! - [`bootstrap`]: parametric bootstrap SEs and a Monte Carlo true-SE oracle.
//! - [`meta`]: inverse-variance pooling, REML τ², Q-profile and Wald
//!   intervals, and I².

pub mod bootstrap;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod meta;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod summaries;

pub use bootstrap::{bootstrap_se, true_se_oracle, BootstrapConfig, BootstrapOutcome};
pub use distributions::{BoxCox, BoxCoxNormal, Distribution, Family};
pub use error::{Error, Result};
pub use estimators::{EstimateWithSe, FittedDistribution, MeanSdEstimate, Method, SeKind};
pub use meta::{MetaResult, StudyInput};
pub use rng::SeedStream;
pub use summaries::{QuantileSummary, Scenario};
