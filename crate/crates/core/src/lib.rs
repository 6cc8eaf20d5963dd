//! Monte-Carlo engine for static replication risk.
//!
//! The engine evaluates the time-weighted variance functional
//! `E ∫₀¹ ‖Δσₜ‖²_H (1 − t) dt` of the loading mismatch between a fixed
//! exposure and a candidate replicating position, where the discounted
//! price curve follows a correlated two-factor Gaussian short-rate model.
//!
//! Layout:
//!
//! * [`stochastic`] exact joint sampling of both factors and their integrals.
//! * [`curve`] closed-form bond prices, discount factors and loadings.
//! * [`mortality`] Gompertz survivor index and whole-life values.
//! * [`risk`] bond-maturity and model-point scans, variance identity.
//! * [`quadratic`] the multi-bond quadratic program.
//! * [`hedging`] two-asset and zero-rate Black–Scholes fixtures.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod error;
pub mod hedging;
pub mod linalg;
pub mod mortality;
pub mod quadratic;
pub mod quadrature;
pub mod risk;
pub mod stats;
pub mod stochastic;

pub use curve::{CurveState, G2ppParams, VolLoading};
pub use error::{Error, Result};
pub use mortality::{AgeDomain, GompertzParams};
pub use risk::{BondPortfolio, PolicyPortfolio, RiskScan};
pub use stats::MCEstimate;
pub use stochastic::{FactorPathSet, RandomPlan, TimeGrid};
