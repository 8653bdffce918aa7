//! Streaming rank-based normalization for sequential data.
//!
//! An i.i.d. stream from an arbitrary continuous distribution is transformed,
//! one observation (or one subgroup) at a time, into *sequential normal
//! scores*: each new value is ranked against the past only, the rank is turned
//! into a cumulative-probability estimate, and the estimate is mapped through
//! the standard normal quantile function. The resulting scores are mutually
//! independent and approximately N(0, 1), so classic normal-theory monitoring
//! tools (CUSUM, EWMA) apply without distributional assumptions.
//!
//! Four scorer variants are provided: individual or batched observations,
//! each with or without a known quantile of the null distribution. Rank
//! maintenance uses an order-statistic tree, so each update costs O(log n)
//! (or O(log W) with a sliding window of size W).
//!
//! The crate also ships the surrounding machinery: control-chart engines,
//! Monte-Carlo average-run-length estimation and control-limit calibration,
//! finite-sample accuracy studies, and a timing harness comparing the
//! streaming scorer against naive re-ranking baselines.

pub mod bench;
pub mod calibrate;
pub mod chart;
pub mod normal;
pub mod rank_store;
pub mod score;
pub mod validate;

mod error;

pub use error::{Error, Result};
pub use normal::{anderson_darling_n01, phi, phi_density, phi_inverse};
pub use normal::{AdResult, NormalScore, Probability};
pub use rank_store::RankStore;
pub use score::{
    AnyScorer, BatchScorer, ConditionalBatchScorer, ConditionalScorer, IndividualScorer,
    ScoredValue, ScorerSpec, ScoringConvention, VariantSpec,
};
