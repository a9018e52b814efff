//! Random-codebook information reconciliation for long-range
//! continuous-variable QKD.
//!
//! Bob hides his measurement vector among `q - 1` random fakes; Alice picks
//! the unique row whose score clears a threshold.  The crate provides the
//! channel model, codebook construction (truly random and seed-expanded),
//! the score and its likelihood-ratio oracle, an optimized decoder, the
//! closed-form error probabilities and key ratio, the key-ratio optimizer and
//! a Monte-Carlo session simulator with a key-budget ledger.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the precision for callers who do not care.

// `!(x > 0)` is how parameter checks reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod channel;
pub mod codebook;
pub mod decoder;
pub mod error;
pub mod optimizer;
pub mod protocol;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod scoring;
pub mod special;

pub use channel::{
    derive_channel, derive_operating_point, BlockSample, ChannelParams, OperatingPoint,
};
pub use error::{Error, Result};
pub use scalar::Real;

pub type ChannelParamsF64 = channel::ChannelParams<f64>;
pub type ChannelParamsF32 = channel::ChannelParams<f32>;
pub type OperatingPointF64 = channel::OperatingPoint<f64>;
pub type OperatingPointF32 = channel::OperatingPoint<f32>;
pub type BlockSampleF64 = channel::BlockSample<f64>;
pub type BlockSampleF32 = channel::BlockSample<f32>;
pub type CodebookTableF64 = codebook::CodebookTable<f64>;
pub type CodebookTableF32 = codebook::CodebookTable<f32>;
pub type ScoreContextF64 = scoring::ScoreContext<f64>;
pub type ScoreContextF32 = scoring::ScoreContext<f32>;
pub type ErrorProbabilitiesF64 = analytics::ErrorProbabilities<f64>;
pub type RateReportF64 = analytics::RateReport<f64>;
