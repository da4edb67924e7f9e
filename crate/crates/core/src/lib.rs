//! Table-based AES-128 protected by balanced internal encodings, with a
//! toolkit for analysing noise-free computational traces.

pub mod binmat;
pub mod cipher;
pub mod error;
mod format;
pub mod gf;
pub mod nibenc;
pub mod sca;
pub mod tablegen;

pub use error::{Error, FormatError, Result};
pub use sca::Scalar;

pub type KeyRankingReport = sca::KeyRankingReport<f64>;
pub type KeyRankingReport32 = sca::KeyRankingReport<f32>;
pub type TargetRanking = sca::TargetRanking<f64>;
pub type TvlaReport = sca::TvlaReport<f64>;
pub type TvlaReport32 = sca::TvlaReport<f32>;
