//! Joinability and disclosure-risk analysis for open tabular datasets.

pub mod binning;
mod cancel;
pub mod corpus;
pub mod embedding;

pub use cancel::CancelToken;
pub mod audit;
pub mod disclosure;
pub mod grouping;
pub mod pairrisk;
mod serde_float;
pub mod vulnerability;
