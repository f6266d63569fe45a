//! Transportation mode detection from single-axis kinetic energy harvester
//! (KEH) voltage traces.
//!
//! The processing chain is: smoothing and stop removal ([`signal`]), windowed
//! feature extraction ([`features`]), mutual-information feature selection
//! ([`selection`]), per-class K-SVD dictionaries and l1 sparse coding
//! ([`sparse`], [`classifier`]). [`eval`] runs cross-validation protocols and
//! baselines, and [`synthgen`] produces labeled synthetic corpora.

pub mod classifier;
pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod mode;
pub mod pipeline;
pub mod selection;
pub mod signal;
pub mod sparse;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
pub use mode::Mode;
