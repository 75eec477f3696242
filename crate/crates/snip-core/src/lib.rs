//! Contrastive compression of paired-modality feature vectors, a two-level
//! IVF-PQ index with asymmetric-distance search, and an adaptive-threshold
//! duplicate scan producing representative sets, histograms and precision
//! reports.

pub mod corpus;
pub mod error;
pub mod io;
pub mod types;

pub use error::{Error, Result};
pub use types::{FeatureMatrix, Modality};
