//! Universal dependency scores for subspaces of real-valued data.
//!
//! Dependence among a set of columns is measured with cumulative entropy:
//! each column's entropy is compared with its entropy conditioned on the
//! columns before it, with the conditioning columns discretized by a dynamic
//! program that keeps the bins that matter and a Shannon-entropy penalty on
//! bin count. Scores are normalized into `[0, 1]`, so subspaces of different
//! sizes and marginals can be ranked together.
//!
//! ```
//! use uds::{Dataset, UdsParams, uds_pr};
//!
//! let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
//! let y: Vec<f64> = x.iter().map(|v| v * v).collect();
//! let ds = Dataset::from_columns(vec![x, y]).unwrap();
//! let r = uds_pr(&ds, &[0, 1], &UdsParams::default()).unwrap();
//! assert!(r.score > 0.3);
//! ```

pub mod dataset;
pub mod discretizer;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod scoring;
pub mod search;

pub use dataset::{CsvOptions, Dataset, RankIndex};
pub use discretizer::{UdsParams, DEFAULT_BETA};
pub use error::{Error, Result};
pub use harness::{GenConfig, Generator, PowerConfig, PowerReport};
pub use scoring::{uds_exact, uds_pr, unnormalized_score, ScoreResult};
pub use search::{beam_search, SearchConfig, SubspaceScore};
