//! Deconvolution of periodically blurred, noisy signals by minimizing Stein's
//! unbiased risk estimate over a linear expansion of thresholds (SURE-LET)
//! in a redundant wavelet frame.
//!
//! ```no_run
//! use sure_deconv::pipeline::{run_restore, ExperimentConfig};
//!
//! let mut cfg = ExperimentConfig::default();
//! cfg.set("input", "cameraman.pgm").unwrap();
//! let out = run_restore(&cfg).unwrap();
//! println!("{:?} dB", out.row.snr_db);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degradation;
pub mod error;
pub mod frame;
pub mod grid;
pub mod let_estimator;
pub mod pipeline;
pub mod risk;
pub mod solver;
pub mod stein;
pub mod wavelet;

pub use degradation::{BlurSpec, DegradationModel};
pub use error::{Error, Result};
pub use frame::{FrameCoefficients, FrameFlavor, FrameTransform};
pub use grid::{FrequencySet, GridShape, SpatialField, SpectrumField};
pub use let_estimator::{ElementaryFunction, LetSpec};
pub use risk::RiskReport;
pub use solver::{optimize_let, LetFit};
