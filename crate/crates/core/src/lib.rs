//! Classification toolkit for ICA-decomposed EEG components.
//!
//! The crate is organised around the processing chain:
//!
//! - [`features`]: common average reference, scalp topography interpolation,
//!   median-Welch power spectrum and autocorrelation feature sets.
//! - [`network`]: the three-branch convolutional classifier, its manual
//!   backward pass, Adam training loop and weights file format.
//! - [`crowdlabel`]: collapsed Gibbs sampling that turns redundant crowd votes
//!   into compositional labels and per-labeler confusion estimates.
//! - [`metrics`]: hard and soft confusion matrices, ROC curves, SOC points,
//!   thresholding and class merging.
//! - [`io`] and [`pipeline`]: file formats and the end-to-end commands used by
//!   the `icclass` binary.
//!
//! Batch work (per-component extraction, batch classification, per-chunk
//! gradients) goes through [`exec`], which uses rayon when the `parallel`
//! feature is enabled and a plain sequential loop otherwise.

pub mod crowdlabel;
pub mod error;
pub mod exec;
pub mod features;
pub mod io;
pub mod labels;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use labels::{Category, LabelVector, NUM_CLASSES};
