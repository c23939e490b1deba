//! Feature selection for correlated feature spaces.
//!
//! The pipeline groups features into connected components of a thresholded
//! Pearson correlation graph, picks one representative per component by
//! averaging random-forest importances over an ensemble of runs, and then
//! keeps the representatives that cover a configured fraction of the refined
//! importance mass. The crate also carries the evaluation harness: TreeSHAP
//! attributions, Kuncheva and Spearman stability measures, and accuracy
//! metrics for periodic (angle) targets.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. The `parallel` feature fans tree fitting, ensemble runs and
//! SHAP rows out over rayon; results do not depend on the thread count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corrgraph;
mod error;
pub mod forest;
pub mod ingest;
pub mod matrix;
pub mod metrics;
mod par;
pub mod rng;
pub mod select;
pub mod shap;
pub mod stability;

pub use error::{Error, Result};
pub use matrix::{FeatureMatrix, Matrix};
