//! Sleep-event detection from multichannel EEG.
//!
//! The pipeline resamples each channel to 256 Hz, decomposes it with a
//! five-level discrete wavelet transform, summarises the detail coefficients
//! of every 2-second window with five statistics (75 attributes for three
//! channels), and then evolves feature-construction programs with genetic
//! programming. Each program marks subtrees with an `F` node; every marked
//! subtree is one constructed feature, and the cross-validated AUC of a
//! classifier trained on those features is the program's fitness.
//!
//! Modules follow the data flow:
//! [`signal`] → [`dwt`] → [`features`] → [`dataset`] → [`gp`] /
//! [`classifiers`] → [`metrics`] / [`pca`] → [`analysis`], with
//! [`experiment`] and [`config`] wiring the pieces together for the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod classifiers;
pub mod config;
pub mod dataset;
pub mod dwt;
pub mod error;
pub mod experiment;
pub mod features;
pub mod gp;
pub mod metrics;
pub mod pca;
pub mod seed;
pub mod signal;
mod stats;

pub use error::{Error, ErrorKind, Result};
