//! Landslide-susceptibility modelling from a DEM-derived geomorphic prior.
//!
//! The pipeline has three steps. First, hydrology and terrain kernels turn a
//! DEM into log contributing area `A` and mean upslope gradient `β`, whose
//! empirical joint CDF gives every pixel a prior susceptibility; the
//! per-slope-unit maximum of that prior is the `gpk` feature. Second, `gpk`
//! joins zonal terrain statistics and any external covariates in a
//! slope-unit feature table. Third, a small-sample classifier (elastic-net
//! logistic regression, with a random-forest baseline) turns the table into
//! probabilities, evaluated by repeated stratified cross-validation,
//! learning curves over stratified subsamples, ensemble-averaged
//! susceptibility indices, and Jenks natural-breaks class maps.

pub mod error;
pub mod eval;
pub mod hydrology;
pub mod model;
pub mod pipeline;
pub mod prior;
pub mod raster;
pub mod seeding;
pub mod synth;
pub mod tabular;
pub mod terrain;

pub use error::{Error, Result};
