//! Evaluation machinery: rank/calibration metrics, repeated stratified
//! K-fold plans, CV cycles and learning curves, ensemble averaging, and
//! Jenks natural-breaks classification.

mod cv;
pub(crate) mod folds;
mod jenks;
pub(crate) mod metrics;

pub use cv::{ensemble_lsi, learning_curve, run_cv, CurvePoint, CvCycle, CvOutcome, Paradigm};
pub use folds::{make_fold_plan, stratified_subsample, FoldPlan};
pub use jenks::{
    classify_susceptibility, jenks_breaks, jenks_total_ssd, SusceptibilityClass,
};
pub use metrics::{auc_roc, brier_score};
