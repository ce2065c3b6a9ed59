//! Small-sample classifiers: the elastic-net logistic learner and the
//! random-forest baseline, behind one dispatch type so cross-validation and
//! ensemble mapping treat them uniformly. Fitted models serialise to a
//! self-describing JSON text file so ensemble members persist across CLI
//! invocations.

mod elastic_net;
mod forest;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::FeatureTable;

pub use elastic_net::{
    coordinate_descent, fit_elastic_net_logit, penalized_objective, smooth_gradient,
    smooth_objective, CdFit, ClassWeighting, ElasticNetConfig, ElasticNetLogit, PROB_CLAMP,
};
pub use forest::{fit_random_forest, RandomForest, RandomForestConfig, Tree, TreeNode};

/// Learner choice plus hyperparameters, as consumed by the CV harness.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    ElasticNet(ElasticNetConfig),
    RandomForest(RandomForestConfig),
}

impl ModelConfig {
    pub fn fit(&self, train: &FeatureTable) -> Result<FittedModel> {
        match self {
            ModelConfig::ElasticNet(cfg) => {
                Ok(FittedModel::ElasticNet(fit_elastic_net_logit(train, cfg)?))
            }
            ModelConfig::RandomForest(cfg) => {
                Ok(FittedModel::RandomForest(fit_random_forest(train, cfg)?))
            }
        }
    }

    /// Same hyperparameters under a different seed (per-cycle reseeding).
    pub fn reseeded(&self, seed: u64) -> ModelConfig {
        match self {
            ModelConfig::ElasticNet(cfg) => {
                ModelConfig::ElasticNet(ElasticNetConfig { seed, ..cfg.clone() })
            }
            ModelConfig::RandomForest(cfg) => {
                ModelConfig::RandomForest(RandomForestConfig { seed, ..cfg.clone() })
            }
        }
    }
}

/// A fitted predictor mapping feature rows to probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum FittedModel {
    #[serde(rename = "elastic_net_logit")]
    ElasticNet(ElasticNetLogit),
    #[serde(rename = "random_forest")]
    RandomForest(RandomForest),
}

impl FittedModel {
    pub fn predict_proba(&self, rows: &FeatureTable) -> Result<Vec<f64>> {
        match self {
            FittedModel::ElasticNet(m) => m.predict_proba(rows),
            FittedModel::RandomForest(m) => m.predict_proba(rows),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            FittedModel::ElasticNet(m) => &m.feature_names,
            FittedModel::RandomForest(m) => &m.feature_names,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("model serialization failed: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::parse(path, e.line(), e.column(), format!("model file: {e}"))
        })
    }
}
