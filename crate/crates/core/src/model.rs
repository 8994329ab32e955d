//! Trained-model artifacts: a fitted OLS, forest or SVR together with the
//! metadata needed to reproduce and apply it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{KernelSpec, Listing, ModelSpec};
use crate::features::{encode_listing, EncodeError};
use crate::forest::Forest;
use crate::regression::OlsFit;
use crate::svr::SvrModel;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid model artifact: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported artifact version {0} (expected {ARTIFACT_VERSION})")]
    Version(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Forest,
    Svr,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Forest => "forest",
            ModelKind::Svr => "svr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "fit", rename_all = "lowercase")]
pub enum FittedModel {
    Ols(OlsFit),
    Forest(Forest),
    Svr(SvrModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Ols(_) => ModelKind::Ols,
            FittedModel::Forest(_) => ModelKind::Forest,
            FittedModel::Svr(_) => ModelKind::Svr,
        }
    }

    /// Prediction for one encoded feature row (no intercept entry).
    pub fn predict_features(&self, features: &[f64]) -> Result<f64, String> {
        match self {
            FittedModel::Ols(fit) => fit.predict_features(features).map_err(|e| e.to_string()),
            FittedModel::Forest(f) => f.predict_one(features).map_err(|e| e.to_string()),
            FittedModel::Svr(m) => m.predict_one(features).map_err(|e| e.to_string()),
        }
    }

    pub fn kernel(&self) -> Option<KernelSpec> {
        match self {
            FittedModel::Svr(m) => Some(m.kernel),
            _ => None,
        }
    }
}

/// Everything needed to reproduce a fit from the dataset it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_hash: String,
    pub seed: u64,
    pub split_fraction: f64,
    pub zscore: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
    pub model: FittedModel,
}

impl TrainedModel {
    pub fn new(spec: ModelSpec, provenance: Provenance, model: FittedModel) -> Self {
        TrainedModel {
            version: ARTIFACT_VERSION,
            spec,
            feature_names: spec.feature_names().iter().map(|s| s.to_string()).collect(),
            provenance,
            model,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    /// Predicted monthly rent for a listing; fails with the name of the
    /// first feature the listing lacks.
    pub fn predict_listing(&self, listing: &Listing) -> Result<f64, EncodeError> {
        let row = encode_listing(listing, self.spec)?;
        Ok(self
            .model
            .predict_features(&row)
            .expect("encoded row matches the model's feature layout"))
    }

    pub fn to_json(&self) -> Result<String, ArtifactError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let model: TrainedModel = serde_json::from_str(text)?;
        if model.version != ARTIFACT_VERSION {
            return Err(ArtifactError::Version(model.version));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        TrainedModel::from_json(&fs::read_to_string(path)?)
    }
}
