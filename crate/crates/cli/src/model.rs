//! The fitted-model file format.
//!
//! Schema: `{version, dims, weights, marginals: [...], fit: {loglik_trace,
//! iterations, converged, aic}}`.  Weights are the row-major flat tensor;
//! marginals use the per-kind schema of the core library.  Serialization is
//! deterministic, so write -> read -> write is byte-identical.

use crate::CliError;
use baker_copula::copula::{BakerModel, ParamTensor};
use baker_copula::marginals::MarginalModel;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub aic: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub dims: Vec<usize>,
    pub weights: Vec<f64>,
    pub marginals: Vec<MarginalModel>,
    pub fit: FitSummary,
}

impl ModelFile {
    pub fn to_baker(&self) -> Result<BakerModel, CliError> {
        let params =
            ParamTensor::new(self.dims.clone(), self.weights.clone()).map_err(CliError::input)?;
        BakerModel::new(params, self.marginals.clone()).map_err(CliError::input)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let model: ModelFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if model.version != MODEL_VERSION {
            return Err(CliError::Input(format!(
                "unsupported model version {}",
                model.version
            )));
        }
        if model.marginals.len() != model.dims.len() {
            return Err(CliError::Input(
                "model file: marginals do not match dims".into(),
            ));
        }
        Ok(model)
    }
}
