//! JSON serialization of fitted models.
//!
//! The document layout is fixed: grid_p, m1, m2, eigenvalues, eigenfunctions
//! (row-major, one row per basis function), coeffs (m1 rows by m2 columns),
//! x_mean, y_mean, sigma_plugin, kappa, created_from. All reals are written
//! in the shortest decimal form that round-trips the exact IEEE-754 double.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{model_from_parts, FittedModel};
use crate::grid::{Grid, GridFunction};

/// On-disk form of a fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub grid_p: usize,
    pub m1: usize,
    pub m2: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
    pub coeffs: Vec<Vec<f64>>,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub sigma_plugin: Option<f64>,
    pub kappa: Option<f64>,
    pub created_from: String,
}

impl ModelRecord {
    pub fn from_model(model: &FittedModel, kappa: Option<f64>, created_from: &str) -> Self {
        ModelRecord {
            grid_p: model.grid().p(),
            m1: model.m1(),
            m2: model.m2(),
            eigenvalues: model.eigenvalues().to_vec(),
            eigenfunctions: model
                .basis_functions()
                .iter()
                .map(|f| f.values().to_vec())
                .collect(),
            coeffs: (0..model.m1())
                .map(|j| (0..model.m2()).map(|k| model.coeff(j, k)).collect())
                .collect(),
            x_mean: model.x_mean().values().to_vec(),
            y_mean: model.y_mean().values().to_vec(),
            sigma_plugin: model.sigma_plugin(),
            kappa,
            created_from: created_from.to_string(),
        }
    }

    /// Rebuild a usable model, validating the stored dimensions.
    pub fn to_model(&self) -> Result<FittedModel> {
        if self.grid_p == 0 {
            return Err(Error::ModelFormat("grid_p must be positive".into()));
        }
        let grid = Grid::new(self.grid_p);
        let m_used = self.m1.max(self.m2);
        if self.eigenfunctions.len() < m_used {
            return Err(Error::ModelFormat(format!(
                "{} eigenfunctions stored, need {}",
                self.eigenfunctions.len(),
                m_used
            )));
        }
        if self.coeffs.len() != self.m1 || self.coeffs.iter().any(|r| r.len() != self.m2) {
            return Err(Error::ModelFormat(format!(
                "coefficient matrix must be {} x {}",
                self.m1, self.m2
            )));
        }
        let basis_functions = self
            .eigenfunctions
            .iter()
            .map(|v| GridFunction::new(grid, v.clone()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let coeffs = DMatrix::from_fn(self.m1, self.m2, |j, k| self.coeffs[j][k]);
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelFormat("non-finite coefficient".into()));
        }
        let x_mean = GridFunction::new(grid, self.x_mean.clone())
            .map_err(|e| Error::ModelFormat(format!("x_mean: {e}")))?;
        let y_mean = GridFunction::new(grid, self.y_mean.clone())
            .map_err(|e| Error::ModelFormat(format!("y_mean: {e}")))?;
        Ok(model_from_parts(
            self.m1,
            self.m2,
            coeffs,
            basis_functions,
            self.eigenvalues.clone(),
            x_mean,
            y_mean,
            self.sigma_plugin,
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}
