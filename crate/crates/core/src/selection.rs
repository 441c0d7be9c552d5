//! Penalized-contrast selection of the input projection dimension.
//!
//! Candidates run from 1 to N_n = min(floor(n / ln^2 n), empirical rank,
//! optional cap). For each candidate the estimator is fitted at full output
//! rank and its contrast recorded; the selected dimension minimizes
//! contrast + kappa * sigma^2 * m1 / n, with the noise variance either known
//! or replaced per candidate by that candidate's own contrast.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{FitContext, FittedModel, OutputDim};
use crate::grid::FunctionalSample;

/// How the noise variance entering the penalty is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// Use a known (or externally estimated) value of sigma_eps^2.
    Known(f64),
    /// Replace sigma_eps^2 by the candidate's own contrast, fully data-driven.
    Plugin,
}

/// Configuration of the dimension-selection criterion.
///
/// `kappa` is the practical penalty constant; 0.6 is the calibrated default.
/// The theoretical penalty has kappa > 8, but calibrated values in [0.2, 2]
/// behave better in practice, so the constant is not restricted here (kappa =
/// 0 degenerates to pure contrast minimization).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub kappa: f64,
    pub sigma: SigmaMode,
    pub max_dim_cap: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            kappa: 0.6,
            sigma: SigmaMode::Plugin,
            max_dim_cap: None,
        }
    }
}

/// Diagnostics of one selection run: per-candidate contrasts, penalties and
/// criterion values, plus the argmin.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub m1_hat: usize,
    pub candidates: Vec<usize>,
    pub contrasts: Vec<f64>,
    pub penalties: Vec<f64>,
    pub criterion: Vec<f64>,
    pub sigma_used: Vec<f64>,
}

impl SelectionResult {
    /// Write the per-candidate table as CSV (columns m1, contrast, penalty,
    /// criterion, sigma_used).
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["m1", "contrast", "penalty", "criterion", "sigma_used"])?;
        for (i, &m1) in self.candidates.iter().enumerate() {
            w.write_record(&[
                m1.to_string(),
                self.contrasts[i].to_string(),
                self.penalties[i].to_string(),
                self.criterion[i].to_string(),
                self.sigma_used[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<selection csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// The candidate dimensions {1, ..., N_n} with
/// N_n = min(floor(n / ln^2 n), m_max, cap), at least 1.
pub fn candidate_set(n: usize, m_max: usize, cap: Option<usize>) -> Result<Vec<usize>> {
    if m_max == 0 {
        return Err(Error::DegenerateSample);
    }
    if n < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            found: n,
        });
    }
    let ln = (n as f64).ln();
    let mut top = (n as f64 / (ln * ln)).floor() as usize;
    top = top.min(m_max);
    if let Some(c) = cap {
        top = top.min(c);
    }
    top = top.max(1);
    Ok((1..=top).collect())
}

/// The penalty kappa * sigma^2 * m1 / n.
pub fn penalty(m1: usize, n: usize, sigma_sq: f64, kappa: f64) -> f64 {
    kappa * sigma_sq * m1 as f64 / n as f64
}

/// Per-candidate fits and contrasts for one dataset, computed once so that
/// several penalty constants can be compared on shared fits (common random
/// numbers in sweeps).
pub(crate) struct SelectionCurves {
    pub n: usize,
    pub candidates: Vec<usize>,
    pub models: Vec<FittedModel>,
    pub contrasts: Vec<f64>,
}

impl SelectionCurves {
    pub fn compute(
        xs: &FunctionalSample,
        ys: &FunctionalSample,
        cap: Option<usize>,
    ) -> Result<Self> {
        let context = FitContext::new(xs, ys)?;
        let candidates = candidate_set(xs.n(), context.basis.m_max(), cap)?;
        let mut models = Vec::with_capacity(candidates.len());
        let mut contrasts = Vec::with_capacity(candidates.len());
        for &m1 in &candidates {
            let model = context.fit(xs, ys, m1, OutputDim::Full)?;
            contrasts.push(model.sigma_plugin().expect("contrast recorded at fit"));
            models.push(model);
        }
        Ok(SelectionCurves {
            n: xs.n(),
            candidates,
            models,
            contrasts,
        })
    }

    /// Evaluate the penalized criterion for one configuration. Ties go to the
    /// smallest dimension.
    pub fn select(&self, config: &SelectionConfig) -> SelectionResult {
        let sigma_used: Vec<f64> = match config.sigma {
            SigmaMode::Known(s) => vec![s; self.candidates.len()],
            SigmaMode::Plugin => self.contrasts.clone(),
        };
        self.select_with_sigma(config.kappa, sigma_used)
    }

    /// Criterion evaluation for an explicit per-candidate sigma vector.
    fn select_with_sigma(&self, kappa: f64, sigma_used: Vec<f64>) -> SelectionResult {
        let penalties: Vec<f64> = self
            .candidates
            .iter()
            .zip(&sigma_used)
            .map(|(&m1, &s)| penalty(m1, self.n, s, kappa))
            .collect();
        let criterion: Vec<f64> = self
            .contrasts
            .iter()
            .zip(&penalties)
            .map(|(c, p)| c + p)
            .collect();
        let mut best = 0;
        for (i, &v) in criterion.iter().enumerate() {
            if v < criterion[best] {
                best = i;
            }
        }
        SelectionResult {
            m1_hat: self.candidates[best],
            candidates: self.candidates.clone(),
            contrasts: self.contrasts.clone(),
            penalties,
            criterion,
            sigma_used,
        }
    }

    pub fn model_for(&self, m1: usize) -> &FittedModel {
        let idx = self
            .candidates
            .iter()
            .position(|&c| c == m1)
            .expect("selected dimension is a candidate");
        &self.models[idx]
    }
}

/// Select the input dimension by penalized contrast minimization and return
/// the diagnostics together with the model refitted at (m1_hat, full rank).
pub fn select_m1(
    xs: &FunctionalSample,
    ys: &FunctionalSample,
    config: &SelectionConfig,
) -> Result<(SelectionResult, FittedModel)> {
    let curves = SelectionCurves::compute(xs, ys, config.max_dim_cap)?;
    let result = curves.select(config);
    let model = curves.model_for(result.m1_hat).clone();
    Ok((result, model))
}

/// Data-driven noise variance: the contrast of the estimator fitted at
/// (m1, full rank).
pub fn estimate_noise_variance(
    xs: &FunctionalSample,
    ys: &FunctionalSample,
    m1: usize,
) -> Result<f64> {
    let model = crate::estimator::fit_pca(xs, ys, m1, OutputDim::Full)?;
    Ok(model.sigma_plugin().expect("contrast recorded at fit"))
}
