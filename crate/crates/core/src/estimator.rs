//! Least-squares projection estimators of the slope operator.
//!
//! Two routes to the same object: `fit_pca` projects onto the empirical PCA
//! basis, where the normal-equation matrix is diagonal and the coefficients
//! are score cross-moments divided by eigenvalues; `fit_basis` solves the
//! normal equations A b = Y_phi for an arbitrary orthonormal system and
//! doubles as an independent oracle for the PCA route.

use nalgebra::DMatrix;

use crate::cov::{empirical_covariance, pca, GridOperator, PcaBasis};
use crate::error::{Error, Result};
use crate::grid::{FunctionalSample, Grid, GridFunction};

/// Condition-number cutoff above which the design matrix is reported singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Anything that maps a grid function linearly to another grid function.
pub trait Operator {
    fn apply(&self, x: &GridFunction) -> Result<GridFunction>;
}

impl Operator for GridOperator {
    fn apply(&self, x: &GridFunction) -> Result<GridFunction> {
        GridOperator::apply(self, x)
    }
}

impl<T: Operator + ?Sized> Operator for &T {
    fn apply(&self, x: &GridFunction) -> Result<GridFunction> {
        (*self).apply(x)
    }
}

/// Output-side projection dimension: a fixed rank, or the complete
/// discretized basis (all p directions), which realizes the m2 = infinity
/// estimator Delta_n Gamma^+ exactly on the grid. Note the full choice is
/// not the empirical rank: responses carry noise outside the covariate span,
/// so coefficients beyond the rank do not vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputDim {
    Dim(usize),
    Full,
}

/// A user-supplied orthonormal system for the generic least-squares route.
#[derive(Debug, Clone)]
pub struct BasisSpec {
    functions: Vec<GridFunction>,
}

impl BasisSpec {
    /// Validate pairwise quadrature-orthonormality within 1e-8.
    pub fn new(functions: Vec<GridFunction>) -> Result<Self> {
        let first = functions.first().ok_or(Error::EmptySample)?;
        let grid = first.grid();
        let mut worst = 0.0_f64;
        for (j, f) in functions.iter().enumerate() {
            if f.grid() != grid {
                return Err(Error::GridMismatch {
                    expected: grid.p(),
                    found: f.grid().p(),
                });
            }
            for (k, g) in functions.iter().enumerate().skip(j) {
                let ip = f.inner_product(g)?;
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        if worst > 1e-8 {
            return Err(Error::NotOrthonormal { deviation: worst });
        }
        Ok(BasisSpec { functions })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[GridFunction] {
        &self.functions
    }
}

/// A fitted projection estimator: coefficient matrix on a working orthonormal
/// family, plus the sample means needed to de-center predictions.
#[derive(Debug, Clone)]
pub struct FittedModel {
    m1: usize,
    m2: usize,
    coeffs: DMatrix<f64>,
    basis_functions: Vec<GridFunction>,
    eigenvalues: Vec<f64>,
    x_mean: GridFunction,
    y_mean: GridFunction,
    sigma_plugin: Option<f64>,
    requested_m1: Option<usize>,
}

impl FittedModel {
    pub fn grid(&self) -> Grid {
        self.x_mean.grid()
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    /// Coefficient matrix b_{j,k}, j < m1 rows, k < m2 columns.
    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize, k: usize) -> f64 {
        self.coeffs[(j, k)]
    }

    /// The working orthonormal family, max(m1, m2) functions.
    pub fn basis_functions(&self) -> &[GridFunction] {
        &self.basis_functions
    }

    /// Eigenvalues attached to the working family (empty for generic-basis fits).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn x_mean(&self) -> &GridFunction {
        &self.x_mean
    }

    pub fn y_mean(&self) -> &GridFunction {
        &self.y_mean
    }

    /// Contrast of this model on its training data, recorded at fit time.
    pub fn sigma_plugin(&self) -> Option<f64> {
        self.sigma_plugin
    }

    /// The originally requested input dimension, when it exceeded the
    /// empirical rank and was clamped.
    pub fn requested_m1(&self) -> Option<usize> {
        self.requested_m1
    }

    /// Action on an already-centered covariate (no mean handling).
    pub fn apply_centered(&self, x: &GridFunction) -> Result<GridFunction> {
        if x.grid() != self.grid() {
            return Err(Error::GridMismatch {
                expected: self.grid().p(),
                found: x.grid().p(),
            });
        }
        let scores: Vec<f64> = self.basis_functions[..self.m1]
            .iter()
            .map(|phi| phi.inner_product(x).expect("same grid"))
            .collect();
        let mut values = vec![0.0; self.grid().p()];
        for k in 0..self.m2 {
            let mut s = 0.0;
            for (j, u) in scores.iter().enumerate() {
                s += self.coeffs[(j, k)] * u;
            }
            if s == 0.0 {
                continue;
            }
            for (v, phi) in values.iter_mut().zip(self.basis_functions[k].values()) {
                *v += s * phi;
            }
        }
        GridFunction::new(self.grid(), values)
    }

    /// Predict the response for a covariate. With `decenter` set, `x_new` is
    /// taken as raw (the stored covariate mean is subtracted first) and the
    /// stored response mean is added back to the output; otherwise both sides
    /// stay centered.
    pub fn predict(&self, x_new: &GridFunction, decenter: bool) -> Result<GridFunction> {
        let centered;
        let x_c = if decenter {
            centered = x_new.sub(&self.x_mean)?;
            &centered
        } else {
            x_new
        };
        let y_c = self.apply_centered(x_c)?;
        if decenter {
            y_c.add(&self.y_mean)
        } else {
            Ok(y_c)
        }
    }

    /// Evaluate the estimated kernel on the grid. Applying the returned
    /// operator to a centered covariate reproduces `apply_centered`.
    pub fn kernel_matrix(&self) -> GridOperator {
        let grid = self.grid();
        let p = grid.p();
        let mut kernel = DMatrix::zeros(p, p);
        for j in 0..self.m1 {
            let phi_j = self.basis_functions[j].values();
            for k in 0..self.m2 {
                let b = self.coeffs[(j, k)];
                if b == 0.0 {
                    continue;
                }
                let phi_k = self.basis_functions[k].values();
                for (a, &pk) in phi_k.iter().enumerate() {
                    let out = b * pk;
                    for (c, kv) in kernel.row_mut(a).iter_mut().enumerate() {
                        *kv += out * phi_j[c];
                    }
                }
            }
        }
        GridOperator::new(grid, kernel).expect("finite kernel")
    }
}

impl Operator for FittedModel {
    fn apply(&self, x: &GridFunction) -> Result<GridFunction> {
        self.apply_centered(x)
    }
}

fn check_aligned(xs: &FunctionalSample, ys: &FunctionalSample) -> Result<()> {
    if xs.n() != ys.n() {
        return Err(Error::SampleSizeMismatch {
            left: xs.n(),
            right: ys.n(),
        });
    }
    if xs.grid() != ys.grid() {
        return Err(Error::GridMismatch {
            expected: xs.grid().p(),
            found: ys.grid().p(),
        });
    }
    Ok(())
}

/// Least-squares contrast of a predictor: the mean squared residual norm
/// (1/n) sum_i ||Y_i - T(X_i)||^2.
pub fn contrast<T: Operator>(
    predictor: &T,
    xs: &FunctionalSample,
    ys: &FunctionalSample,
) -> Result<f64> {
    check_aligned(xs, ys)?;
    let mut total = 0.0;
    for (x, y) in xs.functions().iter().zip(ys.functions()) {
        let residual = y.sub(&predictor.apply(x)?)?;
        total += residual.norm().powi(2);
    }
    Ok(total / xs.n() as f64)
}

/// Empirical operator norm squared: (1/n) sum_i ||T(X_i)||^2.
pub fn empirical_norm_sq<T: Operator>(predictor: &T, xs: &FunctionalSample) -> Result<f64> {
    let mut total = 0.0;
    for x in xs.functions() {
        total += predictor.apply(x)?.norm().powi(2);
    }
    Ok(total / xs.n() as f64)
}

/// Shared state for fitting several truncation dimensions on one dataset:
/// the PCA basis and the score matrices, computed once.
pub(crate) struct FitContext {
    pub basis: PcaBasis,
    pub x_scores: DMatrix<f64>,
    pub y_scores: DMatrix<f64>,
    pub x_mean: GridFunction,
    pub y_mean: GridFunction,
}

impl FitContext {
    pub fn new(xs: &FunctionalSample, ys: &FunctionalSample) -> Result<Self> {
        check_aligned(xs, ys)?;
        if !xs.is_centered() || !ys.is_centered() {
            return Err(Error::NotCentered);
        }
        let gamma = empirical_covariance(xs)?;
        let basis = pca(&gamma, xs.n())?;
        if basis.m_max() == 0 {
            return Err(Error::DegenerateSample);
        }
        let n = xs.n();
        let m_max = basis.m_max();
        let p = xs.grid().p();
        let x_scores = DMatrix::from_fn(n, m_max, |i, j| {
            basis
                .eigenfunction(j)
                .inner_product(xs.function(i))
                .expect("same grid")
        });
        // Output scores over the complete basis: the m2 = infinity estimator
        // reaches response directions beyond the covariate rank.
        let y_scores = DMatrix::from_fn(n, p, |i, k| {
            basis
                .eigenfunction(k)
                .inner_product(ys.function(i))
                .expect("same grid")
        });
        Ok(FitContext {
            basis,
            x_scores,
            y_scores,
            x_mean: xs.mean().clone(),
            y_mean: ys.mean().clone(),
        })
    }

    /// Fit the double-truncation estimator at (m1, m2). An m1 beyond the
    /// empirical rank is clamped to it (recorded on the model); m2 = Full
    /// means the complete discretized basis, so the fit coincides with the
    /// untruncated estimator Delta_n Gamma^+.
    pub fn fit(
        &self,
        xs: &FunctionalSample,
        ys: &FunctionalSample,
        m1: usize,
        m2: OutputDim,
    ) -> Result<FittedModel> {
        let m_max = self.basis.m_max();
        let p = xs.grid().p();
        if m1 == 0 {
            return Err(Error::InvalidDimension {
                value: 0,
                reason: "m1 must be at least 1",
            });
        }
        let m2_eff = match m2 {
            OutputDim::Full => p,
            OutputDim::Dim(0) => {
                return Err(Error::InvalidDimension {
                    value: 0,
                    reason: "m2 must be at least 1",
                })
            }
            OutputDim::Dim(d) => d.min(p),
        };
        let requested_m1 = (m1 > m_max).then_some(m1);
        let m1_eff = m1.min(m_max);

        let n = xs.n() as f64;
        let mut coeffs = DMatrix::zeros(m1_eff, m2_eff);
        for j in 0..m1_eff {
            let lambda = self.basis.eigenvalue(j);
            for k in 0..m2_eff {
                let mut s = 0.0;
                for i in 0..xs.n() {
                    s += self.x_scores[(i, j)] * self.y_scores[(i, k)];
                }
                coeffs[(j, k)] = s / (n * lambda);
            }
        }

        let m_used = m1_eff.max(m2_eff);
        let mut model = FittedModel {
            m1: m1_eff,
            m2: m2_eff,
            coeffs,
            basis_functions: self.basis.eigenfunctions()[..m_used].to_vec(),
            eigenvalues: self.basis.eigenvalues()[..m_used].to_vec(),
            x_mean: self.x_mean.clone(),
            y_mean: self.y_mean.clone(),
            sigma_plugin: None,
            requested_m1,
        };
        model.sigma_plugin = Some(contrast(&model, xs, ys)?);
        Ok(model)
    }
}

/// Fit the PCA double-truncation estimator: b_{j,k} = <Delta_n phi_j, phi_k> / lambda_j,
/// computed through score cross-products.
pub fn fit_pca(
    xs: &FunctionalSample,
    ys: &FunctionalSample,
    m1: usize,
    m2: OutputDim,
) -> Result<FittedModel> {
    FitContext::new(xs, ys)?.fit(xs, ys, m1, m2)
}

/// Least-squares fit on a user-supplied orthonormal basis: solves
/// A b = Y_phi with A = (<Gamma_n phi_j, phi_k>) column by column.
pub fn fit_basis(
    xs: &FunctionalSample,
    ys: &FunctionalSample,
    basis: &BasisSpec,
    m1: usize,
    m2: usize,
) -> Result<FittedModel> {
    check_aligned(xs, ys)?;
    if !xs.is_centered() || !ys.is_centered() {
        return Err(Error::NotCentered);
    }
    if m1 == 0 || m2 == 0 {
        return Err(Error::InvalidDimension {
            value: 0,
            reason: "projection dimensions must be at least 1",
        });
    }
    let needed = m1.max(m2);
    if basis.len() < needed {
        return Err(Error::BasisTooSmall {
            needed,
            available: basis.len(),
        });
    }
    if basis.functions()[0].grid() != xs.grid() {
        return Err(Error::GridMismatch {
            expected: xs.grid().p(),
            found: basis.functions()[0].grid().p(),
        });
    }

    let n = xs.n();
    let u = DMatrix::from_fn(n, m1, |i, j| {
        basis.functions()[j]
            .inner_product(xs.function(i))
            .expect("same grid")
    });
    let w = DMatrix::from_fn(n, m2, |i, k| {
        basis.functions()[k]
            .inner_product(ys.function(i))
            .expect("same grid")
    });
    let a = u.tr_mul(&u) / n as f64;
    let y_phi = u.tr_mul(&w) / n as f64;

    let svd = a.clone().svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 {
        s_max / s_min
    } else {
        f64::INFINITY
    };
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SingularDesign { condition });
    }
    let coeffs = a
        .lu()
        .solve(&y_phi)
        .ok_or(Error::SingularDesign { condition })?;

    let mut model = FittedModel {
        m1,
        m2,
        coeffs,
        basis_functions: basis.functions()[..needed].to_vec(),
        eigenvalues: Vec::new(),
        x_mean: xs.mean().clone(),
        y_mean: ys.mean().clone(),
        sigma_plugin: None,
        requested_m1: None,
    };
    model.sigma_plugin = Some(contrast(&model, xs, ys)?);
    Ok(model)
}

/// Rebuild a model from stored parts (deserialization path).
#[allow(clippy::too_many_arguments)]
pub(crate) fn model_from_parts(
    m1: usize,
    m2: usize,
    coeffs: DMatrix<f64>,
    basis_functions: Vec<GridFunction>,
    eigenvalues: Vec<f64>,
    x_mean: GridFunction,
    y_mean: GridFunction,
    sigma_plugin: Option<f64>,
) -> FittedModel {
    FittedModel {
        m1,
        m2,
        coeffs,
        basis_functions,
        eigenvalues,
        x_mean,
        y_mean,
        sigma_plugin,
        requested_m1: None,
    }
}
