//! Empirical covariance operators and functional PCA.
//!
//! The covariance operator of a centered sample and the cross-covariance of a
//! covariate/response pair are represented by p x p kernel matrices acting
//! through the midpoint quadrature. Diagonalizing the covariance yields the
//! empirical PCA basis used by the projection estimators, together with its
//! truncated pseudo-inverse.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{FunctionalSample, Grid, GridFunction};

/// Relative eigenvalue cutoff defining the numerical rank of the covariance.
pub const RANK_THRESHOLD: f64 = 1e-10;

const EPS_FLOOR: f64 = 1e-300;

/// An integral operator on the grid: (Tf)(t_a) = (1/p) sum_b K(a, b) f(t_b).
///
/// The kernel matrix is indexed (output node, input node), so K(a, b)
/// discretizes a bivariate kernel S(s, t) as K(a, b) = S(t_b, t_a).
#[derive(Debug, Clone)]
pub struct GridOperator {
    grid: Grid,
    kernel: DMatrix<f64>,
}

impl GridOperator {
    pub fn new(grid: Grid, kernel: DMatrix<f64>) -> Result<Self> {
        let p = grid.p();
        if kernel.nrows() != p || kernel.ncols() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                found: kernel.nrows().max(kernel.ncols()),
            });
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "operator kernel",
            });
        }
        Ok(GridOperator { grid, kernel })
    }

    pub fn zero(grid: Grid) -> Self {
        let p = grid.p();
        GridOperator {
            grid,
            kernel: DMatrix::zeros(p, p),
        }
    }

    /// Discretize a bivariate kernel S(s, t), where s is the integration
    /// variable: (Sf)(t) = integral of S(s, t) f(s) ds.
    pub fn from_kernel_fn(grid: Grid, kernel: impl Fn(f64, f64) -> f64) -> Self {
        let p = grid.p();
        let k = DMatrix::from_fn(p, p, |a, b| kernel(grid.node(b), grid.node(a)));
        GridOperator { grid, kernel: k }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Kernel entry K(a, b) = S(t_b, t_a).
    pub fn kernel_entry(&self, a: usize, b: usize) -> f64 {
        self.kernel[(a, b)]
    }

    /// Quadrature application of the operator to a grid function.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.p(),
                found: f.grid().p(),
            });
        }
        let w = self.grid.weight();
        let values = (0..self.grid.p())
            .map(|a| {
                let row = self.kernel.row(a);
                let s: f64 = row.iter().zip(f.values()).map(|(k, v)| k * v).sum();
                s * w
            })
            .collect();
        GridFunction::new(self.grid, values)
    }

    pub fn sub(&self, other: &GridOperator) -> Result<GridOperator> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.p(),
                found: other.grid.p(),
            });
        }
        Ok(GridOperator {
            grid: self.grid,
            kernel: &self.kernel - &other.kernel,
        })
    }

    /// Largest deviation |K(a,b) - K(b,a)| over the kernel.
    pub fn max_asymmetry(&self) -> f64 {
        let p = self.grid.p();
        let mut worst = 0.0_f64;
        for a in 0..p {
            for b in (a + 1)..p {
                worst = worst.max((self.kernel[(a, b)] - self.kernel[(b, a)]).abs());
            }
        }
        worst
    }
}

/// Empirical covariance operator of a centered sample:
/// K(a, b) = (1/n) sum_i X_i(t_a) X_i(t_b).
pub fn empirical_covariance(xs: &FunctionalSample) -> Result<GridOperator> {
    if !xs.is_centered() {
        return Err(Error::NotCentered);
    }
    let grid = xs.grid();
    let p = grid.p();
    let n = xs.n() as f64;
    let mut kernel = DMatrix::zeros(p, p);
    for x in xs.functions() {
        let v = x.values();
        for a in 0..p {
            let va = v[a];
            for b in a..p {
                kernel[(a, b)] += va * v[b];
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let s = kernel[(a, b)] / n;
            kernel[(a, b)] = s;
            kernel[(b, a)] = s;
        }
    }
    Ok(GridOperator { grid, kernel })
}

/// Empirical cross-covariance of a centered pair:
/// K(a, b) = (1/n) sum_i Y_i(t_a) X_i(t_b), so that
/// (Delta f)(t) = (1/n) sum_i <X_i, f> Y_i(t).
pub fn empirical_cross_covariance(
    xs: &FunctionalSample,
    ys: &FunctionalSample,
) -> Result<GridOperator> {
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
    if !xs.is_centered() || !ys.is_centered() {
        return Err(Error::NotCentered);
    }
    let grid = xs.grid();
    let p = grid.p();
    let n = xs.n() as f64;
    let mut kernel = DMatrix::zeros(p, p);
    for (x, y) in xs.functions().iter().zip(ys.functions()) {
        let xv = x.values();
        let yv = y.values();
        for a in 0..p {
            let ya = yv[a];
            for b in 0..p {
                kernel[(a, b)] += ya * xv[b];
            }
        }
    }
    kernel /= n;
    Ok(GridOperator { grid, kernel })
}

/// Eigenvalues and quadrature-orthonormal eigenfunctions of an empirical
/// covariance operator, sorted by decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    grid: Grid,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<GridFunction>,
    m_max: usize,
    rank_threshold: f64,
}

impl PcaBasis {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// All p eigenvalues, non-increasing, clamped at 0.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalue of rank `j` (0-based).
    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn eigenfunctions(&self) -> &[GridFunction] {
        &self.eigenfunctions
    }

    pub fn eigenfunction(&self, j: usize) -> &GridFunction {
        &self.eigenfunctions[j]
    }

    /// Numerical rank: number of eigenvalues above the relative cutoff.
    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn rank_threshold(&self) -> f64 {
        self.rank_threshold
    }

    /// Scores <f, phi_j> for j < m.
    pub fn scores(&self, f: &GridFunction, m: usize) -> Result<Vec<f64>> {
        (0..m)
            .map(|j| self.eigenfunctions[j].inner_product(f))
            .collect()
    }

    /// Truncated pseudo-inverse applied to `f`:
    /// sum_{j <= min(m1, m_max)} <phi_j, f> / lambda_j * phi_j.
    /// Requests beyond the numerical rank fall back to m_max.
    pub fn pseudo_inverse_apply(&self, m1: usize, f: &GridFunction) -> Result<GridFunction> {
        if self.m_max == 0 {
            return Err(Error::DegenerateSample);
        }
        if m1 == 0 {
            return Err(Error::InvalidDimension {
                value: 0,
                reason: "truncation dimension must be at least 1",
            });
        }
        let m = m1.min(self.m_max);
        let mut out = GridFunction::zero(self.grid);
        for j in 0..m {
            let c = self.eigenfunctions[j].inner_product(f)? / self.eigenvalues[j];
            out = out.add(&self.eigenfunctions[j].scaled(c))?;
        }
        Ok(out)
    }
}

fn count_above_threshold(eigenvalues: &[f64]) -> usize {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let cutoff = RANK_THRESHOLD * top.max(EPS_FLOOR);
    eigenvalues.iter().filter(|&&l| l > cutoff).count()
}

/// Functional PCA of an empirical covariance operator.
///
/// Solves the weighted eigenproblem through the symmetric matrix (1/p) K,
/// rescales eigenvectors by sqrt(p) to quadrature-unit norm, fixes signs so
/// the first nonzero coordinate is positive, and clamps round-off negative
/// eigenvalues to 0. The numerical rank m_max is capped at min(n, p) since a
/// covariance built from n observations has rank at most n.
pub fn pca(gamma_n: &GridOperator, n: usize) -> Result<PcaBasis> {
    let grid = gamma_n.grid();
    let p = grid.p();
    let scale = gamma_n.kernel.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let max_deviation = gamma_n.max_asymmetry();
    if max_deviation > 1e-10 * scale.max(1.0) {
        return Err(Error::AsymmetricKernel { max_deviation });
    }

    // Symmetrize to kill round-off before the eigensolve.
    let mut m = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            m[(a, b)] = 0.5 * (gamma_n.kernel[(a, b)] + gamma_n.kernel[(b, a)]) * grid.weight();
        }
    }

    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());

    let sqrt_p = (p as f64).sqrt();
    let mut eigenvalues = Vec::with_capacity(p);
    let mut eigenfunctions = Vec::with_capacity(p);
    for &idx in &order {
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
        let col = eig.eigenvectors.column(idx);
        let mut values: Vec<f64> = col.iter().map(|v| v * sqrt_p).collect();
        let tiny = 1e-12 * values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if let Some(first) = values.iter().find(|v| v.abs() > tiny) {
            if *first < 0.0 {
                for v in &mut values {
                    *v = -*v;
                }
            }
        }
        eigenfunctions.push(GridFunction::new(grid, values)?);
    }

    let m_max = count_above_threshold(&eigenvalues).min(n).min(p);
    Ok(PcaBasis {
        grid,
        eigenvalues,
        eigenfunctions,
        m_max,
        rank_threshold: RANK_THRESHOLD,
    })
}
