//! Discretized function algebra on the uniform midpoint grid of [0, 1].
//!
//! Functions are sampled at the midpoints t_k = (k - 0.5)/p, k = 1..p, and the
//! L2 inner product is realized by the composite midpoint rule with equal
//! weights 1/p. Under uniform weights the inner product is a scaled dot
//! product, so functional PCA later reduces to a standard symmetric
//! eigenproblem.

use crate::error::{Error, Result};

/// Uniform midpoint grid on [0, 1] with `p` nodes at (k - 0.5)/p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    p: usize,
}

impl Grid {
    /// Create a grid with `p` nodes. Panics if `p == 0`.
    pub fn new(p: usize) -> Self {
        assert!(p > 0, "grid must have at least one node");
        Grid { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Node t_k for the 0-based index `k`, i.e. (k + 0.5)/p.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k < self.p);
        (k as f64 + 0.5) / self.p as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.p).map(|k| self.node(k)).collect()
    }

    /// Quadrature weight per node, 1/p.
    pub fn weight(&self) -> f64 {
        1.0 / self.p as f64
    }
}

/// A real function on [0, 1] sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wrap raw values; they must match the grid size and be finite.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.p() {
            return Err(Error::LengthMismatch {
                expected: grid.p(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "grid function values",
            });
        }
        Ok(GridFunction { grid, values })
    }

    /// Sample a closure at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.p()).map(|k| f(grid.node(k))).collect();
        GridFunction { grid, values }
    }

    pub fn zero(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.p()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.p()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.p(),
                found: other.grid.p(),
            });
        }
        Ok(())
    }

    /// Midpoint-rule L2 inner product, (1/p) sum f(t_k) g(t_k).
    pub fn inner_product(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(dot * self.grid.weight())
    }

    /// L2 norm, sqrt of the self inner product.
    pub fn norm(&self) -> f64 {
        let ssq: f64 = self.values.iter().map(|v| v * v).sum();
        (ssq * self.grid.weight()).sqrt()
    }

    /// Largest absolute value over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// An ordered collection of functions sharing one grid, with centering
/// metadata. `mean` always refers to the raw (pre-centering) data.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    grid: Grid,
    functions: Vec<GridFunction>,
    mean: GridFunction,
    centered: bool,
}

impl FunctionalSample {
    /// Build a sample from raw functions. Fails on an empty collection or
    /// mismatched grids.
    pub fn new(functions: Vec<GridFunction>) -> Result<Self> {
        let first = functions.first().ok_or(Error::EmptySample)?;
        let grid = first.grid();
        for f in &functions {
            if f.grid() != grid {
                return Err(Error::GridMismatch {
                    expected: grid.p(),
                    found: f.grid().p(),
                });
            }
        }
        let mean = pointwise_mean(grid, &functions);
        Ok(FunctionalSample {
            grid,
            functions,
            mean,
            centered: false,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> &[GridFunction] {
        &self.functions
    }

    pub fn function(&self, i: usize) -> &GridFunction {
        &self.functions[i]
    }

    /// Empirical mean of the raw data underlying this sample.
    pub fn mean(&self) -> &GridFunction {
        &self.mean
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Subtract the empirical mean from every function. The returned sample
    /// stores the raw mean and is flagged centered. Idempotent up to
    /// round-off.
    pub fn center(&self) -> FunctionalSample {
        let mean = pointwise_mean(self.grid, &self.functions);
        let functions = self
            .functions
            .iter()
            .map(|f| f.sub(&mean).expect("same grid"))
            .collect();
        // After re-centering an already-centered sample the original raw mean
        // is the meaningful one to keep.
        let raw_mean = if self.centered {
            self.mean.clone()
        } else {
            mean
        };
        FunctionalSample {
            grid: self.grid,
            functions,
            mean: raw_mean,
            centered: true,
        }
    }

    /// Mark a sample whose pointwise mean is already (numerically) zero as
    /// centered, without shifting the values. Fails if the mean deviates from
    /// zero by more than 1e-10 of the value scale.
    pub fn assume_centered(self) -> Result<Self> {
        let mean = pointwise_mean(self.grid, &self.functions);
        let scale = 1.0
            + self
                .functions
                .iter()
                .fold(0.0_f64, |m, f| m.max(f.sup_norm()));
        let deviation = mean.sup_norm();
        if deviation > 1e-10 * scale {
            return Err(Error::NotActuallyCentered { deviation });
        }
        Ok(FunctionalSample {
            centered: true,
            ..self
        })
    }

    /// Copy of the sample with observation `i` removed, keeping the mean
    /// metadata and centering flag unchanged. Used by cross-validation folds
    /// that deliberately retain the full-sample mean.
    pub(crate) fn without_index(&self, i: usize) -> FunctionalSample {
        let functions = self
            .functions
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, f)| f.clone())
            .collect();
        FunctionalSample {
            grid: self.grid,
            functions,
            mean: self.mean.clone(),
            centered: self.centered,
        }
    }
}

fn pointwise_mean(grid: Grid, functions: &[GridFunction]) -> GridFunction {
    let n = functions.len().max(1) as f64;
    let mut acc = vec![0.0; grid.p()];
    for f in functions {
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += v;
        }
    }
    for a in &mut acc {
        *a /= n;
    }
    GridFunction { grid, values: acc }
}
