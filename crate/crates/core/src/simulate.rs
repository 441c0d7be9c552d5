//! Simulation models and Monte Carlo prediction-error studies.
//!
//! Three canonical data-generating mechanisms are built in: a trigonometric
//! Karhunen-Loeve covariate with kernel s^2 + t^2 and Brownian noise at two
//! noise levels, and a cosine-basis model with polynomially decaying scores,
//! kernel coefficients and noise. Replicated studies estimate the mean
//! squared prediction error of the adaptively selected estimator, sweep the
//! penalty constant on common random numbers, and compare sample sizes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::cov::GridOperator;
use crate::error::{Error, Result};
use crate::grid::{FunctionalSample, Grid, GridFunction};
use crate::selection::{SelectionConfig, SelectionCurves};
use crate::stats::{quartiles, Quartiles};

/// A reproducible random stream: the same (base_seed, stream_id) pair always
/// yields the same sequence, and distinct stream ids are independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
    base_seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(base_seed);
        rng.set_stream(stream_id);
        RngStream {
            rng,
            base_seed,
            stream_id,
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }
}

/// Orthonormal trigonometric families used by the simulation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisFamily {
    /// sqrt(2) sin((j - 1/2) pi t), j = 1, 2, ...
    SineHalfInteger,
    /// sqrt(2) cos(j pi t), j = 1, 2, ...
    Cosine,
}

impl BasisFamily {
    /// Evaluate the j-th basis function (1-based) at t.
    pub fn eval(&self, j: usize, t: f64) -> f64 {
        let sqrt2 = std::f64::consts::SQRT_2;
        match self {
            BasisFamily::SineHalfInteger => sqrt2 * ((j as f64 - 0.5) * PI * t).sin(),
            BasisFamily::Cosine => sqrt2 * (j as f64 * PI * t).cos(),
        }
    }
}

/// Law of the standardized Karhunen-Loeve scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScoreLaw {
    Gaussian,
    /// Uniform on [-sqrt(3), sqrt(3)], which has unit variance.
    UniformSqrt3,
}

impl ScoreLaw {
    fn draw(&self, rng: &mut RngStream) -> f64 {
        match self {
            ScoreLaw::Gaussian => rng.standard_normal(),
            ScoreLaw::UniformSqrt3 => {
                let s = 3.0_f64.sqrt();
                rng.uniform(-s, s)
            }
        }
    }
}

/// Eigenvalue profile of the covariate covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EigenProfile {
    /// lambda_j = 1 / (pi^2 (j - 1/2)^2).
    InverseSquaredHalf,
    /// lambda_j = j^(-alpha).
    Polynomial { alpha: f64 },
}

impl EigenProfile {
    pub fn lambda(&self, j: usize) -> f64 {
        match self {
            EigenProfile::InverseSquaredHalf => {
                let x = PI * (j as f64 - 0.5);
                1.0 / (x * x)
            }
            EigenProfile::Polynomial { alpha } => (j as f64).powf(-alpha),
        }
    }
}

/// Noise mechanism added to the regression output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NoiseSpec {
    /// A standard Brownian motion divided by `divisor`.
    BrownianScaled {
        divisor: f64,
    },
    /// sum_{j <= truncation} j^(-decay/2) xi_j phi_j in the model basis,
    /// xi_j standard Gaussian.
    BasisSeries {
        decay: f64,
    },
    None,
}

/// True slope kernel of the model.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// S(s, t) = s^2 + t^2.
    SumOfSquares,
    /// S(s, t) = sum_{j,l} b[(j,l)] phi_l(s) phi_j(t) in the model basis;
    /// rows index the output direction j, columns the input direction l.
    BasisCoefficients(DMatrix<f64>),
}

/// A complete data-generating mechanism. The canonical constructors carry the
/// constants of the three reference models; custom specs can be assembled
/// from the public fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub label: String,
    /// Number of Karhunen-Loeve terms kept in the covariate (and in
    /// basis-series noise).
    pub truncation: usize,
    pub basis: BasisFamily,
    pub eigen: EigenProfile,
    pub scores: ScoreLaw,
    pub noise: NoiseSpec,
    pub kernel: KernelSpec,
}

impl ModelSpec {
    /// Kernel s^2 + t^2, 8-term half-integer sine covariate, Brownian/20 noise.
    pub fn model_i() -> Self {
        ModelSpec {
            label: "i".into(),
            truncation: 8,
            basis: BasisFamily::SineHalfInteger,
            eigen: EigenProfile::InverseSquaredHalf,
            scores: ScoreLaw::Gaussian,
            noise: NoiseSpec::BrownianScaled { divisor: 20.0 },
            kernel: KernelSpec::SumOfSquares,
        }
    }

    /// Same as model (i) with Brownian/2 noise.
    pub fn model_ii() -> Self {
        ModelSpec {
            label: "ii".into(),
            noise: NoiseSpec::BrownianScaled { divisor: 2.0 },
            ..Self::model_i()
        }
    }

    /// Cosine-basis model: 50 terms, lambda_j = j^(-1.2), uniform scores,
    /// kernel coefficients b_{j,l} = 4 (-1)^(j+l) j^(-2.5) l^(-3), noise
    /// series with decay 1.1.
    pub fn model_iii() -> Self {
        let k1 = 50;
        let gamma = 2.5;
        let beta = 3.0;
        let coeffs = DMatrix::from_fn(k1, k1, |j0, l0| {
            let j = (j0 + 1) as f64;
            let l = (l0 + 1) as f64;
            let sign = if (j0 + l0) % 2 == 0 { 1.0 } else { -1.0 };
            4.0 * sign * j.powf(-gamma) * l.powf(-beta)
        });
        ModelSpec {
            label: "iii".into(),
            truncation: k1,
            basis: BasisFamily::Cosine,
            eigen: EigenProfile::Polynomial { alpha: 1.2 },
            scores: ScoreLaw::UniformSqrt3,
            noise: NoiseSpec::BasisSeries { decay: 1.1 },
            kernel: KernelSpec::BasisCoefficients(coeffs),
        }
    }

    /// Look up a canonical model by its label.
    pub fn by_label(label: &str) -> Option<Self> {
        match label {
            "i" | "1" => Some(Self::model_i()),
            "ii" | "2" => Some(Self::model_ii()),
            "iii" | "3" => Some(Self::model_iii()),
            _ => None,
        }
    }

    /// The exact noise variance sigma_eps^2 = E ||eps||^2.
    pub fn noise_variance(&self) -> f64 {
        match self.noise {
            // E ||B||^2 = integral of t dt = 1/2, exact under the midpoint rule.
            NoiseSpec::BrownianScaled { divisor } => 0.5 / (divisor * divisor),
            NoiseSpec::BasisSeries { decay } => {
                (1..=self.truncation).map(|j| (j as f64).powf(-decay)).sum()
            }
            NoiseSpec::None => 0.0,
        }
    }

    /// The true slope kernel evaluated on the grid.
    pub fn true_kernel(&self, grid: Grid) -> GridOperator {
        match &self.kernel {
            KernelSpec::SumOfSquares => GridOperator::from_kernel_fn(grid, |s, t| s * s + t * t),
            KernelSpec::BasisCoefficients(b) => {
                let p = grid.p();
                let k = b.nrows();
                let phi = DMatrix::from_fn(p, k, |a, j| self.basis.eval(j + 1, grid.node(a)));
                // K(a, c) = S(t_c, t_a) = sum_{j,l} b[j,l] phi_l(t_c) phi_j(t_a).
                let kernel = &phi * b * phi.transpose();
                GridOperator::new(grid, kernel).expect("finite kernel")
            }
        }
    }
}

/// A scaled Brownian path at the grid nodes: cumulative Gaussian increments
/// whose variances match the node spacings (the first node carries variance
/// t_1 = 1/(2p)), divided by `scale`.
pub fn brownian(grid: &Grid, scale: f64, rng: &mut RngStream) -> GridFunction {
    assert!(scale > 0.0, "brownian scale must be positive");
    let p = grid.p();
    let first_sd = (0.5 / p as f64).sqrt();
    let step_sd = (1.0 / p as f64).sqrt();
    let mut b = 0.0;
    let values = (0..p)
        .map(|k| {
            let sd = if k == 0 { first_sd } else { step_sd };
            b += sd * rng.standard_normal();
            b / scale
        })
        .collect();
    GridFunction::new(*grid, values).expect("finite Brownian values")
}

fn draw_noise(spec: &ModelSpec, grid: &Grid, rng: &mut RngStream) -> GridFunction {
    match spec.noise {
        NoiseSpec::BrownianScaled { divisor } => brownian(grid, divisor, rng),
        NoiseSpec::BasisSeries { decay } => {
            let p = grid.p();
            let mut values = vec![0.0; p];
            for j in 1..=spec.truncation {
                let coeff = (j as f64).powf(-decay / 2.0) * rng.standard_normal();
                for (a, v) in values.iter_mut().enumerate() {
                    *v += coeff * spec.basis.eval(j, grid.node(a));
                }
            }
            GridFunction::new(*grid, values).expect("finite noise values")
        }
        NoiseSpec::None => GridFunction::zero(*grid),
    }
}

/// Draw one covariate from the truncated Karhunen-Loeve expansion.
pub fn draw_covariate(spec: &ModelSpec, grid: &Grid, rng: &mut RngStream) -> GridFunction {
    let p = grid.p();
    let mut values = vec![0.0; p];
    for j in 1..=spec.truncation {
        let coeff = spec.eigen.lambda(j).sqrt() * spec.scores.draw(rng);
        for (a, v) in values.iter_mut().enumerate() {
            *v += coeff * spec.basis.eval(j, grid.node(a));
        }
    }
    GridFunction::new(*grid, values).expect("finite covariate values")
}

/// One generated dataset: raw (uncentered) covariates and responses, the true
/// kernel on the grid, and the noise draws actually added.
pub struct GeneratedData {
    pub xs: FunctionalSample,
    pub ys: FunctionalSample,
    pub true_kernel: GridOperator,
    pub noise: Vec<GridFunction>,
}

/// Generate a sample of size n from the model: X by the truncated KL sum, Y
/// as the quadrature image of X under the true kernel plus a fresh noise draw.
pub fn generate(spec: &ModelSpec, n: usize, grid: &Grid, rng: &mut RngStream) -> GeneratedData {
    assert!(n >= 1, "sample size must be at least 1");
    let kernel = spec.true_kernel(*grid);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for _ in 0..n {
        let x = draw_covariate(spec, grid, rng);
        let eps = draw_noise(spec, grid, rng);
        let y = kernel
            .apply(&x)
            .expect("shared grid")
            .add(&eps)
            .expect("shared grid");
        xs.push(x);
        ys.push(y);
        noise.push(eps);
    }
    GeneratedData {
        xs: FunctionalSample::new(xs).expect("nonempty"),
        ys: FunctionalSample::new(ys).expect("nonempty"),
        true_kernel: kernel,
        noise,
    }
}

/// Quadrature application of a kernel operator (the true model action).
pub fn true_apply(kernel: &GridOperator, x: &GridFunction) -> Result<GridFunction> {
    kernel.apply(x)
}

/// One replicate of a prediction-error study.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub m1_hat: usize,
    pub pred_error: f64,
}

/// A replicate whose fit failed; excluded from the means.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub message: String,
}

/// Aggregated prediction-error study at one penalty constant.
#[derive(Debug, Clone, Serialize)]
pub struct EmspeReport {
    pub kappa: f64,
    pub n: usize,
    pub requested_replicates: usize,
    pub grid_p: usize,
    pub mean_emspe: f64,
    pub mean_selected_dim: f64,
    pub per_replicate: Vec<ReplicateOutcome>,
    pub failures: Vec<ReplicateFailure>,
}

impl EmspeReport {
    /// Per-replicate rows as CSV (columns replicate, m1_hat, pred_error).
    pub fn write_replicates_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["replicate", "m1_hat", "pred_error"])?;
        for r in &self.per_replicate {
            w.write_record(&[
                r.replicate.to_string(),
                r.m1_hat.to_string(),
                r.pred_error.to_string(),
            ])?;
        }
        flush_csv(w)
    }
}

fn flush_csv<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })
}

/// Per-replicate selection and prediction errors at every penalty constant in
/// `kappas`, sharing the generated data and fits across the grid.
fn run_replicate(
    spec: &ModelSpec,
    n: usize,
    grid: &Grid,
    base_seed: u64,
    replicate: usize,
    config: &SelectionConfig,
    kappas: &[f64],
) -> Result<Vec<(usize, f64)>> {
    let mut rng = RngStream::new(base_seed, replicate as u64);
    let data = generate(spec, n, grid, &mut rng);
    let x_new = draw_covariate(spec, grid, &mut rng);
    let xs = data.xs.center();
    let ys = data.ys.center();
    let curves = SelectionCurves::compute(&xs, &ys, config.max_dim_cap)?;
    let true_y = data.true_kernel.apply(&x_new)?;

    let mut cache: HashMap<usize, f64> = HashMap::new();
    let mut out = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let result = curves.select(&SelectionConfig { kappa, ..*config });
        let m1_hat = result.m1_hat;
        let err = match cache.get(&m1_hat) {
            Some(&e) => e,
            None => {
                let y_hat = curves.model_for(m1_hat).predict(&x_new, true)?;
                let e = y_hat.sub(&true_y)?.norm().powi(2);
                cache.insert(m1_hat, e);
                e
            }
        };
        out.push((m1_hat, err));
    }
    Ok(out)
}

/// Sweep the penalty constant over `kappas` with common random numbers: every
/// grid point sees the same replicates, so the curves are directly
/// comparable. Failed replicates are dropped from the means and reported.
pub fn kappa_sweep(
    spec: &ModelSpec,
    n: usize,
    n_replicates: usize,
    kappas: &[f64],
    config: &SelectionConfig,
    grid: &Grid,
    base_seed: u64,
) -> Vec<EmspeReport> {
    type ReplicateRows = Vec<(usize, f64)>;
    let results: Vec<(usize, Result<ReplicateRows>)> = (0..n_replicates)
        .into_par_iter()
        .map(|k| {
            (
                k,
                run_replicate(spec, n, grid, base_seed, k, config, kappas),
            )
        })
        .collect();

    kappas
        .iter()
        .enumerate()
        .map(|(ki, &kappa)| {
            let mut per_replicate = Vec::new();
            let mut failures = Vec::new();
            for (k, outcome) in &results {
                match outcome {
                    Ok(rows) => {
                        let (m1_hat, pred_error) = rows[ki];
                        per_replicate.push(ReplicateOutcome {
                            replicate: *k,
                            m1_hat,
                            pred_error,
                        });
                    }
                    Err(e) => failures.push(ReplicateFailure {
                        replicate: *k,
                        message: e.to_string(),
                    }),
                }
            }
            let successes = per_replicate.len().max(1) as f64;
            let mean_emspe = per_replicate.iter().map(|r| r.pred_error).sum::<f64>() / successes;
            let mean_selected_dim =
                per_replicate.iter().map(|r| r.m1_hat as f64).sum::<f64>() / successes;
            EmspeReport {
                kappa,
                n,
                requested_replicates: n_replicates,
                grid_p: grid.p(),
                mean_emspe,
                mean_selected_dim,
                per_replicate,
                failures,
            }
        })
        .collect()
}

/// Replicated prediction-error study at the configuration's single kappa.
pub fn emspe(
    spec: &ModelSpec,
    n: usize,
    n_replicates: usize,
    config: &SelectionConfig,
    grid: &Grid,
    base_seed: u64,
) -> EmspeReport {
    kappa_sweep(
        spec,
        n,
        n_replicates,
        &[config.kappa],
        config,
        grid,
        base_seed,
    )
    .pop()
    .expect("one report per kappa")
}

/// Distribution summary of the replicate errors at one sample size.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSizeSummary {
    pub n: usize,
    pub mean_emspe: f64,
    pub quartiles: Quartiles,
    pub outlier_count: usize,
    pub failure_count: usize,
    pub report: EmspeReport,
}

/// Replicated study across sample sizes; outliers are counted against the
/// Tukey upper fence of each size's error distribution.
pub fn sample_size_study(
    spec: &ModelSpec,
    n_list: &[usize],
    n_replicates: usize,
    config: &SelectionConfig,
    grid: &Grid,
    base_seed: u64,
) -> Vec<SampleSizeSummary> {
    n_list
        .iter()
        .map(|&n| {
            let report = emspe(spec, n, n_replicates, config, grid, base_seed);
            let errors: Vec<f64> = report.per_replicate.iter().map(|r| r.pred_error).collect();
            let quartiles = quartiles(&errors).unwrap_or(Quartiles {
                min: f64::NAN,
                q1: f64::NAN,
                median: f64::NAN,
                q3: f64::NAN,
                max: f64::NAN,
            });
            let fence = quartiles.upper_fence();
            let outlier_count = errors.iter().filter(|&&e| e > fence).count();
            SampleSizeSummary {
                n,
                mean_emspe: report.mean_emspe,
                quartiles,
                outlier_count,
                failure_count: report.failures.len(),
                report,
            }
        })
        .collect()
}

/// Sweep summary CSV: one row per kappa.
pub fn write_sweep_csv<W: Write>(reports: &[EmspeReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kappa", "mean_emspe", "mean_selected_dim", "failures"])?;
    for r in reports {
        w.write_record(&[
            r.kappa.to_string(),
            r.mean_emspe.to_string(),
            r.mean_selected_dim.to_string(),
            r.failures.len().to_string(),
        ])?;
    }
    flush_csv(w)
}

/// Sweep detail CSV: one row per (kappa, replicate).
pub fn write_sweep_detail_csv<W: Write>(reports: &[EmspeReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kappa", "replicate", "m1_hat", "pred_error"])?;
    for r in reports {
        for row in &r.per_replicate {
            w.write_record(&[
                r.kappa.to_string(),
                row.replicate.to_string(),
                row.m1_hat.to_string(),
                row.pred_error.to_string(),
            ])?;
        }
    }
    flush_csv(w)
}

/// Sample-size study CSV: one summary row per n.
pub fn write_study_csv<W: Write>(summaries: &[SampleSizeSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "n",
        "mean_emspe",
        "q1",
        "median",
        "q3",
        "iqr",
        "outliers",
        "failures",
    ])?;
    for s in summaries {
        w.write_record(&[
            s.n.to_string(),
            s.mean_emspe.to_string(),
            s.quartiles.q1.to_string(),
            s.quartiles.median.to_string(),
            s.quartiles.q3.to_string(),
            s.quartiles.iqr().to_string(),
            s.outlier_count.to_string(),
            s.failure_count.to_string(),
        ])?;
    }
    flush_csv(w)
}

/// Sample-size study detail CSV: one row per (n, replicate).
pub fn write_study_detail_csv<W: Write>(summaries: &[SampleSizeSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "replicate", "m1_hat", "pred_error"])?;
    for s in summaries {
        for row in &s.report.per_replicate {
            w.write_record(&[
                s.n.to_string(),
                row.replicate.to_string(),
                row.m1_hat.to_string(),
                row.pred_error.to_string(),
            ])?;
        }
    }
    flush_csv(w)
}
