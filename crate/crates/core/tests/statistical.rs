//! Monte Carlo checks of the simulation generators against closed-form
//! moments, and moderate-sample behavior of the estimators on the canonical
//! models. Tolerances are statistical, seeds fixed.

use std::f64::consts::PI;

use fofr::estimator::{fit_pca, OutputDim};
use fofr::simulate::{brownian, draw_covariate, generate, ModelSpec, RngStream};
use fofr::{empirical_covariance, pca, Grid, GridFunction};

const SEED: u64 = 2024;

#[test]
fn brownian_terminal_variance_matches_t() {
    let g = Grid::new(100);
    let mut rng = RngStream::new(SEED, 0);
    let n = 10_000;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let b = brownian(&g, 1.0, &mut rng);
        let last = b.values()[99];
        sum_sq += last * last;
    }
    let var = sum_sq / n as f64;
    let expected = 1.0 - 1.0 / 200.0; // t_p = 1 - 1/(2p)
    assert!(
        (var - expected).abs() < 0.05 * expected,
        "Var B(t_p) = {var}, expected {expected}"
    );
}

#[test]
fn brownian_noise_energy_matches_integral() {
    let g = Grid::new(100);
    let mut rng = RngStream::new(SEED, 1);
    let n = 10_000;
    let mean_sq: f64 = (0..n)
        .map(|_| brownian(&g, 20.0, &mut rng).norm().powi(2))
        .sum::<f64>()
        / n as f64;
    let expected = 1.0 / 800.0; // (1/400) * integral of t dt
    assert!(
        (mean_sq - expected).abs() < 0.1 * expected,
        "E||B/20||^2 = {mean_sq}, expected {expected}"
    );
}

#[test]
fn covariate_second_moment_model_i() {
    let spec = ModelSpec::model_i();
    let g = Grid::new(100);
    let mut rng = RngStream::new(SEED, 2);
    let n = 10_000;
    let mean_sq: f64 = (0..n)
        .map(|_| draw_covariate(&spec, &g, &mut rng).norm().powi(2))
        .sum::<f64>()
        / n as f64;
    let expected: f64 = (1..=8)
        .map(|j| 1.0 / (PI * PI * (j as f64 - 0.5).powi(2)))
        .sum();
    assert!(
        (mean_sq - expected).abs() < 0.05 * expected,
        "E||X||^2 = {mean_sq}, expected {expected}"
    );
}

#[test]
fn noise_energy_model_iii() {
    let spec = ModelSpec::model_iii();
    let g = Grid::new(100);
    let mut rng = RngStream::new(SEED, 3);
    let n = 10_000;
    let data = generate(&spec, n, &g, &mut rng);
    let mean_sq: f64 = data.noise.iter().map(|e| e.norm().powi(2)).sum::<f64>() / n as f64;
    let expected: f64 = (1..=50).map(|j| (j as f64).powf(-1.1)).sum();
    assert!(
        (mean_sq - expected).abs() < 0.05 * expected,
        "E||eps||^2 = {mean_sq}, expected {expected}"
    );
}

#[test]
fn kl_scores_are_standardized() {
    let g = Grid::new(100);
    for (stream, spec) in [(4, ModelSpec::model_i()), (5, ModelSpec::model_iii())] {
        let mut rng = RngStream::new(SEED, stream);
        let n = 10_000;
        let mut sum_sq = [0.0; 5];
        for _ in 0..n {
            let x = draw_covariate(&spec, &g, &mut rng);
            for (j, s) in sum_sq.iter_mut().enumerate() {
                let phi = GridFunction::from_fn(g, |t| spec.basis.eval(j + 1, t));
                let score = x.inner_product(&phi).unwrap() / spec.eigen.lambda(j + 1).sqrt();
                *s += score * score;
            }
        }
        for (j, s) in sum_sq.iter().enumerate() {
            let var = s / n as f64;
            assert!(
                (var - 1.0).abs() < 0.05,
                "model {}: score {} variance {var}",
                spec.label,
                j + 1
            );
        }
    }
}

#[test]
fn covariate_and_noise_scores_are_uncorrelated() {
    let g = Grid::new(100);
    let spec = ModelSpec::model_i();
    let n = 10_000;
    let mut rng = RngStream::new(SEED, 6);
    let data = generate(&spec, n, &g, &mut rng);
    let bound = 3.0 / (n as f64).sqrt();
    let phis: Vec<GridFunction> = (1..=5)
        .map(|j| GridFunction::from_fn(g, |t| spec.basis.eval(j, t)))
        .collect();
    // Precompute scores once per observation.
    let x_scores: Vec<Vec<f64>> = data
        .xs
        .functions()
        .iter()
        .map(|x| phis.iter().map(|p| x.inner_product(p).unwrap()).collect())
        .collect();
    let e_scores: Vec<Vec<f64>> = data
        .noise
        .iter()
        .map(|e| phis.iter().map(|p| e.inner_product(p).unwrap()).collect())
        .collect();
    for j in 0..5 {
        for k in 0..5 {
            let mut cov = 0.0;
            let mut var_x = 0.0;
            let mut var_e = 0.0;
            for i in 0..n {
                cov += x_scores[i][j] * e_scores[i][k];
                var_x += x_scores[i][j] * x_scores[i][j];
                var_e += e_scores[i][k] * e_scores[i][k];
            }
            let corr = cov / (var_x.sqrt() * var_e.sqrt());
            assert!(
                corr.abs() < bound,
                "scores {j},{k}: correlation {corr} above {bound}"
            );
        }
    }
}

#[test]
fn eigenvalue_recovery_model_i() {
    let spec = ModelSpec::model_i();
    let g = Grid::new(100);
    let mut rng = RngStream::new(SEED, 7);
    let data = generate(&spec, 600, &g, &mut rng);
    let xs = data.xs.center();
    let basis = pca(&empirical_covariance(&xs).unwrap(), 600).unwrap();
    assert_eq!(basis.m_max(), 8);
    for j in 1..=4 {
        let expected = 1.0 / (PI * PI * (j as f64 - 0.5).powi(2));
        let got = basis.eigenvalue(j - 1);
        assert!(
            (got - expected).abs() < 0.1 * expected,
            "lambda_{j} = {got}, expected {expected}"
        );
    }
}

#[test]
fn noiseless_prediction_tracks_the_true_operator() {
    // Model-(i)-style covariate with the kernel spanned by the first KL
    // directions and no noise: the fitted predictor must reproduce the true
    // image of a fresh covariate to within discretization accuracy.
    use fofr::simulate::{KernelSpec, NoiseSpec};
    use nalgebra::DMatrix;

    let mut coeffs = DMatrix::zeros(8, 8);
    coeffs[(0, 0)] = 1.0;
    coeffs[(1, 0)] = -0.4;
    coeffs[(0, 1)] = 0.25;
    coeffs[(2, 2)] = 0.1;
    let spec = ModelSpec {
        label: "noiseless-custom".into(),
        noise: NoiseSpec::None,
        kernel: KernelSpec::BasisCoefficients(coeffs),
        ..ModelSpec::model_i()
    };
    let g = Grid::new(100);
    let mut rng = RngStream::new(SEED, 8);
    let data = generate(&spec, 600, &g, &mut rng);
    let xs = data.xs.center();
    let ys = data.ys.center();
    let model = fit_pca(&xs, &ys, 8, OutputDim::Full).unwrap();
    for _ in 0..10 {
        let x_new = draw_covariate(&spec, &g, &mut rng);
        let truth = data.true_kernel.apply(&x_new).unwrap();
        let y_hat = model.predict(&x_new, true).unwrap();
        let err = y_hat.sub(&truth).unwrap().sup_norm();
        assert!(err < 1e-3, "sup prediction error {err}");
    }
}

#[test]
fn model_ii_is_noisier_than_model_i() {
    use fofr::selection::{SelectionConfig, SigmaMode};
    use fofr::simulate::emspe;

    let g = Grid::new(100);
    let reports: Vec<f64> = [ModelSpec::model_i(), ModelSpec::model_ii()]
        .iter()
        .map(|spec| {
            let config = SelectionConfig {
                kappa: 0.6,
                sigma: SigmaMode::Known(spec.noise_variance()),
                max_dim_cap: None,
            };
            emspe(spec, 600, 40, &config, &g, SEED).mean_emspe
        })
        .collect();
    assert!(
        reports[0] < reports[1],
        "model (i) EMSPE {} should be below model (ii) {}",
        reports[0],
        reports[1]
    );
}
