//! Implementations of the CLI subcommands: argument resolution, pipeline
//! wiring and file output. Every command writes a manifest.json echoing the
//! resolved semantic configuration (execution details like thread count or
//! output directory are deliberately omitted so reruns are byte-identical).

use std::fs::File;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use fofr::dataio::{
    apply_log, filter_outliers, lag_pairs, load_series_with_delimiter, loo_cv, read_curves_csv,
    split_days, write_curves_csv, CenteringMode, LogMode,
};
use fofr::model_io::ModelRecord;
use fofr::selection::{select_m1, SelectionConfig, SigmaMode};
use fofr::simulate::{
    emspe, kappa_sweep, sample_size_study, write_study_csv, write_study_detail_csv,
    write_sweep_csv, write_sweep_detail_csv, ModelSpec,
};
use fofr::{FunctionalSample, Grid};

use crate::{
    usage, CalibrateArgs, Cli, CmdError, CvArgs, DataArgs, FitArgs, LogArg, PredictArgs,
    SimulateArgs,
};

type CmdResult = Result<(), CmdError>;

fn log_name(mode: LogArg) -> &'static str {
    match mode {
        LogArg::None => "none",
        LogArg::Log => "log",
        LogArg::Log1p => "log1p",
    }
}

/// Parse a --sigma flag. `model` supplies the exact value for a bare "known".
fn parse_sigma(text: &str, model: Option<&ModelSpec>) -> Result<SigmaMode, CmdError> {
    if text == "plugin" {
        return Ok(SigmaMode::Plugin);
    }
    if text == "known" {
        return match model {
            Some(spec) => Ok(SigmaMode::Known(spec.noise_variance())),
            None => Err(usage(
                "--sigma known needs an explicit value here: use known:<value> or plugin",
            )),
        };
    }
    if let Some(value) = text.strip_prefix("known:") {
        let v: f64 = value
            .parse()
            .map_err(|_| usage(format!("invalid sigma value {value:?}")))?;
        if v < 0.0 || !v.is_finite() {
            return Err(usage("sigma must be a finite nonnegative number"));
        }
        return Ok(SigmaMode::Known(v));
    }
    Err(usage(format!(
        "invalid --sigma {text:?}; expected plugin, known or known:<value>"
    )))
}

fn sigma_value(mode: SigmaMode) -> Option<f64> {
    match mode {
        SigmaMode::Known(v) => Some(v),
        SigmaMode::Plugin => None,
    }
}

#[derive(Serialize)]
struct Manifest<T: Serialize> {
    command: &'static str,
    seed: u64,
    parameters: T,
    outputs: Vec<&'static str>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CmdError> {
    let text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn create_file(path: &Path) -> Result<File, CmdError> {
    File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(CmdError::from)
}

fn note(cli: &Cli, message: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", message.as_ref());
    }
}

pub(crate) fn simulate(cli: &Cli, args: &SimulateArgs) -> CmdResult {
    let spec = ModelSpec::by_label(args.model.label()).expect("valid model");
    let sigma = parse_sigma(&args.sigma, Some(&spec))?;
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if args.p == 0 {
        return Err(usage("--p must be at least 1"));
    }
    let grid = Grid::new(args.p);
    let config = SelectionConfig {
        kappa: args.kappa,
        sigma,
        max_dim_cap: args.cap,
    };

    #[derive(Serialize)]
    struct Params<'a> {
        model: &'a str,
        n: Option<usize>,
        n_list: Option<&'a [usize]>,
        replicates: usize,
        kappa: f64,
        sigma_mode: &'a str,
        sigma_value: Option<f64>,
        grid_p: usize,
        candidate_cap: Option<usize>,
    }

    match &args.n_list {
        Some(n_list) => {
            if n_list.iter().any(|&n| n < 2) {
                return Err(usage("every entry of --n-list must be at least 2"));
            }
            note(
                cli,
                format!(
                    "sample-size study: model {}, sizes {:?}, {} replicates",
                    spec.label, n_list, args.reps
                ),
            );
            let summaries = sample_size_study(&spec, n_list, args.reps, &config, &grid, cli.seed);
            write_study_csv(&summaries, create_file(&cli.out_dir.join("study.csv"))?)
                .map_err(anyhow::Error::from)?;
            write_study_detail_csv(&summaries, create_file(&cli.out_dir.join("emspe.csv"))?)
                .map_err(anyhow::Error::from)?;
            write_json(&cli.out_dir.join("summary.json"), &summaries)?;
            write_json(
                &cli.out_dir.join("manifest.json"),
                &Manifest {
                    command: "simulate",
                    seed: cli.seed,
                    parameters: Params {
                        model: &spec.label,
                        n: None,
                        n_list: Some(n_list),
                        replicates: args.reps,
                        kappa: args.kappa,
                        sigma_mode: &args.sigma,
                        sigma_value: sigma_value(sigma),
                        grid_p: args.p,
                        candidate_cap: args.cap,
                    },
                    outputs: vec!["study.csv", "emspe.csv", "summary.json"],
                },
            )?;
        }
        None => {
            if args.n < 2 {
                return Err(usage("--n must be at least 2"));
            }
            note(
                cli,
                format!(
                    "emspe study: model {}, n = {}, {} replicates, kappa = {}",
                    spec.label, args.n, args.reps, args.kappa
                ),
            );
            let report = emspe(&spec, args.n, args.reps, &config, &grid, cli.seed);
            report
                .write_replicates_csv(create_file(&cli.out_dir.join("emspe.csv"))?)
                .map_err(anyhow::Error::from)?;
            write_json(&cli.out_dir.join("summary.json"), &report)?;
            write_json(
                &cli.out_dir.join("manifest.json"),
                &Manifest {
                    command: "simulate",
                    seed: cli.seed,
                    parameters: Params {
                        model: &spec.label,
                        n: Some(args.n),
                        n_list: None,
                        replicates: args.reps,
                        kappa: args.kappa,
                        sigma_mode: &args.sigma,
                        sigma_value: sigma_value(sigma),
                        grid_p: args.p,
                        candidate_cap: args.cap,
                    },
                    outputs: vec!["emspe.csv", "summary.json"],
                },
            )?;
            note(
                cli,
                format!(
                    "mean EMSPE {:.6e}, mean selected dimension {:.3}",
                    report.mean_emspe, report.mean_selected_dim
                ),
            );
        }
    }
    Ok(())
}

pub(crate) fn calibrate(cli: &Cli, args: &CalibrateArgs) -> CmdResult {
    let spec = ModelSpec::by_label(args.model.label()).expect("valid model");
    let sigma = parse_sigma(&args.sigma, Some(&spec))?;
    if !args.kappa_min.is_finite() || args.kappa_min <= 0.0 {
        return Err(usage("--kappa-min must be positive"));
    }
    if args.kappa_min > args.kappa_max {
        return Err(usage("--kappa-min must not exceed --kappa-max"));
    }
    if !args.kappa_step.is_finite() || args.kappa_step <= 0.0 {
        return Err(usage("--kappa-step must be positive"));
    }
    if args.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }

    let mut kappas = Vec::new();
    let mut k = args.kappa_min;
    // Tolerate accumulated float error at the top of the range.
    while k <= args.kappa_max + 1e-9 {
        kappas.push(k);
        k += args.kappa_step;
    }

    let grid = Grid::new(args.p);
    let config = SelectionConfig {
        kappa: args.kappa_min,
        sigma,
        max_dim_cap: args.cap,
    };
    note(
        cli,
        format!(
            "kappa sweep: model {}, n = {}, {} replicates, {} grid points",
            spec.label,
            args.n,
            args.reps,
            kappas.len()
        ),
    );
    let reports = kappa_sweep(&spec, args.n, args.reps, &kappas, &config, &grid, cli.seed);
    write_sweep_csv(&reports, create_file(&cli.out_dir.join("sweep.csv"))?)
        .map_err(anyhow::Error::from)?;
    write_sweep_detail_csv(&reports, create_file(&cli.out_dir.join("detail.csv"))?)
        .map_err(anyhow::Error::from)?;

    #[derive(Serialize)]
    struct SweepRow {
        kappa: f64,
        mean_emspe: f64,
        mean_selected_dim: f64,
        failures: usize,
    }
    let rows: Vec<SweepRow> = reports
        .iter()
        .map(|r| SweepRow {
            kappa: r.kappa,
            mean_emspe: r.mean_emspe,
            mean_selected_dim: r.mean_selected_dim,
            failures: r.failures.len(),
        })
        .collect();
    write_json(&cli.out_dir.join("summary.json"), &rows)?;

    #[derive(Serialize)]
    struct Params<'a> {
        model: &'a str,
        n: usize,
        replicates: usize,
        kappa_grid: &'a [f64],
        sigma_mode: &'a str,
        sigma_value: Option<f64>,
        grid_p: usize,
        candidate_cap: Option<usize>,
    }
    write_json(
        &cli.out_dir.join("manifest.json"),
        &Manifest {
            command: "calibrate",
            seed: cli.seed,
            parameters: Params {
                model: &spec.label,
                n: args.n,
                replicates: args.reps,
                kappa_grid: &kappas,
                sigma_mode: &args.sigma,
                sigma_value: sigma_value(sigma),
                grid_p: args.p,
                candidate_cap: args.cap,
            },
            outputs: vec!["sweep.csv", "detail.csv", "summary.json"],
        },
    )?;
    Ok(())
}

/// Resolved input data plus its manifest description.
struct LoadedData {
    xs: FunctionalSample,
    ys: FunctionalSample,
    manifest: DataManifest,
}

#[derive(Serialize)]
struct DataManifest {
    mode: &'static str,
    files: Vec<String>,
    columns: Vec<String>,
    log: Vec<&'static str>,
    points_per_day: usize,
    delimiter: char,
    filter_outliers: bool,
    days_removed: Vec<usize>,
    pairs: usize,
}

fn drop_days(sample: &FunctionalSample, removed: &[usize]) -> Result<FunctionalSample, CmdError> {
    if removed.is_empty() {
        return Ok(sample.clone());
    }
    let kept: Vec<_> = sample
        .functions()
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, f)| f.clone())
        .collect();
    FunctionalSample::new(kept)
        .context("all days were removed by the outlier filter")
        .map_err(CmdError::from)
}

fn load_dataset(args: &DataArgs) -> Result<LoadedData, CmdError> {
    let lag_mode = args.data.is_some() || args.column.is_some();
    let paired_mode = args.x_data.is_some()
        || args.y_data.is_some()
        || args.x_column.is_some()
        || args.y_column.is_some();
    if lag_mode && paired_mode {
        return Err(usage(
            "use either --data/--column or --x-data/--x-column/--y-data/--y-column, not both",
        ));
    }
    if args.points_per_day == 0 {
        return Err(usage("--points-per-day must be at least 1"));
    }
    let delimiter = u8::try_from(args.delimiter)
        .map_err(|_| usage("--delimiter must be a single ASCII character"))?;

    if lag_mode {
        let path = args
            .data
            .as_ref()
            .ok_or_else(|| usage("--data is required with --column"))?;
        let column = args
            .column
            .as_ref()
            .ok_or_else(|| usage("--column is required with --data"))?;
        let series = load_series_with_delimiter(path, column, args.points_per_day, delimiter)?;
        let series = apply_log(&series, args.log.into())?;
        let days = split_days(&series)?;
        let (days, removed) = if args.filter_outliers {
            filter_outliers(&days)?
        } else {
            (days, Vec::new())
        };
        let (xs, ys) = lag_pairs(&days)?;
        let pairs = xs.n();
        Ok(LoadedData {
            xs,
            ys,
            manifest: DataManifest {
                mode: "lag",
                files: vec![path.display().to_string()],
                columns: vec![column.clone()],
                log: vec![log_name(args.log)],
                points_per_day: args.points_per_day,
                delimiter: args.delimiter,
                filter_outliers: args.filter_outliers,
                days_removed: removed,
                pairs,
            },
        })
    } else if paired_mode {
        let (x_path, x_column) = match (&args.x_data, &args.x_column) {
            (Some(p), Some(c)) => (p, c),
            _ => return Err(usage("paired mode needs both --x-data and --x-column")),
        };
        let (y_path, y_column) = match (&args.y_data, &args.y_column) {
            (Some(p), Some(c)) => (p, c),
            _ => return Err(usage("paired mode needs both --y-data and --y-column")),
        };
        let xs_days = split_days(&apply_log(
            &load_series_with_delimiter(x_path, x_column, args.points_per_day, delimiter)?,
            args.log_x.into(),
        )?)?;
        let ys_days = split_days(&apply_log(
            &load_series_with_delimiter(y_path, y_column, args.points_per_day, delimiter)?,
            args.log_y.into(),
        )?)?;
        if xs_days.n() != ys_days.n() {
            return Err(CmdError::Runtime(anyhow::anyhow!(
                "covariate has {} full days but response has {}",
                xs_days.n(),
                ys_days.n()
            )));
        }
        // The outlier fence is computed from the response days; matching
        // covariate days are removed alongside.
        let removed = if args.filter_outliers {
            filter_outliers(&ys_days)?.1
        } else {
            Vec::new()
        };
        let xs = drop_days(&xs_days, &removed)?;
        let ys = drop_days(&ys_days, &removed)?;
        let pairs = xs.n();
        Ok(LoadedData {
            xs,
            ys,
            manifest: DataManifest {
                mode: "paired",
                files: vec![x_path.display().to_string(), y_path.display().to_string()],
                columns: vec![x_column.clone(), y_column.clone()],
                log: vec![log_name(args.log_x), log_name(args.log_y)],
                points_per_day: args.points_per_day,
                delimiter: args.delimiter,
                filter_outliers: args.filter_outliers,
                days_removed: removed,
                pairs,
            },
        })
    } else {
        Err(usage(
            "input data required: --data/--column or --x-data/--x-column/--y-data/--y-column",
        ))
    }
}

pub(crate) fn fit(cli: &Cli, args: &FitArgs) -> CmdResult {
    let sigma = parse_sigma(&args.sigma, None)?;
    let data = load_dataset(&args.data)?;
    let config = SelectionConfig {
        kappa: args.kappa,
        sigma,
        max_dim_cap: args.cap,
    };
    note(
        cli,
        format!(
            "fitting on {} pairs (mode {})",
            data.manifest.pairs, data.manifest.mode
        ),
    );

    let xs = data.xs.center();
    let ys = data.ys.center();
    let (result, model) = select_m1(&xs, &ys, &config).map_err(anyhow::Error::from)?;

    let record = ModelRecord::from_model(&model, Some(args.kappa), "fit");
    record
        .save(&cli.out_dir.join("model.json"))
        .map_err(anyhow::Error::from)?;
    result
        .write_csv(create_file(&cli.out_dir.join("selection.csv"))?)
        .map_err(anyhow::Error::from)?;

    #[derive(Serialize)]
    struct Params<'a> {
        data: &'a DataManifest,
        kappa: f64,
        sigma_mode: &'a str,
        sigma_value: Option<f64>,
        candidate_cap: Option<usize>,
        m1_hat: usize,
        m2: usize,
    }
    write_json(
        &cli.out_dir.join("manifest.json"),
        &Manifest {
            command: "fit",
            seed: cli.seed,
            parameters: Params {
                data: &data.manifest,
                kappa: args.kappa,
                sigma_mode: &args.sigma,
                sigma_value: sigma_value(sigma),
                candidate_cap: args.cap,
                m1_hat: result.m1_hat,
                m2: model.m2(),
            },
            outputs: vec!["model.json", "selection.csv"],
        },
    )?;
    note(cli, format!("selected m1 = {}", result.m1_hat));
    Ok(())
}

pub(crate) fn predict(cli: &Cli, args: &PredictArgs) -> CmdResult {
    let record = ModelRecord::load(&args.model_file).map_err(anyhow::Error::from)?;
    let model = record.to_model().map_err(anyhow::Error::from)?;
    let curves =
        read_curves_csv(&args.covariates, Some(model.grid().p())).map_err(anyhow::Error::from)?;
    if curves.is_empty() {
        return Err(CmdError::Runtime(anyhow::anyhow!(
            "no covariate curves in {}",
            args.covariates.display()
        )));
    }
    let log_mode: LogMode = args.log.into();
    let predictions = curves
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let x = match log_mode {
                LogMode::None => x.clone(),
                _ => {
                    let values = x
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(k, &v)| match log_mode {
                            LogMode::Log => {
                                if v > 0.0 {
                                    Ok(v.ln())
                                } else {
                                    Err(anyhow::anyhow!("curve {i}: log of {v} at node {k}"))
                                }
                            }
                            LogMode::Log1p => {
                                if v > -1.0 {
                                    Ok((v + 1.0).ln())
                                } else {
                                    Err(anyhow::anyhow!("curve {i}: log1p of {v} at node {k}"))
                                }
                            }
                            LogMode::None => unreachable!(),
                        })
                        .collect::<Result<Vec<f64>, anyhow::Error>>()?;
                    fofr::GridFunction::new(model.grid(), values).map_err(anyhow::Error::from)?
                }
            };
            model.predict(&x, true).map_err(anyhow::Error::from)
        })
        .collect::<Result<Vec<_>, anyhow::Error>>()?;

    write_curves_csv(
        &predictions,
        create_file(&cli.out_dir.join("predictions.csv"))?,
    )
    .map_err(anyhow::Error::from)?;

    #[derive(Serialize)]
    struct Params<'a> {
        model_file: String,
        covariates: String,
        log: &'a str,
        curves: usize,
        grid_p: usize,
    }
    write_json(
        &cli.out_dir.join("manifest.json"),
        &Manifest {
            command: "predict",
            seed: cli.seed,
            parameters: Params {
                model_file: args.model_file.display().to_string(),
                covariates: args.covariates.display().to_string(),
                log: log_name(args.log),
                curves: predictions.len(),
                grid_p: model.grid().p(),
            },
            outputs: vec!["predictions.csv"],
        },
    )?;
    note(cli, format!("predicted {} curves", predictions.len()));
    Ok(())
}

pub(crate) fn cv(cli: &Cli, args: &CvArgs) -> CmdResult {
    let sigma = parse_sigma(&args.sigma, None)?;
    let data = load_dataset(&args.data)?;
    let config = SelectionConfig {
        kappa: args.kappa,
        sigma,
        max_dim_cap: args.cap,
    };
    let centering = if args.global_centering {
        CenteringMode::Global
    } else {
        CenteringMode::PerFold
    };
    note(
        cli,
        format!(
            "leave-one-out cross-validation over {} pairs",
            data.manifest.pairs
        ),
    );
    let report = loo_cv(&data.xs, &data.ys, &config, centering).map_err(anyhow::Error::from)?;
    report
        .write_csv(create_file(&cli.out_dir.join("cv_report.csv"))?)
        .map_err(anyhow::Error::from)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        quartile_convention: &'static str,
        centering: &'static str,
        folds: usize,
        failures: usize,
        dim_histogram: &'a [(usize, usize)],
        error_quartiles: &'a fofr::stats::Quartiles,
        best_index: usize,
        median_index: usize,
        worst_index: usize,
    }
    write_json(
        &cli.out_dir.join("cv_summary.json"),
        &Summary {
            quartile_convention: "linear interpolation of order statistics",
            centering: if args.global_centering {
                "global"
            } else {
                "per-fold"
            },
            folds: report.rows.len(),
            failures: report.failures.len(),
            dim_histogram: &report.dim_histogram,
            error_quartiles: &report.error_quartiles,
            best_index: report.best_index,
            median_index: report.median_index,
            worst_index: report.worst_index,
        },
    )?;

    #[derive(Serialize)]
    struct Params<'a> {
        data: &'a DataManifest,
        kappa: f64,
        sigma_mode: &'a str,
        sigma_value: Option<f64>,
        candidate_cap: Option<usize>,
        global_centering: bool,
    }
    write_json(
        &cli.out_dir.join("manifest.json"),
        &Manifest {
            command: "cv",
            seed: cli.seed,
            parameters: Params {
                data: &data.manifest,
                kappa: args.kappa,
                sigma_mode: &args.sigma,
                sigma_value: sigma_value(sigma),
                candidate_cap: args.cap,
                global_centering: args.global_centering,
            },
            outputs: vec!["cv_report.csv", "cv_summary.json"],
        },
    )?;
    note(
        cli,
        format!(
            "median L2 error {:.6e} over {} folds",
            report.error_quartiles.median,
            report.rows.len()
        ),
    );
    Ok(())
}
