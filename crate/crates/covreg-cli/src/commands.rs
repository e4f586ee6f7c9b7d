//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::DMatrix;
use serde::Serialize;

use covreg::inference::{sandwich_covariance, standardize, whitened_fourth_moment};
use covreg::matrix::SimilarityBasis;
use covreg::portfolio::{cap_weights, gmv_weights, pd_repair, rolling_backtest, PerformanceReport};
use covreg::simulate::{DgpConfig, HarnessOptions, Method, WModel, ZDist};
use covreg::solver::{FitResult, GramSystem};
use covreg::tuning::{default_grid, fit_at_lambda, select_lambda, TuneOptions};

use crate::basis::build_basis;
use crate::config::{BasisConfig, FileConfig, PenaltyConfig, TuningConfig};
use crate::data;
use crate::estimators::{Estimator, MethodName, ScrSettings};
use crate::report::{
    config_header, fmt_display, fmt_display_opt, fmt_f64, fmt_opt, to_json_pinned,
};
use crate::{BasisArgs, CliError, GridArgs, SharedArgs};

fn write_artifact(path: Option<&Path>, content: &[u8]) -> Result<(), CliError> {
    match path {
        Some(path) => {
            std::fs::write(path, content)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        }
        None => {
            std::io::stdout().write_all(content)?;
        }
    }
    Ok(())
}

fn resolve_basis(
    file: &FileConfig,
    args: &BasisArgs,
) -> Result<BasisConfig, CliError> {
    BasisConfig::resolve(
        &file.basis,
        args.covariates.clone(),
        args.constructions.as_deref(),
        args.bandwidth,
        args.kernel_density,
        args.labels.clone(),
        args.edges.clone(),
        &args.matrices,
        args.no_rescale,
    )
}

fn build_grid(
    system: &GramSystem<f64>,
    tuning: &TuningConfig,
) -> Vec<f64> {
    match &tuning.lambda_grid {
        Some(grid) => grid.clone(),
        None => default_grid(system, tuning.n_lambda, tuning.lambda_min_ratio, false),
    }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Returns CSV: rows = observations, columns = named assets
    #[arg(long, value_name = "FILE")]
    pub panel: PathBuf,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Standardize columns (center, unit variance) before fitting
    #[arg(long, default_value_t = false)]
    pub standardize: bool,
    /// Report the penalized path fit instead of the support-refit estimate
    #[arg(long = "no-refit", default_value_t = false)]
    pub no_refit: bool,
    /// Initialization level for the Lasso start (defaults to --lambda)
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Penalize the intercept coordinate as well
    #[arg(long = "penalize-intercept", default_value_t = false)]
    pub penalize_intercept: bool,
    /// Plug-in standard errors for the selected coefficients
    #[arg(long = "se", default_value_t = false)]
    pub standard_errors: bool,
    /// Fourth moment for the standard errors: a number or `estimate`
    #[arg(long)]
    pub mu4: Option<String>,
}

#[derive(Serialize)]
struct FitArtifact {
    config: Vec<(String, String)>,
    beta: Vec<f64>,
    support: Vec<usize>,
    iterations: usize,
    converged: bool,
    objective: f64,
    kkt_residual: f64,
    selected_lambda: f64,
    standard_errors: Option<Vec<f64>>,
}

fn fit_artifact(
    config: Vec<(String, String)>,
    fit: &FitResult<f64>,
    lambda: f64,
    standard_errors: Option<Vec<f64>>,
) -> FitArtifact {
    FitArtifact {
        config,
        beta: fit.coefficients.beta().iter().copied().collect(),
        support: fit.coefficients.support().to_vec(),
        iterations: fit.iterations,
        converged: fit.converged,
        objective: fit.objective,
        kkt_residual: fit.kkt_residual,
        selected_lambda: lambda,
        standard_errors,
    }
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.shared.config.as_deref())?;
    crate::install_thread_pool(args.shared.threads.or(file.threads))?;
    let penalty = PenaltyConfig::resolve(
        &file.penalty,
        args.shared.penalty.as_deref(),
        args.shared.gamma,
        args.shared.lambda,
    )?;
    let lambda = penalty.lambda.ok_or_else(|| {
        CliError::data("fit requires a penalty level: pass --lambda or use `covreg tune`")
    })?;
    let basis_config = resolve_basis(&file, &args.basis)?;

    let panel = data::load_panel(&args.panel)?;
    let basis = build_basis(&basis_config, panel.data.ncols())?;
    let observations = if args.standardize {
        standardize(&panel.data).map_err(CliError::from)?.data
    } else {
        panel.data.clone()
    };
    let system = GramSystem::assemble(&basis, &observations).map_err(CliError::from)?;
    let mut tune_options = TuneOptions {
        gamma: penalty.gamma,
        refit: !args.no_refit,
        lambda0: args.lambda0,
        ..TuneOptions::default()
    };
    tune_options.lla.penalize_intercept = args.penalize_intercept;
    let (fit, _path) = fit_at_lambda(&system, penalty.family, lambda, &tune_options)
        .map_err(CliError::from)?;
    let fit = &fit;

    let standard_errors = if args.standard_errors {
        Some(plugin_standard_errors(
            &basis,
            &observations,
            fit,
            args.mu4.as_deref(),
        )?)
    } else {
        None
    };

    let mut header = vec![
        ("command".to_string(), "fit".to_string()),
        ("panel".to_string(), args.panel.display().to_string()),
        ("standardize".to_string(), args.standardize.to_string()),
        ("refit".to_string(), (!args.no_refit).to_string()),
        ("n".to_string(), observations.nrows().to_string()),
        ("p".to_string(), observations.ncols().to_string()),
        ("k".to_string(), basis.k().to_string()),
    ];
    header.extend(penalty.header_entries());
    header.extend(basis_config.header_entries());

    let artifact = fit_artifact(header, fit, lambda, standard_errors);
    write_artifact(args.shared.out.as_deref(), &to_json_pinned(&artifact)?)?;
    Ok(())
}

/// Standard errors from the sandwich covariance with the fitted covariance
/// plugged in for the unknown truth (heuristic: the theory is stated at the
/// true covariance).
fn plugin_standard_errors(
    basis: &SimilarityBasis<f64>,
    observations: &DMatrix<f64>,
    fit: &FitResult<f64>,
    mu4: Option<&str>,
) -> Result<Vec<f64>, CliError> {
    let support = fit.coefficients.support();
    if support.is_empty() {
        return Err(CliError::numeric(
            "standard errors undefined for an empty support",
        ));
    }
    let sigma_hat = basis
        .densify(fit.coefficients.beta().as_slice())
        .map_err(CliError::from)?;
    let mu4_value = match mu4 {
        None => 3.0,
        Some("estimate") => {
            whitened_fourth_moment(observations, &sigma_hat).map_err(CliError::from)?
        }
        Some(text) => text
            .parse::<f64>()
            .map_err(|e| CliError::data(format!("--mu4: `{text}`: {e}")))?,
    };
    let restricted = basis.restricted(support).map_err(CliError::from)?;
    let asym =
        sandwich_covariance(&restricted, &sigma_hat, mu4_value).map_err(CliError::from)?;
    // the estimator averages n independent replicates
    let n = observations.nrows() as f64;
    Ok(asym
        .standard_errors()
        .iter()
        .map(|se| se / n.sqrt())
        .collect())
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Returns CSV: rows = observations, columns = named assets
    #[arg(long, value_name = "FILE")]
    pub panel: PathBuf,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Standardize columns before fitting
    #[arg(long, default_value_t = false)]
    pub standardize: bool,
    /// Score the penalized path fits instead of support-refit estimates
    #[arg(long = "no-refit", default_value_t = false)]
    pub no_refit: bool,
    /// Penalize the intercept coordinate as well
    #[arg(long = "penalize-intercept", default_value_t = false)]
    pub penalize_intercept: bool,
    /// Also write the selected fit as JSON
    #[arg(long = "fit-out", value_name = "FILE")]
    pub fit_out: Option<PathBuf>,
}

pub fn tune(args: TuneArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.shared.config.as_deref())?;
    crate::install_thread_pool(args.shared.threads.or(file.threads))?;
    let penalty = PenaltyConfig::resolve(
        &file.penalty,
        args.shared.penalty.as_deref(),
        args.shared.gamma,
        args.shared.lambda,
    )?;
    let tuning = TuningConfig::resolve(
        &file.tuning,
        args.grid.n_lambda,
        args.grid.lambda_min_ratio,
        args.grid.lambda_grid.as_deref(),
    )?;
    let basis_config = resolve_basis(&file, &args.basis)?;

    let panel = data::load_panel(&args.panel)?;
    let basis = build_basis(&basis_config, panel.data.ncols())?;
    let observations = if args.standardize {
        standardize(&panel.data).map_err(CliError::from)?.data
    } else {
        panel.data.clone()
    };
    let system = GramSystem::assemble(&basis, &observations).map_err(CliError::from)?;
    let grid = build_grid(&system, &tuning);
    let mut tune_options = TuneOptions {
        gamma: penalty.gamma,
        refit: !args.no_refit,
        ..TuneOptions::default()
    };
    tune_options.lla.penalize_intercept = args.penalize_intercept;
    let tuned = select_lambda(&system, penalty.family, &grid, &tune_options)
        .map_err(CliError::from)?;

    let mut header = vec![
        ("command".to_string(), "tune".to_string()),
        ("panel".to_string(), args.panel.display().to_string()),
        ("standardize".to_string(), args.standardize.to_string()),
        ("refit".to_string(), (!args.no_refit).to_string()),
        ("n".to_string(), observations.nrows().to_string()),
        ("p".to_string(), observations.ncols().to_string()),
        ("k".to_string(), basis.k().to_string()),
    ];
    header.extend(penalty.header_entries());
    header.extend(tuning.header_entries());
    header.extend(basis_config.header_entries());
    header.push((
        "best_lambda".to_string(),
        fmt_f64(tuned.best_lambda()),
    ));
    header.push((
        "best_df".to_string(),
        tuned.points[tuned.best_index]
            .df
            .map_or("NA".into(), |d| d.to_string()),
    ));

    let mut out = config_header(&header);
    out.push_str("lambda,df,rss,bic\n");
    for point in &tuned.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(point.lambda),
            point.df.map_or("NA".to_string(), |d| d.to_string()),
            fmt_opt(point.rss),
            fmt_opt(point.bic),
        ));
    }
    write_artifact(args.shared.out.as_deref(), out.as_bytes())?;

    if let Some(path) = &args.fit_out {
        let artifact = fit_artifact(header, &tuned.best_fit, tuned.best_lambda(), None);
        write_artifact(Some(path), &to_json_pinned(&artifact)?)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Dimension of the response vector
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of candidate similarity matrices
    #[arg(long)]
    pub k: Option<usize>,
    /// Noise distribution: standard_normal, mixture_normal, or
    /// standardized_exponential
    #[arg(long)]
    pub dist: Option<String>,
    /// Similarity model: bernoulli or correlated
    #[arg(long = "w-model")]
    pub w_model: Option<String>,
    /// Replicates per draw
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo replications
    #[arg(long)]
    pub replications: Option<usize>,
    /// Methods to compare (comma list of SCAD, MCP, OLS, ORACLE)
    #[arg(long, value_name = "LIST")]
    pub methods: Option<String>,
    /// Draw the similarity matrices once and share them across replications
    #[arg(long = "freeze-basis", default_value_t = false)]
    pub freeze_basis: bool,
    #[command(flatten)]
    pub grid: GridArgs,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.shared.config.as_deref())?;
    crate::install_thread_pool(args.shared.threads.or(file.threads))?;
    let sim = &file.simulate;

    let p = args.p.or(sim.p).ok_or_else(|| CliError::data("simulate requires --p"))?;
    let k = args.k.or(sim.k).ok_or_else(|| CliError::data("simulate requires --k"))?;
    let dist: ZDist = args
        .dist
        .or_else(|| sim.dist.clone())
        .unwrap_or_else(|| "standard_normal".into())
        .parse()
        .map_err(CliError::from)?;
    let w_model = match args
        .w_model
        .or_else(|| sim.w_model.clone())
        .unwrap_or_else(|| "bernoulli".into())
        .to_ascii_lowercase()
        .as_str()
    {
        "bernoulli" => WModel::Bernoulli { prob: None },
        "correlated" | "correlated_ar" => WModel::CorrelatedAr { rho: 0.5 },
        other => {
            return Err(CliError::data(format!(
                "unknown w model `{other}` (expected bernoulli, correlated)"
            )))
        }
    };
    let n = args.n.or(sim.n).unwrap_or(1);
    let replications = args
        .replications
        .or(sim.replications)
        .ok_or_else(|| CliError::data("simulate requires --replications"))?;
    let seed = args.shared.seed.or(file.seed).unwrap_or(0);

    let methods: Vec<Method> = match (&args.methods, &args.shared.penalty) {
        (Some(list), _) => list
            .split(',')
            .map(|tok| tok.trim().parse().map_err(CliError::from))
            .collect::<Result<_, _>>()?,
        (None, Some(family)) => {
            let penalized: Method = match family.to_ascii_lowercase().as_str() {
                "scad" => Method::Scad,
                "mcp" => Method::Mcp,
                other => {
                    return Err(CliError::data(format!(
                        "simulate supports scad or mcp penalties, got `{other}`"
                    )))
                }
            };
            vec![penalized, Method::Ols, Method::Oracle]
        }
        (None, None) => match sim.methods.clone() {
            Some(list) => list
                .iter()
                .map(|tok| tok.parse().map_err(CliError::from))
                .collect::<Result<_, _>>()?,
            None => Method::ALL.to_vec(),
        },
    };

    let mut config = DgpConfig::<f64>::standard(p, k, dist, seed);
    config.w_model = w_model;
    config.n = n;
    config.freeze_basis = args.freeze_basis
        || sim.freeze_basis.unwrap_or(false);

    let mut options = HarnessOptions::default();
    if let Some(n_lambda) = args.grid.n_lambda {
        options.n_lambda = n_lambda;
    }
    if let Some(ratio) = args.grid.lambda_min_ratio {
        options.lambda_min_ratio = ratio;
    }
    if let Some(gamma) = args.shared.gamma {
        options.gamma = Some(gamma);
    }

    let report = covreg::simulate::run_replications(&config, &methods, replications, &options)
        .map_err(CliError::from)?;

    let header = vec![
        ("command".to_string(), "simulate".to_string()),
        ("p".to_string(), p.to_string()),
        ("k".to_string(), k.to_string()),
        ("dist".to_string(), dist.name().to_string()),
        (
            "w_model".to_string(),
            match w_model {
                WModel::Bernoulli { .. } => "bernoulli".to_string(),
                WModel::CorrelatedAr { .. } => "correlated".to_string(),
            },
        ),
        ("n".to_string(), n.to_string()),
        ("replications".to_string(), replications.to_string()),
        ("seed".to_string(), seed.to_string()),
        (
            "freeze_basis".to_string(),
            config.freeze_basis.to_string(),
        ),
        ("n_lambda".to_string(), options.n_lambda.to_string()),
        (
            "lambda_min_ratio".to_string(),
            format!("{}", options.lambda_min_ratio),
        ),
        (
            "methods".to_string(),
            methods
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(","),
        ),
    ];

    let mut out = config_header(&header);
    out.push_str("method,tpr,fpr,cs,rmse,bias,sd,spectral_err,frobenius_err,failures\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.method.name(),
            fmt_opt(row.tpr),
            fmt_opt(row.fpr),
            fmt_opt(row.cs),
            fmt_f64(row.rmse),
            fmt_f64(row.bias),
            fmt_f64(row.sd),
            fmt_f64(row.spectral_err),
            fmt_f64(row.frobenius_err),
            row.failures
        ));
    }
    write_artifact(args.shared.out.as_deref(), out.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// backtest
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Returns CSV: rows = periods, columns = named assets
    #[arg(long, value_name = "FILE")]
    pub panel: PathBuf,
    /// Covariance methods, comma list (sample, identity, lw, scr, factor,
    /// factor+scr, cbf, cbf+scr, lw+scr)
    #[arg(long, value_name = "LIST")]
    pub method: Option<String>,
    /// Trailing training window length in periods
    #[arg(long)]
    pub window: Option<usize>,
    /// Factor CSV aligned row-by-row with the returns panel
    #[arg(long, value_name = "FILE")]
    pub factors: Option<PathBuf>,
    /// Market capitalization CSV (asset,cap) for the benchmark weights
    #[arg(long, value_name = "FILE")]
    pub marketcap: Option<PathBuf>,
    /// Risk-free rate per period
    #[arg(long = "risk-free")]
    pub risk_free: Option<f64>,
    /// Skip standardization inside the SCR estimators
    #[arg(long = "no-standardize", default_value_t = false)]
    pub no_standardize: bool,
    /// Eigenvalue floor for the positive-definite repair
    #[arg(long = "pd-eps")]
    pub pd_eps: Option<f64>,
    /// Also write the per-period realized returns
    #[arg(long = "returns-out", value_name = "FILE")]
    pub returns_out: Option<PathBuf>,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

struct MethodOutcome {
    name: String,
    report: PerformanceReport<f64>,
}

pub fn backtest(args: BacktestArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.shared.config.as_deref())?;
    crate::install_thread_pool(args.shared.threads.or(file.threads))?;
    let penalty = PenaltyConfig::resolve(
        &file.penalty,
        args.shared.penalty.as_deref(),
        args.shared.gamma,
        args.shared.lambda,
    )?;
    let tuning = TuningConfig::resolve(
        &file.tuning,
        args.grid.n_lambda,
        args.grid.lambda_min_ratio,
        args.grid.lambda_grid.as_deref(),
    )?;
    let basis_config = resolve_basis(&file, &args.basis)?;
    let bt = &file.backtest;

    let window = args
        .window
        .or(bt.window)
        .ok_or_else(|| CliError::data("backtest requires --window"))?;
    let risk_free = args.risk_free.or(file.risk_free).unwrap_or(0.0);
    let pd_eps = args.pd_eps.or(bt.pd_eps).unwrap_or(covreg::portfolio::DEFAULT_PD_EPS);
    let standardize_scr = !args.no_standardize && bt.standardize.unwrap_or(true);

    let panel = data::load_panel(&args.panel)?;
    let p = panel.data.ncols();
    let t = panel.data.nrows();

    let method_list = args
        .method
        .clone()
        .or_else(|| bt.method.clone())
        .unwrap_or_else(|| "scr".to_string());
    let methods: Vec<MethodName> = method_list
        .split(',')
        .map(|tok| tok.trim().parse().map_err(CliError::from))
        .collect::<Result<_, _>>()?;

    let factors_path = args.factors.clone().or_else(|| bt.factors.clone());
    let factors = match &factors_path {
        Some(path) => {
            let f = data::load_panel(path)?;
            if f.data.nrows() != t {
                return Err(CliError::data(format!(
                    "{}: {} factor rows for {} panel periods",
                    path.display(),
                    f.data.nrows(),
                    t
                )));
            }
            Some(f.data)
        }
        None => None,
    };

    let needs_basis = methods.iter().any(MethodName::needs_basis);
    let scr = if needs_basis {
        Some(ScrSettings {
            basis: build_basis(&basis_config, p)?,
            family: penalty.family,
            gamma: penalty.gamma,
            lambda: penalty.lambda,
            n_lambda: tuning.n_lambda,
            lambda_min_ratio: tuning.lambda_min_ratio,
            standardize: standardize_scr,
        })
    } else {
        None
    };

    let needs_loadings = methods.iter().any(MethodName::needs_loadings);
    let loadings = if needs_loadings {
        let path = basis_config.covariates.clone().ok_or_else(|| {
            CliError::data("cbf methods need --covariates as the loading matrix")
        })?;
        let loadings = data::load_panel(&path)?;
        if loadings.data.nrows() != p {
            return Err(CliError::data(format!(
                "{}: {} loading rows for {} assets",
                path.display(),
                loadings.data.nrows(),
                p
            )));
        }
        Some(loadings.data)
    } else {
        None
    };

    let benchmark = match args.marketcap.clone().or_else(|| bt.marketcap.clone()) {
        Some(path) => {
            let caps = data::load_marketcaps(&path, p)?;
            Some(cap_weights(&caps).map_err(CliError::from)?)
        }
        None => None,
    };

    let mut outcomes = Vec::new();
    for &name in &methods {
        if name.needs_factors() && factors.is_none() {
            return Err(CliError::data(format!(
                "method `{}` needs --factors",
                name.label()
            )));
        }
        let estimator = Estimator {
            name,
            scr: scr.clone(),
            factors: factors.clone(),
            loadings: loadings.clone(),
        };
        let report = rolling_backtest(
            &panel.data,
            &estimator,
            window,
            benchmark.as_ref(),
            risk_free,
            pd_eps,
        )
        .map_err(CliError::from)?;
        outcomes.push(MethodOutcome {
            name: name.label().to_string(),
            report,
        });
    }

    // benchmark as its own row: market returns measured against themselves
    let bench_returns: Vec<f64> = (window..t)
        .map(|eval| {
            (0..p)
                .map(|j| {
                    let w = benchmark.as_ref().map_or(1.0 / p as f64, |b| b[j]);
                    w * panel.data[(eval, j)]
                })
                .sum()
        })
        .collect();
    let market =
        covreg::portfolio::performance(&bench_returns, &bench_returns, risk_free)
            .map_err(CliError::from)?;
    outcomes.push(MethodOutcome {
        name: "market".to_string(),
        report: market,
    });

    let mut header = vec![
        ("command".to_string(), "backtest".to_string()),
        ("panel".to_string(), args.panel.display().to_string()),
        ("window".to_string(), window.to_string()),
        ("risk_free".to_string(), format!("{risk_free}")),
        ("pd_eps".to_string(), format!("{pd_eps}")),
        ("standardize_scr".to_string(), standardize_scr.to_string()),
        ("methods".to_string(), method_list.clone()),
    ];
    if let Some(path) = &factors_path {
        header.push(("factors".to_string(), path.display().to_string()));
    }
    header.extend(penalty.header_entries());
    header.extend(tuning.header_entries());
    header.extend(basis_config.header_entries());

    let mut out = config_header(&header);
    out.push_str("method,mean,sd,sharpe,alpha,beta,cqgr\n");
    for o in &outcomes {
        let r = &o.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            o.name,
            fmt_f64(r.mean),
            fmt_f64(r.sd),
            fmt_opt(r.sharpe),
            fmt_opt(r.alpha),
            fmt_opt(r.beta),
            fmt_f64(r.cqgr)
        ));
    }
    write_artifact(args.shared.out.as_deref(), out.as_bytes())?;

    // pretty table to stdout when the artifact goes to a file
    if args.shared.out.is_some() {
        println!(
            "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "method", "mean", "sd", "sharpe", "alpha", "beta", "cqgr"
        );
        for o in &outcomes {
            let r = &o.report;
            println!(
                "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
                o.name,
                fmt_display(r.mean),
                fmt_display(r.sd),
                fmt_display_opt(r.sharpe),
                fmt_display_opt(r.alpha),
                fmt_display_opt(r.beta),
                fmt_display(r.cqgr)
            );
        }
    }

    if let Some(path) = &args.returns_out {
        let mut out = config_header(&header);
        out.push_str("period,");
        out.push_str(
            &outcomes
                .iter()
                .map(|o| o.name.clone())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for (idx, eval) in (window..t).enumerate() {
            out.push_str(&eval.to_string());
            for o in &outcomes {
                out.push(',');
                out.push_str(&fmt_f64(o.report.period_returns[idx]));
            }
            out.push('\n');
        }
        write_artifact(Some(path), out.as_bytes())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// portfolio
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct PortfolioArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Returns CSV: rows = periods, columns = named assets
    #[arg(long, value_name = "FILE")]
    pub panel: PathBuf,
    /// Covariance method (sample, identity, lw, scr, factor, cbf, ...)
    #[arg(long)]
    pub method: Option<String>,
    /// Factor CSV aligned row-by-row with the returns panel
    #[arg(long, value_name = "FILE")]
    pub factors: Option<PathBuf>,
    /// Eigenvalue floor for the positive-definite repair
    #[arg(long = "pd-eps")]
    pub pd_eps: Option<f64>,
    /// Skip standardization inside the SCR estimator
    #[arg(long = "no-standardize", default_value_t = false)]
    pub no_standardize: bool,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

pub fn portfolio(args: PortfolioArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.shared.config.as_deref())?;
    crate::install_thread_pool(args.shared.threads.or(file.threads))?;
    let penalty = PenaltyConfig::resolve(
        &file.penalty,
        args.shared.penalty.as_deref(),
        args.shared.gamma,
        args.shared.lambda,
    )?;
    let tuning = TuningConfig::resolve(
        &file.tuning,
        args.grid.n_lambda,
        args.grid.lambda_min_ratio,
        args.grid.lambda_grid.as_deref(),
    )?;
    let basis_config = resolve_basis(&file, &args.basis)?;

    let panel = data::load_panel(&args.panel)?;
    let p = panel.data.ncols();
    let t = panel.data.nrows();
    let name: MethodName = args
        .method
        .clone()
        .unwrap_or_else(|| "sample".to_string())
        .parse()
        .map_err(CliError::from)?;
    let pd_eps = args.pd_eps.unwrap_or(covreg::portfolio::DEFAULT_PD_EPS);

    let scr = if name.needs_basis() {
        Some(ScrSettings {
            basis: build_basis(&basis_config, p)?,
            family: penalty.family,
            gamma: penalty.gamma,
            lambda: penalty.lambda,
            n_lambda: tuning.n_lambda,
            lambda_min_ratio: tuning.lambda_min_ratio,
            standardize: !args.no_standardize,
        })
    } else {
        None
    };
    let factors = match &args.factors {
        Some(path) => Some(data::load_panel(path)?.data),
        None => None,
    };
    let loadings = if name.needs_loadings() {
        let path = basis_config
            .covariates
            .clone()
            .ok_or_else(|| CliError::data("cbf methods need --covariates"))?;
        Some(data::load_panel(&path)?.data)
    } else {
        None
    };

    let estimator = Estimator {
        name,
        scr,
        factors,
        loadings,
    };
    use covreg::portfolio::CovarianceEstimator;
    let sigma = estimator
        .estimate(&panel.data, 0..t)
        .map_err(CliError::from)?;
    let repaired = pd_repair(&sigma, pd_eps);
    let weights = gmv_weights(&repaired).map_err(CliError::from)?;

    let mut header = vec![
        ("command".to_string(), "portfolio".to_string()),
        ("panel".to_string(), args.panel.display().to_string()),
        ("method".to_string(), name.label().to_string()),
        ("pd_eps".to_string(), format!("{pd_eps}")),
    ];
    header.extend(penalty.header_entries());
    header.extend(basis_config.header_entries());

    let mut out = config_header(&header);
    out.push_str("asset,weight\n");
    for (j, name) in panel.names.iter().enumerate() {
        out.push_str(&format!("{},{}\n", name, fmt_f64(weights.as_vector()[j])));
    }
    write_artifact(args.shared.out.as_deref(), out.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
