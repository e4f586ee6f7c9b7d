//! BIC-driven selection of the penalty level over a descending lambda path.

use nalgebra::{DVector, RealField};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::scalar::{as_f64, sf, su, Scalar};
use crate::solver::{lasso_from, lla, FitResult, GramSystem, LlaOptions};

/// One evaluated grid point. `df`, `rss`, `bic` are absent when the fit at
/// this lambda failed.
#[derive(Debug, Clone)]
pub struct TunePoint<S> {
    pub lambda: S,
    pub df: Option<usize>,
    pub rss: Option<S>,
    pub bic: Option<S>,
}

/// Outcome of a path search.
#[derive(Debug, Clone)]
pub struct TuningResult<S> {
    /// Points in descending lambda order.
    pub points: Vec<TunePoint<S>>,
    /// Index into `points` of the minimizer (ties resolved toward larger
    /// lambda).
    pub best_index: usize,
    /// The selected estimator (support-refit least squares unless refitting
    /// is disabled).
    pub best_fit: FitResult<S>,
    /// The penalized path fit at the selected lambda, with its optimality
    /// diagnostics at the final adaptive weights.
    pub best_lla: FitResult<S>,
}

impl<S: Scalar> TuningResult<S> {
    pub fn best_lambda(&self) -> S {
        self.points[self.best_index].lambda
    }

    pub fn lambda_grid(&self) -> Vec<S> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn scores(&self) -> Vec<Option<S>> {
        self.points.iter().map(|p| p.bic).collect()
    }
}

/// `BIC(lambda) = log(RSS) + log(log(K + 1)) * log(p^2) / p^2 * df`.
///
/// `rss` is the `n`-averaged residual sum of squares; the criterion is stated
/// for a single observation and the same shape is reused for `n > 1` as an
/// extension. The `n` argument is accepted for signature stability but does
/// not enter the formula.
pub fn bic_score<S: Scalar>(rss: S, p: usize, k: usize, df: usize, _n: usize) -> Result<S> {
    if rss <= S::zero() || !rss.is_finite() {
        return Err(Error::InvalidBic(format!(
            "rss must be positive and finite, got {}",
            as_f64(rss)
        )));
    }
    if k == 0 {
        return Err(Error::InvalidBic(
            "K must be at least 1 so log(log(K + 1)) is defined".into(),
        ));
    }
    let p2 = su::<S>(p) * su::<S>(p);
    let complexity = Float::ln(Float::ln(su::<S>(k + 1))) * Float::ln(p2) / p2;
    Ok(Float::ln(rss) + complexity * su::<S>(df))
}

/// Largest penalty level that zeroes every penalized coordinate at the first
/// coordinate-descent step, `max_k |m_k| / p` over penalized `k`.
pub fn lambda_max<S: Scalar>(system: &GramSystem<S>, penalize_intercept: bool) -> S {
    let p = su::<S>(system.p());
    let start = if penalize_intercept { 0 } else { 1 };
    let mut best = S::zero();
    for k in start..system.len() {
        best = S::max(best, system.moments()[k].abs() / p);
    }
    best
}

/// Logarithmically spaced descending grid from `lambda_max` down to
/// `lambda_max * min_ratio`.
pub fn default_grid<S: Scalar>(
    system: &GramSystem<S>,
    n_lambda: usize,
    min_ratio: S,
    penalize_intercept: bool,
) -> Vec<S> {
    let top = lambda_max(system, penalize_intercept);
    if top <= S::zero() || n_lambda == 0 {
        return vec![sf(1e-3)];
    }
    if n_lambda == 1 {
        return vec![top];
    }
    let log_top = Float::ln(top);
    let log_bot = Float::ln(top * min_ratio);
    (0..n_lambda)
        .map(|i| {
            let t = su::<S>(i) / su::<S>(n_lambda - 1);
            Float::exp(log_top + (log_bot - log_top) * t)
        })
        .collect()
}

/// Controls for [`select_lambda`].
#[derive(Debug, Clone, Copy)]
pub struct TuneOptions<S> {
    pub lla: LlaOptions<S>,
    pub gamma: Option<S>,
    /// Refit the selected support by restricted least squares before scoring
    /// (on by default). The folded concave path is used for support search;
    /// the refit realizes the unbiased restricted estimator that search
    /// targets, and its residual enters the BIC.
    pub refit: bool,
    /// Initialization level for the Lasso start of [`fit_at_lambda`]; the
    /// penalty level itself when absent. The path search always couples
    /// `lambda_0 = lambda`.
    pub lambda0: Option<S>,
}

impl<S: Scalar> Default for TuneOptions<S> {
    fn default() -> Self {
        Self {
            lla: LlaOptions::default(),
            gamma: None,
            refit: true,
            lambda0: None,
        }
    }
}

/// Run lasso-initialized LLA at every grid point (with `lambda_0 = lambda`),
/// score each fit by BIC with `df = |support|`, and return the minimizer.
///
/// Each grid point's Lasso solve is warm-started from the previous (larger)
/// lambda's Lasso solution; grid points are therefore evaluated sequentially
/// in descending order. Failed grid points are recorded and skipped.
pub fn select_lambda<S: Scalar + RealField>(
    system: &GramSystem<S>,
    family: PenaltyFamily,
    grid: &[S],
    options: &TuneOptions<S>,
) -> Result<TuningResult<S>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &l in grid {
        if l <= S::zero() || !Float::is_finite(l) {
            return Err(Error::NonPositiveLambda(as_f64(l)));
        }
    }
    let mut grid: Vec<S> = grid.to_vec();
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite lambda"));

    let mut points: Vec<TunePoint<S>> = Vec::with_capacity(grid.len());
    let mut warm = DVector::zeros(system.len());
    let mut best: Option<(usize, S, FitResult<S>, FitResult<S>)> = None;
    let mut last_err: Option<Error> = None;

    for (idx, &lambda) in grid.iter().enumerate() {
        let outcome = (|| -> Result<(FitResult<S>, FitResult<S>, S, usize)> {
            let (final_fit, path_fit) =
                fit_at_lambda_warm(system, family, lambda, options, Some(&mut warm))?;
            let rss = system.rss(final_fit.coefficients.beta())?;
            let df = final_fit.coefficients.support().len();
            Ok((final_fit, path_fit, rss, df))
        })();
        match outcome {
            Ok((final_fit, path_fit, rss, df)) => {
                let bic = bic_score(rss, system.p(), system.k(), df, system.n())?;
                points.push(TunePoint {
                    lambda,
                    df: Some(df),
                    rss: Some(rss),
                    bic: Some(bic),
                });
                let better = match &best {
                    None => true,
                    Some((_, score, _, _)) => bic < *score,
                };
                if better {
                    best = Some((idx, bic, final_fit, path_fit));
                }
            }
            Err(e) => {
                points.push(TunePoint {
                    lambda,
                    df: None,
                    rss: None,
                    bic: None,
                });
                last_err = Some(e);
            }
        }
    }

    match best {
        Some((best_index, _, best_fit, best_lla)) => Ok(TuningResult {
            points,
            best_index,
            best_fit,
            best_lla,
        }),
        None => Err(Error::AllFitsFailed(Box::new(
            last_err.unwrap_or(Error::EmptyGrid),
        ))),
    }
}

/// The single-level building block of the path search: lasso-initialized LLA
/// at `lambda` (with `lambda_0 = lambda`), optionally followed by the
/// support refit. Returns `(final_estimate, path_fit)`.
pub fn fit_at_lambda<S: Scalar + RealField>(
    system: &GramSystem<S>,
    family: PenaltyFamily,
    lambda: S,
    options: &TuneOptions<S>,
) -> Result<(FitResult<S>, FitResult<S>)> {
    fit_at_lambda_warm(system, family, lambda, options, None)
}

fn fit_at_lambda_warm<S: Scalar + RealField>(
    system: &GramSystem<S>,
    family: PenaltyFamily,
    lambda: S,
    options: &TuneOptions<S>,
    warm: Option<&mut DVector<S>>,
) -> Result<(FitResult<S>, FitResult<S>)> {
    let spec = PenaltySpec::new(family, lambda, options.gamma)?;
    let init = match &warm {
        Some(w) => (**w).clone(),
        None => DVector::zeros(system.len()),
    };
    // the path search couples lambda_0 = lambda; a standalone fit may ask
    // for a different initialization level
    let lambda0 = match warm {
        Some(_) => lambda,
        None => options.lambda0.unwrap_or(lambda),
    };
    let lasso_fit = lasso_from(
        system,
        lambda0,
        options.lla.penalize_intercept,
        &init,
        &options.lla.cd,
    )?;
    if let Some(w) = warm {
        *w = lasso_fit.coefficients.beta().clone();
    }
    let path_fit = lla(system, &spec, &lasso_fit.coefficients, &options.lla)?;
    let final_fit = if options.refit {
        refit_support(system, &path_fit).unwrap_or_else(|| path_fit.clone())
    } else {
        path_fit.clone()
    };
    Ok((final_fit, path_fit))
}

/// Restricted least squares on the path fit's support. `None` when the
/// support is empty or its restricted Gram is numerically singular, in which
/// case the caller keeps the path fit.
fn refit_support<S: Scalar + RealField>(
    system: &GramSystem<S>,
    path_fit: &FitResult<S>,
) -> Option<FitResult<S>> {
    let support = path_fit.coefficients.support();
    if support.is_empty() {
        return None;
    }
    let refit = crate::solver::oracle_fit(system, support).ok()?;
    let objective = system.loss(refit.beta()).ok()?;
    // stationarity of the restricted problem: gradient over the support
    let grad = (system.gram() * refit.beta() - system.moments()) / su::<S>(system.p());
    let kkt = support
        .iter()
        .map(|&k| Float::abs(grad[k]))
        .fold(S::zero(), Float::max);
    Some(FitResult {
        coefficients: refit,
        iterations: path_fit.iterations,
        converged: path_fit.converged,
        objective,
        kkt_residual: kkt,
    })
}
