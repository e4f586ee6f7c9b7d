//! Covariance estimators selectable in the backtest and portfolio commands.

use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;

use covreg::error::{Error, Result};
use covreg::factor::{
    cbf_factors, composite_covariance, diagonal_residual_cov, factor_loadings, lw_shrink,
    sample_covariance, FactorPanel,
};
use covreg::inference::standardize;
use covreg::matrix::{DenseSymMatrix, SimilarityBasis};
use covreg::penalty::PenaltyFamily;
use covreg::portfolio::CovarianceEstimator;
use covreg::solver::GramSystem;
use covreg::tuning::{default_grid, fit_at_lambda, select_lambda, TuneOptions};

/// Estimator names accepted by `--method`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    Sample,
    Identity,
    LedoitWolf,
    Scr,
    Factor,
    FactorScr,
    Cbf,
    CbfScr,
    LwScr,
}

impl MethodName {
    pub fn label(&self) -> &'static str {
        match self {
            MethodName::Sample => "sample",
            MethodName::Identity => "identity",
            MethodName::LedoitWolf => "lw",
            MethodName::Scr => "scr",
            MethodName::Factor => "factor",
            MethodName::FactorScr => "factor+scr",
            MethodName::Cbf => "cbf",
            MethodName::CbfScr => "cbf+scr",
            MethodName::LwScr => "lw+scr",
        }
    }

    pub fn needs_basis(&self) -> bool {
        matches!(
            self,
            MethodName::Scr | MethodName::FactorScr | MethodName::CbfScr | MethodName::LwScr
        )
    }

    pub fn needs_factors(&self) -> bool {
        matches!(self, MethodName::Factor | MethodName::FactorScr)
    }

    pub fn needs_loadings(&self) -> bool {
        matches!(self, MethodName::Cbf | MethodName::CbfScr)
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sample" => Ok(MethodName::Sample),
            "identity" => Ok(MethodName::Identity),
            "lw" | "ledoit-wolf" | "ledoitwolf" => Ok(MethodName::LedoitWolf),
            "scr" => Ok(MethodName::Scr),
            "factor" | "capm" | "ff" => Ok(MethodName::Factor),
            "factor+scr" | "capm+scr" | "ff+scr" => Ok(MethodName::FactorScr),
            "cbf" => Ok(MethodName::Cbf),
            "cbf+scr" => Ok(MethodName::CbfScr),
            "lw+scr" => Ok(MethodName::LwScr),
            other => Err(Error::InvalidConfig(format!(
                "unknown covariance method `{other}`"
            ))),
        }
    }
}

/// Penalized covariance regression settings shared by the SCR-based
/// estimators.
#[derive(Debug, Clone)]
pub struct ScrSettings {
    pub basis: SimilarityBasis<f64>,
    pub family: PenaltyFamily,
    pub gamma: Option<f64>,
    /// Fixed level; when absent the BIC path search picks one.
    pub lambda: Option<f64>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    /// Standardize the window before fitting (heterogeneous variances,
    /// meaningful for n >= 2) and map the fit back to the original scale.
    pub standardize: bool,
}

impl ScrSettings {
    /// Fit the covariance regression on a window of observations and return
    /// the fitted covariance matrix on the original scale.
    pub fn estimate(&self, window: &DMatrix<f64>) -> Result<DenseSymMatrix<f64>> {
        let n = window.nrows();
        let standardize_now = self.standardize && n >= 2;
        let (data, sds) = if standardize_now {
            let s = standardize(window)?;
            (s.data, Some(s.sds))
        } else {
            (window.clone(), None)
        };
        let system = GramSystem::assemble(&self.basis, &data)?;
        let beta = match self.lambda {
            Some(lambda) => {
                let (fit, _) = fit_at_lambda(
                    &system,
                    self.family,
                    lambda,
                    &TuneOptions {
                        gamma: self.gamma,
                        ..TuneOptions::default()
                    },
                )?;
                fit.coefficients
            }
            None => {
                let grid = default_grid(&system, self.n_lambda, self.lambda_min_ratio, false);
                let tuned = select_lambda(
                    &system,
                    self.family,
                    &grid,
                    &TuneOptions {
                        gamma: self.gamma,
                        ..TuneOptions::default()
                    },
                )?;
                tuned.best_fit.coefficients
            }
        };
        let fitted = self.basis.densify(beta.beta().as_slice())?;
        match sds {
            None => Ok(fitted),
            Some(sds) => {
                // undo the column standardization: D^{1/2} Sigma D^{1/2}
                let p = fitted.dim();
                let rescaled = DMatrix::from_fn(p, p, |i, j| fitted.get(i, j) * sds[i] * sds[j]);
                DenseSymMatrix::symmetrized(rescaled)
            }
        }
    }
}

/// A named estimator closing over its side inputs.
pub struct Estimator {
    pub name: MethodName,
    pub scr: Option<ScrSettings>,
    /// Factor panel rows aligned with the full returns panel.
    pub factors: Option<DMatrix<f64>>,
    /// Characteristics used as fixed loadings (p x M).
    pub loadings: Option<DMatrix<f64>>,
}

impl Estimator {
    fn scr(&self) -> Result<&ScrSettings> {
        self.scr.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!(
                "method `{}` needs similarity-basis inputs",
                self.name.label()
            ))
        })
    }

    fn factor_decomposition(
        &self,
        panel: &DMatrix<f64>,
        rows: Range<usize>,
    ) -> Result<covreg::factor::FactorDecomposition<f64>> {
        match self.name {
            MethodName::Factor | MethodName::FactorScr => {
                let factors = self.factors.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("factor methods need --factors".into())
                })?;
                let window = panel.rows(rows.start, rows.len()).into_owned();
                let f = factors.rows(rows.start, rows.len()).into_owned();
                factor_loadings(&FactorPanel::new(window, f)?)
            }
            MethodName::Cbf | MethodName::CbfScr => {
                let loadings = self.loadings.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("cbf methods need covariate loadings".into())
                })?;
                let window = panel.rows(rows.start, rows.len()).into_owned();
                cbf_factors(&window, loadings)
            }
            _ => unreachable!("not a factor method"),
        }
    }
}

impl CovarianceEstimator<f64> for Estimator {
    fn name(&self) -> String {
        self.name.label().to_string()
    }

    fn estimate(&self, panel: &DMatrix<f64>, rows: Range<usize>) -> Result<DenseSymMatrix<f64>> {
        let window = panel.rows(rows.start, rows.len()).into_owned();
        match self.name {
            MethodName::Sample => sample_covariance(&window),
            MethodName::Identity => {
                DenseSymMatrix::new(DMatrix::identity(window.ncols(), window.ncols()))
            }
            MethodName::LedoitWolf => {
                let s = sample_covariance(&window)?;
                Ok(lw_shrink(&s, &window)?.0)
            }
            MethodName::Scr => self.scr()?.estimate(&window),
            MethodName::Factor | MethodName::Cbf => {
                let decomp = self.factor_decomposition(panel, rows)?;
                composite_covariance(&decomp, &diagonal_residual_cov(&decomp.residuals))
            }
            MethodName::FactorScr | MethodName::CbfScr => {
                let decomp = self.factor_decomposition(panel, rows)?;
                let residual_cov = self.scr()?.estimate(&decomp.residuals)?;
                composite_covariance(&decomp, &residual_cov)
            }
            MethodName::LwScr => {
                let fitted = self.scr()?.estimate(&window)?;
                Ok(lw_shrink(&fitted, &window)?.0)
            }
        }
    }
}
