//! Factor and factor-composite covariance estimators, the
//! characteristics-based factor variant, and Ledoit-Wolf shrinkage.

use nalgebra::{Cholesky, DMatrix, RealField};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::DenseSymMatrix;
use crate::scalar::{su, Scalar};

/// Aligned returns (`n x p`) and observable factors (`n x M`).
#[derive(Debug, Clone)]
pub struct FactorPanel<S> {
    returns: DMatrix<S>,
    factors: DMatrix<S>,
}

impl<S: Scalar> FactorPanel<S> {
    pub fn new(returns: DMatrix<S>, factors: DMatrix<S>) -> Result<Self> {
        if returns.nrows() != factors.nrows() {
            return Err(Error::LengthMismatch {
                expected: returns.nrows(),
                actual: factors.nrows(),
            });
        }
        if factors.ncols() == 0 || returns.nrows() <= factors.ncols() {
            return Err(Error::TooFewObservations {
                need: factors.ncols() + 1,
            });
        }
        Ok(Self { returns, factors })
    }

    pub fn returns(&self) -> &DMatrix<S> {
        &self.returns
    }

    pub fn factors(&self) -> &DMatrix<S> {
        &self.factors
    }

    pub fn n(&self) -> usize {
        self.returns.nrows()
    }

    pub fn p(&self) -> usize {
        self.returns.ncols()
    }

    pub fn m(&self) -> usize {
        self.factors.ncols()
    }
}

/// Estimated loadings, factor covariance, and residual matrix.
#[derive(Debug, Clone)]
pub struct FactorDecomposition<S> {
    /// `p x M` loading matrix.
    pub loadings: DMatrix<S>,
    /// `M x M` factor covariance.
    pub factor_cov: DMatrix<S>,
    /// `n x p` residual matrix.
    pub residuals: DMatrix<S>,
}

/// Time-series least squares of each asset's returns on the observed
/// factors; `Sigma_f = n^{-1} F' F`.
pub fn factor_loadings<S: Scalar + RealField>(
    panel: &FactorPanel<S>,
) -> Result<FactorDecomposition<S>> {
    let f = &panel.factors;
    let y = &panel.returns;
    let n = panel.n();
    let ftf = f.transpose() * f;
    let chol = Cholesky::new(ftf.clone())
        .ok_or_else(|| Error::RankDeficient("factor matrix F'F is not invertible".into()))?;
    // X solves (F'F) X = F'Y, so loadings = X' are p x M
    let x = chol.solve(&(f.transpose() * y));
    let residuals = y - f * &x;
    let inv_n = S::one() / su::<S>(n);
    Ok(FactorDecomposition {
        loadings: x.transpose(),
        factor_cov: ftf.map(|v| v * inv_n),
        residuals,
    })
}

/// Cross-sectional regression per period on known loadings:
/// `f_i = (X'X)^{-1} X' y_i`; `Sigma_f` from the estimated factors.
pub fn cbf_factors<S: Scalar + RealField>(
    returns: &DMatrix<S>,
    loadings: &DMatrix<S>,
) -> Result<FactorDecomposition<S>> {
    let p = returns.ncols();
    let m = loadings.ncols();
    if loadings.nrows() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: loadings.nrows(),
        });
    }
    if p < m {
        return Err(Error::RankDeficient(format!(
            "cross-sectional regression needs p >= M, got p = {p}, M = {m}"
        )));
    }
    let xtx = loadings.transpose() * loadings;
    let chol = Cholesky::new(xtx)
        .ok_or_else(|| Error::RankDeficient("loading matrix X'X is not invertible".into()))?;
    // factors row-wise: F' = (X'X)^{-1} X' Y'
    let factors_t = chol.solve(&(loadings.transpose() * returns.transpose()));
    let factors = factors_t.transpose();
    let residuals = returns - &factors * loadings.transpose();
    let n = returns.nrows();
    let inv_n = S::one() / su::<S>(n);
    let factor_cov = (factors.transpose() * &factors).map(|v| v * inv_n);
    Ok(FactorDecomposition {
        loadings: loadings.clone(),
        factor_cov,
        residuals,
    })
}

/// `Sigma = B Sigma_f B' + Sigma_u`.
pub fn composite_covariance<S: Scalar>(
    decomp: &FactorDecomposition<S>,
    residual_cov: &DenseSymMatrix<S>,
) -> Result<DenseSymMatrix<S>> {
    let p = decomp.loadings.nrows();
    if residual_cov.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: residual_cov.dim(),
        });
    }
    let factor_part = &decomp.loadings * &decomp.factor_cov * decomp.loadings.transpose();
    DenseSymMatrix::symmetrized(factor_part + residual_cov.as_dmatrix())
}

/// Diagonal residual covariance `diag(n^{-1} sum_i u_i^2)` of a strict
/// factor model.
pub fn diagonal_residual_cov<S: Scalar>(residuals: &DMatrix<S>) -> DenseSymMatrix<S> {
    let n = residuals.nrows();
    let inv_n = S::one() / su::<S>(n.max(1));
    let diag: Vec<S> = (0..residuals.ncols())
        .map(|j| {
            residuals
                .column(j)
                .iter()
                .map(|&v| v * v)
                .fold(S::zero(), |a, v| a + v)
                * inv_n
        })
        .collect();
    DenseSymMatrix::from_diagonal(&diag)
}

/// Uncentered second-moment matrix `n^{-1} sum_i y_i y_i'` after demeaning.
pub fn sample_covariance<S: Scalar>(returns: &DMatrix<S>) -> Result<DenseSymMatrix<S>> {
    let n = returns.nrows();
    if n == 0 {
        return Err(Error::TooFewObservations { need: 1 });
    }
    let p = returns.ncols();
    let inv_n = S::one() / su::<S>(n);
    let mut means = vec![S::zero(); p];
    for j in 0..p {
        means[j] = returns.column(j).iter().copied().fold(S::zero(), |a, v| a + v) * inv_n;
    }
    let centered = DMatrix::from_fn(n, p, |i, j| returns[(i, j)] - means[j]);
    let cov = (centered.transpose() * &centered).map(|v| v * inv_n);
    DenseSymMatrix::symmetrized(cov)
}

/// Shrink toward the scaled identity: `rho (tr S / p) I + (1 - rho) S`.
pub fn lw_apply<S: Scalar>(sample_cov: &DenseSymMatrix<S>, rho: S) -> DenseSymMatrix<S> {
    let p = sample_cov.dim();
    let target = sample_cov.trace() / su::<S>(p);
    let mut out = sample_cov.as_dmatrix().map(|v| (S::one() - rho) * v);
    for i in 0..p {
        out[(i, i)] += rho * target;
    }
    DenseSymMatrix::symmetrized(out).expect("square by construction")
}

/// Ledoit-Wolf shrinkage intensity and the shrunk matrix.
///
/// With `m = tr(S)/p`, `d^2 = ||S - m I||_F^2 / p`, and
/// `b^2 = min(d^2, n^{-2} sum_i ||y_i y_i' - S||_F^2 / p)` over the demeaned
/// returns, the intensity is `rho = b^2 / d^2` (`rho = 0` when `d^2 = 0`,
/// where the target already equals the input).
pub fn lw_shrink<S: Scalar>(
    sample_cov: &DenseSymMatrix<S>,
    returns: &DMatrix<S>,
) -> Result<(DenseSymMatrix<S>, S)> {
    let n = returns.nrows();
    if n < 2 {
        return Err(Error::TooFewObservations { need: 2 });
    }
    let p = sample_cov.dim();
    if returns.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: returns.ncols(),
        });
    }
    let ps = su::<S>(p);
    let ns = su::<S>(n);
    let m = sample_cov.trace() / ps;
    let mut d2 = S::zero();
    for i in 0..p {
        for j in 0..p {
            let v = sample_cov.get(i, j) - if i == j { m } else { S::zero() };
            d2 += v * v;
        }
    }
    d2 /= ps;
    if d2 == S::zero() {
        return Ok((sample_cov.clone(), S::zero()));
    }
    let mut means = vec![S::zero(); p];
    for j in 0..p {
        means[j] = returns.column(j).iter().copied().fold(S::zero(), |a, v| a + v) / ns;
    }
    let mut b2_sum = S::zero();
    let mut row = vec![S::zero(); p];
    for i in 0..n {
        for j in 0..p {
            row[j] = returns[(i, j)] - means[j];
        }
        let mut dist = S::zero();
        for a in 0..p {
            for b in 0..p {
                let v = row[a] * row[b] - sample_cov.get(a, b);
                dist += v * v;
            }
        }
        b2_sum += dist;
    }
    let b2 = Float::min(b2_sum / (ns * ns * ps), d2);
    let rho = b2 / d2;
    Ok((lw_apply(sample_cov, rho), rho))
}
