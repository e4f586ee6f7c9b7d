//! Global-minimum-variance portfolio construction, positive-definite repair,
//! the rolling backtest, and performance measures.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, RealField};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::DenseSymMatrix;
use crate::scalar::{as_f64, sf, su, Scalar};

/// Eigenvalue floor used when repairing fitted covariances.
pub const DEFAULT_PD_EPS: f64 = 1e-6;

/// Fully invested portfolio weights (sum to one; short positions allowed).
#[derive(Debug, Clone)]
pub struct PortfolioWeights<S> {
    weights: DVector<S>,
}

impl<S: Scalar> PortfolioWeights<S> {
    pub fn new(weights: DVector<S>) -> Result<Self> {
        let total: S = weights.iter().copied().fold(S::zero(), |a, v| a + v);
        if (total - S::one()).abs() > sf(1e-10) {
            return Err(Error::InvalidConfig(format!(
                "weights sum to {}, expected 1",
                as_f64(total)
            )));
        }
        Ok(Self { weights })
    }

    pub fn as_vector(&self) -> &DVector<S> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Replace non-positive eigenvalues by `eps`, keeping the eigenvectors.
pub fn pd_repair<S: Scalar + RealField>(sigma: &DenseSymMatrix<S>, eps: S) -> DenseSymMatrix<S> {
    let (mut vals, vecs) = sigma.sym_eigen();
    let mut touched = false;
    for v in vals.iter_mut() {
        if *v <= S::zero() {
            *v = eps;
            touched = true;
        }
    }
    if !touched {
        return sigma.clone();
    }
    let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
    DenseSymMatrix::symmetrized(rebuilt).expect("square by construction")
}

/// Closed-form global-minimum-variance weights
/// `omega = Sigma^{-1} 1 / (1' Sigma^{-1} 1)`.
pub fn gmv_weights<S: Scalar + RealField>(sigma: &DenseSymMatrix<S>) -> Result<PortfolioWeights<S>> {
    let p = sigma.dim();
    let chol = Cholesky::new(sigma.as_dmatrix().clone()).ok_or(Error::NearSingularGram {
        cond: f64::INFINITY,
    })?;
    let ones = DVector::from_element(p, S::one());
    let solved = chol.solve(&ones);
    let total: S = solved.iter().copied().fold(S::zero(), |a, v| a + v);
    if total == S::zero() || !Float::is_finite(total) {
        return Err(Error::NearSingularGram {
            cond: f64::INFINITY,
        });
    }
    let weights = solved.map(|v| v / total);
    Ok(PortfolioWeights { weights })
}

/// Summary measures of a realized return series against a benchmark.
///
/// `sharpe` is undefined (None) for a zero-variance portfolio; `alpha` and
/// `beta` are undefined for a zero-variance benchmark.
#[derive(Debug, Clone)]
pub struct PerformanceReport<S> {
    pub mean: S,
    pub sd: S,
    pub sharpe: Option<S>,
    pub alpha: Option<S>,
    pub beta: Option<S>,
    pub cqgr: S,
    pub period_returns: Vec<S>,
}

/// Mean, sample SD, Sharpe ratio, CAPM alpha/beta against the benchmark, and
/// the compound growth rate of the realized period returns.
///
/// `portfolio` holds the out-of-sample period returns; the compound growth
/// rate is `(prod(1 + r))^(1/T) - 1` over exactly those `T` periods.
pub fn performance<S: Scalar>(
    portfolio: &[S],
    benchmark: &[S],
    risk_free: S,
) -> Result<PerformanceReport<S>> {
    let t = portfolio.len();
    if t < 2 {
        return Err(Error::TooFewObservations { need: 2 });
    }
    if benchmark.len() != t {
        return Err(Error::LengthMismatch {
            expected: t,
            actual: benchmark.len(),
        });
    }
    for (idx, &r) in portfolio.iter().enumerate() {
        if r <= -S::one() {
            return Err(Error::InvalidReturn {
                t: idx,
                value: as_f64(r),
            });
        }
    }
    let ts = su::<S>(t);
    let mean = portfolio.iter().copied().fold(S::zero(), |a, v| a + v) / ts;
    let var = portfolio
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .fold(S::zero(), |a, v| a + v)
        / su::<S>(t - 1);
    let sd = var.sqrt();
    let sharpe = if sd > S::zero() {
        Some((mean - risk_free) / sd)
    } else {
        None
    };

    let mean_b = benchmark.iter().copied().fold(S::zero(), |a, v| a + v) / ts;
    let var_b = benchmark
        .iter()
        .map(|&v| (v - mean_b) * (v - mean_b))
        .fold(S::zero(), |a, v| a + v);
    let (alpha, beta) = if var_b > S::zero() {
        let cov = portfolio
            .iter()
            .zip(benchmark)
            .map(|(&rp, &rb)| (rp - mean) * (rb - mean_b))
            .fold(S::zero(), |a, v| a + v);
        let beta = cov / var_b;
        // regression of excess returns: alpha is unchanged by the common rf
        // shift except through beta
        let alpha = (mean - risk_free) - beta * (mean_b - risk_free);
        (Some(alpha), Some(beta))
    } else {
        (None, None)
    };

    let log_growth = portfolio
        .iter()
        .map(|&r| (S::one() + r).ln())
        .fold(S::zero(), |a, v| a + v);
    let cqgr = (log_growth / ts).exp() - S::one();

    Ok(PerformanceReport {
        mean,
        sd,
        sharpe,
        alpha,
        beta,
        cqgr,
        period_returns: portfolio.to_vec(),
    })
}

/// A covariance estimator usable inside the rolling backtest. `rows` selects
/// the training window within the full panel, so estimators holding aligned
/// side data (factors, loadings) can slice consistently.
pub trait CovarianceEstimator<S>: Sync {
    fn name(&self) -> String;
    fn estimate(&self, panel: &DMatrix<S>, rows: Range<usize>) -> Result<DenseSymMatrix<S>>;
}

/// Fit on each trailing window, repair, take GMV weights, and realize the
/// next period's return; aggregate with [`performance`].
///
/// Benchmark returns use the supplied static weights (e.g. market-cap
/// weights) or equal weights when absent.
pub fn rolling_backtest<S: Scalar + RealField>(
    panel: &DMatrix<S>,
    estimator: &dyn CovarianceEstimator<S>,
    window: usize,
    benchmark_weights: Option<&DVector<S>>,
    risk_free: S,
    eps: S,
) -> Result<PerformanceReport<S>> {
    let t = panel.nrows();
    let p = panel.ncols();
    if window == 0 || window >= t {
        return Err(Error::InvalidWindow { window, periods: t });
    }
    if let Some(w) = benchmark_weights {
        if w.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                actual: w.len(),
            });
        }
    }
    let mut realized = Vec::with_capacity(t - window);
    let mut bench = Vec::with_capacity(t - window);
    for eval in window..t {
        let sigma = estimator
            .estimate(panel, (eval - window)..eval)
            .map_err(|e| Error::WindowFailed {
                period: eval,
                source: Box::new(e),
            })?;
        let repaired = pd_repair(&sigma, eps);
        let weights = gmv_weights(&repaired).map_err(|e| Error::WindowFailed {
            period: eval,
            source: Box::new(e),
        })?;
        let mut r = S::zero();
        let mut b = S::zero();
        let equal = S::one() / su::<S>(p);
        for j in 0..p {
            let y = panel[(eval, j)];
            r += weights.as_vector()[j] * y;
            b += benchmark_weights.map_or(equal, |w| w[j]) * y;
        }
        realized.push(r);
        bench.push(b);
    }
    performance(&realized, &bench, risk_free)
}

/// Normalized benchmark weights from market capitalizations.
pub fn cap_weights<S: Scalar>(caps: &[S]) -> Result<DVector<S>> {
    let total = caps.iter().copied().fold(S::zero(), |a, v| a + v);
    if total <= S::zero() {
        return Err(Error::InvalidConfig(
            "market capitalizations must have a positive sum".into(),
        ));
    }
    Ok(DVector::from_iterator(
        caps.len(),
        caps.iter().map(|&c| c / total),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    struct IdentityEstimator;

    impl CovarianceEstimator<f64> for IdentityEstimator {
        fn name(&self) -> String {
            "identity".into()
        }

        fn estimate(&self, panel: &DMatrix<f64>, _rows: Range<usize>) -> Result<DenseSymMatrix<f64>> {
            DenseSymMatrix::new(DMatrix::identity(panel.ncols(), panel.ncols()))
        }
    }

    #[test]
    fn pd_repair_cases() {
        let pd = DenseSymMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let fixed = pd_repair(&pd, 1e-6);
        assert_relative_eq!(
            (fixed.as_dmatrix() - pd.as_dmatrix()).norm(),
            0.0,
            epsilon = 1e-10
        );

        let indef = DenseSymMatrix::from_diagonal(&[1.0, -1.0]);
        let fixed = pd_repair(&indef, 1e-6);
        let (vals, _) = fixed.sym_eigen();
        let mut sorted: Vec<f64> = vals.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        assert_relative_eq!(sorted[0], 1e-6, max_relative = 1e-9);
        assert_relative_eq!(sorted[1], 1.0, max_relative = 1e-12);

        let mut rng = StdRng::seed_from_u64(1);
        let raw = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let sym = DenseSymMatrix::symmetrized(raw).unwrap();
        let fixed = pd_repair(&sym, 1e-6);
        assert!(fixed.min_eigenvalue() >= 1e-6 - 1e-12);

        // idempotence
        let again = pd_repair(&fixed, 1e-6);
        assert_relative_eq!(
            (again.as_dmatrix() - fixed.as_dmatrix()).norm(),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn gmv_closed_forms() {
        let id = DenseSymMatrix::new(DMatrix::<f64>::identity(4, 4)).unwrap();
        let w = gmv_weights(&id).unwrap();
        for j in 0..4 {
            assert_relative_eq!(w.as_vector()[j], 0.25, max_relative = 1e-12);
        }

        let diag = DenseSymMatrix::from_diagonal(&[1.0, 2.0]);
        let w = gmv_weights(&diag).unwrap();
        assert_relative_eq!(w.as_vector()[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(w.as_vector()[1], 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn gmv_optimality_against_random_search() {
        let mut rng = StdRng::seed_from_u64(2);
        let raw = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let psd = &raw * raw.transpose() + DMatrix::identity(4, 4) * 0.5;
        let sigma = DenseSymMatrix::symmetrized(psd).unwrap();
        let w = gmv_weights(&sigma).unwrap();
        let objective =
            |v: &DVector<f64>| (v.transpose() * sigma.as_dmatrix() * v)[(0, 0)];
        let best = objective(w.as_vector());
        for _ in 0..100_000 {
            let mut v = DVector::from_fn(4, |_, _| rng.random_range(-1.0..2.0));
            let s: f64 = v.iter().sum();
            if s.abs() < 1e-6 {
                continue;
            }
            v /= s;
            assert!(objective(&v) >= best - 1e-12);
        }
    }

    #[test]
    fn gmv_scale_invariance() {
        let mut rng = StdRng::seed_from_u64(3);
        let raw = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let psd = &raw * raw.transpose() + DMatrix::identity(5, 5);
        let sigma = DenseSymMatrix::symmetrized(psd).unwrap();
        let scaled = DenseSymMatrix::new(sigma.as_dmatrix().map(|v| 7.3 * v)).unwrap();
        let a = gmv_weights(&sigma).unwrap();
        let b = gmv_weights(&scaled).unwrap();
        assert_relative_eq!(
            (a.as_vector() - b.as_vector()).norm(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn performance_identity_regression() {
        let r = [0.02, -0.01, 0.05, 0.0, 0.03];
        let rep = performance(&r, &r, 0.001).unwrap();
        assert_relative_eq!(rep.alpha.unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(rep.beta.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cqgr_formula_arithmetic() {
        let r = [0.1, -0.1];
        let bench = [0.0, 0.0];
        let rep = performance(&r, &bench, 0.0).unwrap();
        assert_relative_eq!(rep.cqgr, (0.99f64).sqrt() - 1.0, epsilon = 1e-12);
        assert!((rep.cqgr + 0.0050126).abs() < 1e-6);
    }

    #[test]
    fn sharpe_cross_check_on_reported_magnitudes() {
        // mean 4.206%, sd 10.647%, rf 0.375% -> sharpe about 0.360
        let sharpe = (4.206 - 0.375) / 10.647;
        assert!((sharpe - 0.360).abs() < 1e-3);
    }

    #[test]
    fn performance_degenerate_and_invalid_inputs() {
        let flat = [0.01, 0.01, 0.01];
        let rep = performance(&flat, &flat, 0.0).unwrap();
        assert!(rep.sharpe.is_none());
        assert!(rep.beta.is_none());
        assert_relative_eq!(rep.mean, 0.01);

        assert!(matches!(
            performance(&[0.1, -1.0], &[0.0, 0.0], 0.0),
            Err(Error::InvalidReturn { .. })
        ));
        assert!(matches!(
            performance(&[0.1], &[0.0], 0.0),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn backtest_constant_panel_realizes_the_constant() {
        let panel = DMatrix::from_element(6, 3, 0.02);
        let rep =
            rolling_backtest(&panel, &IdentityEstimator, 2, None, 0.0, 1e-6).unwrap();
        assert_eq!(rep.period_returns.len(), 4);
        for r in &rep.period_returns {
            assert_relative_eq!(*r, 0.02, epsilon = 1e-14);
        }
    }

    #[test]
    fn backtest_window_bounds_and_single_eval() {
        let mut rng = StdRng::seed_from_u64(4);
        let panel = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-0.05..0.05));
        assert!(matches!(
            rolling_backtest(&panel, &IdentityEstimator, 5, None, 0.0, 1e-6),
            Err(Error::InvalidWindow { .. })
        ));
        // window = T - 1 -> one out-of-sample period; too short for the
        // performance summary, which needs two
        let out = rolling_backtest(&panel, &IdentityEstimator, 4, None, 0.0, 1e-6);
        assert!(matches!(out, Err(Error::TooFewObservations { .. })));

        let panel = DMatrix::from_fn(8, 2, |_, _| rng.random_range(-0.05..0.05));
        let rep = rolling_backtest(&panel, &IdentityEstimator, 6, None, 0.0, 1e-6).unwrap();
        assert_eq!(rep.period_returns.len(), 2);
    }

    #[test]
    fn backtest_identity_estimator_is_equal_weight() {
        let mut rng = StdRng::seed_from_u64(5);
        let panel = DMatrix::from_fn(7, 4, |_, _| rng.random_range(-0.05..0.05));
        let rep = rolling_backtest(&panel, &IdentityEstimator, 3, None, 0.0, 1e-6).unwrap();
        for (idx, eval) in (3..7).enumerate() {
            let mean: f64 = (0..4).map(|j| panel[(eval, j)]).sum::<f64>() / 4.0;
            assert_relative_eq!(rep.period_returns[idx], mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn cap_weights_normalize() {
        let w = cap_weights(&[2.0, 6.0]).unwrap();
        assert_relative_eq!(w[0], 0.25);
        assert_relative_eq!(w[1], 0.75);
        assert!(cap_weights(&[0.0, 0.0]).is_err());
    }
}
