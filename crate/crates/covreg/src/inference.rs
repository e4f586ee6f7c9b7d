//! Variance standardization for repeated observations and the asymptotic
//! covariance of the support-restricted least-squares estimator.

use nalgebra::{Cholesky, DMatrix, DVector, RealField};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{trace_product, DenseSymMatrix, SimilarityBasis};
use crate::scalar::{sf, su, Scalar};

/// A panel whose columns have been centered and scaled to unit variance
/// (1/n denominator).
#[derive(Debug, Clone)]
pub struct StandardizedPanel<S> {
    pub data: DMatrix<S>,
    pub means: DVector<S>,
    pub sds: DVector<S>,
}

/// Center and scale each column by its 1/n-denominator standard deviation.
pub fn standardize<S: Scalar>(panel: &DMatrix<S>) -> Result<StandardizedPanel<S>> {
    let n = panel.nrows();
    if n < 2 {
        return Err(Error::TooFewObservations { need: 2 });
    }
    let p = panel.ncols();
    let inv_n = S::one() / su::<S>(n);
    let mut means = DVector::zeros(p);
    let mut sds = DVector::zeros(p);
    let mut data = panel.clone();
    for j in 0..p {
        let mean = panel.column(j).iter().copied().fold(S::zero(), |a, v| a + v) * inv_n;
        let var = panel
            .column(j)
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .fold(S::zero(), |a, v| a + v)
            * inv_n;
        if var <= S::zero() {
            return Err(Error::ZeroVarianceColumn(j));
        }
        let sd = var.sqrt();
        means[j] = mean;
        sds[j] = sd;
        for i in 0..n {
            data[(i, j)] = (panel[(i, j)] - mean) / sd;
        }
    }
    Ok(StandardizedPanel { data, means, sds })
}

/// The pieces of the sandwich
/// `avar = p^{-1} G0^{-1} {2 G1 + (mu4 - 3) H} G0^{-1}` for the estimator
/// restricted to a known support.
#[derive(Debug, Clone)]
pub struct AsymptoticCovariance<S> {
    pub g0: DMatrix<S>,
    pub g1: DMatrix<S>,
    pub h: DMatrix<S>,
    pub mu4: S,
    pub avar: DMatrix<S>,
}

impl<S: Scalar> AsymptoticCovariance<S> {
    /// Standard errors, `sqrt(diag(avar))`.
    pub fn standard_errors(&self) -> DVector<S> {
        DVector::from_fn(self.avar.nrows(), |i, _| {
            S::max(self.avar[(i, i)], S::zero()).sqrt()
        })
    }
}

/// Asymptotic covariance of the restricted least-squares coefficients at the
/// true covariance `sigma0`, with fourth moment `mu4` of the whitened
/// components (`mu4 = 3` for Gaussian data, which removes the `H` term).
///
/// `basis_s` holds only the support matrices, in support order.
pub fn sandwich_covariance<S: Scalar + RealField>(
    basis_s: &SimilarityBasis<S>,
    sigma0: &DenseSymMatrix<S>,
    mu4: S,
) -> Result<AsymptoticCovariance<S>> {
    let p = sigma0.dim();
    if basis_s.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: basis_s.dim(),
        });
    }
    let sqrt = sigma0.sqrt_pd()?;
    let m = basis_s.len();
    let p_inv = S::one() / su::<S>(p);

    // M_k = Sigma0^{1/2} W_k Sigma0^{1/2}
    let transformed: Vec<DMatrix<S>> = basis_s
        .iter()
        .map(|w| {
            let ws = w.mul_dense(&sqrt)?;
            Ok(&sqrt * ws)
        })
        .collect::<Result<_>>()?;

    let mut g0 = DMatrix::zeros(m, m);
    let mut g1 = DMatrix::zeros(m, m);
    let mut h = DMatrix::zeros(m, m);
    for k in 0..m {
        for l in k..m {
            let t0 = trace_product(basis_s.get(k), basis_s.get(l))? * p_inv;
            g0[(k, l)] = t0;
            g0[(l, k)] = t0;
            // tr(M_k M_l) = sum_{ij} (M_k)_{ij} (M_l)_{ij} for symmetric M
            let t1 = transformed[k]
                .iter()
                .zip(transformed[l].iter())
                .map(|(&a, &b)| a * b)
                .fold(S::zero(), |acc, v| acc + v)
                * p_inv;
            g1[(k, l)] = t1;
            g1[(l, k)] = t1;
            // tr(M_k o M_l) sums only the diagonal of the Hadamard product
            let th = (0..p)
                .map(|j| transformed[k][(j, j)] * transformed[l][(j, j)])
                .fold(S::zero(), |acc, v| acc + v)
                * p_inv;
            h[(k, l)] = th;
            h[(l, k)] = th;
        }
    }

    let chol = Cholesky::new(g0.clone()).ok_or(Error::NearSingularGram {
        cond: f64::INFINITY,
    })?;
    let g0_inv = chol.inverse();
    let two = sf::<S>(2.0);
    let three = sf::<S>(3.0);
    let mid = g1.map(|v| two * v) + h.map(|v| (mu4 - three) * v);
    let avar_raw = (&g0_inv * mid * &g0_inv).map(|v| v * p_inv);
    let half = sf::<S>(0.5);
    let avar = (&avar_raw + avar_raw.transpose()).map(|v| v * half);

    Ok(AsymptoticCovariance {
        g0,
        g1,
        h,
        mu4,
        avar,
    })
}

/// Empirical fourth moment of the whitened observations
/// `z_i = Sigma0^{-1/2} y_i`, averaged over all components.
pub fn whitened_fourth_moment<S: Scalar + RealField>(
    observations: &DMatrix<S>,
    sigma0: &DenseSymMatrix<S>,
) -> Result<S> {
    let p = sigma0.dim();
    if observations.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: observations.ncols(),
        });
    }
    let n = observations.nrows();
    if n == 0 {
        return Err(Error::TooFewObservations { need: 1 });
    }
    let (vals, vecs) = sigma0.sym_eigen();
    let min = vals.iter().copied().fold(Float::infinity(), Float::min);
    if min <= S::zero() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: crate::scalar::as_f64(min),
        });
    }
    let inv_sqrt_vals =
        DVector::from_iterator(vals.len(), vals.iter().map(|&v| S::one() / Float::sqrt(v)));
    let whitener = &vecs * DMatrix::from_diagonal(&inv_sqrt_vals) * vecs.transpose();
    let z = observations * whitener.transpose();
    let total = z
        .iter()
        .map(|&v| {
            let v2 = v * v;
            v2 * v2
        })
        .fold(S::zero(), |a, v| a + v);
    Ok(total / su::<S>(n * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseSymMatrix;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn standardize_hand_arithmetic() {
        let panel = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let s = standardize(&panel).unwrap();
        assert_relative_eq!(s.means[0], 2.0);
        assert_relative_eq!(s.sds[0], 1.0);
        assert_relative_eq!(s.data[(0, 0)], -1.0);
        assert_relative_eq!(s.data[(1, 0)], 1.0);
    }

    #[test]
    fn standardize_is_idempotent_and_rejects_constants() {
        let mut rng = StdRng::seed_from_u64(1);
        let panel = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-2.0..2.0));
        let once = standardize(&panel).unwrap();
        let twice = standardize(&once.data).unwrap();
        assert_relative_eq!((&once.data - &twice.data).norm(), 0.0, epsilon = 1e-12);

        // columns of a standardized panel have mean 0, variance 1 (1/n)
        let n = once.data.nrows() as f64;
        for j in 0..3 {
            let mean: f64 = once.data.column(j).iter().sum::<f64>() / n;
            let var: f64 = once.data.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-10);
            assert_relative_eq!(var, 1.0, epsilon = 1e-10);
        }

        let constant = DMatrix::from_fn(5, 2, |_, j| if j == 0 { 1.0 } else { 2.0 });
        assert!(matches!(
            standardize(&constant),
            Err(Error::ZeroVarianceColumn(0))
        ));
        assert!(matches!(
            standardize(&DMatrix::from_row_slice(1, 2, &[1.0, 2.0])),
            Err(Error::TooFewObservations { need: 2 })
        ));
    }

    #[test]
    fn sandwich_scalar_identity_case() {
        // basis {I}, Sigma0 = sigma^2 I, mu4 = 3 -> avar = 2 sigma^4 / p
        let p = 6;
        let sigma2 = 1.7;
        let basis = SimilarityBasis::with_identity(p, vec![]).unwrap();
        let sigma0 =
            DenseSymMatrix::new(DMatrix::from_diagonal_element(p, p, sigma2)).unwrap();
        let out = sandwich_covariance(&basis, &sigma0, 3.0).unwrap();
        assert_relative_eq!(out.g0[(0, 0)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(out.g1[(0, 0)], sigma2 * sigma2, max_relative = 1e-10);
        assert_relative_eq!(
            out.avar[(0, 0)],
            2.0 * sigma2 * sigma2 / p as f64,
            max_relative = 1e-10
        );
    }

    #[test]
    fn gaussian_case_drops_h_term() {
        let mut rng = StdRng::seed_from_u64(2);
        let p = 8;
        let w = crate::similarity::bernoulli_similarity(p, 0.4, 3).unwrap();
        let basis = SimilarityBasis::with_identity(p, vec![w]).unwrap();
        let sigma0 = basis.densify(&[3.0, 0.5]).unwrap();
        let out = sandwich_covariance(&basis, &sigma0, 3.0).unwrap();
        // direct: avar = 2 p^{-1} g0^{-1} g1 g0^{-1}
        let g0_inv = out.g0.clone().try_inverse().unwrap();
        let direct = (&g0_inv * out.g1.map(|v| 2.0 * v) * &g0_inv).map(|v| v / p as f64);
        assert_relative_eq!((&out.avar - &direct).norm(), 0.0, epsilon = 1e-10);
        let _ = rng.random::<u64>();
    }

    #[test]
    fn h_matches_dense_hadamard_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        let p = 8;
        let w1 = crate::similarity::bernoulli_similarity(p, 0.5, 17).unwrap();
        let w2 = {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            crate::similarity::outerproduct_similarity(&x).unwrap()
        };
        let basis = SimilarityBasis::with_identity(p, vec![w1, w2]).unwrap();
        let sigma0 = basis.densify(&[4.0, 0.8, 0.6]).unwrap();
        let out = sandwich_covariance(&basis, &sigma0, 3.4).unwrap();

        let sqrt = sigma0.sqrt_pd().unwrap();
        for k in 0..3 {
            for l in 0..3 {
                let mk = &sqrt * basis.get(k).to_dense().as_dmatrix() * &sqrt;
                let ml = &sqrt * basis.get(l).to_dense().as_dmatrix() * &sqrt;
                let hadamard = mk.component_mul(&ml);
                let oracle = hadamard.trace() / p as f64;
                assert_relative_eq!(out.h[(k, l)], oracle, max_relative = 1e-9, epsilon = 1e-12);
                // g1 against the dense product trace as well
                let oracle_g1 = (&mk * &ml).trace() / p as f64;
                assert_relative_eq!(out.g1[(k, l)], oracle_g1, max_relative = 1e-9, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn avar_is_permutation_equivariant() {
        let p = 10;
        let w1 = crate::similarity::bernoulli_similarity(p, 0.3, 5).unwrap();
        let w2 = crate::similarity::bernoulli_similarity(p, 0.3, 6).unwrap();
        let fwd =
            SimilarityBasis::from_matrices(vec![SparseSymMatrix::identity(p, 1.0), w1.clone(), w2.clone()])
                .unwrap();
        let rev =
            SimilarityBasis::from_matrices(vec![w2, w1, SparseSymMatrix::identity(p, 1.0)]).unwrap();
        let sigma0 = fwd.densify(&[5.0, 1.0, 0.7]).unwrap();
        let a = sandwich_covariance(&fwd, &sigma0, 3.0).unwrap();
        let b = sandwich_covariance(&rev, &sigma0, 3.0).unwrap();
        let perm = [2usize, 1, 0];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    a.avar[(i, j)],
                    b.avar[(perm[i], perm[j])],
                    max_relative = 1e-9,
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn sandwich_rejects_indefinite_sigma() {
        let basis = SimilarityBasis::with_identity(2, vec![]).unwrap();
        let sigma0 =
            DenseSymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        assert!(matches!(
            sandwich_covariance(&basis, &sigma0, 3.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
