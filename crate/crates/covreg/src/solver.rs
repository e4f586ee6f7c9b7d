//! The Gram-system reduction of the Frobenius least-squares loss and the
//! OLS / oracle / weighted-Lasso / LLA solvers built on it.
//!
//! All solves happen in `K + 1` dimensions: the loss
//! `Q_n(beta) = (2np)^{-1} sum_i ||y_i y_i^T - Sigma(beta)||_F^2`
//! reduces to `(c - 2 beta' m + beta' G beta) / (2p)` with
//! `G[k][l] = tr(W_k W_l)`, `m[k] = n^{-1} sum_i y_i' W_k y_i`, and
//! `c = n^{-1} sum_i (y_i' y_i)^2`.

use nalgebra::{Cholesky, DMatrix, DVector, RealField};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{quad_form, trace_product, SimilarityBasis};
use crate::penalty::PenaltySpec;
use crate::scalar::{as_f64, sf, su, Scalar};

/// Coefficients below this magnitude are treated as exact zeros when
/// reporting the support (coordinate descent produces exact zeros; the
/// threshold only guards float noise).
pub const SUPPORT_TOL: f64 = 1e-10;

/// Condition-estimate ceiling for the direct solves.
const MAX_CONDITION: f64 = 1e12;

/// The sufficient statistics of the least-squares problem.
#[derive(Debug, Clone)]
pub struct GramSystem<S> {
    gram: DMatrix<S>,
    moments: DVector<S>,
    p: usize,
    n: usize,
    c: S,
}

impl<S: Scalar> GramSystem<S> {
    /// Assemble from a basis and an `n x p` observation matrix (rows are
    /// replicates).
    pub fn assemble(basis: &SimilarityBasis<S>, observations: &DMatrix<S>) -> Result<Self> {
        let n = observations.nrows();
        if n == 0 {
            return Err(Error::TooFewObservations { need: 1 });
        }
        if observations.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                actual: observations.ncols(),
            });
        }
        let kp1 = basis.len();
        let mut gram = DMatrix::zeros(kp1, kp1);
        for k in 0..kp1 {
            for l in k..kp1 {
                let t = trace_product(basis.get(k), basis.get(l))?;
                gram[(k, l)] = t;
                gram[(l, k)] = t;
            }
        }
        let inv_n = S::one() / su::<S>(n);
        let mut moments = DVector::zeros(kp1);
        let mut c = S::zero();
        let mut row = vec![S::zero(); basis.dim()];
        for i in 0..n {
            for (j, r) in row.iter_mut().enumerate() {
                *r = observations[(i, j)];
            }
            let yy = row.iter().map(|&v| v * v).fold(S::zero(), |a, v| a + v);
            c += yy * yy;
            for k in 0..kp1 {
                moments[k] += quad_form(basis.get(k), &row)?;
            }
        }
        moments *= inv_n;
        c *= inv_n;
        Ok(Self {
            gram,
            moments,
            p: basis.dim(),
            n,
            c,
        })
    }

    /// Build from precomputed parts (used by tests and synthetic systems).
    pub fn from_parts(gram: DMatrix<S>, moments: DVector<S>, p: usize, n: usize, c: S) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::DimensionMismatch {
                expected: gram.nrows(),
                actual: gram.ncols(),
            });
        }
        if moments.len() != gram.nrows() {
            return Err(Error::LengthMismatch {
                expected: gram.nrows(),
                actual: moments.len(),
            });
        }
        let max_abs = gram.iter().map(|v| v.abs()).fold(S::zero(), S::max);
        let tol = sf::<S>(1e-10) * S::max(S::one(), max_abs);
        for i in 0..gram.nrows() {
            for j in (i + 1)..gram.ncols() {
                if (gram[(i, j)] - gram[(j, i)]).abs() > tol {
                    return Err(Error::Asymmetric {
                        asymmetry: as_f64((gram[(i, j)] - gram[(j, i)]).abs()),
                        tolerance: as_f64(tol),
                    });
                }
            }
        }
        Ok(Self {
            gram,
            moments,
            p,
            n,
            c,
        })
    }

    /// Number of coefficients, `K + 1`.
    pub fn len(&self) -> usize {
        self.moments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moments.is_empty()
    }

    /// `K`.
    pub fn k(&self) -> usize {
        self.len() - 1
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gram(&self) -> &DMatrix<S> {
        &self.gram
    }

    pub fn moments(&self) -> &DVector<S> {
        &self.moments
    }

    pub fn c(&self) -> S {
        self.c
    }

    /// Averaged residual sum of squares
    /// `n^{-1} sum_i ||y_i y_i^T - Sigma(beta)||_F^2`, clamped at zero.
    pub fn rss(&self, beta: &DVector<S>) -> Result<S> {
        if beta.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: beta.len(),
            });
        }
        let quad = (beta.transpose() * &self.gram * beta)[(0, 0)];
        let cross = beta.dot(&self.moments);
        // assembled systems keep this above -1e-8 c; synthetic ones may not,
        // so negative values are clamped rather than asserted
        let v = self.c - sf::<S>(2.0) * cross + quad;
        Ok(S::max(v, S::zero()))
    }

    /// The loss `Q_n(beta) = rss(beta) / (2p)`.
    pub fn loss(&self, beta: &DVector<S>) -> Result<S> {
        Ok(self.rss(beta)? / (sf::<S>(2.0) * su::<S>(self.p)))
    }

    /// Penalized loss `Q_n(beta) + sum_k p_lambda(|beta_k|)` over the
    /// penalized coordinates.
    pub fn penalized_loss(
        &self,
        beta: &DVector<S>,
        spec: &PenaltySpec<S>,
        penalize_intercept: bool,
    ) -> Result<S> {
        let mut total = self.loss(beta)?;
        for k in 0..beta.len() {
            if k == 0 && !penalize_intercept {
                continue;
            }
            total += spec.value(beta[k].abs())?;
        }
        Ok(total)
    }
}

/// A coefficient vector with its exact-zero support.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<S> {
    beta: DVector<S>,
    support: Vec<usize>,
}

impl<S: Scalar> Coefficients<S> {
    /// Snap magnitudes at or below the support tolerance to exact zero and
    /// record the support.
    pub fn new(mut beta: DVector<S>) -> Self {
        let tol = sf::<S>(SUPPORT_TOL);
        let mut support = Vec::new();
        for k in 0..beta.len() {
            if beta[k].abs() <= tol {
                beta[k] = S::zero();
            } else {
                support.push(k);
            }
        }
        Self { beta, support }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            beta: DVector::zeros(len),
            support: Vec::new(),
        }
    }

    pub fn beta(&self) -> &DVector<S> {
        &self.beta
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// Solver diagnostics attached to an estimate.
#[derive(Debug, Clone)]
pub struct FitResult<S> {
    pub coefficients: Coefficients<S>,
    pub iterations: usize,
    pub converged: bool,
    /// Value of the objective that was minimized (penalized loss).
    pub objective: S,
    pub kkt_residual: S,
}

/// Coordinate-descent controls.
#[derive(Debug, Clone, Copy)]
pub struct CdOptions<S> {
    /// Convergence tolerance on both the max coordinate change per sweep and
    /// the KKT residual.
    pub tol: S,
    pub max_sweeps: usize,
}

impl<S: Scalar> Default for CdOptions<S> {
    fn default() -> Self {
        Self {
            tol: sf(1e-8),
            max_sweeps: 10_000,
        }
    }
}

/// Outer-loop controls for the LLA algorithm.
#[derive(Debug, Clone, Copy)]
pub struct LlaOptions<S> {
    pub cd: CdOptions<S>,
    /// Two iterations suffice with high probability; the extra budget is
    /// fixed-point polish.
    pub max_outer: usize,
    /// Penalize the intercept coordinate 0. Off by default.
    pub penalize_intercept: bool,
}

impl<S: Scalar> Default for LlaOptions<S> {
    fn default() -> Self {
        Self {
            cd: CdOptions::default(),
            max_outer: 50,
            penalize_intercept: false,
        }
    }
}

fn solve_restricted<S: Scalar + RealField>(
    system: &GramSystem<S>,
    support: &[usize],
) -> Result<DVector<S>> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut seen = vec![false; system.len()];
    for &k in support {
        if k >= system.len() {
            return Err(Error::SupportOutOfRange {
                index: k,
                len: system.len(),
            });
        }
        if seen[k] {
            return Err(Error::SupportOutOfRange {
                index: k,
                len: system.len(),
            });
        }
        seen[k] = true;
    }
    let m = support.len();
    let g = DMatrix::from_fn(m, m, |a, b| system.gram[(support[a], support[b])]);
    let rhs = DVector::from_fn(m, |a, _| system.moments[support[a]]);
    let chol = Cholesky::new(g).ok_or(Error::NearSingularGram {
        cond: f64::INFINITY,
    })?;
    // Condition estimate from the Cholesky diagonal; exact for diagonal
    // systems, order-of-magnitude otherwise.
    let diag = chol.l_dirty();
    let mut dmin = S::infinity();
    let mut dmax = S::zero();
    for i in 0..m {
        let d = diag[(i, i)];
        dmin = Float::min(dmin, d);
        dmax = Float::max(dmax, d);
    }
    let cond = Float::powi(dmax / dmin, 2);
    if !Float::is_finite(cond) || cond > sf(MAX_CONDITION) {
        return Err(Error::NearSingularGram {
            cond: as_f64(cond),
        });
    }
    Ok(chol.solve(&rhs))
}

/// Ordinary least squares: `beta = Sigma_W^{-1} Sigma_WY`.
pub fn ols<S: Scalar + RealField>(system: &GramSystem<S>) -> Result<Coefficients<S>> {
    let full: Vec<usize> = (0..system.len()).collect();
    oracle_fit(system, &full)
}

/// Least squares restricted to a known support, zeros elsewhere.
pub fn oracle_fit<S: Scalar + RealField>(
    system: &GramSystem<S>,
    support: &[usize],
) -> Result<Coefficients<S>> {
    let restricted = solve_restricted(system, support)?;
    let mut beta = DVector::zeros(system.len());
    for (a, &k) in support.iter().enumerate() {
        beta[k] = restricted[a];
    }
    Ok(Coefficients::new(beta))
}

#[inline]
fn soft_threshold<S: Scalar>(z: S, t: S) -> S {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        S::zero()
    }
}

fn check_weights<S: Scalar>(system: &GramSystem<S>, weights: &DVector<S>) -> Result<()> {
    if weights.len() != system.len() {
        return Err(Error::LengthMismatch {
            expected: system.len(),
            actual: weights.len(),
        });
    }
    for (k, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < S::zero() {
            return Err(Error::InvalidWeight { k });
        }
    }
    Ok(())
}

fn kkt_residual_with_grad<S: Scalar>(
    beta: &DVector<S>,
    weights: &DVector<S>,
    gbeta: &DVector<S>,
    moments: &DVector<S>,
    p: S,
) -> S {
    let mut worst = S::zero();
    for k in 0..beta.len() {
        let grad = (gbeta[k] - moments[k]) / p;
        let r = if beta[k] != S::zero() {
            (grad + weights[k] * beta[k].signum()).abs()
        } else {
            S::max(grad.abs() - weights[k], S::zero())
        };
        worst = S::max(worst, r);
    }
    worst
}

/// Max-norm violation of the subgradient optimality conditions of the
/// weighted-Lasso objective at `beta`.
pub fn kkt_residual<S: Scalar>(
    system: &GramSystem<S>,
    beta: &DVector<S>,
    weights: &DVector<S>,
) -> Result<S> {
    if beta.len() != system.len() {
        return Err(Error::LengthMismatch {
            expected: system.len(),
            actual: beta.len(),
        });
    }
    check_weights(system, weights)?;
    let gbeta = &system.gram * beta;
    Ok(kkt_residual_with_grad(
        beta,
        weights,
        &gbeta,
        &system.moments,
        su(system.p),
    ))
}

/// Cyclic coordinate descent on `Q_n(beta) + sum_k w_k |beta_k|` from zero.
pub fn weighted_lasso<S: Scalar>(
    system: &GramSystem<S>,
    weights: &DVector<S>,
    options: &CdOptions<S>,
) -> Result<FitResult<S>> {
    weighted_lasso_from(system, weights, &DVector::zeros(system.len()), options)
}

/// Cyclic coordinate descent warm-started at `init`.
///
/// The coordinate update is the exact scalar minimizer
/// `beta_k <- S(m_k - sum_{l != k} G_kl beta_l, p w_k) / G_kk`
/// (the loss carries the `1 / (2p)` factor while the Gram is unnormalized,
/// so the soft-threshold level is `p w_k`).
pub fn weighted_lasso_from<S: Scalar>(
    system: &GramSystem<S>,
    weights: &DVector<S>,
    init: &DVector<S>,
    options: &CdOptions<S>,
) -> Result<FitResult<S>> {
    check_weights(system, weights)?;
    if init.len() != system.len() {
        return Err(Error::LengthMismatch {
            expected: system.len(),
            actual: init.len(),
        });
    }
    let kp1 = system.len();
    let g = &system.gram;
    let m = &system.moments;
    let p = su::<S>(system.p);
    let mut beta = init.clone();
    let mut gbeta = g * &beta;
    let mut sweeps = 0usize;
    let mut converged = false;
    while sweeps < options.max_sweeps {
        sweeps += 1;
        let mut max_delta = S::zero();
        for k in 0..kp1 {
            let gkk = g[(k, k)];
            let partial = m[k] - (gbeta[k] - gkk * beta[k]);
            let threshold = p * weights[k];
            let new = if gkk > S::zero() {
                soft_threshold(partial, threshold) / gkk
            } else if partial.abs() <= threshold {
                S::zero()
            } else {
                return Err(Error::DegenerateCoordinate { k });
            };
            let delta = new - beta[k];
            if delta != S::zero() {
                gbeta.axpy(delta, &g.column(k), S::one());
                beta[k] = new;
                max_delta = S::max(max_delta, delta.abs());
            }
        }
        if max_delta <= options.tol {
            // Refresh the cached product before certifying optimality.
            gbeta = g * &beta;
            let kkt = kkt_residual_with_grad(&beta, weights, &gbeta, m, p);
            if kkt <= options.tol {
                converged = true;
                break;
            }
            if max_delta == S::zero() {
                // Fixed point of the coordinate map that still misses the KKT
                // tolerance: further sweeps cannot improve it.
                break;
            }
        }
    }
    gbeta = g * &beta;
    let kkt = kkt_residual_with_grad(&beta, weights, &gbeta, m, p);
    let mut objective = system.loss(&beta)?;
    for k in 0..kp1 {
        objective += weights[k] * beta[k].abs();
    }
    Ok(FitResult {
        coefficients: Coefficients::new(beta),
        iterations: sweeps,
        converged,
        objective,
        kkt_residual: kkt,
    })
}

/// Plain Lasso at level `lambda0`: uniform weights, intercept unpenalized
/// unless `penalize_intercept` is set.
pub fn lasso<S: Scalar>(
    system: &GramSystem<S>,
    lambda0: S,
    penalize_intercept: bool,
    options: &CdOptions<S>,
) -> Result<FitResult<S>> {
    lasso_from(
        system,
        lambda0,
        penalize_intercept,
        &DVector::zeros(system.len()),
        options,
    )
}

/// Plain Lasso warm-started at `init`.
pub fn lasso_from<S: Scalar>(
    system: &GramSystem<S>,
    lambda0: S,
    penalize_intercept: bool,
    init: &DVector<S>,
    options: &CdOptions<S>,
) -> Result<FitResult<S>> {
    let weights = DVector::from_fn(system.len(), |k, _| {
        if k == 0 && !penalize_intercept {
            S::zero()
        } else {
            lambda0
        }
    });
    weighted_lasso_from(system, &weights, init, options)
}

fn lla_weights<S: Scalar>(
    spec: &PenaltySpec<S>,
    beta: &DVector<S>,
    penalize_intercept: bool,
) -> DVector<S> {
    DVector::from_fn(beta.len(), |k, _| {
        if k == 0 && !penalize_intercept {
            S::zero()
        } else {
            spec.deriv(beta[k].abs()).expect("|beta| is nonnegative")
        }
    })
}

/// Local linear approximation: iterate weighted Lassos with weights
/// `w_k = p'_lambda(|beta_k|)` until the iterates or the weight vector
/// stabilize.
pub fn lla<S: Scalar>(
    system: &GramSystem<S>,
    spec: &PenaltySpec<S>,
    initial: &Coefficients<S>,
    options: &LlaOptions<S>,
) -> Result<FitResult<S>> {
    lla_with_objectives(system, spec, initial, options).map(|(fit, _)| fit)
}

/// Like [`lla`] but also returns the penalized objective after each outer
/// iteration (the majorize-minimize descent trajectory).
pub fn lla_with_objectives<S: Scalar>(
    system: &GramSystem<S>,
    spec: &PenaltySpec<S>,
    initial: &Coefficients<S>,
    options: &LlaOptions<S>,
) -> Result<(FitResult<S>, Vec<S>)> {
    if initial.len() != system.len() {
        return Err(Error::LengthMismatch {
            expected: system.len(),
            actual: initial.len(),
        });
    }
    let mut beta = initial.beta().clone();
    let mut weights = lla_weights(spec, &beta, options.penalize_intercept);
    let mut objectives = Vec::new();
    let mut outer = 0usize;
    let mut stable = false;
    let mut inner_converged = false;
    while outer < options.max_outer {
        outer += 1;
        let fit = weighted_lasso_from(system, &weights, &beta, &options.cd)?;
        inner_converged = fit.converged;
        let new_beta = fit.coefficients.beta().clone();
        objectives.push(system.penalized_loss(&new_beta, spec, options.penalize_intercept)?);
        let new_weights = lla_weights(spec, &new_beta, options.penalize_intercept);
        let max_delta = (0..beta.len())
            .map(|k| (new_beta[k] - beta[k]).abs())
            .fold(S::zero(), S::max);
        let weights_stable = new_weights == weights;
        beta = new_beta;
        weights = new_weights;
        if weights_stable || max_delta <= options.cd.tol {
            stable = true;
            break;
        }
    }
    let objective = system.penalized_loss(&beta, spec, options.penalize_intercept)?;
    let kkt = kkt_residual(system, &beta, &weights)?;
    Ok((
        FitResult {
            coefficients: Coefficients::new(beta),
            iterations: outer,
            converged: stable && inner_converged && kkt <= options.cd.tol,
            objective,
            kkt_residual: kkt,
        },
        objectives,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseSymMatrix;
    use crate::penalty::PenaltyFamily;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn identity_basis(p: usize) -> SimilarityBasis<f64> {
        SimilarityBasis::with_identity(p, vec![]).unwrap()
    }

    fn random_basis(rng: &mut StdRng, p: usize, k: usize) -> SimilarityBasis<f64> {
        let ws = (0..k)
            .map(|_| {
                crate::similarity::bernoulli_similarity(p, 5.0 / p as f64, rng.random()).unwrap()
            })
            .collect();
        SimilarityBasis::with_identity(p, ws).unwrap()
    }

    fn random_system(rng: &mut StdRng, p: usize, k: usize, n: usize) -> GramSystem<f64> {
        let basis = random_basis(rng, p, k);
        let obs = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        GramSystem::assemble(&basis, &obs).unwrap()
    }

    #[test]
    fn assemble_identity_only() {
        let basis = identity_basis(4);
        let y = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 0.5, -1.0]);
        let sys = GramSystem::assemble(&basis, &y).unwrap();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        assert_eq!(sys.gram()[(0, 0)], 4.0);
        assert_eq!(sys.moments()[0], yy);
        assert_eq!(sys.c(), yy * yy);
    }

    #[test]
    fn assemble_zero_diag_gram_cross_term() {
        let w = SparseSymMatrix::from_triplets(&[(0, 1, 1.0)], 3, true).unwrap();
        let basis = SimilarityBasis::with_identity(3, vec![w]).unwrap();
        let y = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let sys = GramSystem::assemble(&basis, &y).unwrap();
        assert_eq!(sys.gram()[(0, 1)], 0.0);
        assert_eq!(sys.gram()[(0, 0)], 3.0);
    }

    #[test]
    fn assemble_duplicate_rows_average_to_single_row_values() {
        let mut rng = StdRng::seed_from_u64(1);
        let basis = random_basis(&mut rng, 10, 3);
        let row: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let one = DMatrix::from_row_slice(1, 10, &row);
        let two = DMatrix::from_fn(2, 10, |_, j| row[j]);
        let s1 = GramSystem::assemble(&basis, &one).unwrap();
        let s2 = GramSystem::assemble(&basis, &two).unwrap();
        assert_relative_eq!(
            (s1.moments() - s2.moments()).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(s1.c(), s2.c(), max_relative = 1e-14);
        assert_eq!(s2.n(), 2);
    }

    #[test]
    fn rss_matches_dense_frobenius_oracle() {
        let mut rng = StdRng::seed_from_u64(2);
        let p = 10;
        let basis = random_basis(&mut rng, p, 4);
        let y = DMatrix::from_fn(1, p, |_, _| rng.random_range(-1.0..1.0));
        let sys = GramSystem::assemble(&basis, &y).unwrap();

        // beta = 0 -> rss = c
        assert_relative_eq!(
            sys.rss(&DVector::zeros(5)).unwrap(),
            sys.c(),
            max_relative = 1e-14
        );

        let beta = ols(&sys).unwrap();
        let sigma = basis.densify(beta.beta().as_slice()).unwrap();
        let yv = y.transpose();
        let outer = &yv * yv.transpose();
        let diff = outer - sigma.as_dmatrix();
        let dense: f64 = diff.iter().map(|v| v * v).sum();
        assert_relative_eq!(sys.rss(beta.beta()).unwrap(), dense, max_relative = 1e-10);
    }

    #[test]
    fn rss_identity_scalar_algebra() {
        let basis = identity_basis(5);
        let y = DMatrix::from_row_slice(1, 5, &[1.0, -2.0, 0.5, 2.0, 1.5]);
        let sys = GramSystem::assemble(&basis, &y).unwrap();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let beta = DVector::from_row_slice(&[yy / 5.0]);
        assert_relative_eq!(
            sys.rss(&beta).unwrap(),
            sys.c() - yy * yy / 5.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn ols_scalar_and_diagonal_cases() {
        let basis = identity_basis(3);
        let y = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        let sys = GramSystem::assemble(&basis, &y).unwrap();
        let fit = ols(&sys).unwrap();
        assert_relative_eq!(fit.beta()[0], 9.0 / 3.0, max_relative = 1e-14);
        assert_eq!(fit.support(), &[0]);

        let sys = GramSystem::from_parts(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]),
            DVector::from_row_slice(&[4.0, 10.0]),
            4,
            1,
            100.0,
        )
        .unwrap();
        let fit = ols(&sys).unwrap();
        assert_relative_eq!(fit.beta()[0], 2.0);
        assert_relative_eq!(fit.beta()[1], 2.0);
    }

    #[test]
    fn ols_solves_to_small_residual() {
        let mut rng = StdRng::seed_from_u64(3);
        let sys = random_system(&mut rng, 30, 5, 1);
        let fit = ols(&sys).unwrap();
        let resid = (sys.gram() * fit.beta() - sys.moments()).norm();
        assert!(resid <= 1e-8 * sys.moments().norm());
    }

    #[test]
    fn ols_rejects_singular_gram() {
        let w = SparseSymMatrix::from_triplets(&[(0, 1, 1.0)], 3, true).unwrap();
        // duplicated matrix makes the Gram exactly singular
        let basis =
            SimilarityBasis::with_identity(3, vec![w.clone(), w]).unwrap();
        let y = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let sys = GramSystem::assemble(&basis, &y).unwrap();
        assert!(matches!(ols(&sys), Err(Error::NearSingularGram { .. })));
    }

    #[test]
    fn oracle_fit_restriction() {
        let mut rng = StdRng::seed_from_u64(4);
        let sys = random_system(&mut rng, 25, 4, 1);

        // full support equals OLS exactly (same factorization path)
        let full: Vec<usize> = (0..sys.len()).collect();
        assert_eq!(oracle_fit(&sys, &full).unwrap(), ols(&sys).unwrap());

        // support {0} with identity first: beta_0 = mean quad form / p
        let fit = oracle_fit(&sys, &[0]).unwrap();
        assert_relative_eq!(
            fit.beta()[0],
            sys.moments()[0] / sys.p() as f64,
            max_relative = 1e-12
        );

        // support {0, 2}: matches the hand-restricted 2x2 solve
        let fit = oracle_fit(&sys, &[0, 2]).unwrap();
        let g = sys.gram();
        let (a, b, d) = (g[(0, 0)], g[(0, 2)], g[(2, 2)]);
        let (m0, m2) = (sys.moments()[0], sys.moments()[2]);
        let det = a * d - b * b;
        assert_relative_eq!(fit.beta()[0], (d * m0 - b * m2) / det, max_relative = 1e-10);
        assert_relative_eq!(fit.beta()[2], (a * m2 - b * m0) / det, max_relative = 1e-10);
        assert_eq!(fit.beta()[1], 0.0);
        assert_eq!(fit.beta()[3], 0.0);

        assert!(matches!(
            oracle_fit(&sys, &[]),
            Err(Error::EmptySupport)
        ));
        assert!(matches!(
            oracle_fit(&sys, &[9]),
            Err(Error::SupportOutOfRange { .. })
        ));
    }

    #[test]
    fn weighted_lasso_zero_weights_recovers_ols() {
        let mut rng = StdRng::seed_from_u64(5);
        let sys = random_system(&mut rng, 30, 4, 1);
        let weights = DVector::zeros(sys.len());
        let fit = weighted_lasso(&sys, &weights, &CdOptions::default()).unwrap();
        assert!(fit.converged);
        let direct = ols(&sys).unwrap();
        for k in 0..sys.len() {
            assert!((fit.coefficients.beta()[k] - direct.beta()[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn weighted_lasso_scalar_hand_kkt() {
        // Sigma_W = [10], Sigma_WY = [5], p = 10, weight 0.2:
        // beta = S(5, 10 * 0.2) / 10 = 0.3
        let sys = GramSystem::from_parts(
            DMatrix::from_row_slice(1, 1, &[10.0]),
            DVector::from_row_slice(&[5.0]),
            10,
            1,
            10.0,
        )
        .unwrap();
        let fit = weighted_lasso(
            &sys,
            &DVector::from_row_slice(&[0.2]),
            &CdOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(fit.coefficients.beta()[0], 0.3, max_relative = 1e-12);
        assert!(fit.kkt_residual <= 1e-10);

        // weight 1 -> threshold 10 >= |5| -> exact zero
        let fit = weighted_lasso(
            &sys,
            &DVector::from_row_slice(&[1.0]),
            &CdOptions::default(),
        )
        .unwrap();
        assert_eq!(fit.coefficients.beta()[0], 0.0);
        assert!(fit.converged);
    }

    #[test]
    fn kkt_residual_cases() {
        let sys = GramSystem::from_parts(
            DMatrix::from_row_slice(1, 1, &[10.0]),
            DVector::from_row_slice(&[5.0]),
            10,
            1,
            10.0,
        )
        .unwrap();
        // exact hand solution
        let kkt = kkt_residual(
            &sys,
            &DVector::from_row_slice(&[0.3]),
            &DVector::from_row_slice(&[0.2]),
        )
        .unwrap();
        assert!(kkt <= 1e-10);

        // beta = 0 with huge weights is optimal
        let kkt = kkt_residual(
            &sys,
            &DVector::from_row_slice(&[0.0]),
            &DVector::from_row_slice(&[100.0]),
        )
        .unwrap();
        assert_eq!(kkt, 0.0);

        // OLS with zero weights has zero gradient
        let mut rng = StdRng::seed_from_u64(6);
        let sys = random_system(&mut rng, 20, 3, 1);
        let fit = ols(&sys).unwrap();
        let kkt = kkt_residual(&sys, fit.beta(), &DVector::zeros(sys.len())).unwrap();
        assert!(kkt <= 1e-8);
    }

    #[test]
    fn weighted_lasso_beats_brute_force_grid() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let sys = random_system(&mut rng, 15, 2, 1);
            let scale = sys.moments().amax() / sys.gram()[(0, 0)];
            let weights = DVector::from_fn(sys.len(), |k, _| {
                if k == 0 {
                    0.0
                } else {
                    rng.random_range(0.0..0.05 * scale)
                }
            });
            let fit = weighted_lasso(&sys, &weights, &CdOptions::default()).unwrap();
            let objective = |beta: &DVector<f64>| {
                sys.loss(beta).unwrap()
                    + (0..beta.len())
                        .map(|k| weights[k] * beta[k].abs())
                        .sum::<f64>()
            };
            // coarse grid around the solution
            let b = fit.coefficients.beta();
            let span = 0.5 * (1.0 + b.amax());
            let steps = 21;
            let mut best = f64::INFINITY;
            for i in 0..steps {
                for j in 0..steps {
                    for k in 0..steps {
                        let cand = DVector::from_row_slice(&[
                            b[0] + span * (i as f64 / (steps - 1) as f64 - 0.5),
                            b[1] + span * (j as f64 / (steps - 1) as f64 - 0.5),
                            b[2] + span * (k as f64 / (steps - 1) as f64 - 0.5),
                        ]);
                        best = best.min(objective(&cand));
                    }
                }
            }
            assert!(fit.objective <= best + 1e-9);
        }
    }

    #[test]
    fn cd_objective_monotone_per_sweep() {
        // replay single sweeps by bounding max_sweeps
        let mut rng = StdRng::seed_from_u64(8);
        let sys = random_system(&mut rng, 20, 6, 1);
        let weights = DVector::from_fn(sys.len(), |k, _| if k == 0 { 0.0 } else { 0.01 });
        let objective = |beta: &DVector<f64>| {
            sys.loss(beta).unwrap()
                + (0..beta.len())
                    .map(|k| weights[k] * beta[k].abs())
                    .sum::<f64>()
        };
        let mut beta = DVector::zeros(sys.len());
        let mut prev = objective(&beta);
        for _ in 0..30 {
            let fit = weighted_lasso_from(
                &sys,
                &weights,
                &beta,
                &CdOptions {
                    tol: 0.0,
                    max_sweeps: 1,
                },
            )
            .unwrap();
            beta = fit.coefficients.beta().clone();
            let cur = objective(&beta);
            assert!(cur <= prev + 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn lla_zero_lambda_returns_ols() {
        let mut rng = StdRng::seed_from_u64(9);
        let sys = random_system(&mut rng, 25, 4, 1);
        let spec = PenaltySpec::scad(0.0, 3.7).unwrap();
        let initial = Coefficients::new(DVector::from_fn(sys.len(), |_, _| {
            rng.random_range(-1.0..1.0)
        }));
        let fit = lla(&sys, &spec, &initial, &LlaOptions::default()).unwrap();
        let direct = ols(&sys).unwrap();
        for k in 0..sys.len() {
            assert!((fit.coefficients.beta()[k] - direct.beta()[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn lla_zero_init_first_iterate_is_lasso_at_deriv_zero() {
        let mut rng = StdRng::seed_from_u64(10);
        for family in [PenaltyFamily::Scad, PenaltyFamily::Mcp] {
            let sys = random_system(&mut rng, 20, 5, 1);
            let lambda = 0.3 * sys.moments().amax() / sys.p() as f64;
            let spec = PenaltySpec::new(family, lambda, None).unwrap();
            let opts = LlaOptions {
                max_outer: 1,
                ..LlaOptions::default()
            };
            let fit = lla(&sys, &spec, &Coefficients::zeros(sys.len()), &opts).unwrap();
            let level = spec.deriv(0.0).unwrap();
            let direct = lasso(&sys, level, false, &CdOptions::default()).unwrap();
            for k in 0..sys.len() {
                assert!(
                    (fit.coefficients.beta()[k] - direct.coefficients.beta()[k]).abs() < 1e-8
                );
            }
        }
    }

    #[test]
    fn lla_objective_nonincreasing() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let sys = random_system(&mut rng, 20, 8, 1);
            let lambda = 0.2 * sys.moments().amax() / sys.p() as f64;
            let spec = PenaltySpec::scad(lambda, 3.7).unwrap();
            let lasso_fit = lasso(&sys, lambda, false, &CdOptions::default()).unwrap();
            let (_, objectives) = lla_with_objectives(
                &sys,
                &spec,
                &lasso_fit.coefficients,
                &LlaOptions::default(),
            )
            .unwrap();
            for w in objectives.windows(2) {
                assert!(w[1] <= w[0] + 1e-8, "objectives {objectives:?}");
            }
        }
    }

    #[test]
    fn scaling_consistency_quadratic_in_data() {
        let mut rng = StdRng::seed_from_u64(12);
        let p = 20;
        let basis = random_basis(&mut rng, p, 4);
        let y = DMatrix::from_fn(1, p, |_, _| rng.random_range(-1.0..1.0));
        let scaled = y.map(|v| 3.0 * v);
        let s1 = GramSystem::assemble(&basis, &y).unwrap();
        let s2 = GramSystem::assemble(&basis, &scaled).unwrap();
        assert_eq!(s1.gram(), s2.gram());
        assert_relative_eq!(
            (s2.moments() - s1.moments() * 9.0).norm(),
            0.0,
            epsilon = 1e-9
        );
        let b1 = ols(&s1).unwrap();
        let b2 = ols(&s2).unwrap();
        for k in 0..s1.len() {
            assert_relative_eq!(b2.beta()[k], 9.0 * b1.beta()[k], max_relative = 1e-8);
        }
    }

    #[test]
    fn degenerate_coordinate_detection() {
        // zero matrix in the basis -> zero Gram row; harmless when its moment
        // is inside the threshold, an error when an update would be nonzero
        let gram = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let sys = GramSystem::from_parts(
            gram.clone(),
            DVector::from_row_slice(&[2.0, 0.0]),
            4,
            1,
            10.0,
        )
        .unwrap();
        let weights = DVector::from_row_slice(&[0.0, 0.1]);
        let fit = weighted_lasso(&sys, &weights, &CdOptions::default()).unwrap();
        assert_eq!(fit.coefficients.beta()[1], 0.0);

        let sys = GramSystem::from_parts(
            gram,
            DVector::from_row_slice(&[2.0, 99.0]),
            4,
            1,
            10.0,
        )
        .unwrap();
        assert!(matches!(
            weighted_lasso(&sys, &weights, &CdOptions::default()),
            Err(Error::DegenerateCoordinate { k: 1 })
        ));
    }

    #[test]
    fn max_sweeps_exhaustion_reports_unconverged() {
        let mut rng = StdRng::seed_from_u64(13);
        let sys = random_system(&mut rng, 20, 5, 1);
        let fit = weighted_lasso(
            &sys,
            &DVector::zeros(sys.len()),
            &CdOptions {
                tol: 0.0,
                max_sweeps: 2,
            },
        )
        .unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }
}
