//! Data-generating processes and the Monte Carlo replication harness.

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{DenseSymMatrix, SimilarityBasis};
use crate::scalar::{sf, su, Scalar};
use crate::similarity::{bernoulli_similarity, correlated_similarity};
use crate::solver::{self, Coefficients, GramSystem, LlaOptions};
use crate::tuning::{self, TuneOptions};

/// Scalars that can be sampled from the harness distributions.
pub trait SimScalar: Scalar + RealField {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn sample_uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_sim_scalar {
    ($t:ty) => {
        impl SimScalar for $t {
            fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }

            fn sample_uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random()
            }
        }
    };
}

impl_sim_scalar!(f32);
impl_sim_scalar!(f64);

/// Component distributions of the noise vector `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZDist {
    StandardNormal,
    /// `N(0, 5/9)` with probability 0.9, else `N(0, 5)`; unit variance.
    MixtureNormal,
    /// `Exp(1) - 1`.
    StandardizedExponential,
}

impl ZDist {
    pub fn name(&self) -> &'static str {
        match self {
            ZDist::StandardNormal => "standard_normal",
            ZDist::MixtureNormal => "mixture_normal",
            ZDist::StandardizedExponential => "standardized_exponential",
        }
    }
}

impl std::str::FromStr for ZDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard_normal" | "normal" => Ok(ZDist::StandardNormal),
            "mixture_normal" | "mixture" => Ok(ZDist::MixtureNormal),
            "standardized_exponential" | "exponential" => Ok(ZDist::StandardizedExponential),
            other => Err(Error::InvalidConfig(format!("unknown z distribution `{other}`"))),
        }
    }
}

/// How the similarity matrices are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WModel<S> {
    /// Binary entries with the given success probability (default `5/p`).
    Bernoulli { prob: Option<S> },
    /// Per-subject covariates from an AR(1) normal with the given
    /// correlation, turned into signed similarity matrices.
    CorrelatedAr { rho: S },
}

impl<S: Scalar> Default for WModel<S> {
    fn default() -> Self {
        WModel::Bernoulli { prob: None }
    }
}

/// One simulation scenario.
#[derive(Debug, Clone)]
pub struct DgpConfig<S> {
    pub p: usize,
    pub k: usize,
    pub beta0: Vec<S>,
    pub z_dist: ZDist,
    pub w_model: WModel<S>,
    /// Response replicates per draw.
    pub n: usize,
    pub seed: u64,
    /// Draw the basis once and share it across replications.
    pub freeze_basis: bool,
    pub pd_retry_cap: usize,
}

impl<S: Scalar> DgpConfig<S> {
    /// The standard scenario: `beta0 = (8, 1, 1, 1, 0, ...)`, Bernoulli
    /// similarity matrices, a single replicate.
    pub fn standard(p: usize, k: usize, z_dist: ZDist, seed: u64) -> Self {
        Self {
            p,
            k,
            beta0: default_beta0(k),
            z_dist,
            w_model: WModel::default(),
            n: 1,
            seed,
            freeze_basis: false,
            pd_retry_cap: 10,
        }
    }
}

/// `(8, 1, 1, 1, 0, ..., 0)` truncated to `K + 1` entries.
pub fn default_beta0<S: Scalar>(k: usize) -> Vec<S> {
    let mut beta = vec![S::zero(); k + 1];
    beta[0] = sf(8.0);
    for b in beta.iter_mut().skip(1).take(3) {
        *b = S::one();
    }
    beta
}

/// One i.i.d. draw of the noise vector.
pub fn generate_z<S: SimScalar, R: Rng + ?Sized>(dist: ZDist, p: usize, rng: &mut R) -> DVector<S> {
    let mut z = DVector::zeros(p);
    match dist {
        ZDist::StandardNormal => {
            for v in z.iter_mut() {
                *v = S::sample_standard_normal(rng);
            }
        }
        ZDist::MixtureNormal => {
            let sd_small = Float::sqrt(sf::<S>(5.0 / 9.0));
            let sd_large = Float::sqrt(sf::<S>(5.0));
            let p_small = sf::<S>(0.9);
            for v in z.iter_mut() {
                let sd = if S::sample_uniform01(rng) < p_small {
                    sd_small
                } else {
                    sd_large
                };
                *v = sd * S::sample_standard_normal(rng);
            }
        }
        ZDist::StandardizedExponential => {
            for v in z.iter_mut() {
                *v = S::sample_exp1(rng) - S::one();
            }
        }
    }
    z
}

/// A realized scenario: the drawn basis, observations, the generating
/// coefficients, and the true covariance.
#[derive(Debug, Clone)]
pub struct DgpDraw<S> {
    pub basis: SimilarityBasis<S>,
    pub observations: DMatrix<S>,
    pub truth: Coefficients<S>,
    pub sigma0: DenseSymMatrix<S>,
}

fn draw_basis<S: SimScalar>(
    config: &DgpConfig<S>,
    rng: &mut ChaCha8Rng,
) -> Result<(SimilarityBasis<S>, DenseSymMatrix<S>, DMatrix<S>)> {
    let p = config.p;
    for _ in 0..config.pd_retry_cap.max(1) {
        let mut ws = Vec::with_capacity(config.k);
        match config.w_model {
            WModel::Bernoulli { prob } => {
                let q = prob.unwrap_or_else(|| sf::<S>(5.0) / su::<S>(p));
                for _ in 0..config.k {
                    ws.push(bernoulli_similarity(p, q, rng.next_u64())?);
                }
            }
            WModel::CorrelatedAr { rho } => {
                // per-subject AR(1) covariate vectors; column k across
                // subjects builds W_k
                let mut x = DMatrix::<S>::zeros(p, config.k);
                let innov = Float::sqrt(S::one() - rho * rho);
                for j in 0..p {
                    let mut prev = S::sample_standard_normal(rng);
                    x[(j, 0)] = prev;
                    for k in 1..config.k {
                        prev = rho * prev + innov * S::sample_standard_normal(rng);
                        x[(j, k)] = prev;
                    }
                }
                for k in 0..config.k {
                    let col: Vec<S> = x.column(k).iter().copied().collect();
                    ws.push(correlated_similarity(&col)?);
                }
            }
        }
        let basis = SimilarityBasis::with_identity(p, ws)?;
        let sigma0 = basis.densify(&config.beta0)?;
        match sigma0.sqrt_pd() {
            Ok(sqrt) => return Ok((basis, sigma0, sqrt)),
            Err(Error::NotPositiveDefinite { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PdRetriesExhausted(config.pd_retry_cap))
}

fn draw_observations<S: SimScalar>(
    sqrt_sigma0: &DMatrix<S>,
    n: usize,
    dist: ZDist,
    rng: &mut ChaCha8Rng,
) -> DMatrix<S> {
    let p = sqrt_sigma0.nrows();
    let mut obs = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = generate_z::<S, _>(dist, p, rng);
        let y = sqrt_sigma0 * z;
        for j in 0..p {
            obs[(i, j)] = y[j];
        }
    }
    obs
}

/// Draw similarity matrices and responses `y = Sigma_0^{1/2} Z`.
///
/// A draw whose `Sigma_0` is not positive definite is regenerated up to the
/// retry cap.
pub fn dgp<S: SimScalar>(config: &DgpConfig<S>) -> Result<DgpDraw<S>> {
    if config.beta0.len() != config.k + 1 {
        return Err(Error::LengthMismatch {
            expected: config.k + 1,
            actual: config.beta0.len(),
        });
    }
    if config.n == 0 {
        return Err(Error::TooFewObservations { need: 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (basis, sigma0, sqrt) = draw_basis(config, &mut rng)?;
    let observations = draw_observations(&sqrt, config.n, config.z_dist, &mut rng);
    Ok(DgpDraw {
        basis,
        observations,
        truth: Coefficients::new(DVector::from_row_slice(&config.beta0)),
        sigma0,
    })
}

/// Estimators compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Scad,
    Mcp,
    Ols,
    Oracle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Scad => "SCAD",
            Method::Mcp => "MCP",
            Method::Ols => "OLS",
            Method::Oracle => "ORACLE",
        }
    }

    pub const ALL: [Method; 4] = [Method::Scad, Method::Mcp, Method::Ols, Method::Oracle];
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SCAD" => Ok(Method::Scad),
            "MCP" => Ok(Method::Mcp),
            "OLS" => Ok(Method::Ols),
            "ORACLE" => Ok(Method::Oracle),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// Tuning controls for the penalized methods inside the harness.
#[derive(Debug, Clone, Copy)]
pub struct HarnessOptions<S> {
    pub n_lambda: usize,
    pub lambda_min_ratio: S,
    /// Concavity override applied to both penalized families (family
    /// defaults otherwise).
    pub gamma: Option<S>,
    pub lla: LlaOptions<S>,
}

impl<S: Scalar> Default for HarnessOptions<S> {
    fn default() -> Self {
        Self {
            n_lambda: 50,
            lambda_min_ratio: sf(1e-3),
            gamma: None,
            lla: LlaOptions::default(),
        }
    }
}

/// Per-method aggregate row of a simulation report. Selection metrics are
/// absent for OLS (every coefficient is nonzero by construction).
#[derive(Debug, Clone)]
pub struct MethodRow<S> {
    pub method: Method,
    pub tpr: Option<S>,
    pub fpr: Option<S>,
    pub cs: Option<S>,
    pub rmse: S,
    pub bias: S,
    pub sd: S,
    pub spectral_err: S,
    pub frobenius_err: S,
    /// Replications excluded because the solver failed.
    pub failures: usize,
}

/// Aggregated Monte Carlo results.
#[derive(Debug, Clone)]
pub struct SimulationReport<S> {
    pub rows: Vec<MethodRow<S>>,
    pub replications: usize,
    pub p: usize,
    pub k: usize,
    pub z_dist: ZDist,
    pub seed: u64,
}

struct MethodDraw<S> {
    beta: DVector<S>,
    support: Vec<usize>,
    spectral_err: S,
    frobenius_err: S,
    kkt_residual: S,
}

struct ReplicationOutcome<S> {
    per_method: Vec<Option<MethodDraw<S>>>,
}

fn fit_method<S: SimScalar>(
    method: Method,
    system: &GramSystem<S>,
    truth: &Coefficients<S>,
    options: &HarnessOptions<S>,
) -> Result<(DVector<S>, Vec<usize>, S)> {
    match method {
        Method::Ols => {
            let fit = solver::ols(system)?;
            Ok((fit.beta().clone(), fit.support().to_vec(), S::zero()))
        }
        Method::Oracle => {
            let fit = solver::oracle_fit(system, truth.support())?;
            Ok((fit.beta().clone(), fit.support().to_vec(), S::zero()))
        }
        Method::Scad | Method::Mcp => {
            let family = match method {
                Method::Scad => crate::penalty::PenaltyFamily::Scad,
                _ => crate::penalty::PenaltyFamily::Mcp,
            };
            let grid = tuning::default_grid(
                system,
                options.n_lambda,
                options.lambda_min_ratio,
                options.lla.penalize_intercept,
            );
            let tuned = tuning::select_lambda(
                system,
                family,
                &grid,
                &TuneOptions {
                    lla: options.lla,
                    gamma: options.gamma,
                    refit: true,
                    lambda0: None,
                },
            )?;
            // coefficients come from the selected estimator; the optimality
            // certificate belongs to the penalized path fit
            Ok((
                tuned.best_fit.coefficients.beta().clone(),
                tuned.best_fit.coefficients.support().to_vec(),
                tuned.best_lla.kkt_residual,
            ))
        }
    }
}

fn run_one<S: SimScalar>(
    config: &DgpConfig<S>,
    methods: &[Method],
    seed: u64,
    frozen: Option<&(SimilarityBasis<S>, DenseSymMatrix<S>, DMatrix<S>)>,
    options: &HarnessOptions<S>,
) -> Result<ReplicationOutcome<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (basis, _sigma0, sqrt) = match frozen {
        Some((b, s, q)) => (b.clone(), s.clone(), q.clone()),
        None => draw_basis(config, &mut rng)?,
    };
    let observations = draw_observations(&sqrt, config.n, config.z_dist, &mut rng);
    let system = GramSystem::assemble(&basis, &observations)?;
    let truth = Coefficients::new(DVector::from_row_slice(&config.beta0));
    let beta0 = truth.beta();

    let per_method = methods
        .iter()
        .map(|&method| {
            let fitted = fit_method(method, &system, &truth, options).ok()?;
            let (beta, support, kkt) = fitted;
            let delta = &beta - beta0;
            let frob2 = (delta.transpose() * system.gram() * &delta)[(0, 0)];
            let frobenius_err = Float::sqrt(Float::max(frob2, S::zero()) / su::<S>(config.p));
            let spectral_err = basis
                .densify(delta.as_slice())
                .ok()?
                .spectral_norm();
            Some(MethodDraw {
                beta,
                support,
                spectral_err,
                frobenius_err,
                kkt_residual: kkt,
            })
        })
        .collect();
    Ok(ReplicationOutcome { per_method })
}

/// Run `r` replications with per-replication seeds `seed + rep` and
/// aggregate the sparse-recovery and accuracy measures.
///
/// Replications are independent and evaluated in parallel; aggregation is
/// order-independent, so the report is deterministic for a fixed config.
pub fn run_replications<S: SimScalar>(
    config: &DgpConfig<S>,
    methods: &[Method],
    r: usize,
    options: &HarnessOptions<S>,
) -> Result<SimulationReport<S>> {
    if r == 0 {
        return Err(Error::TooFewObservations { need: 1 });
    }
    if config.beta0.len() != config.k + 1 {
        return Err(Error::LengthMismatch {
            expected: config.k + 1,
            actual: config.beta0.len(),
        });
    }
    let frozen = if config.freeze_basis {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Some(draw_basis(config, &mut rng)?)
    } else {
        None
    };
    let outcomes: Vec<ReplicationOutcome<S>> = (0..r)
        .into_par_iter()
        .map(|rep| {
            run_one(
                config,
                methods,
                config.seed.wrapping_add(rep as u64),
                frozen.as_ref(),
                options,
            )
        })
        .collect::<Result<_>>()?;

    let truth = Coefficients::new(DVector::from_row_slice(&config.beta0));
    let true_support: std::collections::BTreeSet<usize> =
        truth.support().iter().copied().collect();
    let ks = su::<S>(config.k);

    let mut rows = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let draws: Vec<&MethodDraw<S>> = outcomes
            .iter()
            .filter_map(|o| o.per_method[mi].as_ref())
            .collect();
        let failures = r - draws.len();
        if draws.is_empty() {
            rows.push(MethodRow {
                method,
                tpr: None,
                fpr: None,
                cs: None,
                rmse: S::nan(),
                bias: S::nan(),
                sd: S::nan(),
                spectral_err: S::nan(),
                frobenius_err: S::nan(),
                failures,
            });
            continue;
        }
        let r_eff = su::<S>(draws.len());
        let selection = !matches!(method, Method::Ols);
        let (mut tpr, mut fpr, mut cs) = (S::zero(), S::zero(), S::zero());
        let mut sq_err = S::zero();
        let mut spectral = S::zero();
        let mut frob = S::zero();
        let kp1 = config.k + 1;
        let mut mean_beta = DVector::<S>::zeros(kp1);
        for d in &draws {
            if selection {
                let est: std::collections::BTreeSet<usize> =
                    d.support.iter().copied().collect();
                let hits = est.intersection(&true_support).count();
                tpr += su::<S>(hits) / su::<S>(true_support.len());
                // an empty selection contributes zero false positives
                if !est.is_empty() {
                    let extra = est.difference(&true_support).count();
                    fpr += su::<S>(extra) / su::<S>(est.len());
                }
                if est == true_support {
                    cs += S::one();
                }
            }
            for k in 0..kp1 {
                let e = d.beta[k] - truth.beta()[k];
                sq_err += e * e;
            }
            mean_beta += &d.beta;
            spectral += d.spectral_err;
            frob += d.frobenius_err;
        }
        mean_beta /= r_eff;
        // conventional denominators for these summaries: RK and K, not R(K + 1)
        let rmse = Float::sqrt(sq_err / (r_eff * ks));
        let bias = (0..kp1)
            .map(|k| Float::abs(mean_beta[k] - truth.beta()[k]))
            .fold(S::zero(), |a, v| a + v)
            / ks;
        let mut sd_sq = S::zero();
        for d in &draws {
            for k in 0..kp1 {
                let e = d.beta[k] - mean_beta[k];
                sd_sq += e * e;
            }
        }
        let sd = Float::sqrt(sd_sq / (r_eff * ks));
        rows.push(MethodRow {
            method,
            tpr: selection.then(|| tpr / r_eff),
            fpr: selection.then(|| fpr / r_eff),
            cs: selection.then(|| cs / r_eff),
            rmse,
            bias,
            sd,
            spectral_err: spectral / r_eff,
            frobenius_err: frob / r_eff,
            failures,
        });
    }
    Ok(SimulationReport {
        rows,
        replications: r,
        p: config.p,
        k: config.k,
        z_dist: config.z_dist,
        seed: config.seed,
    })
}

/// Final-weight KKT residuals of the penalized fits, one per replication
/// (used by the property suites).
pub fn penalized_kkt_residuals<S: SimScalar>(
    config: &DgpConfig<S>,
    method: Method,
    r: usize,
    options: &HarnessOptions<S>,
) -> Result<Vec<S>> {
    let outcomes: Vec<S> = (0..r)
        .into_par_iter()
        .map(|rep| {
            let out = run_one(
                config,
                &[method],
                config.seed.wrapping_add(rep as u64),
                None,
                options,
            )?;
            Ok(out.per_method[0]
                .as_ref()
                .map(|d| d.kkt_residual)
                .unwrap_or_else(S::nan))
        })
        .collect::<Result<_>>()?;
    Ok(outcomes)
}
