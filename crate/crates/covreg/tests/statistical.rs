//! Monte Carlo property suites: consistency trends the estimators must show
//! on the synthetic data-generating process.

use covreg::simulate::{self, DgpConfig, Method, ZDist};
use covreg::tuning::{self, TuneOptions};
use covreg::{penalty::PenaltyFamily, solver::GramSystem};

fn lasso_error_at_bic_lambda(p: usize, k: usize, seed: u64) -> f64 {
    let config = DgpConfig::<f64>::standard(p, k, ZDist::StandardNormal, seed);
    let draw = simulate::dgp(&config).unwrap();
    let system = GramSystem::assemble(&draw.basis, &draw.observations).unwrap();
    let grid = tuning::default_grid(&system, 50, 1e-3, false);
    let tuned =
        tuning::select_lambda(&system, PenaltyFamily::Lasso, &grid, &TuneOptions::default())
            .unwrap();
    (tuned.best_fit.coefficients.beta() - draw.truth.beta()).norm()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Larger p acts as a larger sample: the Lasso error at the BIC-chosen level
/// shrinks from p = 200 to p = 500.
#[test]
fn lasso_error_improves_with_dimension() {
    let seeds = 20;
    let small: Vec<f64> = (0..seeds)
        .map(|s| lasso_error_at_bic_lambda(200, 10, 1000 + s))
        .collect();
    let large: Vec<f64> = (0..seeds)
        .map(|s| lasso_error_at_bic_lambda(500, 100, 2000 + s))
        .collect();
    let (m_small, m_large) = (median(small), median(large));
    assert!(
        m_large < m_small,
        "median error did not shrink: p=200 -> {m_small}, p=500 -> {m_large}"
    );
}

/// Selection accuracy of the penalized fits is nondecreasing in p
/// (medians over 20 seeds). The p = 1000, K = 1000 point makes this
/// long-running, so it is opt-in: `cargo test -- --ignored`.
#[test]
#[ignore = "long-running trend check over p in {200, 500, 1000}"]
fn tpr_trend_nondecreasing_in_p() {
    let configs = [(200usize, 10usize), (500, 100), (1000, 1000)];
    let mut medians = Vec::new();
    for (p, k) in configs {
        let tprs: Vec<f64> = (0..20u64)
            .map(|s| {
                let config = DgpConfig::<f64>::standard(p, k, ZDist::StandardNormal, 7000 + s);
                let report = simulate::run_replications(
                    &config,
                    &[Method::Scad],
                    1,
                    &simulate::HarnessOptions::default(),
                )
                .unwrap();
                report.rows[0].tpr.unwrap()
            })
            .collect();
        medians.push(median(tprs));
    }
    assert!(
        medians[0] <= medians[1] + 1e-12 && medians[1] <= medians[2] + 1e-12,
        "TPR medians not nondecreasing: {medians:?}"
    );
}

/// Every penalized replication fit certifies optimality at its final weights.
#[test]
fn penalized_fits_satisfy_kkt_at_final_weights() {
    let config = DgpConfig::<f64>::standard(100, 15, ZDist::StandardNormal, 31);
    for method in [Method::Scad, Method::Mcp] {
        let kkts = simulate::penalized_kkt_residuals(
            &config,
            method,
            10,
            &simulate::HarnessOptions::default(),
        )
        .unwrap();
        for (rep, kkt) in kkts.iter().enumerate() {
            assert!(
                kkt.is_finite() && *kkt <= 1e-6,
                "{method:?} replication {rep}: kkt = {kkt}"
            );
        }
    }
}
