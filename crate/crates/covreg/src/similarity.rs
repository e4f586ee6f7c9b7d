//! Similarity matrix constructors: kernel, outer-product, indicator, network,
//! Bernoulli random, and signed-correlated forms, plus the l1 rescaling
//! convention.

use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::SparseSymMatrix;
use crate::scalar::{as_f64, sf, Scalar};

fn check_column<S: Scalar>(x: &[S]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::ColumnTooShort {
            need: 2,
            got: x.len(),
        });
    }
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                i,
                j: i,
                value: as_f64(v),
            });
        }
    }
    Ok(())
}

/// Gaussian-kernel similarity with a density-quantile sparsity threshold.
///
/// The off-diagonal entry for pair `(j1, j2)` is `exp(-bandwidth * d^2)` with
/// `d = x[j1] - x[j2]`, kept iff `d^2` lies strictly below the empirical
/// `density`-quantile of all `p(p-1)/2` squared distances. The realized
/// nonzero fraction is the largest one `<= density` that does not split tied
/// distances. The diagonal is zero.
pub fn kernel_similarity<S: Scalar>(
    x: &[S],
    bandwidth: S,
    density: S,
) -> Result<SparseSymMatrix<S>> {
    check_column(x)?;
    if density <= S::zero() || density > S::one() {
        return Err(Error::InvalidDensity(as_f64(density)));
    }
    let p = x.len();
    let n_pairs = p * (p - 1) / 2;
    let keep_all = density == S::one();
    let threshold = if keep_all {
        S::infinity()
    } else {
        let mut d2: Vec<S> = Vec::with_capacity(n_pairs);
        for j1 in 0..p {
            for j2 in (j1 + 1)..p {
                let d = x[j1] - x[j2];
                d2.push(d * d);
            }
        }
        d2.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        if d2[0] == d2[n_pairs - 1] {
            // All pairwise distances tie; no strict threshold exists.
            return Err(Error::ConstantColumn);
        }
        let target = (as_f64(density) * n_pairs as f64).floor() as usize;
        if target >= n_pairs {
            S::infinity()
        } else {
            d2[target]
        }
    };
    let mut entries: Vec<(usize, usize, S)> = Vec::new();
    for j1 in 0..p {
        for j2 in (j1 + 1)..p {
            let d = x[j1] - x[j2];
            let d2 = d * d;
            if d2 < threshold {
                let w = (-bandwidth * d2).exp();
                if w != S::zero() {
                    entries.push((j1, j2, w));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(&entries, p, true)
}

/// `W = x x^T / p`, diagonal retained.
pub fn outerproduct_similarity<S: Scalar>(x: &[S]) -> Result<SparseSymMatrix<S>> {
    check_column(x)?;
    let p = x.len();
    SparseSymMatrix::rank_one(x.to_vec(), S::one() / sf::<S>(p as f64))
}

/// Indicator similarity: 1 iff two subjects carry the same label.
pub fn indicator_similarity<S: Scalar, L: Eq + Hash>(labels: &[L]) -> Result<SparseSymMatrix<S>> {
    let p = labels.len();
    if p < 2 {
        return Err(Error::ColumnTooShort { need: 2, got: p });
    }
    let mut groups: HashMap<&L, Vec<usize>> = HashMap::new();
    for (j, label) in labels.iter().enumerate() {
        groups.entry(label).or_default().push(j);
    }
    let mut entries: Vec<(usize, usize, S)> = Vec::new();
    for members in groups.values() {
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                entries.push((members[a], members[b], S::one()));
            }
        }
    }
    SparseSymMatrix::from_triplets(&entries, p, true)
}

/// Binary network similarity from an undirected edge list.
pub fn edge_similarity<S: Scalar>(edges: &[(usize, usize)], p: usize) -> Result<SparseSymMatrix<S>> {
    let mut entries: Vec<(usize, usize, S)> = Vec::with_capacity(edges.len());
    let mut seen = std::collections::HashSet::new();
    for &(i, j) in edges {
        if i >= p || j >= p {
            return Err(Error::IndexOutOfRange { i, j, dim: p });
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        let key = (i.min(j), i.max(j));
        if seen.insert(key) {
            entries.push((key.0, key.1, S::one()));
        }
    }
    SparseSymMatrix::from_triplets(&entries, p, true)
}

/// Rescale so that the matrix l1 norm (max absolute column sum) is one.
pub fn rescale_l1<S: Scalar>(w: &SparseSymMatrix<S>) -> Result<SparseSymMatrix<S>> {
    let norm = w.l1_norm();
    if norm == S::zero() {
        return Err(Error::ZeroMatrix);
    }
    Ok(w.scaled(S::one() / norm))
}

/// Random binary similarity: each off-diagonal upper-triangle entry is
/// independently 1 with probability `prob`; the diagonal is zero.
///
/// Pairs are drawn in row-major upper-triangle order from a counter-based
/// generator, so the result is reproducible across platforms given the seed.
pub fn bernoulli_similarity<S: Scalar>(
    p: usize,
    prob: S,
    rng_seed: u64,
) -> Result<SparseSymMatrix<S>> {
    let q = as_f64(prob);
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidProbability(q));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut entries: Vec<(usize, usize, S)> = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random::<f64>() < q {
                entries.push((i, j, S::one()));
            }
        }
    }
    SparseSymMatrix::from_triplets(&entries, p, true)
}

/// Signed similarity `w_{j1 j2} = x_{j1} x_{j2} exp(-p (x_{j1} - x_{j2})^2)`
/// with zero diagonal. Negative entries are legal.
pub fn correlated_similarity<S: Scalar>(x: &[S]) -> Result<SparseSymMatrix<S>> {
    check_column(x)?;
    let p = x.len();
    let ps = sf::<S>(p as f64);
    let mut entries: Vec<(usize, usize, S)> = Vec::new();
    for j1 in 0..p {
        for j2 in (j1 + 1)..p {
            let d = x[j1] - x[j2];
            let w = x[j1] * x[j2] * (-ps * d * d).exp();
            if w != S::zero() {
                entries.push((j1, j2, w));
            }
        }
    }
    SparseSymMatrix::from_triplets(&entries, p, true)
}
