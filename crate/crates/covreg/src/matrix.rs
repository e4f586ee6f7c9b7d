//! Symmetric matrix representations and the trace / quadratic-form kernels
//! the estimation modules are built on.
//!
//! Similarity matrices come in three shapes: sparse 0/1-ish matrices stored as
//! upper-triangle triplets, rank-one matrices `c * x x^T`, and scaled
//! identities. Dispatching on the shape keeps every kernel O(nnz) instead of
//! O(p^2) or O(p^3).

use std::io::BufRead;

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::{as_f64, sf, su, Scalar};

/// Relative symmetry tolerance for dense inputs.
const SYMMETRY_TOL: f64 = 1e-12;

/// Storage variants for a symmetric `p x p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum SymStorage<S> {
    /// Sorted, deduplicated upper-triangle entries `(i, j, value)` with `i <= j`.
    Triplets(Vec<(u32, u32, S)>),
    /// `scale * x x^T`.
    RankOne { vector: Vec<S>, scale: S },
    /// `scale * I_p`.
    Identity { scale: S },
}

/// A symmetric `p x p` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix<S> {
    dim: usize,
    storage: SymStorage<S>,
}

impl<S: Scalar> SparseSymMatrix<S> {
    /// Canonical upper-triangle storage from raw triplets.
    ///
    /// Entries given with `i > j` are mirrored, duplicates are sum-merged, and
    /// entries that merge to exactly zero are dropped. With `zero_diagonal`
    /// set, any diagonal entry is rejected.
    pub fn from_triplets(
        entries: &[(usize, usize, S)],
        dim: usize,
        zero_diagonal: bool,
    ) -> Result<Self> {
        let mut upper: Vec<(u32, u32, S)> = Vec::with_capacity(entries.len());
        for &(i, j, value) in entries {
            if i >= dim || j >= dim {
                return Err(Error::IndexOutOfRange { i, j, dim });
            }
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    i,
                    j,
                    value: as_f64(value),
                });
            }
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            if zero_diagonal && i == j {
                return Err(Error::DiagonalEntry(i));
            }
            upper.push((i as u32, j as u32, value));
        }
        upper.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(u32, u32, S)> = Vec::with_capacity(upper.len());
        for (i, j, value) in upper {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += value,
                _ => merged.push((i, j, value)),
            }
        }
        merged.retain(|&(_, _, v)| v != S::zero());
        Ok(Self {
            dim,
            storage: SymStorage::Triplets(merged),
        })
    }

    /// The matrix `scale * x x^T`.
    pub fn rank_one(vector: Vec<S>, scale: S) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        for (i, &v) in vector.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    i,
                    j: i,
                    value: as_f64(v),
                });
            }
        }
        if !scale.is_finite() {
            return Err(Error::NonFiniteValue {
                i: 0,
                j: 0,
                value: as_f64(scale),
            });
        }
        Ok(Self {
            dim: vector.len(),
            storage: SymStorage::RankOne { vector, scale },
        })
    }

    /// The matrix `scale * I_p`.
    pub fn identity(dim: usize, scale: S) -> Self {
        Self {
            dim,
            storage: SymStorage::Identity { scale },
        }
    }

    /// The `p x p` zero matrix.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            storage: SymStorage::Triplets(Vec::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn storage(&self) -> &SymStorage<S> {
        &self.storage
    }

    /// Number of structurally nonzero entries of the full matrix
    /// (off-diagonal entries counted twice).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            SymStorage::Triplets(ts) => ts
                .iter()
                .map(|&(i, j, _)| if i == j { 1 } else { 2 })
                .sum(),
            SymStorage::RankOne { vector, scale } => {
                if *scale == S::zero() {
                    0
                } else {
                    let nz = vector.iter().filter(|&&v| v != S::zero()).count();
                    nz * nz
                }
            }
            SymStorage::Identity { scale } => {
                if *scale == S::zero() {
                    0
                } else {
                    self.dim
                }
            }
        }
    }

    /// tr(A).
    pub fn trace(&self) -> S {
        match &self.storage {
            SymStorage::Triplets(ts) => ts
                .iter()
                .filter(|&&(i, j, _)| i == j)
                .map(|&(_, _, v)| v)
                .fold(S::zero(), |a, v| a + v),
            SymStorage::RankOne { vector, scale } => {
                *scale * vector.iter().map(|&v| v * v).fold(S::zero(), |a, v| a + v)
            }
            SymStorage::Identity { scale } => *scale * su(self.dim),
        }
    }

    /// Matrix l1 norm (maximum absolute column sum).
    pub fn l1_norm(&self) -> S {
        match &self.storage {
            SymStorage::Triplets(ts) => {
                let mut col_sums = vec![S::zero(); self.dim];
                for &(i, j, v) in ts {
                    col_sums[j as usize] += v.abs();
                    if i != j {
                        col_sums[i as usize] += v.abs();
                    }
                }
                col_sums.into_iter().fold(S::zero(), S::max)
            }
            SymStorage::RankOne { vector, scale } => {
                let abs_sum = vector.iter().map(|v| v.abs()).fold(S::zero(), |a, v| a + v);
                let abs_max = vector.iter().map(|v| v.abs()).fold(S::zero(), S::max);
                scale.abs() * abs_sum * abs_max
            }
            SymStorage::Identity { scale } => scale.abs(),
        }
    }

    /// Same matrix with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: S) -> Self {
        let storage = match &self.storage {
            SymStorage::Triplets(ts) => SymStorage::Triplets(
                ts.iter()
                    .map(|&(i, j, v)| (i, j, v * factor))
                    .filter(|&(_, _, v)| v != S::zero())
                    .collect(),
            ),
            SymStorage::RankOne { vector, scale } => SymStorage::RankOne {
                vector: vector.clone(),
                scale: *scale * factor,
            },
            SymStorage::Identity { scale } => SymStorage::Identity {
                scale: *scale * factor,
            },
        };
        Self {
            dim: self.dim,
            storage,
        }
    }

    /// Visit every logical upper-triangle entry `(i, j, value)` with `i <= j`,
    /// skipping structural zeros.
    pub fn for_each_upper(&self, mut f: impl FnMut(usize, usize, S)) {
        match &self.storage {
            SymStorage::Triplets(ts) => {
                for &(i, j, v) in ts {
                    f(i as usize, j as usize, v);
                }
            }
            SymStorage::RankOne { vector, scale } => {
                if *scale == S::zero() {
                    return;
                }
                for i in 0..self.dim {
                    if vector[i] == S::zero() {
                        continue;
                    }
                    for j in i..self.dim {
                        let v = *scale * vector[i] * vector[j];
                        if v != S::zero() {
                            f(i, j, v);
                        }
                    }
                }
            }
            SymStorage::Identity { scale } => {
                if *scale == S::zero() {
                    return;
                }
                for i in 0..self.dim {
                    f(i, i, *scale);
                }
            }
        }
    }

    /// Dense copy of the represented matrix.
    pub fn to_dense(&self) -> DenseSymMatrix<S> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        self.for_each_upper(|i, j, v| {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        });
        DenseSymMatrix { data: m }
    }

    /// `A * y`.
    pub fn mul_vec(&self, y: &[S]) -> Result<Vec<S>> {
        if y.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                actual: y.len(),
            });
        }
        let mut out = vec![S::zero(); self.dim];
        match &self.storage {
            SymStorage::Triplets(ts) => {
                for &(i, j, v) in ts {
                    let (i, j) = (i as usize, j as usize);
                    out[i] += v * y[j];
                    if i != j {
                        out[j] += v * y[i];
                    }
                }
            }
            SymStorage::RankOne { vector, scale } => {
                let dot = vector
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| a * b)
                    .fold(S::zero(), |a, v| a + v);
                let c = *scale * dot;
                for (o, &x) in out.iter_mut().zip(vector) {
                    *o = c * x;
                }
            }
            SymStorage::Identity { scale } => {
                for (o, &x) in out.iter_mut().zip(y) {
                    *o = *scale * x;
                }
            }
        }
        Ok(out)
    }

    /// `A * D` for a dense `p x m` matrix `D`.
    pub fn mul_dense(&self, d: &DMatrix<S>) -> Result<DMatrix<S>> {
        if d.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: d.nrows(),
            });
        }
        let m = d.ncols();
        let mut out = DMatrix::zeros(self.dim, m);
        match &self.storage {
            SymStorage::Triplets(ts) => {
                for c in 0..m {
                    for &(i, j, v) in ts {
                        let (i, j) = (i as usize, j as usize);
                        out[(i, c)] += v * d[(j, c)];
                        if i != j {
                            out[(j, c)] += v * d[(i, c)];
                        }
                    }
                }
            }
            _ => {
                for c in 0..m {
                    let col: Vec<S> = d.column(c).iter().copied().collect();
                    let prod = self.mul_vec(&col)?;
                    for (r, v) in prod.into_iter().enumerate() {
                        out[(r, c)] = v;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// tr(A B) for symmetric `A`, `B` of equal dimension.
///
/// Equals `sum_{ij} A_ij B_ij`; each variant pair has a closed form that
/// avoids materializing either matrix.
pub fn trace_product<S: Scalar>(a: &SparseSymMatrix<S>, b: &SparseSymMatrix<S>) -> Result<S> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            actual: b.dim,
        });
    }
    use SymStorage::*;
    let value = match (&a.storage, &b.storage) {
        (Identity { scale: ca }, Identity { scale: cb }) => *ca * *cb * su(a.dim),
        (Identity { scale }, _) => *scale * b.trace(),
        (_, Identity { scale }) => *scale * a.trace(),
        (RankOne { vector: x, scale: cx }, RankOne { vector: y, scale: cy }) => {
            let dot = x
                .iter()
                .zip(y)
                .map(|(&u, &v)| u * v)
                .fold(S::zero(), |acc, v| acc + v);
            *cx * *cy * dot * dot
        }
        (RankOne { vector, scale }, Triplets(_)) => *scale * quad_form(b, vector)?,
        (Triplets(_), RankOne { vector, scale }) => *scale * quad_form(a, vector)?,
        (Triplets(ta), Triplets(tb)) => {
            // Sorted-merge intersection over upper-triangle entries; diagonal
            // entries contribute once, off-diagonal twice.
            let two = sf::<S>(2.0);
            let mut acc = S::zero();
            let (mut ia, mut ib) = (0usize, 0usize);
            while ia < ta.len() && ib < tb.len() {
                let ka = (ta[ia].0, ta[ia].1);
                let kb = (tb[ib].0, tb[ib].1);
                match ka.cmp(&kb) {
                    std::cmp::Ordering::Less => ia += 1,
                    std::cmp::Ordering::Greater => ib += 1,
                    std::cmp::Ordering::Equal => {
                        let w = if ka.0 == ka.1 { S::one() } else { two };
                        acc += w * ta[ia].2 * tb[ib].2;
                        ia += 1;
                        ib += 1;
                    }
                }
            }
            acc
        }
    };
    Ok(value)
}

/// `y^T A y`.
pub fn quad_form<S: Scalar>(a: &SparseSymMatrix<S>, y: &[S]) -> Result<S> {
    if y.len() != a.dim {
        return Err(Error::LengthMismatch {
            expected: a.dim,
            actual: y.len(),
        });
    }
    use SymStorage::*;
    let value = match &a.storage {
        Triplets(ts) => {
            let two = sf::<S>(2.0);
            let mut acc = S::zero();
            for &(i, j, v) in ts {
                let w = if i == j { S::one() } else { two };
                acc += w * v * y[i as usize] * y[j as usize];
            }
            acc
        }
        RankOne { vector, scale } => {
            let dot = vector
                .iter()
                .zip(y)
                .map(|(&u, &v)| u * v)
                .fold(S::zero(), |acc, v| acc + v);
            *scale * dot * dot
        }
        Identity { scale } => {
            *scale
                * y.iter()
                    .map(|&v| v * v)
                    .fold(S::zero(), |acc, v| acc + v)
        }
    };
    Ok(value)
}

/// An ordered similarity basis `{W_0, ..., W_K}` with a common dimension.
///
/// Index 0 is the scaled identity unless the caller builds the basis from an
/// explicit list.
#[derive(Debug, Clone)]
pub struct SimilarityBasis<S> {
    matrices: Vec<SparseSymMatrix<S>>,
}

impl<S: Scalar> SimilarityBasis<S> {
    /// Basis `{I_p, W_1, ..., W_K}`.
    pub fn with_identity(dim: usize, rest: Vec<SparseSymMatrix<S>>) -> Result<Self> {
        let mut matrices = Vec::with_capacity(rest.len() + 1);
        matrices.push(SparseSymMatrix::identity(dim, S::one()));
        matrices.extend(rest);
        Self::from_matrices(matrices)
    }

    /// Basis from an explicit list; overrides the identity-first convention.
    pub fn from_matrices(matrices: Vec<SparseSymMatrix<S>>) -> Result<Self> {
        let dim = matrices.first().ok_or(Error::EmptyBasis)?.dim();
        for m in &matrices {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.dim(),
                });
            }
        }
        Ok(Self { matrices })
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    /// Number of matrices, `K + 1`.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `K`, the number of non-intercept matrices.
    pub fn k(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn get(&self, k: usize) -> &SparseSymMatrix<S> {
        &self.matrices[k]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SparseSymMatrix<S>> {
        self.matrices.iter()
    }

    /// Basis restricted to the given indices (in the given order).
    pub fn restricted(&self, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        let mut matrices = Vec::with_capacity(support.len());
        for &k in support {
            if k >= self.matrices.len() {
                return Err(Error::SupportOutOfRange {
                    index: k,
                    len: self.matrices.len(),
                });
            }
            matrices.push(self.matrices[k].clone());
        }
        Self::from_matrices(matrices)
    }

    /// `Sigma(beta) = sum_k beta_k W_k`.
    pub fn densify(&self, beta: &[S]) -> Result<DenseSymMatrix<S>> {
        if beta.len() != self.matrices.len() {
            return Err(Error::LengthMismatch {
                expected: self.matrices.len(),
                actual: beta.len(),
            });
        }
        let p = self.dim();
        let mut m = DMatrix::zeros(p, p);
        for (w, &b) in self.matrices.iter().zip(beta) {
            if b == S::zero() {
                continue;
            }
            w.for_each_upper(|i, j, v| {
                m[(i, j)] += b * v;
                if i != j {
                    m[(j, i)] += b * v;
                }
            });
        }
        Ok(DenseSymMatrix { data: m })
    }
}

/// A dense symmetric matrix with validated symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix<S> {
    data: DMatrix<S>,
}

impl<S: Scalar> DenseSymMatrix<S> {
    /// Wrap a square matrix, rejecting asymmetry beyond
    /// `1e-12 * max(1, max|M|)`.
    pub fn new(data: DMatrix<S>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                actual: data.ncols(),
            });
        }
        let max_abs = data.iter().map(|v| v.abs()).fold(S::zero(), S::max);
        let tol = sf::<S>(SYMMETRY_TOL) * S::max(S::one(), max_abs);
        let mut asym = S::zero();
        for i in 0..data.nrows() {
            for j in (i + 1)..data.ncols() {
                asym = S::max(asym, (data[(i, j)] - data[(j, i)]).abs());
            }
        }
        if asym > tol {
            return Err(Error::Asymmetric {
                asymmetry: as_f64(asym),
                tolerance: as_f64(tol),
            });
        }
        Ok(Self { data })
    }

    /// Wrap `(M + M^T) / 2`, for products that are symmetric up to rounding.
    pub fn symmetrized(data: DMatrix<S>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                actual: data.ncols(),
            });
        }
        let half = sf::<S>(0.5);
        let sym = (&data + data.transpose()).map(|v| v * half);
        Ok(Self { data: sym })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> S) -> Result<Self> {
        Self::new(DMatrix::from_fn(dim, dim, f))
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diagonal(diag: &[S]) -> Self {
        Self {
            data: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<S> {
        &self.data
    }

    pub fn into_dmatrix(self) -> DMatrix<S> {
        self.data
    }

    pub fn trace(&self) -> S {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> S {
        self.data
            .iter()
            .map(|&v| v * v)
            .fold(S::zero(), |a, v| a + v)
            .sqrt()
    }
}

impl<S: Scalar + RealField> DenseSymMatrix<S> {
    /// Symmetric eigendecomposition: `(eigenvalues, eigenvectors)` with
    /// columns of the second matrix as eigenvectors.
    pub fn sym_eigen(&self) -> (DVector<S>, DMatrix<S>) {
        let eig = self.data.clone().symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    }

    pub fn min_eigenvalue(&self) -> S {
        let (vals, _) = self.sym_eigen();
        vals.iter().copied().fold(Float::infinity(), Float::min)
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> S {
        let (vals, _) = self.sym_eigen();
        vals.iter()
            .map(|&v| Float::abs(v))
            .fold(S::zero(), Float::max)
    }

    /// Symmetric square root; requires all eigenvalues strictly positive.
    pub fn sqrt_pd(&self) -> Result<DMatrix<S>> {
        let (vals, vecs) = self.sym_eigen();
        let min = vals.iter().copied().fold(Float::infinity(), Float::min);
        if min <= S::zero() {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: as_f64(min),
            });
        }
        let sqrt_vals = DVector::from_iterator(vals.len(), vals.iter().map(|&v| Float::sqrt(v)));
        let scaled = &vecs * DMatrix::from_diagonal(&sqrt_vals);
        Ok(scaled * vecs.transpose())
    }
}

/// Parse the plain-text triplet format: one `i j value` per line with
/// 0-based indices, `#` starting a comment, either triangle accepted.
pub fn parse_triplets<S: Scalar>(
    reader: impl BufRead,
    dim: usize,
    zero_diagonal: bool,
) -> Result<SparseSymMatrix<S>> {
    let mut entries: Vec<(usize, usize, S)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::TripletParse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let parse_err = |message: String| Error::TripletParse {
            line: lineno + 1,
            message,
        };
        let i: usize = fields
            .next()
            .ok_or_else(|| parse_err("missing row index".into()))?
            .parse()
            .map_err(|e| parse_err(format!("bad row index: {e}")))?;
        let j: usize = fields
            .next()
            .ok_or_else(|| parse_err("missing column index".into()))?
            .parse()
            .map_err(|e| parse_err(format!("bad column index: {e}")))?;
        let value: f64 = fields
            .next()
            .ok_or_else(|| parse_err("missing value".into()))?
            .parse()
            .map_err(|e| parse_err(format!("bad value: {e}")))?;
        if fields.next().is_some() {
            return Err(parse_err("expected exactly three fields".into()));
        }
        entries.push((i, j, sf(value)));
    }
    // A file may list both (i, j) and (j, i); mirrored duplicates of equal
    // value collapse to one stored entry rather than summing.
    entries.sort_by_key(|&(i, j, _)| (i.min(j), i.max(j)));
    entries.dedup_by(|a, b| a.0.min(a.1) == b.0.min(b.1) && a.0.max(a.1) == b.0.max(b.1) && a.2 == b.2);
    SparseSymMatrix::from_triplets(&entries, dim, zero_diagonal)
}
