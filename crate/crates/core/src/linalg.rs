//! Sparse-matrix container and truncated rank-k SVD.
//!
//! Matrices small enough on their short side go through an exact dense SVD;
//! larger ones use a seeded randomized range finder with subspace (power)
//! iterations. Both paths are deterministic for a fixed seed regardless of
//! thread count: parallel products assign whole output columns to workers,
//! so every floating-point sum is accumulated in a fixed order.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::stream_rng;

/// Below this min-dimension the exact dense SVD is used.
pub const DENSE_SVD_THRESHOLD: usize = 300;

/// RNG stream for the randomized-SVD sketch (see `stream_rng`).
const STREAM_SVD: u64 = u64::MAX - 2;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

/// Column-compressed sparse matrix (CSC).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from coordinate triples. Duplicate `(row, col)` entries and
    /// non-finite values are rejected.
    pub fn from_triples(
        nrows: usize,
        ncols: usize,
        mut triples: Vec<(u32, u32, f64)>,
    ) -> Result<Self, LinalgError> {
        for &(r, c, v) in &triples {
            if (r as usize) >= nrows || (c as usize) >= ncols {
                return Err(LinalgError::Dimension(format!(
                    "entry ({r},{c}) outside {nrows}x{ncols}"
                )));
            }
            if !v.is_finite() {
                return Err(LinalgError::Numeric(format!(
                    "non-finite value at ({r},{c})"
                )));
            }
        }
        triples.sort_unstable_by_key(|&(r, c, _)| (c, r));
        for w in triples.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(LinalgError::Numeric(format!(
                    "duplicate entry at ({},{})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        for &(_, c, _) in &triples {
            col_ptr[c as usize + 1] += 1;
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx = triples.iter().map(|&(r, _, _)| r).collect();
        let values = triples.iter().map(|&(_, _, v)| v).collect();
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from per-column `(row, value)` lists, each sorted by row.
    pub fn from_columns(
        nrows: usize,
        columns: &[Vec<(u32, f64)>],
    ) -> Result<Self, LinalgError> {
        let ncols = columns.len();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        col_ptr.push(0usize);
        let nnz: usize = columns.iter().map(Vec::len).sum();
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for col in columns {
            let mut prev: Option<u32> = None;
            for &(r, v) in col {
                if (r as usize) >= nrows {
                    return Err(LinalgError::Dimension(format!(
                        "row {r} outside {nrows} rows"
                    )));
                }
                if !v.is_finite() {
                    return Err(LinalgError::Numeric(format!("non-finite value in row {r}")));
                }
                if let Some(p) = prev {
                    if r <= p {
                        return Err(LinalgError::Numeric(
                            "column rows not strictly increasing".to_string(),
                        ));
                    }
                }
                prev = Some(r);
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(row, value)` pairs of column `j`, sorted by row.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        self.row_idx[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&r, &v)| (r, v))
    }

    pub fn column_norm_sq(&self, j: usize) -> f64 {
        self.column(j).map(|(_, v)| v * v).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for (r, v) in self.column(j) {
                m[(r as usize, j)] = v;
            }
        }
        m
    }

    /// `self * x` for dense `x`. Parallel over output columns; each output
    /// column is accumulated sequentially, so results are thread-count
    /// independent.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.ncols, x.nrows(), "shape mismatch in mul_dense");
        let p = x.ncols();
        let cols: Vec<Vec<f64>> = (0..p)
            .into_par_iter()
            .map(|c| {
                let mut out = vec![0.0; self.nrows];
                for j in 0..self.ncols {
                    let xj = x[(j, c)];
                    if xj != 0.0 {
                        let lo = self.col_ptr[j];
                        let hi = self.col_ptr[j + 1];
                        for t in lo..hi {
                            out[self.row_idx[t] as usize] += self.values[t] * xj;
                        }
                    }
                }
                out
            })
            .collect();
        DMatrix::from_fn(self.nrows, p, |i, c| cols[c][i])
    }

    /// `selfᵀ * x` for dense `x`. Parallel over the sparse matrix's columns
    /// (= output rows), sequential within each, so results are thread-count
    /// independent.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.nrows, x.nrows(), "shape mismatch in tr_mul_dense");
        let p = x.ncols();
        let rows: Vec<Vec<f64>> = (0..self.ncols)
            .into_par_iter()
            .map(|j| {
                let mut out = vec![0.0; p];
                for (r, v) in self.column(j) {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += v * x[(r as usize, c)];
                    }
                }
                out
            })
            .collect();
        DMatrix::from_fn(self.ncols, p, |j, c| rows[j][c])
    }
}

/// Truncated SVD factors: `U` (rows×k, orthonormal columns), singular values
/// descending, `V` (cols×k, orthonormal columns).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Best rank-k approximation factors of a sparse matrix.
///
/// Matrices whose short side is at most [`DENSE_SVD_THRESHOLD`] take the
/// exact dense route; larger ones use a Gaussian sketch of width
/// `k + oversampling` refined by `power_iters` subspace iterations with
/// re-orthonormalization. Output is deterministic for a fixed seed. Sign
/// ambiguity is resolved by making each U column's largest-magnitude entry
/// nonnegative.
pub fn truncated_svd(
    matrix: &SparseMatrix,
    k: usize,
    seed: u64,
    oversampling: usize,
    power_iters: usize,
) -> Result<SvdFactors, LinalgError> {
    let min_dim = matrix.nrows().min(matrix.ncols());
    if k == 0 || k > min_dim {
        return Err(LinalgError::Dimension(format!(
            "k={k} not in 1..={min_dim} for a {}x{} matrix",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let mut factors = if min_dim <= DENSE_SVD_THRESHOLD {
        dense_truncated_svd(&matrix.to_dense(), k)?
    } else {
        randomized_svd(matrix, k, seed, oversampling, power_iters)?
    };
    fix_signs(&mut factors);
    Ok(factors)
}

/// Exact dense SVD truncated to rank k.
pub fn dense_truncated_svd(dense: &DMatrix<f64>, k: usize) -> Result<SvdFactors, LinalgError> {
    let svd = dense.clone().svd(true, true);
    let u_full = svd.u.expect("svd requested u");
    let v_t_full = svd.v_t.expect("svd requested v_t");
    // nalgebra returns singular values sorted descending.
    let singular_values: Vec<f64> = svd.singular_values.iter().take(k).copied().collect();
    let u = u_full.columns(0, k).into_owned();
    let v = v_t_full.rows(0, k).transpose();
    Ok(SvdFactors {
        u,
        singular_values,
        v,
    })
}

/// Randomized range-finder SVD (seeded, deterministic).
pub fn randomized_svd(
    matrix: &SparseMatrix,
    k: usize,
    seed: u64,
    oversampling: usize,
    power_iters: usize,
) -> Result<SvdFactors, LinalgError> {
    let min_dim = matrix.nrows().min(matrix.ncols());
    let p = (k + oversampling).min(min_dim);
    let mut rng = stream_rng(seed, STREAM_SVD);
    let normal = StandardNormal;
    let sketch = DMatrix::from_iterator(
        matrix.ncols(),
        p,
        std::iter::repeat_with(|| normal.sample(&mut rng)).take(matrix.ncols() * p),
    );

    let mut q = orthonormalize(matrix.mul_dense(&sketch));
    for _ in 0..power_iters {
        let z = orthonormalize(matrix.tr_mul_dense(&q));
        q = orthonormalize(matrix.mul_dense(&z));
    }

    // B = Qᵀ A, p×ncols; its SVD gives the truncated factors of A.
    let b = matrix.tr_mul_dense(&q).transpose();
    let small = b.svd(true, true);
    let u_b = small.u.expect("svd requested u");
    let v_t = small.v_t.expect("svd requested v_t");
    let singular_values: Vec<f64> = small.singular_values.iter().take(k).copied().collect();
    let u = (&q * u_b.columns(0, k)).into_owned();
    let v = v_t.rows(0, k).transpose();
    Ok(SvdFactors {
        u,
        singular_values,
        v,
    })
}

/// Coordinates of each column of `matrix` in the top-k left singular
/// subspace: `Uᵀ·matrix`. Distances between projected columns equal
/// distances between the rank-k approximation's columns.
pub fn project_columns(
    matrix: &SparseMatrix,
    factors: &SvdFactors,
) -> Result<DMatrix<f64>, LinalgError> {
    if factors.u.nrows() != matrix.nrows() {
        return Err(LinalgError::Dimension(format!(
            "factors for {} rows applied to {} rows",
            factors.u.nrows(),
            matrix.nrows()
        )));
    }
    Ok(matrix.tr_mul_dense(&factors.u).transpose())
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let ncols = m.ncols();
    let qr = m.qr();
    let q = qr.q();
    // nalgebra's thin QR already returns nrows×ncols.
    debug_assert_eq!(q.ncols(), ncols);
    q
}

fn fix_signs(f: &mut SvdFactors) {
    for c in 0..f.rank() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..f.u.nrows() {
            let a = f.u[(i, c)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if f.u[(best, c)] < 0.0 {
            for i in 0..f.u.nrows() {
                f.u[(i, c)] = -f.u[(i, c)];
            }
            for i in 0..f.v.nrows() {
                f.v[(i, c)] = -f.v[(i, c)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_orthonormal(m: &DMatrix<f64>, tol: f64) {
        let gram = m.transpose() * m;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[(i, j)] - expect).abs() < tol,
                    "gram[{i},{j}] = {}",
                    gram[(i, j)]
                );
            }
        }
    }

    /// Optimal rank-k residual via the Gram matrix's eigenvalues — an
    /// algebraic route independent of the SVD implementation.
    fn gram_optimal_residual(dense: &DMatrix<f64>, k: usize) -> f64 {
        let gram = if dense.nrows() <= dense.ncols() {
            dense * dense.transpose()
        } else {
            dense.transpose() * dense
        };
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let tail: f64 = ev.iter().skip(k).map(|&x| x.max(0.0)).sum();
        tail.sqrt()
    }

    fn residual(matrix: &SparseMatrix, f: &SvdFactors) -> f64 {
        let dense = matrix.to_dense();
        let mut approx = DMatrix::zeros(dense.nrows(), dense.ncols());
        for c in 0..f.rank() {
            let u = f.u.column(c);
            let v = f.v.column(c);
            let s = f.singular_values[c];
            for i in 0..dense.nrows() {
                for j in 0..dense.ncols() {
                    approx[(i, j)] += s * u[i] * v[j];
                }
            }
        }
        (dense - approx).norm()
    }

    fn random_sparse(
        nrows: usize,
        ncols: usize,
        density: f64,
        seed: u64,
    ) -> SparseMatrix {
        use rand::Rng;
        let mut rng = crate::stream_rng(seed, 7);
        let mut triples = Vec::new();
        for r in 0..nrows as u32 {
            for c in 0..ncols as u32 {
                if rng.random::<f64>() < density {
                    triples.push((r, c, rng.random::<f64>() * 2.0 - 1.0));
                }
            }
        }
        SparseMatrix::from_triples(nrows, ncols, triples).unwrap()
    }

    #[test]
    fn diagonal_singular_values() {
        let m = SparseMatrix::from_triples(3, 3, vec![(0, 0, 5.0), (1, 1, 3.0), (2, 2, 1.0)])
            .unwrap();
        let f = truncated_svd(&m, 2, 0, 10, 2).unwrap();
        assert!((f.singular_values[0] - 5.0).abs() < 1e-12);
        assert!((f.singular_values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_outer_product() {
        let u = [1.0, 2.0, 2.0];
        let v = [3.0, 0.0, 4.0, 0.0];
        let mut triples = Vec::new();
        for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                if ui * vj != 0.0 {
                    triples.push((i as u32, j as u32, ui * vj));
                }
            }
        }
        let m = SparseMatrix::from_triples(3, 4, triples).unwrap();
        let f = truncated_svd(&m, 2, 0, 10, 2).unwrap();
        // |u| = 3, |v| = 5
        assert!((f.singular_values[0] - 15.0).abs() < 1e-9);
        assert!(f.singular_values[1].abs() < 1e-8);
    }

    #[test]
    fn residual_matches_gram_oracle() {
        let m = random_sparse(50, 80, 0.3, 11);
        let f = truncated_svd(&m, 10, 3, 10, 2).unwrap();
        let got = residual(&m, &f);
        let best = gram_optimal_residual(&m.to_dense(), 10);
        assert!(
            (got - best).abs() <= 1e-6 * best.max(1e-12),
            "residual {got} vs optimal {best}"
        );
    }

    #[test]
    fn randomized_path_close_to_optimal() {
        // Forcing the randomized path on a small matrix: rapidly decaying
        // spectrum so the sketch captures the range well.
        let mut triples = Vec::new();
        let mut rng = crate::stream_rng(3, 1);
        use rand::Rng;
        let u: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..60).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let v: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..90).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        for i in 0..60u32 {
            for j in 0..90u32 {
                let mut x = 0.0;
                for t in 0..4 {
                    x += (10.0f64).powi(-(t as i32)) * u[t][i as usize] * v[t][j as usize];
                }
                triples.push((i, j, x));
            }
        }
        let m = SparseMatrix::from_triples(60, 90, triples).unwrap();
        let f = randomized_svd(&m, 4, 5, 8, 3).unwrap();
        let exact = dense_truncated_svd(&m.to_dense(), 4).unwrap();
        for (a, b) in f.singular_values.iter().zip(&exact.singular_values) {
            assert!((a - b).abs() < 1e-8 * b.max(1.0), "{a} vs {b}");
        }
        assert_orthonormal(&f.u, 1e-8);
        assert_orthonormal(&f.v, 1e-8);
    }

    #[test]
    fn orthonormal_factors_and_determinism() {
        let m = random_sparse(40, 30, 0.4, 5);
        let f1 = truncated_svd(&m, 6, 42, 10, 2).unwrap();
        let f2 = truncated_svd(&m, 6, 42, 10, 2).unwrap();
        assert_eq!(f1.singular_values, f2.singular_values);
        assert_eq!(f1.u, f2.u);
        assert_orthonormal(&f1.u, 1e-8);
        assert_orthonormal(&f1.v, 1e-8);
    }

    #[test]
    fn k_too_large_is_error() {
        let m = random_sparse(4, 6, 0.5, 9);
        assert!(matches!(
            truncated_svd(&m, 5, 0, 10, 2),
            Err(LinalgError::Dimension(_))
        ));
    }

    #[test]
    fn rejects_non_finite_and_duplicates() {
        assert!(SparseMatrix::from_triples(2, 2, vec![(0, 0, f64::NAN)]).is_err());
        assert!(
            SparseMatrix::from_triples(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]).is_err()
        );
    }

    #[test]
    fn projection_identity_when_full_rank() {
        let m = random_sparse(5, 8, 0.6, 21);
        let f = truncated_svd(&m, 5, 0, 10, 2).unwrap();
        let proj = project_columns(&m, &f).unwrap();
        // With k = nrows, U is square orthonormal: ‖Uᵀb‖ = ‖b‖.
        for j in 0..m.ncols() {
            let pn: f64 = (0..5).map(|i| proj[(i, j)] * proj[(i, j)]).sum();
            assert!((pn - m.column_norm_sq(j)).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_of_orthogonal_column_is_zero() {
        // Matrix whose range is span(e0, e1); a column along e2 projects to 0.
        let m = SparseMatrix::from_triples(3, 2, vec![(0, 0, 2.0), (1, 1, 3.0)]).unwrap();
        let f = truncated_svd(&m, 2, 0, 10, 2).unwrap();
        let other = SparseMatrix::from_triples(3, 1, vec![(2, 0, 5.0)]).unwrap();
        let proj = project_columns(&other, &f).unwrap();
        assert!(proj.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn projection_preserves_rank_k_distances() {
        let m = random_sparse(30, 20, 0.4, 33);
        let k = 5;
        let f = truncated_svd(&m, k, 1, 10, 2).unwrap();
        let proj = project_columns(&m, &f).unwrap();
        // Explicit B^(k) construction.
        let dense = m.to_dense();
        let bk = &f.u * (f.u.transpose() * &dense);
        for i in 0..m.ncols() {
            for j in (i + 1)..m.ncols() {
                let dp: f64 = (0..k)
                    .map(|t| (proj[(t, i)] - proj[(t, j)]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let db = (bk.column(i) - bk.column(j)).norm();
                assert!((dp - db).abs() < 1e-9, "{dp} vs {db}");
            }
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let m = random_sparse(6, 4, 0.5, 2);
        let f = truncated_svd(&m, 2, 0, 10, 2).unwrap();
        let other = random_sparse(7, 4, 0.5, 2);
        assert!(matches!(
            project_columns(&other, &f),
            Err(LinalgError::Dimension(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn truncated_svd_residual_optimal(
            nrows in 2usize..40,
            ncols in 2usize..40,
            seed in 0u64..1000,
            kraw in 1usize..6,
        ) {
            let m = random_sparse(nrows, ncols, 0.3, seed);
            let k = kraw.min(nrows).min(ncols);
            let f = truncated_svd(&m, k, seed, 10, 2).unwrap();
            let got = residual(&m, &f);
            let best = gram_optimal_residual(&m.to_dense(), k);
            prop_assert!((got - best).abs() <= 1e-6 * best.max(1e-9) + 1e-9);
            assert_orthonormal(&f.u, 1e-8);
            assert_orthonormal(&f.v, 1e-8);
            // descending singular values
            for w in f.singular_values.windows(2) {
                prop_assert!(w[0] >= w[1] - 1e-12);
            }
        }
    }
}
