//! Dense forward operators with a cached singular system.
//!
//! Convention: `u_n` live in the coefficient space `X` (length `cols`),
//! `v_n` live in the data space `Y` (length `rows`), and
//! `A x = sum_n sigma_n <u_n, x> v_n`.
//!
//! Only the thin system (`k = min(rows, cols)` triplets) is stored. The
//! numerical kernel is the orthogonal complement of the retained image
//! vectors, i.e. it contains every `u_n` with `sigma_n <= rank_tol * sigma_1`
//! together with the directions a thin decomposition never materializes.

use crate::error::{check_len, Error, Result};
use crate::{axpy, dot};

/// Default relative threshold below which singular values count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative residual above which a computed factorization is rejected.
const SVD_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdOperator {
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
    singular_values: Vec<f64>,
    /// `k x cols`, one image-space singular vector per row.
    image_vectors: Vec<f64>,
    /// `k x rows`, one data-space singular vector per row.
    data_vectors: Vec<f64>,
    rank_tol: f64,
    rank: usize,
}

impl SvdOperator {
    /// Decomposes a row-major `rows x cols` matrix.
    pub fn decompose(matrix: Vec<f64>, rows: usize, cols: usize, rank_tol: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("operator must have at least one row and column"));
        }
        check_len(rows * cols, matrix.len())?;
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::invalid(format!("rank_tol must lie in (0, 1), got {rank_tol}")));
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite matrix entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }

        let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| matrix[i * cols + j]);
        let svd = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| a.thin_svd()))
            .map_err(|_| Error::SvdFailed("decomposition panicked".into()))?
            .map_err(|e| Error::SvdFailed(format!("{e:?}")))?;
        let k = rows.min(cols);
        let s = svd.S().column_vector();
        let u = svd.U(); // rows x k, data space
        let v = svd.V(); // cols x k, image space

        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

        let mut singular_values = Vec::with_capacity(k);
        let mut image_vectors = Vec::with_capacity(k * cols);
        let mut data_vectors = Vec::with_capacity(k * rows);
        for &n in &order {
            let sigma = s[n];
            if !sigma.is_finite() {
                return Err(Error::SvdFailed("non-finite singular value".into()));
            }
            // faer may return tiny negative values for exact zeros.
            let (sigma, sign) = if sigma < 0.0 { (-sigma, -1.0) } else { (sigma, 1.0) };
            singular_values.push(sigma);
            image_vectors.extend((0..cols).map(|j| sign * v[(j, n)]));
            data_vectors.extend((0..rows).map(|i| u[(i, n)]));
        }
        if image_vectors.iter().chain(&data_vectors).any(|x| !x.is_finite()) {
            return Err(Error::SvdFailed("non-finite singular vector".into()));
        }
        let op = Self::from_parts(rows, cols, matrix, singular_values, image_vectors, data_vectors, rank_tol)?;
        op.check_factorization()?;
        Ok(op)
    }

    /// Compares the dense product with the singular-sum form on a few
    /// deterministic probes.
    fn check_factorization(&self) -> Result<()> {
        for probe in 0..2u64 {
            let x: Vec<f64> = (0..self.cols)
                .map(|j| {
                    let h = (j as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15 ^ probe);
                    (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            let dense = self.apply_forward(&x)?;
            let mut spectral = vec![0.0; self.rows];
            for n in 0..self.stored() {
                axpy(self.singular_values[n] * dot(self.image_vector(n), &x), self.data_vector(n), &mut spectral);
            }
            let err = crate::distance(&dense, &spectral);
            if err > SVD_CHECK_TOL * self.sigma_max().max(f64::MIN_POSITIVE) * crate::norm(&x) {
                return Err(Error::SvdFailed(format!("factorization residual {err:e} on probe {probe}")));
            }
        }
        Ok(())
    }

    /// Assembles an operator from a previously computed singular system.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        matrix: Vec<f64>,
        singular_values: Vec<f64>,
        image_vectors: Vec<f64>,
        data_vectors: Vec<f64>,
        rank_tol: f64,
    ) -> Result<Self> {
        let k = singular_values.len();
        check_len(rows * cols, matrix.len())?;
        check_len(k * cols, image_vectors.len())?;
        check_len(k * rows, data_vectors.len())?;
        if k > rows.min(cols) {
            return Err(Error::invalid("more singular triplets than min(rows, cols)"));
        }
        if singular_values.windows(2).any(|w| w[0] < w[1]) || singular_values.iter().any(|&s| s < 0.0) {
            return Err(Error::invalid("singular values must be non-negative and descending"));
        }
        let sigma_max = singular_values.first().copied().unwrap_or(0.0);
        let threshold = rank_tol * sigma_max;
        let rank = singular_values.iter().take_while(|&&s| s > threshold).count();
        Ok(Self { rows, cols, matrix, singular_values, image_vectors, data_vectors, rank_tol, rank })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Number of singular values above `rank_tol * sigma_1`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of stored singular triplets.
    pub fn stored(&self) -> usize {
        self.singular_values.len()
    }

    /// `u_n`, a unit vector in coefficient space.
    pub fn image_vector(&self, n: usize) -> &[f64] {
        &self.image_vectors[n * self.cols..(n + 1) * self.cols]
    }

    /// `v_n`, a unit vector in data space.
    pub fn data_vector(&self, n: usize) -> &[f64] {
        &self.data_vectors[n * self.rows..(n + 1) * self.rows]
    }

    pub fn image_vectors(&self) -> &[f64] {
        &self.image_vectors
    }

    pub fn data_vectors(&self) -> &[f64] {
        &self.data_vectors
    }

    /// Number of indices `n < rank` with `sigma_n^2 >= alpha`.
    pub fn count_at_least(&self, alpha: f64) -> usize {
        self.singular_values[..self.rank].iter().take_while(|&&s| s * s >= alpha).count()
    }

    /// `A x` by dense matrix-vector product.
    pub fn apply_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok(self.matrix.chunks_exact(self.cols).map(|row| dot(row, x)).collect())
    }

    /// `A* y` by dense transposed product.
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.matrix.chunks_exact(self.cols).zip(y) {
            if yi != 0.0 {
                axpy(yi, row, &mut out);
            }
        }
        Ok(out)
    }

    /// `<u_n, x>` for `n < count`.
    pub fn image_coefficients(&self, x: &[f64], count: usize) -> Vec<f64> {
        (0..count).map(|n| dot(self.image_vector(n), x)).collect()
    }

    /// `<v_n, y>` for `n < count`.
    pub fn data_coefficients(&self, y: &[f64], count: usize) -> Vec<f64> {
        (0..count).map(|n| dot(self.data_vector(n), y)).collect()
    }

    /// `sum_n c_n u_n`.
    pub fn synthesize(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (n, &c) in coefficients.iter().enumerate() {
            if c != 0.0 {
                axpy(c, self.image_vector(n), &mut out);
            }
        }
        out
    }

    /// `sum_{n < rank} f(sigma_n) <v_n, y> u_n`, the spectral synthesis used by
    /// every filter-based map.
    pub fn spectral_apply(&self, y: &[f64], f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        check_len(self.rows, y.len())?;
        let coeffs: Vec<f64> = (0..self.rank)
            .map(|n| {
                let w = f(self.singular_values[n]);
                if w == 0.0 {
                    0.0
                } else {
                    w * dot(self.data_vector(n), y)
                }
            })
            .collect();
        Ok(self.synthesize(&coeffs))
    }

    /// `sum_{n < rank} f(sigma_n) <u_n, x> u_n`, a function of `A*A` acting on `X`.
    pub fn image_spectral_apply(&self, x: &[f64], f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        let coeffs: Vec<f64> = (0..self.rank)
            .map(|n| {
                let w = f(self.singular_values[n]);
                if w == 0.0 {
                    0.0
                } else {
                    w * dot(self.image_vector(n), x)
                }
            })
            .collect();
        Ok(self.synthesize(&coeffs))
    }

    /// Minimal-norm least-squares solution restricted to the numerical range.
    pub fn pseudo_inverse_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.spectral_apply(y, |s| 1.0 / s)
    }

    /// Removes the components along `u_0, ..., u_{keep-1}`.
    ///
    /// Two passes of classical Gram-Schmidt keep the result orthogonal to the
    /// removed directions to working precision.
    pub fn complement_project(&self, x: &[f64], keep: usize) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        let keep = keep.min(self.stored());
        let mut out = x.to_vec();
        for _ in 0..2 {
            let coeffs = self.image_coefficients(&out, keep);
            for (n, c) in coeffs.into_iter().enumerate() {
                axpy(-c, self.image_vector(n), &mut out);
            }
        }
        Ok(out)
    }

    /// [`complement_project`](Self::complement_project) for several vectors at once.
    pub fn complement_project_many(&self, xs: &[Vec<f64>], keep: usize) -> Result<Vec<Vec<f64>>> {
        for x in xs {
            check_len(self.cols, x.len())?;
        }
        let keep = keep.min(self.stored());
        if xs.is_empty() || keep == 0 {
            return Ok(xs.to_vec());
        }
        let basis = faer::MatRef::from_row_major_slice(&self.image_vectors[..keep * self.cols], keep, self.cols);
        let mut out = faer::Mat::<f64>::from_fn(xs.len(), self.cols, |i, j| xs[i][j]);
        for _ in 0..2 {
            let coeffs = &out * basis.transpose();
            out -= &coeffs * basis;
        }
        Ok((0..xs.len()).map(|i| (0..self.cols).map(|j| out[(i, j)]).collect()).collect())
    }

    /// Orthogonal projection onto the numerical kernel of `A`.
    pub fn kernel_project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.complement_project(x, self.rank)
    }

    /// `(A*A)^mu x`; kernel components are annihilated.
    pub fn power_apply(&self, x: &[f64], mu: f64) -> Result<Vec<f64>> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(format!("power exponent must be finite and positive, got {mu}")));
        }
        self.image_spectral_apply(x, |s| s.powf(2.0 * mu))
    }
}
