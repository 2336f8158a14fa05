//! Symmetric Toeplitz operators.
//!
//! A symmetric Toeplitz matrix `T[i][j] = t_{|i-j|}` is stored as its first
//! column. Products are computed by embedding `T` into a circulant matrix,
//! which the DFT diagonalizes. The minimal embedding has size `2n`; the
//! transform length used internally is the next power of two at or above
//! `2n`, which leaves the product unchanged after truncation.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::FftPlanner;

use crate::{dot, norm2, Error, Result};

#[derive(Clone)]
pub struct SymToeplitz {
    first_col: Vec<f64>,
    /// Scaled eigenvalues of the power-of-two embedding, non-negative frequencies only.
    spectrum: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for SymToeplitz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymToeplitz")
            .field("n", &self.n())
            .field("first_col", &self.first_col)
            .finish()
    }
}

fn embedding(first_col: &[f64], len: usize) -> Vec<Complex64> {
    let n = first_col.len();
    let mut c = vec![Complex64::new(0.0, 0.0); len];
    for (m, &t) in first_col.iter().enumerate() {
        c[m].re = t;
        if m > 0 {
            c[len - m].re = t;
        }
    }
    debug_assert!(len >= 2 * n - 1);
    c
}

impl SymToeplitz {
    /// Builds the operator and caches the spectrum of its circulant embedding.
    pub fn new(first_col: Vec<f64>) -> Result<Self> {
        if first_col.is_empty() {
            return Err(Error::Empty);
        }
        if let Some((index, &value)) = first_col.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let len = (2 * first_col.len()).next_power_of_two();
        let mut planner = RealFftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut c = embedding(&first_col, len);
        FftPlanner::new().plan_fft_forward(len).process(&mut c);
        // The embedding is real and even, so its spectrum is real.
        let spectrum = c[..len / 2 + 1].iter().map(|s| s.re / len as f64).collect();
        Ok(Self {
            first_col,
            spectrum,
            forward,
            inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    pub fn diagonal(&self) -> f64 {
        self.first_col[0]
    }

    /// Eigenvalues of the minimal `2n × 2n` circulant embedding
    /// `[t_0, …, t_{n-1}, 0, t_{n-1}, …, t_1]`.
    pub fn embedding_spectrum(&self) -> Vec<Complex64> {
        let len = 2 * self.n();
        let mut c = vec![Complex64::new(0.0, 0.0); len];
        for (m, &t) in self.first_col.iter().enumerate() {
            c[m].re = t;
            if m > 0 {
                c[len - m].re = t;
            }
        }
        FftPlanner::new().plan_fft_forward(len).process(&mut c);
        c
    }

    /// `y = T x` in `O(n log n)`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n()];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = T x`, writing into a caller-provided output.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.n();
        Error::check_len(n, x.len())?;
        Error::check_len(n, y.len())?;
        let mut buf = self.forward.make_input_vec();
        buf[..n].copy_from_slice(x);
        let mut freq = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        if scratch.len() < self.inverse.get_scratch_len() {
            scratch = self.inverse.make_scratch_vec();
        }
        self.forward
            .process_with_scratch(&mut buf, &mut freq, &mut scratch)
            .map_err(|e| Error::Breakdown(e.to_string()))?;
        for (b, s) in freq.iter_mut().zip(&self.spectrum) {
            *b *= *s;
        }
        // the inverse real transform needs purely real DC and Nyquist bins
        let last = freq.len() - 1;
        freq[0].im = 0.0;
        freq[last].im = 0.0;
        self.inverse
            .process_with_scratch(&mut freq, &mut buf, &mut scratch)
            .map_err(|e| Error::Breakdown(e.to_string()))?;
        y.copy_from_slice(&buf[..n]);
        Ok(())
    }

    /// Reference `O(n²)` product.
    pub fn matvec_direct(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        Error::check_len(n, x.len())?;
        Ok((0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.first_col[i.abs_diff(j)] * x[j])
                    .sum()
            })
            .collect())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.first_col[i.abs_diff(j)])
    }

    /// Linear combination `a·self + b·other` of two operators of equal size.
    pub fn combine(&self, a: f64, other: &SymToeplitz, b: f64) -> Result<SymToeplitz> {
        Error::check_len(self.n(), other.n())?;
        SymToeplitz::new(
            self.first_col
                .iter()
                .zip(&other.first_col)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> Result<SymToeplitz> {
        SymToeplitz::new(self.first_col.iter().map(|t| c * t).collect())
    }

    /// `xᵀ T x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(x, &self.matvec(x)?))
    }

    pub fn structure_report(&self) -> StructureReport {
        let t0 = self.first_col[0];
        let off: f64 = self.first_col[1..].iter().map(|t| 2.0 * t.abs()).sum();
        StructureReport {
            is_weakly_diag_dominant: t0 >= off - 1e-12 * t0.abs(),
            is_m_matrix_sign_pattern: t0 > 0.0
                && self.first_col[1..].iter().all(|&t| t <= 1e-14 * t0),
            gershgorin_low: t0 - off,
            gershgorin_high: t0 + off,
        }
    }
}

/// Sign pattern and Gershgorin information of a symmetric Toeplitz matrix.
///
/// The off-diagonal sum uses the interior-row count `2 Σ_{m≥1} |t_m|`, which
/// bounds every row of the finite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureReport {
    pub is_weakly_diag_dominant: bool,
    pub is_m_matrix_sign_pattern: bool,
    pub gershgorin_low: f64,
    pub gershgorin_high: f64,
}

impl StructureReport {
    pub fn is_m_matrix(&self) -> bool {
        self.is_m_matrix_sign_pattern && self.is_weakly_diag_dominant
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Spectral radius of a symmetric positive semi-definite operator by power
/// iteration with Rayleigh-quotient estimates.
///
/// Starts from the normalized all-ones vector and stops once two successive
/// estimates agree to `tol` relatively. When `max_iter` is exhausted the last
/// estimate is returned with `converged == false`.
pub fn power_iteration<F>(apply: F, n: usize, tol: f64, max_iter: usize) -> Result<PowerEstimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n == 0 {
        return Err(Error::Empty);
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = 0.0;
    for it in 1..=max_iter {
        let w = apply(&v)?;
        Error::check_len(n, w.len())?;
        let next = dot(&v, &w);
        let norm = norm2(&w);
        if !norm.is_finite() {
            return Err(Error::Breakdown("power iteration".into()));
        }
        if norm == 0.0 {
            return Ok(PowerEstimate { value: 0.0, iterations: it, converged: true });
        }
        let done = it > 1 && (next - estimate).abs() < tol * next.abs();
        estimate = next;
        if done {
            return Ok(PowerEstimate { value: estimate, iterations: it, converged: true });
        }
        v = w.into_iter().map(|x| x / norm).collect();
    }
    Ok(PowerEstimate { value: estimate, iterations: max_iter, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian(n: usize) -> SymToeplitz {
        let mut c = vec![0.0; n];
        c[0] = 2.0;
        if n > 1 {
            c[1] = -1.0;
        }
        SymToeplitz::new(c).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn rejects_bad_columns() {
        assert_eq!(SymToeplitz::new(vec![]).unwrap_err(), Error::Empty);
        assert!(matches!(
            SymToeplitz::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn identity_of_size_one() {
        let t = SymToeplitz::new(vec![1.0]).unwrap();
        assert!((t.matvec(&[3.5]).unwrap()[0] - 3.5).abs() < 1e-15);
    }

    #[test]
    fn tridiagonal_pattern() {
        let t = laplacian(8);
        let d = t.to_dense();
        for i in 0..8usize {
            for j in 0..8 {
                let want = match i.abs_diff(j) {
                    0 => 2.0,
                    1 => -1.0,
                    _ => 0.0,
                };
                assert_eq!(d[(i, j)], want);
            }
        }
    }

    #[test]
    fn laplacian_times_ones_telescopes() {
        let y = laplacian(5).matvec(&[1.0; 5]).unwrap();
        let want = [1.0, 0.0, 0.0, 0.0, 1.0];
        for (a, b) in y.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_column_returns_input() {
        let mut col = vec![0.0; 9];
        col[0] = 1.0;
        let t = SymToeplitz::new(col).unwrap();
        let x: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        assert!(rel_err(&t.matvec(&x).unwrap(), &x) < 1e-15);
        assert!(rel_err(&t.matvec_direct(&x).unwrap(), &x) < 1e-15);
    }

    #[test]
    fn direct_product_extracts_first_column() {
        let col = vec![4.0, -1.5, 0.25, 0.125];
        let t = SymToeplitz::new(col.clone()).unwrap();
        assert_eq!(t.matvec_direct(&[1.0, 0.0, 0.0, 0.0]).unwrap(), col);
    }

    #[test]
    fn direct_product_matches_dense_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let col: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = SymToeplitz::new(col.clone()).unwrap();
        // Materialize explicitly, independent of to_dense.
        let mut dense = vec![vec![0.0; 16]; 16];
        for i in 0..16 {
            for j in 0..16 {
                dense[i][j] = col[i.abs_diff(j)];
            }
        }
        let want: Vec<f64> = dense.iter().map(|row| dot(row, &x)).collect();
        assert!(rel_err(&t.matvec_direct(&x).unwrap(), &want) < 1e-14);
    }

    #[test]
    fn fft_product_matches_direct_for_random_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [64usize, 512] {
            let col: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = SymToeplitz::new(col).unwrap();
            let fast = t.matvec(&x).unwrap();
            let slow = t.matvec_direct(&x).unwrap();
            assert!(rel_err(&fast, &slow) <= 1e-12, "n = {n}");
        }
    }

    #[test]
    fn embedding_spectrum_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let col: Vec<f64> = (0..37).map(|_| rng.random_range(-2.0..2.0)).collect();
        let tmax = col.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let t = SymToeplitz::new(col).unwrap();
        let spec = t.embedding_spectrum();
        assert_eq!(spec.len(), 74);
        assert!(spec.iter().all(|s| s.im.abs() <= 1e-12 * tmax));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let t = laplacian(4);
        assert_eq!(
            t.matvec(&[1.0; 3]).unwrap_err(),
            Error::DimensionMismatch { expected: 4, got: 3 }
        );
        assert!(t.matvec_direct(&[1.0; 5]).is_err());
    }

    #[test]
    fn power_iteration_identity_and_diagonal() {
        let mut col = vec![0.0; 10];
        col[0] = 1.0;
        let id = SymToeplitz::new(col.clone()).unwrap();
        let est = power_iteration(|x| id.matvec(x), 10, 1e-10, 100).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10 && est.converged);
        col[0] = 3.0;
        let d = SymToeplitz::new(col).unwrap();
        let est = power_iteration(|x| d.matvec(x), 10, 1e-10, 100).unwrap();
        assert!((est.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_laplacian_matches_closed_form() {
        let n = 31;
        let t = laplacian(n);
        let exact = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .fold(0.0, f64::max);
        assert!((exact - 3.990369).abs() < 1e-6);
        let est = power_iteration(|x| t.matvec(x), n, 1e-12, 200_000).unwrap();
        assert!((est.value - exact).abs() < 1e-6 * exact, "{} vs {}", est.value, exact);
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        let t = laplacian(63);
        let est = power_iteration(|x| t.matvec(x), 63, 1e-15, 3).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
        assert!(est.value > 0.0);
    }

    #[test]
    fn structure_of_laplacian_and_positive_pattern() {
        let r = laplacian(8).structure_report();
        assert!(r.is_weakly_diag_dominant && r.is_m_matrix_sign_pattern);
        assert!((r.gershgorin_low - 0.0).abs() < 1e-15);
        assert!((r.gershgorin_high - 4.0).abs() < 1e-15);
        let r = SymToeplitz::new(vec![1.0, 1.0]).unwrap().structure_report();
        assert!(!r.is_m_matrix_sign_pattern);
    }
}
