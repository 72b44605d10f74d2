//! Dense Cholesky factorization and triangular solves on row-major storage.

use crate::error::{Error, Result};
use crate::Real;

/// Dot product with four independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail = ca.remainder().iter().zip(cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    tail.fold((acc[0] + acc[1]) + (acc[2] + acc[3]), |s, (&x, &y)| s + x * y)
}

/// Lower-triangular factor `L` with `A = L·Lᵀ`, stored row-major (n × n).
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorizes the symmetric matrix `a` (row-major, lower triangle read).
    /// On failure returns the index of the first non-positive pivot.
    pub fn new(a: &[T], n: usize) -> std::result::Result<Self, usize> {
        Self::in_place(a.to_vec(), n).map_err(|(p, _)| p)
    }

    /// Like [`new`](Self::new) but overwrites `a`. On failure the buffer
    /// is handed back (contents unspecified) with the failing pivot.
    pub fn in_place(mut l: Vec<T>, n: usize) -> std::result::Result<Self, (usize, Vec<T>)> {
        assert_eq!(l.len(), n * n, "matrix size mismatch");
        for j in 0..n {
            let tail = &mut l[j * n..];
            let row_j = &mut tail[..n];
            let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            if !(d > T::zero()) || !d.is_finite() {
                return Err((j, l));
            }
            let d = d.sqrt();
            row_j[j] = d;
            for v in &mut row_j[j + 1..] {
                *v = T::zero();
            }
            let (row_j, rest) = tail.split_at_mut(n);
            let row_j = &row_j[..j];
            for row_i in rest.chunks_exact_mut(n) {
                row_i[j] = (row_i[j] - dot(&row_i[..j], row_j)) / d;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.l[i * self.n + j]
    }

    pub fn factor(&self) -> &[T] {
        &self.l
    }

    /// Solves `L·x = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            x[i] = (x[i] - dot(row, &x[..i])) / self.l[i * n + i];
        }
        x
    }

    /// Solves `Lᵀ·x = b`.
    pub fn solve_upper(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            x[i] = x[i] / self.l[i * n + i];
            let xi = x[i];
            let row = &self.l[i * n..i * n + i];
            for (xk, &a) in x[..i].iter_mut().zip(row) {
                *xk = *xk - a * xi;
            }
        }
        x
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `ln det A = 2·Σ ln Lᵢᵢ`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.n).map(|i| two * self.at(i, i).ln()).sum()
    }

    /// Smallest squared pivot `min Lᵢᵢ²`.
    pub fn min_pivot(&self) -> T {
        (0..self.n)
            .map(|i| self.at(i, i) * self.at(i, i))
            .fold(T::infinity(), T::min)
    }

    /// `L·Lᵀ` as a dense row-major matrix.
    pub fn reconstruct(&self) -> Vec<T> {
        let n = self.n;
        let mut a = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let s: T = (0..=j).map(|k| self.at(i, k) * self.at(j, k)).sum();
                a[i * n + j] = s;
                a[j * n + i] = s;
            }
        }
        a
    }
}

/// Relative jitter levels tried in order, as multiples of the mean diagonal.
pub const JITTER_LEVELS: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Factorizes `a + jitter·I`, escalating the jitter through
/// [`JITTER_LEVELS`]. Returns the factor and the absolute jitter used.
pub fn factorize_jittered<T: Real>(a: &[T], n: usize) -> Result<(Cholesky<T>, T)> {
    let mean_diag = (0..n).map(|i| a[i * n + i]).sum::<T>() / T::from_len(n.max(1));
    let mut work = Vec::new();
    let mut last_pivot = 0;
    for level in JITTER_LEVELS {
        let jitter = T::lit(level) * mean_diag.abs().max(T::min_positive_value());
        work.clear();
        work.extend_from_slice(a);
        for i in 0..n {
            work[i * n + i] = a[i * n + i] + jitter;
        }
        match Cholesky::in_place(work, n) {
            Ok(c) => return Ok((c, jitter)),
            Err((p, buf)) => {
                last_pivot = p;
                work = buf;
            }
        }
    }
    Err(Error::Numeric {
        message: format!(
            "covariance factorization failed at pivot {last_pivot} after jitter escalation to {:e}",
            JITTER_LEVELS[JITTER_LEVELS.len() - 1]
        ),
        trace: JITTER_LEVELS.to_vec(),
    })
}
