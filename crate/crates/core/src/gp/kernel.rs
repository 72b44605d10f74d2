use serde::{Deserialize, Serialize};

use crate::Real;

pub const DIM: usize = 3;

/// Input point `[hs, tp, vw]`.
pub type Point<T> = [T; DIM];

/// Matérn ν = 5/2 hyperparameters with one lengthscale per input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams<T> {
    pub signal_variance: T,
    pub lengthscales: [T; DIM],
}

impl<T: Real> Default for KernelParams<T> {
    fn default() -> Self {
        KernelParams {
            signal_variance: T::one(),
            lengthscales: [T::one(); DIM],
        }
    }
}

impl<T: Real> KernelParams<T> {
    pub fn is_valid(&self) -> bool {
        self.signal_variance > T::zero()
            && self.signal_variance.is_finite()
            && self.lengthscales.iter().all(|&l| l > T::zero() && l.is_finite())
    }

    /// Scaled distance `r = √(Σ ((xᵈ − yᵈ)/ℓᵈ)²)`.
    #[inline]
    pub fn distance(&self, x: &Point<T>, y: &Point<T>) -> T {
        let mut s = T::zero();
        for d in 0..DIM {
            let z = (x[d] - y[d]) / self.lengthscales[d];
            s = s + z * z;
        }
        s.sqrt()
    }

    #[inline]
    pub fn eval(&self, x: &Point<T>, y: &Point<T>) -> T {
        matern52_r(self.signal_variance, self.distance(x, y))
    }
}

/// `σ²·(1 + √5·r + 5r²/3)·exp(−√5·r)`.
#[inline]
pub fn matern52_r<T: Real>(signal_variance: T, r: T) -> T {
    let s5r = T::lit(5f64.sqrt()) * r;
    signal_variance * (T::one() + s5r + s5r * s5r / T::lit(3.0)) * (-s5r).exp()
}

pub fn matern52<T: Real>(x: &Point<T>, y: &Point<T>, k: &KernelParams<T>) -> T {
    k.eval(x, y)
}

/// Dense Gram matrix, row-major.
pub fn gram<T: Real>(points: &[Point<T>], k: &KernelParams<T>) -> Vec<T> {
    let n = points.len();
    let mut g = vec![T::zero(); n * n];
    for i in 0..n {
        g[i * n + i] = k.signal_variance;
        for j in 0..i {
            let v = k.eval(&points[i], &points[j]);
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}
