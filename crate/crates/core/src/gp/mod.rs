//! Exact Gaussian process regression with a Matérn 5/2 kernel and
//! per-observation noise variances.
//!
//! Inputs are z-scored per dimension and targets are z-scored before
//! training; kernel hyperparameters live in that standardized space.
//! Predictions are returned in target units.

mod hyper;
mod kernel;
pub mod linalg;

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{seed, Real};

pub use hyper::{fit_hyperparams, fit_hyperparams_with, log_marginal_likelihood, HyperFit, HyperOptions};
pub use kernel::{gram, matern52, matern52_r, KernelParams, Point, DIM};
use linalg::{factorize_jittered, Cholesky};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMoments<T> {
    pub mean: T,
    pub std: T,
}

/// Affine maps between raw and standardized inputs/targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization<T> {
    pub x_mean: [T; DIM],
    pub x_scale: [T; DIM],
    pub y_mean: T,
    pub y_scale: T,
}

fn mean_and_scale<T: Real>(xs: impl Iterator<Item = T> + Clone) -> (T, T) {
    let n = xs.clone().count();
    let nf = T::from_len(n);
    let mean = xs.clone().sum::<T>() / nf;
    let ss: T = xs.map(|x| (x - mean) * (x - mean)).sum();
    let sd = if n > 1 {
        (ss / (nf - T::one())).sqrt()
    } else {
        T::zero()
    };
    // Constant columns keep unit scale.
    let scale = if sd > T::zero() && sd.is_finite() { sd } else { T::one() };
    (mean, scale)
}

impl<T: Real> Standardization<T> {
    pub fn fit(inputs: &[Point<T>], targets: &[T]) -> Self {
        let mut x_mean = [T::zero(); DIM];
        let mut x_scale = [T::one(); DIM];
        for d in 0..DIM {
            let (m, s) = mean_and_scale(inputs.iter().map(|p| p[d]));
            x_mean[d] = m;
            x_scale[d] = s;
        }
        let (y_mean, y_scale) = mean_and_scale(targets.iter().copied());
        Standardization {
            x_mean,
            x_scale,
            y_mean,
            y_scale,
        }
    }

    #[inline]
    pub fn input(&self, x: &Point<T>) -> Point<T> {
        let mut z = [T::zero(); DIM];
        for d in 0..DIM {
            z[d] = (x[d] - self.x_mean[d]) / self.x_scale[d];
        }
        z
    }

    #[inline]
    pub fn target(&self, y: T) -> T {
        (y - self.y_mean) / self.y_scale
    }

    pub fn noise(&self, var: T) -> T {
        var / (self.y_scale * self.y_scale)
    }

    /// Lengthscales expressed in raw input units.
    pub fn raw_lengthscales(&self, k: &KernelParams<T>) -> [T; DIM] {
        std::array::from_fn(|d| k.lengthscales[d] * self.x_scale[d])
    }
}

/// Scaling, standardized inputs, targets and noise variances.
pub(crate) type Standardized<T> = (Standardization<T>, Vec<Point<T>>, Vec<T>, Vec<T>);

/// Standardizes raw training data. Shared by training and hyperparameter
/// search so both see the same space.
pub(crate) fn standardize<T: Real>(
    inputs: &[Point<T>],
    targets: &[T],
    noise_variances: &[T],
) -> Result<Standardized<T>> {
    let n = inputs.len();
    if targets.len() != n || noise_variances.len() != n {
        return Err(Error::Usage(format!(
            "inconsistent training sizes: {} inputs, {} targets, {} noise variances",
            n,
            targets.len(),
            noise_variances.len()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 training points, got {n}"
        )));
    }
    if inputs.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::Domain("training data must be finite".into()));
    }
    if noise_variances.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(Error::Domain("noise variances must be finite and non-negative".into()));
    }
    let st = Standardization::fit(inputs, targets);
    let xs = inputs.iter().map(|x| st.input(x)).collect();
    let ys = targets.iter().map(|&y| st.target(y)).collect();
    let ns = noise_variances.iter().map(|&v| st.noise(v)).collect();
    Ok((st, xs, ys, ns))
}

/// A trained GP for one scalar target.
#[derive(Debug, Clone)]
pub struct GpModel<T: Real> {
    pub kernel: KernelParams<T>,
    pub standardization: Standardization<T>,
    /// Standardized training inputs.
    pub inputs: Vec<Point<T>>,
    /// Standardized training targets.
    pub targets: Vec<T>,
    /// Standardized per-point noise variances.
    pub noise_variances: Vec<T>,
    pub jitter: T,
    factor: Cholesky<T>,
    weights: Vec<T>,
}

impl<T: Real> GpModel<T> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn factor(&self) -> &Cholesky<T> {
        &self.factor
    }

    /// `(K + diag(noise) + jitter·I)⁻¹·y` in standardized units.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// The matrix that was factorized, row-major.
    pub fn covariance(&self) -> Vec<T> {
        let n = self.len();
        let mut k = gram(&self.inputs, &self.kernel);
        for i in 0..n {
            k[i * n + i] = k[i * n + i] + self.noise_variances[i] + self.jitter;
        }
        k
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> T {
        let n = T::from_len(self.len());
        let fit: T = self.targets.iter().zip(&self.weights).map(|(&y, &a)| y * a).sum();
        T::lit(-0.5) * fit - T::lit(0.5) * self.factor.log_det()
            - T::lit(0.5) * n * (T::TAU()).ln()
    }

    fn cross(&self, z: &Point<T>) -> Vec<T> {
        self.inputs.iter().map(|p| self.kernel.eval(p, z)).collect()
    }

    /// Posterior mean and standard deviation in target units. The variance
    /// is epistemic only; observation noise is not added.
    pub fn predict(&self, x: &Point<T>) -> PredictiveMoments<T> {
        self.predict_with_noise(x, T::zero())
    }

    /// Like [`predict`](Self::predict) but adds `noise_variance` (target
    /// units²) to the predictive variance.
    pub fn predict_with_noise(&self, x: &Point<T>, noise_variance: T) -> PredictiveMoments<T> {
        let st = &self.standardization;
        let z = st.input(x);
        let ks = self.cross(&z);
        let mean_z: T = ks.iter().zip(&self.weights).map(|(&k, &a)| k * a).sum();
        let v = self.factor.solve_lower(&ks);
        let vv: T = v.iter().map(|&t| t * t).sum();
        let var_z = (self.kernel.signal_variance - vv).max(T::zero());
        let var = var_z * st.y_scale * st.y_scale + noise_variance.max(T::zero());
        PredictiveMoments {
            mean: mean_z * st.y_scale + st.y_mean,
            std: var.sqrt(),
        }
    }

    /// Posterior mean only; skips the triangular solve.
    pub fn predict_mean(&self, x: &Point<T>) -> T {
        let st = &self.standardization;
        let ks = self.cross(&st.input(x));
        let m: T = ks.iter().zip(&self.weights).map(|(&k, &a)| k * a).sum();
        m * st.y_scale + st.y_mean
    }

    /// One Gaussian draw from the predictive distribution at `x`.
    pub fn sample_posterior(&self, x: &Point<T>, seed: u64) -> T {
        let m = self.predict(x);
        let z: f64 = seed::rng(seed).sample(StandardNormal);
        m.mean + m.std * T::lit(z)
    }

    pub fn to_file(&self) -> GpModelFile<T> {
        GpModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kernel: self.kernel,
            standardization: self.standardization,
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
            noise_variances: self.noise_variances.clone(),
        }
    }

    pub fn from_file(file: GpModelFile<T>) -> Result<Self> {
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        train_standardized(
            file.standardization,
            file.inputs,
            file.targets,
            file.noise_variances,
            file.kernel,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

/// Self-describing persisted form of a [`GpModel`]. The factorization is
/// recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModelFile<T> {
    pub format_version: u32,
    pub kernel: KernelParams<T>,
    pub standardization: Standardization<T>,
    pub inputs: Vec<Point<T>>,
    pub targets: Vec<T>,
    pub noise_variances: Vec<T>,
}

fn check_duplicates<T: Real>(xs: &[Point<T>], ys: &[T], noise: &[T]) -> Result<()> {
    let mut idx: Vec<usize> = (0..xs.len()).filter(|&i| noise[i] == T::zero()).collect();
    idx.sort_by(|&a, &b| {
        xs[a]
            .iter()
            .zip(&xs[b])
            .map(|(p, q)| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        if xs[a] == xs[b] && ys[a] != ys[b] {
            return Err(Error::Numeric {
                message: format!(
                    "singular covariance: training points {a} and {b} share an input, carry zero noise and disagree"
                ),
                trace: Vec::new(),
            });
        }
    }
    Ok(())
}

fn train_standardized<T: Real>(
    standardization: Standardization<T>,
    inputs: Vec<Point<T>>,
    targets: Vec<T>,
    noise_variances: Vec<T>,
    kernel: KernelParams<T>,
) -> Result<GpModel<T>> {
    if !kernel.is_valid() {
        return Err(Error::Domain(format!("invalid kernel parameters {kernel:?}")));
    }
    check_duplicates(&inputs, &targets, &noise_variances)?;
    let n = inputs.len();
    let mut k = gram(&inputs, &kernel);
    for i in 0..n {
        k[i * n + i] = k[i * n + i] + noise_variances[i];
    }
    let (factor, jitter) = factorize_jittered(&k, n)?;
    let weights = factor.solve(&targets);
    Ok(GpModel {
        kernel,
        standardization,
        inputs,
        targets,
        noise_variances,
        jitter,
        factor,
        weights,
    })
}

/// Trains a GP on raw inputs, targets and per-point noise variances (target
/// units²). `kernel` is interpreted in standardized units.
pub fn train<T: Real>(
    inputs: &[Point<T>],
    targets: &[T],
    noise_variances: &[T],
    kernel: KernelParams<T>,
) -> Result<GpModel<T>> {
    let (st, xs, ys, ns) = standardize(inputs, targets, noise_variances)?;
    train_standardized(st, xs, ys, ns, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_two_points() {
        let x = [[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]];
        let y: [f64; 2] = [1.5, -2.0];
        let gp = train(&x, &y, &[0.0, 0.0], KernelParams::default()).unwrap();
        for i in 0..2 {
            let m = gp.predict(&x[i]);
            assert!((m.mean - y[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn conflicting_duplicates_are_singular() {
        let x = [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.0, 2.0, 1.0]];
        let y = [1.0, 2.0, 0.0];
        assert!(matches!(
            train(&x, &y, &[0.0; 3], KernelParams::default()),
            Err(Error::Numeric { .. })
        ));
        // Noise makes the same data well posed.
        assert!(train(&x, &y, &[0.1; 3], KernelParams::default()).is_ok());
    }

    #[test]
    fn size_mismatch_is_usage_error() {
        let x = [[0.0; 3], [1.0; 3]];
        assert!(matches!(
            train(&x, &[1.0], &[0.0, 0.0], KernelParams::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn sample_at_noise_free_training_point_is_mean() {
        let x = [[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [2.0, 0.5, 1.0]];
        let y: [f64; 3] = [1.0, 3.0, 2.0];
        let gp = train(&x, &y, &[0.0; 3], KernelParams::default()).unwrap();
        let m = gp.predict(&x[1]);
        let s = gp.sample_posterior(&x[1], 11);
        assert!((s - m.mean).abs() < 1e-3 * gp.standardization.y_scale);
        assert_eq!(s, gp.sample_posterior(&x[1], 11));
    }

    #[test]
    fn file_round_trip_reproduces_predictions() {
        let x: Vec<Point<f64>> = (0..20)
            .map(|i| {
                let t = i as f64;
                [t.sin(), (0.3 * t).cos() * 4.0, t * 0.5]
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|p| p[0] * 3.0 + p[1] - 0.1 * p[2]).collect();
        let gp = train(&x, &y, &[0.01; 20], KernelParams::default()).unwrap();
        let json = serde_json::to_string(&gp.to_file()).unwrap();
        let back = GpModel::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        for p in &x {
            let (a, b) = (gp.predict(p), back.predict(p));
            assert!((a.mean - b.mean).abs() <= 1e-10 * a.mean.abs().max(1.0));
            assert!((a.std - b.std).abs() <= 1e-10);
        }
    }

    #[test]
    fn f32_model_interpolates() {
        let x = [[0.0f32, 0.0, 0.0], [1.0, 2.0, 3.0], [3.0, 1.0, 0.0]];
        let y = [1.0f32, 2.0, 0.5];
        let gp = train(&x, &y, &[0.0; 3], KernelParams::default()).unwrap();
        assert!((gp.predict(&x[2]).mean - 0.5).abs() < 1e-3);
    }
}
