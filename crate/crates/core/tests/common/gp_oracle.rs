//! Dense reference implementation of GP prediction.

use nalgebra::{DMatrix, DVector};
use orderstat_gp::gp::{KernelParams, Point};
use orderstat_gp::{seed, GpModel64};
use rand::Rng;

use super::{mean, variance};

pub fn matern(a: &[f64; 3], b: &[f64; 3], sf2: f64, ls: &[f64; 3]) -> f64 {
    let r = (0..3).map(|d| ((a[d] - b[d]) / ls[d]).powi(2)).sum::<f64>().sqrt();
    let s5 = 5f64.sqrt() * r;
    sf2 * (1.0 + s5 + s5 * s5 / 3.0) * (-s5).exp()
}

pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    (variance(v) * n / (n - 1.0)).sqrt()
}

/// Dense oracle: explicit inverse of the standardized covariance.
pub fn oracle(model: &GpModel64, x: &[Point<f64>], y: &[f64], noise: &[f64], q: &Point<f64>) -> (f64, f64) {
    let n = x.len();
    let mut xm = [0.0; 3];
    let mut xs = [0.0; 3];
    for d in 0..3 {
        let col: Vec<f64> = x.iter().map(|p| p[d]).collect();
        xm[d] = mean(&col);
        xs[d] = sample_sd(&col);
    }
    let (ym, ys) = (mean(y), sample_sd(y));
    let z = |p: &Point<f64>| [(p[0] - xm[0]) / xs[0], (p[1] - xm[1]) / xs[1], (p[2] - xm[2]) / xs[2]];
    let zx: Vec<_> = x.iter().map(z).collect();
    let k = &model.kernel;
    let mut km = DMatrix::from_fn(n, n, |i, j| matern(&zx[i], &zx[j], k.signal_variance, &k.lengthscales));
    for i in 0..n {
        km[(i, i)] += noise[i] / (ys * ys) + model.jitter;
    }
    let kinv = km.try_inverse().expect("invertible");
    let zq = z(q);
    let ks = DVector::from_iterator(n, zx.iter().map(|p| matern(p, &zq, k.signal_variance, &k.lengthscales)));
    let yz = DVector::from_iterator(n, y.iter().map(|v| (v - ym) / ys));
    let mean_z = ks.dot(&(&kinv * &yz));
    let var_z = k.signal_variance - ks.dot(&(&kinv * &ks));
    (mean_z * ys + ym, var_z.max(0.0).sqrt() * ys)
}

pub fn random_problem(s: u64, n: usize) -> (Vec<Point<f64>>, Vec<f64>, Vec<f64>, KernelParams<f64>) {
    let mut rng = seed::rng(s);
    let x: Vec<Point<f64>> = (0..n)
        .map(|_| [rng.random_range(0.0..10.0), rng.random_range(4.0..20.0), rng.random_range(0.0..30.0)])
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|p| 1e4 * (p[0] / 3.0).sin() + 50.0 * p[1] + rng.random_range(-500.0..500.0))
        .collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.random_range(1e3..1e5)).collect();
    let kernel = KernelParams {
        signal_variance: rng.random_range(0.5..3.0),
        lengthscales: [rng.random_range(0.3..3.0), rng.random_range(0.3..3.0), rng.random_range(0.3..3.0)],
    };
    (x, y, noise, kernel)
}
