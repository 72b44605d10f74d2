//! Marginal-likelihood hyperparameter search: coordinate-wise golden-section
//! passes over log-hyperparameters, best of several seeded starts.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{matern52_r, KernelParams, Point, DIM};
use super::linalg::factorize_jittered;
use super::standardize;
use crate::error::{Error, Result};
use crate::{seed, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperOptions {
    pub restarts: usize,
    /// Lengthscale bounds in standardized input units.
    pub lengthscale_bounds: (f64, f64),
    /// Signal variance bounds in standardized target units.
    pub signal_variance_bounds: (f64, f64),
    /// Range for log-uniform random initial lengthscales.
    pub init_lengthscales: (f64, f64),
    /// Range for log-uniform random initial signal variances.
    pub init_signal_variance: (f64, f64),
    /// Stop when a full pass improves the LML by less than this, relative.
    pub rel_tol: f64,
    pub max_passes: usize,
    /// Half-width of each golden-section bracket in log space.
    pub bracket: f64,
    /// Golden-section bracket tolerance in log space.
    pub line_tol: f64,
}

impl Default for HyperOptions {
    fn default() -> Self {
        HyperOptions {
            restarts: 5,
            lengthscale_bounds: (1e-2, 1e2),
            signal_variance_bounds: (1e-3, 1e2),
            init_lengthscales: (0.1, 10.0),
            init_signal_variance: (0.1, 10.0),
            rel_tol: 1e-6,
            max_passes: 50,
            bracket: 2.0,
            line_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperFit<T> {
    /// Best hyperparameters, standardized units.
    pub kernel: KernelParams<T>,
    pub lml: T,
    /// Index of the winning start.
    pub restart: usize,
    /// LML at each start's initial point (−∞ when that point failed).
    pub initial_lmls: Vec<T>,
    /// Final LML reached from each start.
    pub final_lmls: Vec<T>,
}

/// Precomputed squared coordinate differences for the strict lower triangle.
struct PairTable<T> {
    n: usize,
    sq: Vec<[T; DIM]>,
}

impl<T: Real> PairTable<T> {
    fn new(xs: &[Point<T>]) -> Self {
        let n = xs.len();
        let mut sq = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in 0..i {
                let mut d = [T::zero(); DIM];
                for (k, dk) in d.iter_mut().enumerate() {
                    let t = xs[i][k] - xs[j][k];
                    *dk = t * t;
                }
                sq.push(d);
            }
        }
        PairTable { n, sq }
    }
}

struct Objective<'a, T> {
    pairs: &'a PairTable<T>,
    ys: &'a [T],
    noise: &'a [T],
}

impl<T: Real> Objective<'_, T> {
    /// LML at log-parameters `[ln σ², ln ℓ₁, ln ℓ₂, ln ℓ₃]`.
    fn eval(&self, theta: &[f64; DIM + 1]) -> Option<T> {
        let sf2 = T::lit(theta[0].exp());
        let mut inv_l2 = [T::zero(); DIM];
        for d in 0..DIM {
            inv_l2[d] = T::lit((-2.0 * theta[d + 1]).exp());
        }
        let n = self.pairs.n;
        let mut k = vec![T::zero(); n * n];
        let mut p = 0;
        for i in 0..n {
            for j in 0..i {
                let sq = &self.pairs.sq[p];
                p += 1;
                let mut r2 = T::zero();
                for d in 0..DIM {
                    r2 = r2 + sq[d] * inv_l2[d];
                }
                let v = matern52_r(sf2, r2.sqrt());
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
            k[i * n + i] = sf2 + self.noise[i];
        }
        let (chol, _) = factorize_jittered(&k, n).ok()?;
        let alpha = chol.solve(self.ys);
        let fit: T = self.ys.iter().zip(&alpha).map(|(&y, &a)| y * a).sum();
        let lml = T::lit(-0.5) * fit
            - T::lit(0.5) * chol.log_det()
            - T::lit(0.5) * T::from_len(n) * T::TAU().ln();
        lml.is_finite().then_some(lml)
    }
}

fn golden_max(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Smallest bracket half-width used once steps become tiny.
const MIN_BRACKET: f64 = 0.05;
/// Pattern moves search up to this multiple of a pass's displacement.
const PATTERN_REACH: f64 = 4.0;

fn local_search<T: Real>(
    obj: &Objective<'_, T>,
    start: [f64; DIM + 1],
    bounds: &[(f64, f64); DIM + 1],
    opts: &HyperOptions,
) -> ([f64; DIM + 1], f64) {
    let score = |th: &[f64; DIM + 1]| obj.eval(th).map_or(f64::NEG_INFINITY, |v| v.as_f64());
    let clamp = |th: &mut [f64; DIM + 1]| {
        for (t, &(lo, hi)) in th.iter_mut().zip(bounds) {
            *t = t.clamp(lo, hi);
        }
    };
    let mut theta = start;
    let mut best = score(&theta);
    let mut brackets = [opts.bracket; DIM + 1];
    let mut passes = 0;
    for _ in 0..opts.max_passes {
        passes += 1;
        let before = best;
        let origin = theta;
        for c in 0..=DIM {
            let (lo, hi) = bounds[c];
            let a = (theta[c] - brackets[c]).max(lo);
            let b = (theta[c] + brackets[c]).min(hi);
            let mut trial = theta;
            let mut line = |t: f64| {
                trial[c] = t;
                score(&trial)
            };
            let (t, v) = golden_max(&mut line, a, b, opts.line_tol);
            if v > best {
                best = v;
                theta[c] = t;
            }
        }
        // Coordinate sweeps crawl along ridges; follow the sweep's net
        // displacement to cross them in one line search.
        let step: Vec<f64> = theta.iter().zip(&origin).map(|(t, o)| t - o).collect();
        if step.iter().any(|d| *d != 0.0) {
            let base = theta;
            let mut line = |s: f64| {
                let mut trial = base;
                for (t, d) in trial.iter_mut().zip(&step) {
                    *t += s * d;
                }
                clamp(&mut trial);
                score(&trial)
            };
            let (s, v) = golden_max(&mut line, 0.0, PATTERN_REACH, opts.line_tol);
            if v > best {
                best = v;
                for (t, d) in theta.iter_mut().zip(&step) {
                    *t += s * d;
                }
                clamp(&mut theta);
            }
        }
        for c in 0..=DIM {
            let moved = (theta[c] - origin[c]).abs();
            brackets[c] = (2.0 * moved).clamp(MIN_BRACKET, opts.bracket);
        }
        let gain = best - before;
        if before.is_finite() && gain <= opts.rel_tol * before.abs().max(1.0) {
            break;
        }
    }
    log::debug!("local search: {passes} passes, lml {best}");
    (theta, best)
}

/// Log marginal likelihood of `kernel` on raw data, evaluated in the
/// standardized space used by training.
pub fn log_marginal_likelihood<T: Real>(
    inputs: &[Point<T>],
    targets: &[T],
    noise_variances: &[T],
    kernel: &KernelParams<T>,
) -> Result<T> {
    let (_, xs, ys, ns) = standardize(inputs, targets, noise_variances)?;
    let pairs = PairTable::new(&xs);
    let obj = Objective {
        pairs: &pairs,
        ys: &ys,
        noise: &ns,
    };
    obj.eval(&to_log(kernel))
        .ok_or_else(|| Error::numeric("covariance factorization failed"))
}

fn to_log<T: Real>(k: &KernelParams<T>) -> [f64; DIM + 1] {
    let mut th = [0.0; DIM + 1];
    th[0] = k.signal_variance.as_f64().ln();
    for d in 0..DIM {
        th[d + 1] = k.lengthscales[d].as_f64().ln();
    }
    th
}

fn from_log<T: Real>(th: &[f64; DIM + 1]) -> KernelParams<T> {
    let mut lengthscales = [T::one(); DIM];
    for d in 0..DIM {
        lengthscales[d] = T::lit(th[d + 1].exp());
    }
    KernelParams {
        signal_variance: T::lit(th[0].exp()),
        lengthscales,
    }
}

pub fn fit_hyperparams<T: Real>(
    inputs: &[Point<T>],
    targets: &[T],
    noise_variances: &[T],
    restarts: usize,
    seed: u64,
) -> Result<HyperFit<T>> {
    let opts = HyperOptions {
        restarts,
        ..Default::default()
    };
    fit_hyperparams_with(inputs, targets, noise_variances, &opts, seed)
}

/// Maximizes the log marginal likelihood. Start 0 is the unit point
/// (σ² = 1, ℓ = 1); further starts are log-uniform draws. Starts run in
/// parallel; the best LML wins, ties going to the lowest start index.
pub fn fit_hyperparams_with<T: Real>(
    inputs: &[Point<T>],
    targets: &[T],
    noise_variances: &[T],
    opts: &HyperOptions,
    seed: u64,
) -> Result<HyperFit<T>> {
    if inputs.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 points for hyperparameter search, got {}",
            inputs.len()
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::Usage("restarts must be at least 1".into()));
    }
    let (_, xs, ys, ns) = standardize(inputs, targets, noise_variances)?;
    let pairs = PairTable::new(&xs);
    let obj = Objective {
        pairs: &pairs,
        ys: &ys,
        noise: &ns,
    };

    let (l_lo, l_hi) = (opts.lengthscale_bounds.0.ln(), opts.lengthscale_bounds.1.ln());
    let (s_lo, s_hi) = (
        opts.signal_variance_bounds.0.ln(),
        opts.signal_variance_bounds.1.ln(),
    );
    let mut bounds = [(l_lo, l_hi); DIM + 1];
    bounds[0] = (s_lo, s_hi);

    let mut rng = seed::rng(seed::derive(seed, seed::stream::HYPER));
    let log_uniform = |rng: &mut rand_chacha::ChaCha8Rng, (a, b): (f64, f64)| {
        let u: f64 = rng.random();
        a.ln() + u * (b.ln() - a.ln())
    };
    let starts: Vec<[f64; DIM + 1]> = (0..opts.restarts)
        .map(|r| {
            if r == 0 {
                [0.0; DIM + 1]
            } else {
                let mut th = [0.0; DIM + 1];
                th[0] = log_uniform(&mut rng, opts.init_signal_variance);
                for t in th.iter_mut().skip(1) {
                    *t = log_uniform(&mut rng, opts.init_lengthscales);
                }
                th
            }
        })
        .collect();

    let results: Vec<(f64, [f64; DIM + 1], f64)> = starts
        .par_iter()
        .map(|s| {
            let init = obj.eval(s).map_or(f64::NEG_INFINITY, |v| v.as_f64());
            let (th, v) = local_search(&obj, *s, &bounds, opts);
            (init, th, v)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if r.2.is_finite() && best.is_none_or(|b| r.2 > results[b].2) {
            best = Some(i);
        }
    }
    let Some(b) = best else {
        return Err(Error::numeric(
            "covariance factorization failed at every hyperparameter start",
        ));
    };
    let kernel = from_log(&results[b].1);
    // Report the LML of the rounded parameters actually returned.
    let lml = obj
        .eval(&to_log(&kernel))
        .ok_or_else(|| Error::numeric("covariance factorization failed at the optimum"))?;
    Ok(HyperFit {
        kernel,
        lml,
        restart: b,
        initial_lmls: results.iter().map(|r| T::lit(r.0)).collect(),
        final_lmls: results.iter().map(|r| T::lit(r.2)).collect(),
    })
}
