//! Maximum likelihood fits of Gumbel, Rayleigh and Weibull distributions to
//! peak arrays, and the per-design-point training table built from them.

mod table;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

pub use table::{
    aggregate_fits, build_training_table, read_training_table, write_training_table, Aggregate,
    ParamStats, Split, TrainingRow, TrainingTable, TABLE_HEADER,
};

const MAX_ITER: usize = 100;
const REL_TOL: f64 = 1e-9;
/// Upper limit on the fitted Weibull shape.
pub const WEIBULL_SHAPE_CAP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistFamily {
    Gumbel,
    Rayleigh,
    Weibull,
}

impl DistFamily {
    pub const ALL: [DistFamily; 3] = [DistFamily::Gumbel, DistFamily::Rayleigh, DistFamily::Weibull];

    pub fn index(self) -> usize {
        match self {
            DistFamily::Gumbel => 0,
            DistFamily::Rayleigh => 1,
            DistFamily::Weibull => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistFamily::Gumbel => "gumbel",
            DistFamily::Rayleigh => "rayleigh",
            DistFamily::Weibull => "weibull",
        }
    }

    /// Parameter names in storage order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            DistFamily::Gumbel => &["mu", "beta"],
            DistFamily::Rayleigh => &["sigma"],
            DistFamily::Weibull => &["k", "lambda"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    /// Whether parameter `i` must be strictly positive (scale or shape).
    pub fn is_positive(self, i: usize) -> bool {
        !matches!((self, i), (DistFamily::Gumbel, 0))
    }

    pub fn fit<T: Real>(self, data: &[T]) -> Result<FitResult<T>> {
        match self {
            DistFamily::Gumbel => fit_gumbel(data),
            DistFamily::Rayleigh => fit_rayleigh(data),
            DistFamily::Weibull => fit_weibull(data),
        }
    }

    pub fn log_likelihood<T: Real>(self, params: &[T], data: &[T]) -> T {
        match self {
            DistFamily::Gumbel => gumbel_loglik(params[0], params[1], data),
            DistFamily::Rayleigh => rayleigh_loglik(params[0], data),
            DistFamily::Weibull => weibull_loglik(params[0], params[1], data),
        }
    }

    pub fn cdf(self, params: &[f64], x: f64) -> f64 {
        match self {
            DistFamily::Gumbel => (-(-(x - params[0]) / params[1]).exp()).exp(),
            DistFamily::Rayleigh => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-(x * x) / (2.0 * params[0] * params[0])).exp()
                }
            }
            DistFamily::Weibull => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-(x / params[1]).powf(params[0])).exp()
                }
            }
        }
    }

    /// Inverse CDF at `u ∈ (0, 1)`.
    pub fn quantile(self, params: &[f64], u: f64) -> f64 {
        match self {
            DistFamily::Gumbel => params[0] - params[1] * (-u.ln()).ln(),
            DistFamily::Rayleigh => params[0] * (-2.0 * (1.0 - u).ln()).sqrt(),
            DistFamily::Weibull => params[1] * (-(1.0 - u).ln()).powf(1.0 / params[0]),
        }
    }

    /// One draw by inversion.
    pub fn sample<R: Rng + ?Sized>(self, params: &[f64], rng: &mut R) -> f64 {
        let u: f64 = rng.sample(rand_distr::Open01);
        self.quantile(params, u)
    }
}

impl fmt::Display for DistFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gumbel" => Ok(DistFamily::Gumbel),
            "rayleigh" => Ok(DistFamily::Rayleigh),
            "weibull" => Ok(DistFamily::Weibull),
            other => Err(Error::Usage(format!("unknown distribution family {other:?}"))),
        }
    }
}

/// Fitted parameters in [`DistFamily::param_names`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub family: DistFamily,
    pub params: Vec<T>,
    pub log_likelihood: T,
}

fn need_two<T>(data: &[T]) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observations, got {}",
            data.len()
        )));
    }
    Ok(())
}

fn require_positive<T: Real>(data: &[T]) -> Result<()> {
    if let Some(x) = data.iter().find(|&&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(Error::Domain(format!(
            "data must be positive and finite, found {x}"
        )));
    }
    Ok(())
}

fn require_spread<T: Real>(data: &[T]) -> Result<(T, T)> {
    let (mut lo, mut hi) = (data[0], data[0]);
    for &x in data {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite observation {x}")));
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if lo == hi {
        return Err(Error::DegenerateFit("all observations are equal".into()));
    }
    Ok((lo, hi))
}

fn mean_std<T: Real>(data: &[T]) -> (T, T) {
    let n = T::from_len(data.len());
    let mean = data.iter().copied().sum::<T>() / n;
    let ss: T = data.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - T::one())).sqrt())
}

pub fn rayleigh_loglik<T: Real>(sigma: T, data: &[T]) -> T {
    let two = T::lit(2.0);
    let s2 = sigma * sigma;
    data.iter()
        .map(|&x| x.ln() - s2.ln() - x * x / (two * s2))
        .sum()
}

pub fn gumbel_loglik<T: Real>(mu: T, beta: T, data: &[T]) -> T {
    let lb = beta.ln();
    data.iter()
        .map(|&x| {
            let z = (x - mu) / beta;
            -lb - z - (-z).exp()
        })
        .sum()
}

pub fn weibull_loglik<T: Real>(k: T, lambda: T, data: &[T]) -> T {
    let (lk, ll) = (k.ln(), lambda.ln());
    data.iter()
        .map(|&x| lk - k * ll + (k - T::one()) * x.ln() - (x / lambda).powf(k))
        .sum()
}

/// Closed-form MLE `σ̂ = √(Σx²/(2n))`.
pub fn fit_rayleigh<T: Real>(data: &[T]) -> Result<FitResult<T>> {
    need_two(data)?;
    require_positive(data)?;
    let n = T::from_len(data.len());
    let sigma = (data.iter().map(|&x| x * x).sum::<T>() / (T::lit(2.0) * n)).sqrt();
    Ok(FitResult {
        family: DistFamily::Rayleigh,
        params: vec![sigma],
        log_likelihood: rayleigh_loglik(sigma, data),
    })
}

/// Gumbel (maxima) MLE. Newton iteration on the scale profile equation
/// `β = x̄ − Σxᵢwᵢ/Σwᵢ`, `wᵢ = exp(−xᵢ/β)`, started at the moment estimate.
pub fn fit_gumbel<T: Real>(data: &[T]) -> Result<FitResult<T>> {
    need_two(data)?;
    let (lo, _) = require_spread(data)?;
    let (mean, sd) = mean_std(data);
    let n = T::from_len(data.len());

    // Weights are shifted by the sample minimum so the largest is exactly one.
    let weighted = |beta: T| -> (T, T, T) {
        let (mut sw, mut swx, mut swxx) = (T::zero(), T::zero(), T::zero());
        for &x in data {
            let d = x - lo;
            let w = (-d / beta).exp();
            sw = sw + w;
            swx = swx + w * d;
            swxx = swxx + w * d * d;
        }
        (sw, swx / sw, swxx / sw)
    };

    let mut beta = sd * T::lit(6.0).sqrt() / T::PI();
    let mut trace = vec![beta.as_f64()];
    let mean_shift = mean - lo;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let (_, m1, m2) = weighted(beta);
        let g = beta - mean_shift + m1;
        let dg = T::one() + (m2 - m1 * m1) / (beta * beta);
        let mut next = beta - g / dg;
        if !(next > T::zero()) || !next.is_finite() {
            next = beta * T::lit(0.5);
        }
        let step = ((next - beta) / beta).abs();
        beta = next;
        trace.push(beta.as_f64());
        if step < T::lit(REL_TOL) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric {
            message: format!("Gumbel scale iteration did not converge in {MAX_ITER} steps"),
            trace,
        });
    }
    let (sw, _, _) = weighted(beta);
    let mu = lo - beta * (sw / n).ln();
    Ok(FitResult {
        family: DistFamily::Gumbel,
        params: vec![mu, beta],
        log_likelihood: gumbel_loglik(mu, beta, data),
    })
}

/// Weibull MLE. Newton on the shape profile equation
/// `Σxᵏ ln x / Σxᵏ − 1/k − mean(ln x) = 0`, safeguarded by bisection, with
/// the scale in closed form given the shape. The shape is capped at
/// [`WEIBULL_SHAPE_CAP`].
pub fn fit_weibull<T: Real>(data: &[T]) -> Result<FitResult<T>> {
    need_two(data)?;
    require_positive(data)?;
    let (_, hi) = require_spread(data)?;
    let n = T::from_len(data.len());
    // Work with y = x / max(x) so every power stays in (0, 1].
    let logs: Vec<T> = data.iter().map(|&x| (x / hi).ln()).collect();
    let mean_log = logs.iter().copied().sum::<T>() / n;

    let profile = |k: T| -> (T, T, T) {
        let (mut s0, mut s1, mut s2) = (T::zero(), T::zero(), T::zero());
        for &l in &logs {
            let p = (k * l).exp();
            s0 = s0 + p;
            s1 = s1 + p * l;
            s2 = s2 + p * l * l;
        }
        let a = s1 / s0;
        let h = a - T::one() / k - mean_log;
        let dh = s2 / s0 - a * a + T::one() / (k * k);
        (h, dh, s0)
    };

    let cap = T::lit(WEIBULL_SHAPE_CAP);
    let (_, sd_log) = mean_std(&logs);
    let mut k = (T::PI() / (T::lit(6.0).sqrt() * sd_log)).min(cap);
    // h is increasing in k: keep a bracket [lo, hi] around the root.
    let (mut k_lo, mut k_hi) = (T::zero(), cap);
    if profile(cap).0 <= T::zero() {
        k = cap;
    } else {
        let mut trace = vec![k.as_f64()];
        let mut converged = false;
        for _ in 0..MAX_ITER {
            let (h, dh, _) = profile(k);
            if h > T::zero() {
                k_hi = k;
            } else {
                k_lo = k;
            }
            let mut next = k - h / dh;
            if !(next > k_lo && next < k_hi) || !next.is_finite() {
                next = (k_lo + k_hi) * T::lit(0.5);
            }
            let step = ((next - k) / k).abs();
            k = next;
            trace.push(k.as_f64());
            if step < T::lit(REL_TOL) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numeric {
                message: format!("Weibull shape iteration did not converge in {MAX_ITER} steps"),
                trace,
            });
        }
    }
    let (_, _, s0) = profile(k);
    let lambda = hi * (s0 / n).powf(T::one() / k);
    Ok(FitResult {
        family: DistFamily::Weibull,
        params: vec![k, lambda],
        log_likelihood: weibull_loglik(k, lambda, data),
    })
}
