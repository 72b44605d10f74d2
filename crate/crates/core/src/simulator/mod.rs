//! Stochastic structural-response simulator: wave spectrum, transfer function,
//! random-phase time series, quasi-static wind moment and peak extraction.

mod peaks;
mod spectrum;

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weather::WeatherRecord;
use crate::{seed, Real};

pub use peaks::{extract_peaks, SimOutput};
pub use spectrum::{
    response_spectrum, trapezoid, wave_spectrum, FrequencyGrid, Spectrum, TransferFunction,
    PEAK_ENHANCEMENT,
};

/// Wind thrust as a function of mean wind speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustCurve<T> {
    pub rated_speed: T,
    pub cutout_speed: T,
    /// Thrust at rated speed, N.
    pub rated_force: T,
}

impl<T: Real> Default for ThrustCurve<T> {
    fn default() -> Self {
        ThrustCurve {
            rated_speed: T::lit(11.4),
            cutout_speed: T::lit(25.0),
            rated_force: T::lit(250.0),
        }
    }
}

impl<T: Real> ThrustCurve<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rated_speed > T::zero() && self.rated_speed < self.cutout_speed) {
            return Err(Error::Config("need 0 < rated_speed < cutout_speed".into()));
        }
        if !(self.rated_force > T::zero()) {
            return Err(Error::Config("rated_force must be positive".into()));
        }
        Ok(())
    }

    pub fn force(&self, vw: T) -> T {
        if vw < self.rated_speed {
            let r = vw / self.rated_speed;
            self.rated_force * r * r * r
        } else if vw <= self.cutout_speed {
            self.rated_force
        } else {
            T::zero()
        }
    }
}

/// Quasi-static overturning moment from wind thrust, N·m.
pub fn wind_moment<T: Real>(vw: T, thrust: &ThrustCurve<T>, lever_arm: T) -> T {
    thrust.force(vw.max(T::zero())) * lever_arm
}

/// Simulator settings. Serialized as a flat key/value TOML file with keys
/// `dt, duration, omega0, zeta, gain, rated_speed, cutout_speed,
/// rated_force, lever_arm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    /// Sample interval, s.
    pub dt: T,
    /// Length of one realization, s.
    pub duration: T,
    #[serde(flatten)]
    pub transfer: TransferFunction<T>,
    #[serde(flatten)]
    pub thrust: ThrustCurve<T>,
    /// Thrust lever arm, m.
    pub lever_arm: T,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        SimConfig {
            dt: T::lit(0.5),
            duration: T::lit(3600.0),
            transfer: TransferFunction::default(),
            thrust: ThrustCurve::default(),
            lever_arm: T::lit(20.0),
        }
    }
}

pub const MIN_SAMPLES: usize = 1024;

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !(self.duration > T::zero()) {
            return Err(Error::Config("dt and duration must be positive".into()));
        }
        let n = self.n_samples();
        if n < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "duration/dt gives {n} samples, need at least {MIN_SAMPLES}"
            )));
        }
        if !(self.lever_arm > T::zero()) {
            return Err(Error::Config("lever_arm must be positive".into()));
        }
        self.transfer.validate()?;
        self.thrust.validate()?;
        if self.transfer.omega0 >= T::PI() / self.dt {
            return Err(Error::Config(
                "natural frequency lies above the Nyquist frequency".into(),
            ));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Transform length: the next power of two at or above the sample count.
    pub fn fft_len(&self) -> usize {
        self.n_samples().next_power_of_two()
    }

    pub fn grid(&self) -> FrequencyGrid<T> {
        FrequencyGrid::for_sampling(self.dt, self.fft_len())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SimConfig<T> = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

fn check_grid<T: Real>(resp: &Spectrum<T>, dt: T, fft_len: usize) -> Result<()> {
    let expect = FrequencyGrid::for_sampling(dt, fft_len);
    if resp.omega.len() != expect.n_points || resp.density.len() != expect.n_points {
        return Err(Error::Config(format!(
            "spectrum has {} points, transform of length {fft_len} needs {}",
            resp.omega.len(),
            expect.n_points
        )));
    }
    let dw = resp.d_omega();
    if ((dw - expect.d_omega) / expect.d_omega).abs() > T::lit(1e-6) || resp.omega[0] != T::zero()
    {
        return Err(Error::Config(format!(
            "spectrum spacing {dw} does not match transform bin width {}",
            expect.d_omega
        )));
    }
    Ok(())
}

fn realize_with<T: Real>(
    resp: &Spectrum<T>,
    n_samples: usize,
    fft: &dyn Fft<T>,
    seed: u64,
) -> Vec<T> {
    let n_fft = fft.len();
    let dw = resp.d_omega();
    let two = T::lit(2.0);
    let mut rng = seed::rng(seed);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    for (k, &s) in resp.density.iter().enumerate() {
        // A phase is drawn for every bin so realizations at different
        // amplitudes share phases for the same seed.
        let phase = T::lit(rng.random::<f64>()) * T::TAU();
        let amp = (two * s.max(T::zero()) * dw).sqrt();
        buf[k] = Complex::new(amp * phase.cos(), amp * phase.sin());
    }
    fft.process(&mut buf);
    buf.truncate(n_samples);
    buf.into_iter().map(|c| c.re).collect()
}

/// Zero-mean Gaussian time series with one-sided spectrum `resp`, sampled at
/// `dt` for `duration` seconds. The spectrum must sit on the transform grid
/// of [`FrequencyGrid::for_sampling`].
pub fn realize_time_series<T: Real>(
    resp: &Spectrum<T>,
    dt: T,
    duration: T,
    seed: u64,
) -> Result<Vec<T>> {
    let n = (duration / dt).round().to_usize().unwrap_or(0);
    if n < MIN_SAMPLES {
        return Err(Error::Config(format!(
            "duration/dt gives {n} samples, need at least {MIN_SAMPLES}"
        )));
    }
    let n_fft = n.next_power_of_two();
    check_grid(resp, dt, n_fft)?;
    let fft = FftPlanner::new().plan_fft_inverse(n_fft);
    Ok(realize_with(resp, n, fft.as_ref(), seed))
}

/// Reusable simulator holding a validated configuration and a planned
/// inverse transform.
#[derive(Clone)]
pub struct Simulator<T: Real> {
    cfg: SimConfig<T>,
    grid: FrequencyGrid<T>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Simulator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator").field("cfg", &self.cfg).finish()
    }
}

impl<T: Real> Simulator<T> {
    pub fn new(cfg: SimConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid();
        let fft = FftPlanner::new().plan_fft_inverse(cfg.fft_len());
        Ok(Simulator { cfg, grid, fft })
    }

    pub fn config(&self) -> &SimConfig<T> {
        &self.cfg
    }

    /// Response time series (wave part plus wind offset) for one hour.
    pub fn response_series(&self, record: &WeatherRecord<T>, seed: u64) -> Result<Vec<T>> {
        let wave = wave_spectrum(record.hs, record.tp, &self.grid)?;
        let resp = response_spectrum(&wave, &self.cfg.transfer);
        let mut series = realize_with(&resp, self.cfg.n_samples(), self.fft.as_ref(), seed);
        let offset = wind_moment(record.vw, &self.cfg.thrust, self.cfg.lever_arm);
        for v in &mut series {
            *v = *v + offset;
        }
        Ok(series)
    }

    pub fn run(&self, record: &WeatherRecord<T>, seed: u64) -> Result<SimOutput<T>> {
        let series = self.response_series(record, seed)?;
        let mean = series.iter().copied().sum::<T>() / T::from_len(series.len());
        Ok(extract_peaks(&series, mean))
    }
}

/// One simulator run. Prefer [`Simulator::run`] in loops; this builds a fresh
/// transform plan per call.
pub fn simulate<T: Real>(
    record: &WeatherRecord<T>,
    cfg: &SimConfig<T>,
    seed: u64,
) -> Result<SimOutput<T>> {
    Simulator::new(*cfg)?.run(record, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(hs: f64, tp: f64, vw: f64) -> WeatherRecord<f64> {
        WeatherRecord::new(0, hs, tp, vw).unwrap()
    }

    #[test]
    fn wind_moment_regimes() {
        let th = ThrustCurve::<f64>::default();
        assert_eq!(wind_moment(0.0, &th, 20.0), 0.0);
        assert_eq!(wind_moment(th.rated_speed, &th, 20.0), th.rated_force * 20.0);
        assert_eq!(wind_moment(th.cutout_speed, &th, 20.0), th.rated_force * 20.0);
        assert_eq!(wind_moment(th.cutout_speed + 1.0, &th, 20.0), 0.0);
        let below = wind_moment(th.rated_speed * 0.5, &th, 1.0);
        assert!((below - th.rated_force / 8.0).abs() < 1e-9);
    }

    #[test]
    fn zero_response_realizes_to_zero() {
        let cfg = SimConfig::<f64>::default();
        let resp = Spectrum::zeros(&cfg.grid());
        let x = realize_time_series(&resp, cfg.dt, cfg.duration, 1).unwrap();
        assert_eq!(x.len(), 7200);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_grid_is_config_error() {
        let resp = Spectrum::zeros(&FrequencyGrid::<f64>::for_sampling(0.5, 4096));
        assert!(matches!(
            realize_time_series(&resp, 0.5, 3600.0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn short_duration_rejected() {
        let cfg = SimConfig::<f64> {
            duration: 100.0,
            ..Default::default()
        };
        assert!(matches!(Simulator::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn simulate_is_deterministic() {
        let cfg = SimConfig::default();
        let a = simulate(&rec(3.0, 10.0, 8.0), &cfg, 99).unwrap();
        let b = simulate(&rec(3.0, 10.0, 8.0), &cfg, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.count() > 100);
        assert!(a.peaks.iter().all(|&p| p > a.threshold));
    }

    #[test]
    fn small_sea_state_peaks_above_mean() {
        let out = simulate(&rec(0.2, 10.0, 0.0), &SimConfig::default(), 5).unwrap();
        assert!(out.peaks.iter().all(|&p| p > out.threshold));
    }

    #[test]
    fn config_toml_has_flat_keys() {
        let text = SimConfig::<f64>::default().to_toml();
        for key in [
            "dt", "duration", "omega0", "zeta", "gain", "rated_speed", "cutout_speed",
            "rated_force", "lever_arm",
        ] {
            assert!(text.contains(&format!("{key} = ")), "missing {key} in\n{text}");
        }
        let back: SimConfig<f64> = toml::from_str(&text).unwrap();
        assert_eq!(back, SimConfig::default());
    }
}
