use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// JONSWAP peak enhancement factor.
pub const PEAK_ENHANCEMENT: f64 = 3.3;

/// Uniform angular-frequency grid `ω_k = k·Δω`, `k = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid<T> {
    pub d_omega: T,
    pub n_points: usize,
}

impl<T: Real> FrequencyGrid<T> {
    /// Grid matching the one-sided bins of a length-`fft_len` transform at
    /// sample interval `dt`; the last point is the Nyquist frequency `π/dt`.
    pub fn for_sampling(dt: T, fft_len: usize) -> Self {
        FrequencyGrid {
            d_omega: T::TAU() / (T::from_len(fft_len) * dt),
            n_points: fft_len / 2 + 1,
        }
    }

    pub fn omega_max(&self) -> T {
        self.d_omega * T::from_len(self.n_points - 1)
    }

    pub fn omegas(&self) -> Vec<T> {
        (0..self.n_points)
            .map(|k| T::from_len(k) * self.d_omega)
            .collect()
    }
}

/// One-sided spectral density on a uniform grid. Used both for wave
/// elevation (m²·s/rad) and for structural response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    pub omega: Vec<T>,
    pub density: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn zeros(grid: &FrequencyGrid<T>) -> Self {
        Spectrum {
            omega: grid.omegas(),
            density: vec![T::zero(); grid.n_points],
        }
    }

    pub fn d_omega(&self) -> T {
        if self.omega.len() < 2 {
            T::zero()
        } else {
            self.omega[1] - self.omega[0]
        }
    }

    /// Trapezoid integral of the density (the zeroth moment m₀).
    pub fn m0(&self) -> T {
        trapezoid(&self.omega, &self.density)
    }

    /// Index of the largest density value.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.density.iter().enumerate() {
            if v > self.density[best] {
                best = i;
            }
        }
        best
    }
}

pub fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    let half = T::lit(0.5);
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| (xw[1] - xw[0]) * (yw[0] + yw[1]) * half)
        .sum()
}

/// JONSWAP-shaped wave spectrum (γ = 3.3) rescaled so its trapezoid integral
/// on `grid` is exactly `hs²/16`.
pub fn wave_spectrum<T: Real>(hs: T, tp: T, grid: &FrequencyGrid<T>) -> Result<Spectrum<T>> {
    if !(hs >= T::zero()) || !hs.is_finite() {
        return Err(Error::Domain(format!("hs must be non-negative, got {hs}")));
    }
    if !(tp > T::zero()) || !tp.is_finite() {
        return Err(Error::Domain(format!("tp must be positive, got {tp}")));
    }
    let wp = T::TAU() / tp;
    if wp >= grid.omega_max() {
        return Err(Error::Config(format!(
            "peak frequency {wp} rad/s is above the grid top {} rad/s",
            grid.omega_max()
        )));
    }
    if wp < T::lit(2.0) * grid.d_omega {
        return Err(Error::Config(format!(
            "peak frequency {wp} rad/s is below the grid resolution {} rad/s",
            grid.d_omega
        )));
    }

    let mut spec = Spectrum::zeros(grid);
    if hs == T::zero() {
        return Ok(spec);
    }

    let ln_gamma = T::lit(PEAK_ENHANCEMENT).ln();
    let log_density = |w: T| -> T {
        let sigma = if w <= wp { T::lit(0.07) } else { T::lit(0.09) };
        let r = -((w - wp) * (w - wp)) / (T::lit(2.0) * sigma * sigma * wp * wp);
        let ratio = wp / w;
        let ratio2 = ratio * ratio;
        T::lit(-5.0) * w.ln() - T::lit(1.25) * ratio2 * ratio2 + r.exp() * ln_gamma
    };
    // Normalize in log space against the peak value so ω⁻⁵ never overflows.
    let ln_peak = log_density(wp);
    for (s, &w) in spec.density.iter_mut().zip(&spec.omega) {
        if w > T::zero() {
            *s = (log_density(w) - ln_peak).exp();
        }
    }
    let m0 = spec.m0();
    if !(m0 > T::zero()) {
        return Err(Error::numeric("wave spectrum integrates to zero on the grid"));
    }
    let scale = hs * hs / T::lit(16.0) / m0;
    for s in &mut spec.density {
        *s = *s * scale;
    }
    Ok(spec)
}

/// Single-degree-of-freedom resonant response amplitude operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction<T> {
    /// Natural angular frequency, rad/s.
    pub omega0: T,
    /// Damping ratio.
    pub zeta: T,
    /// Response per metre of wave amplitude at low frequency, N·m/m.
    pub gain: T,
}

impl<T: Real> Default for TransferFunction<T> {
    fn default() -> Self {
        TransferFunction {
            omega0: T::lit(0.7),
            zeta: T::lit(0.12),
            gain: T::lit(3.9e4),
        }
    }
}

impl<T: Real> TransferFunction<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > T::zero()) {
            return Err(Error::Config("omega0 must be positive".into()));
        }
        if !(self.zeta > T::zero() && self.zeta < T::one()) {
            return Err(Error::Config("zeta must lie in (0, 1)".into()));
        }
        if !(self.gain > T::zero()) {
            return Err(Error::Config("gain must be positive".into()));
        }
        Ok(())
    }

    /// `|H(ω)|² = g²·ω₀⁴ / ((ω₀² − ω²)² + (2ζω₀ω)²)`.
    #[inline]
    pub fn gain_squared(&self, w: T) -> T {
        let w02 = self.omega0 * self.omega0;
        let a = w02 - w * w;
        let b = T::lit(2.0) * self.zeta * self.omega0 * w;
        self.gain * self.gain * w02 * w02 / (a * a + b * b)
    }
}

/// `S_R(ω) = |H(ω)|²·S(ω)` on the wave spectrum's grid.
pub fn response_spectrum<T: Real>(wave: &Spectrum<T>, tf: &TransferFunction<T>) -> Spectrum<T> {
    Spectrum {
        omega: wave.omega.clone(),
        density: wave
            .omega
            .iter()
            .zip(&wave.density)
            .map(|(&w, &s)| tf.gain_squared(w) * s)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> FrequencyGrid<f64> {
        FrequencyGrid::for_sampling(0.5, 8192)
    }

    #[test]
    fn grid_top_is_nyquist() {
        let g = grid();
        assert_eq!(g.n_points, 4097);
        assert!((g.omega_max() - std::f64::consts::PI / 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_height_gives_zero_density() {
        let s = wave_spectrum(0.0, 10.0, &grid()).unwrap();
        assert!(s.density.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn m0_matches_table_row() {
        let s = wave_spectrum(3.2, 11.3, &grid()).unwrap();
        let m0 = s.m0();
        assert!((m0 - 0.64).abs() / 0.64 < 5e-3, "m0 = {m0}");
    }

    #[test]
    fn peak_sits_at_peak_frequency() {
        let g = grid();
        let s = wave_spectrum(3.2, 11.3, &g).unwrap();
        let w = s.omega[s.argmax()];
        let wp = std::f64::consts::TAU / 11.3;
        assert!((w - wp).abs() <= g.d_omega, "argmax {w} vs {wp}");
        assert!((wp - 0.5561).abs() < 1e-4);
    }

    #[test]
    fn peak_above_nyquist_is_config_error() {
        let g = FrequencyGrid::for_sampling(2.0, 1024);
        assert!(matches!(wave_spectrum(1.0, 3.0, &g), Err(Error::Config(_))));
    }

    #[test]
    fn rao_at_resonance() {
        let tf = TransferFunction::<f64> {
            omega0: 1.1,
            zeta: 0.1,
            gain: 1.0,
        };
        assert!((tf.gain_squared(1.1) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn zero_wave_gives_zero_response() {
        let s = wave_spectrum(0.0, 10.0, &grid()).unwrap();
        let r = response_spectrum(&s, &TransferFunction::default());
        assert!(r.density.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn f32_spectrum_normalizes() {
        let g = FrequencyGrid::<f32>::for_sampling(0.5, 8192);
        let s = wave_spectrum(3.0f32, 10.0, &g).unwrap();
        assert!((s.m0() - 9.0 / 16.0).abs() / (9.0 / 16.0) < 5e-3);
    }
}
