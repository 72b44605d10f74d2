mod common;

use common::{ks_one_sample, mean, rel_err, variance};
use orderstat_gp::simulator::{
    extract_peaks, realize_time_series, response_spectrum, trapezoid, wave_spectrum, wind_moment,
    FrequencyGrid,
};
use orderstat_gp::{seed, DistFamily, SimConfig64, Simulator64, ThrustCurve, WeatherRecord64};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn grid() -> FrequencyGrid<f64> {
    let cfg = SimConfig64::default();
    FrequencyGrid::for_sampling(cfg.dt, cfg.fft_len())
}

#[test]
fn default_grid_shape() {
    let cfg = SimConfig64::default();
    assert_eq!(cfg.n_samples(), 7200);
    assert_eq!(cfg.fft_len(), 8192);
    let g = grid();
    assert_eq!(g.n_points, 4097);
    assert!(rel_err(g.omega_max(), std::f64::consts::PI / 0.5) < 1e-12);
}

#[test]
fn spectrum_area_matches_hs() {
    let g = grid();
    let mut rng = seed::rng(11);
    for _ in 0..100 {
        let hs = rng.random_range(0.2..12.0);
        let tp = rng.random_range(4.0..20.0);
        let s = wave_spectrum(hs, tp, &g).unwrap();
        let m0 = trapezoid(&s.omega, &s.density);
        assert!(rel_err(m0, hs * hs / 16.0) < 5e-3, "hs {hs} tp {tp}");
    }
}

#[test]
fn invalid_sea_states_are_domain_errors() {
    let g = grid();
    assert!(matches!(
        wave_spectrum(-1.0, 10.0, &g),
        Err(orderstat_gp::Error::Domain(_))
    ));
    assert!(matches!(
        wave_spectrum(2.0, 0.0, &g),
        Err(orderstat_gp::Error::Domain(_))
    ));
}

#[test]
fn realization_variance_matches_response_area() {
    let g = grid();
    let cfg = SimConfig64::default();
    let wave = wave_spectrum(3.0, 10.0, &g).unwrap();
    let resp = response_spectrum(&wave, &cfg.transfer);
    let area = trapezoid(&resp.omega, &resp.density);
    let vars: Vec<f64> = (0..200)
        .map(|s| variance(&realize_time_series(&resp, cfg.dt, cfg.duration, s).unwrap()))
        .collect();
    assert!(rel_err(mean(&vars), area) < 0.02, "{} vs {area}", mean(&vars));
}

#[test]
fn response_scales_linearly_with_hs() {
    // vw = 0 gives zero wind moment, so the series is purely wave driven and
    // the spectrum scales with hs².
    let sim = Simulator64::new(SimConfig64::default()).unwrap();
    let a = sim
        .response_series(&WeatherRecord64::new(0, 1.5, 9.0, 0.0).unwrap(), 4)
        .unwrap();
    let b = sim
        .response_series(&WeatherRecord64::new(0, 3.0, 9.0, 0.0).unwrap(), 4)
        .unwrap();
    let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (x, y) in a.iter().zip(&b) {
        assert!((2.0 * x - y).abs() <= 1e-9 * scale);
    }
}

#[test]
fn wind_offset_moves_threshold_not_cycles() {
    let sim = Simulator64::new(SimConfig64::default()).unwrap();
    let calm = sim.run(&WeatherRecord64::new(0, 2.0, 8.0, 0.0).unwrap(), 9).unwrap();
    let windy = sim.run(&WeatherRecord64::new(0, 2.0, 8.0, 15.0).unwrap(), 9).unwrap();
    let cfg = sim.config();
    let offset = wind_moment(15.0, &cfg.thrust, cfg.lever_arm);
    assert!(offset > 0.0);
    assert_eq!(calm.count(), windy.count());
    for (c, w) in calm.peaks.iter().zip(&windy.peaks) {
        assert!((c + offset - w).abs() < 1e-6 * offset.max(1.0));
    }
}

#[test]
fn wind_curve_boundaries() {
    let t = ThrustCurve {
        rated_speed: 11.4,
        cutout_speed: 25.0,
        rated_force: 800.0,
    };
    assert_eq!(wind_moment(11.4, &t, 90.0), 800.0 * 90.0);
    assert_eq!(wind_moment(25.0, &t, 90.0), 800.0 * 90.0);
    assert_eq!(wind_moment(26.0, &t, 90.0), 0.0);
    let half = wind_moment(5.7, &t, 90.0);
    assert!(rel_err(half, 800.0 * 90.0 / 8.0) < 1e-12);
}

/// Independent scan: locate all up-crossings first, then take maxima over
/// the index ranges between them.
fn peaks_oracle(s: &[f64], thr: f64) -> Vec<f64> {
    let ups: Vec<usize> = (0..s.len() - 1)
        .filter(|&i| s[i] <= thr && thr < s[i + 1])
        .collect();
    let mut out = Vec::new();
    for (n, &u) in ups.iter().enumerate() {
        let end = ups.get(n + 1).map_or(s.len(), |&v| v + 1);
        out.push(s[u + 1..end].iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    out
}

#[test]
fn white_noise_peaks_match_oracle() {
    for sd in 0..20 {
        let mut rng = seed::rng(sd);
        let s: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let thr = mean(&s);
        let out = extract_peaks(&s, thr);
        assert_eq!(out.peaks, peaks_oracle(&s, thr));
        assert!(out.peaks.iter().all(|&p| p > thr));
    }
}

#[test]
fn rayleigh_peaks_for_narrow_band_sea() {
    let sim = Simulator64::new(SimConfig64::default()).unwrap();
    let rec = WeatherRecord64::new(0, 3.0, 10.0, 0.0).unwrap();
    let mut pooled = Vec::new();
    for s in 0..50 {
        pooled.extend(sim.run(&rec, seed::derive(77, s)).unwrap().peaks);
    }
    let fit = DistFamily::Rayleigh.fit(&pooled).unwrap();
    let (_, p) = ks_one_sample(&pooled, |x| DistFamily::Rayleigh.cdf(&fit.params, x));
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn peak_count_close_to_zero_crossing_rate() {
    // L ≈ duration / T_z with T_z = 2π·sqrt(m0/m2) of the response spectrum.
    let cfg = SimConfig64::default();
    let sim = Simulator64::new(cfg).unwrap();
    let rec = WeatherRecord64::new(0, 3.0, 10.0, 0.0).unwrap();
    let g = grid();
    let resp = response_spectrum(&wave_spectrum(3.0, 10.0, &g).unwrap(), &cfg.transfer);
    let m0 = trapezoid(&resp.omega, &resp.density);
    let w2: Vec<f64> = resp
        .omega
        .iter()
        .zip(&resp.density)
        .map(|(w, s)| w * w * s)
        .collect();
    let m2 = trapezoid(&resp.omega, &w2);
    let expected = cfg.duration / (std::f64::consts::TAU * (m0 / m2).sqrt());
    let counts: Vec<f64> = (0..30)
        .map(|s| sim.run(&rec, s).unwrap().count() as f64)
        .collect();
    assert!(rel_err(mean(&counts), expected) < 0.05, "{} vs {expected}", mean(&counts));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_deterministic_and_peaks_exceed_threshold(
        hs in 0.2f64..12.0, tp in 4.0f64..20.0, vw in 0.0f64..30.0, s in any::<u64>()
    ) {
        let sim = Simulator64::new(SimConfig64::default()).unwrap();
        let rec = WeatherRecord64::new(0, hs, tp, vw).unwrap();
        let a = sim.run(&rec, s).unwrap();
        prop_assert_eq!(&a, &sim.run(&rec, s).unwrap());
        prop_assert!(a.peaks.iter().all(|&p| p > a.threshold && p.is_finite()));
    }
}
