use serde::{Deserialize, Serialize};

use crate::Real;

/// Peak responses from one simulated hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput<T> {
    pub peaks: Vec<T>,
    /// Up-crossing level used to delimit cycles.
    pub threshold: T,
}

impl<T: Real> SimOutput<T> {
    /// The number of peaks, L.
    #[inline]
    pub fn count(&self) -> usize {
        self.peaks.len()
    }
}

/// Maxima between consecutive up-crossings of `threshold`.
///
/// An up-crossing sits between samples `i` and `i + 1` when
/// `series[i] <= threshold < series[i + 1]`. Each cycle runs from the sample
/// after one up-crossing to the next up-crossing; the open segment after the
/// final up-crossing also contributes its maximum.
pub fn extract_peaks<T: Real>(series: &[T], threshold: T) -> SimOutput<T> {
    let mut peaks = Vec::new();
    let mut current: Option<T> = None;
    for w in series.windows(2) {
        if w[0] <= threshold && w[1] > threshold {
            if let Some(m) = current.take() {
                peaks.push(m);
            }
            current = Some(w[1]);
        } else if let Some(m) = current.as_mut() {
            if w[1] > *m {
                *m = w[1];
            }
        }
    }
    if let Some(m) = current {
        peaks.push(m);
    }
    SimOutput { peaks, threshold }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_no_peaks() {
        let out = extract_peaks(&[1.0f64; 100], 1.0);
        assert_eq!(out.count(), 0);
    }

    #[test]
    fn sine_periods() {
        let per = 64;
        let series: Vec<f64> = (0..=10 * per)
            .map(|i| 2.5 * (std::f64::consts::TAU * i as f64 / per as f64).sin())
            .collect();
        let out = extract_peaks(&series, 0.0);
        assert_eq!(out.count(), 10);
        for p in &out.peaks {
            assert!((p - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn closing_segment_counts() {
        let s = [0.0, 1.0, 0.0, 2.0, 3.0];
        let out = extract_peaks(&s, 0.5);
        assert_eq!(out.peaks, vec![1.0, 3.0]);
    }

    #[test]
    fn peaks_exceed_threshold() {
        let s: Vec<f64> = (0..500).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let out = extract_peaks(&s, 3.0);
        assert!(out.peaks.iter().all(|&p| p > 3.0));
    }
}
