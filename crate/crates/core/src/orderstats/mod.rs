//! Order statistics of peak responses: bounded top-k accumulation, brute-force
//! Y_k estimation over a weather sequence, and comparison of two estimates.

mod compare;
mod qoi;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

pub use compare::{
    compare_qoi, write_comparison, Comparison, HistogramBin, RankComparison, SampleSummary,
};
pub use qoi::{
    load_qoi, run_qoi, write_qoi, HourContext, QOI_FORMAT_VERSION, QoiConfig, QoiResult, RankSummary, ResponseSource,
    SimulatorSource, SurrogateSource,
};

use crate::error::{Error, Result};
use crate::simulator::SimOutput;
use crate::surrogate::GeneratedOutput;
use crate::Real;

/// Anything that carries a batch of peak responses. Implemented by both the
/// simulator and the surrogate output so downstream code accepts either.
pub trait PeakBatch<T> {
    fn peaks(&self) -> &[T];
}

impl<T> PeakBatch<T> for SimOutput<T> {
    fn peaks(&self) -> &[T] {
        &self.peaks
    }
}

impl<T> PeakBatch<T> for GeneratedOutput<T> {
    fn peaks(&self) -> &[T] {
        &self.peaks
    }
}

impl<T> PeakBatch<T> for [T] {
    fn peaks(&self) -> &[T] {
        self
    }
}

impl<T> PeakBatch<T> for Vec<T> {
    fn peaks(&self) -> &[T] {
        self
    }
}

/// Total order on floats so they can live in a heap.
#[derive(Debug, Clone, Copy)]
struct Key<T>(T);

impl<T: Real> PartialEq for Key<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Key<T> {}

impl<T: Real> PartialOrd for Key<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Key<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// The k largest values seen so far (multiset semantics).
#[derive(Debug, Clone)]
pub struct TopK<T: Real> {
    k: usize,
    heap: BinaryHeap<Reverse<Key<T>>>,
}

impl<T: Real> TopK<T> {
    /// # Panics
    /// If `k == 0`.
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "TopK needs k >= 1");
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() == self.k
    }

    /// Smallest retained value.
    pub fn min(&self) -> Option<T> {
        self.heap.peek().map(|r| r.0 .0)
    }

    pub fn push(&mut self, v: T) {
        if self.heap.len() < self.k {
            self.heap.push(Reverse(Key(v)));
        } else if let Some(mut top) = self.heap.peek_mut() {
            if Key(v) > top.0 {
                *top = Reverse(Key(v));
            }
        }
    }

    pub fn extend_from_slice(&mut self, values: &[T]) {
        for &v in values {
            self.push(v);
        }
    }

    pub fn update<B: PeakBatch<T> + ?Sized>(&mut self, batch: &B) {
        self.extend_from_slice(batch.peaks());
    }

    /// Folds `other` in; equivalent to having seen both streams.
    pub fn merge(mut self, other: TopK<T>) -> TopK<T> {
        debug_assert_eq!(self.k, other.k);
        for Reverse(Key(v)) in other.heap {
            self.push(v);
        }
        self
    }

    /// The kth largest value seen.
    pub fn extract_yk(&self) -> Result<T> {
        if !self.is_full() {
            return Err(Error::InsufficientData(format!(
                "Y_{} needs {} values, only {} seen ({} short)",
                self.k,
                self.k,
                self.len(),
                self.k - self.len()
            )));
        }
        Ok(self.min().expect("full heap"))
    }

    /// Retained values, largest first.
    pub fn sorted_desc(&self) -> Vec<T> {
        let mut v: Vec<T> = self.heap.iter().map(|r| r.0 .0).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

/// Percentile `p` ∈ [0, 1] of already sorted data by linear interpolation
/// between order statistics (position `p·(n−1)`).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
