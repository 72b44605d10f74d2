use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{mean_std, percentile_sorted, QoiResult};
use crate::error::{Error, Result};
use crate::Real;

pub const HISTOGRAM_BINS: usize = 20;

/// Distribution summary of a sample of Y_k values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub p2_5: f64,
    pub p50: f64,
    pub p97_5: f64,
}

impl SampleSummary {
    pub fn of(values: &[f64]) -> Self {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let (mean, std) = mean_std(&s);
        SampleSummary {
            n: s.len(),
            mean,
            std,
            p2_5: percentile_sorted(&s, 0.025),
            p50: percentile_sorted(&s, 0.5),
            p97_5: percentile_sorted(&s, 0.975),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    pub rank: usize,
    pub a_mean: f64,
    pub a_p2_5: f64,
    pub a_p97_5: f64,
    pub b_mean: f64,
    pub b_p2_5: f64,
    pub b_p97_5: f64,
    /// The two 95% intervals intersect.
    pub intervals_overlap: bool,
    /// a's mean lies inside b's 95% interval.
    pub a_mean_in_b_band: bool,
}

/// Comparison of a candidate result `a` against a reference `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub k: usize,
    pub ranks: Vec<RankComparison>,
    pub a_yk: SampleSummary,
    pub b_yk: SampleSummary,
    /// (mean a − mean b) / mean b for Y_k. Positive means a is conservative.
    pub relative_mean_difference: f64,
    pub conservative: bool,
    /// Rank j (1-based) whose mean in b is closest to a's Y_k mean.
    pub closest_rank: usize,
    /// Share of ranks whose a-mean falls in b's 95% interval.
    pub fraction_in_band: f64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub a_count: usize,
    pub b_count: usize,
}

fn histogram(a: &[f64], b: &[f64], bins: usize) -> Vec<HistogramBin> {
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            a_count: 0,
            b_count: 0,
        })
        .collect();
    let bin = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    for &v in a {
        out[bin(v)].a_count += 1;
    }
    for &v in b {
        out[bin(v)].b_count += 1;
    }
    out
}

/// Index of the value in `means` closest to `target` (first on ties).
fn closest(means: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (j, m) in means.iter().enumerate() {
        if (m - target).abs() < (means[best] - target).abs() {
            best = j;
        }
    }
    best
}

pub fn compare_qoi<T: Real>(a: &QoiResult<T>, b: &QoiResult<T>) -> Result<Comparison> {
    if a.k != b.k {
        return Err(Error::Usage(format!(
            "cannot compare Y_{} with Y_{}",
            a.k, b.k
        )));
    }
    let ranks: Vec<RankComparison> = a
        .ranks
        .iter()
        .zip(&b.ranks)
        .map(|(ra, rb)| RankComparison {
            rank: ra.rank,
            a_mean: ra.mean,
            a_p2_5: ra.p2_5,
            a_p97_5: ra.p97_5,
            b_mean: rb.mean,
            b_p2_5: rb.p2_5,
            b_p97_5: rb.p97_5,
            intervals_overlap: ra.p2_5 <= rb.p97_5 && rb.p2_5 <= ra.p97_5,
            a_mean_in_b_band: rb.p2_5 <= ra.mean && ra.mean <= rb.p97_5,
        })
        .collect();
    let ya: Vec<f64> = a.yk_samples().iter().map(|v| v.as_f64()).collect();
    let yb: Vec<f64> = b.yk_samples().iter().map(|v| v.as_f64()).collect();
    let a_yk = SampleSummary::of(&ya);
    let b_yk = SampleSummary::of(&yb);
    let relative_mean_difference = (a_yk.mean - b_yk.mean) / b_yk.mean;
    let b_means: Vec<f64> = b.ranks.iter().map(|r| r.mean).collect();
    let in_band = ranks.iter().filter(|r| r.a_mean_in_b_band).count();
    Ok(Comparison {
        k: a.k,
        fraction_in_band: in_band as f64 / a.k as f64,
        a_yk,
        b_yk,
        relative_mean_difference,
        conservative: relative_mean_difference > 0.0,
        closest_rank: closest(&b_means, a_yk.mean) + 1,
        histogram: histogram(&ya, &yb, HISTOGRAM_BINS),
        ranks,
    })
}

pub const REPORT_FILE: &str = "report.json";
pub const RANK_CURVES_FILE: &str = "rank_curves.csv";
pub const HISTOGRAM_FILE: &str = "yk_histogram.csv";

/// Writes `report.json`, `rank_curves.csv` and `yk_histogram.csv`.
pub fn write_comparison(c: &Comparison, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(c)? + "\n")?;

    let mut w = BufWriter::new(File::create(dir.join(RANK_CURVES_FILE))?);
    writeln!(
        w,
        "rank,a_mean,a_p2.5,a_p97.5,b_mean,b_p2.5,b_p97.5,intervals_overlap,a_mean_in_b_band"
    )?;
    for r in &c.ranks {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.rank,
            r.a_mean,
            r.a_p2_5,
            r.a_p97_5,
            r.b_mean,
            r.b_p2_5,
            r.b_p97_5,
            r.intervals_overlap,
            r.a_mean_in_b_band
        )?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(HISTOGRAM_FILE))?);
    writeln!(w, "bin_lo,bin_hi,a_count,b_count")?;
    for h in &c.histogram {
        writeln!(w, "{},{},{},{}", h.lo, h.hi, h.a_count, h.b_count)?;
    }
    w.flush()?;
    Ok(())
}
