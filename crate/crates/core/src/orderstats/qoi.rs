use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, percentile_sorted, PeakBatch, TopK};
use crate::error::{Error, Result};
use crate::simulator::{SimOutput, Simulator};
use crate::surrogate::{GeneratedOutput, HourMoments, SurrogateModel, ThetaRefresh};
use crate::weather::WeatherRecord;
use crate::{seed, Real};

pub const QOI_FORMAT_VERSION: u32 = 1;

/// Stream index reserved for per-realization state; never collides with an
/// hour index.
const REALIZATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QoiConfig {
    /// Rank of the order statistic (Y_k is the kth largest peak).
    pub k: usize,
    /// Number of independent realizations M.
    pub realizations: usize,
    pub base_seed: u64,
}

impl QoiConfig {
    pub fn new(k: usize, realizations: usize, base_seed: u64) -> Self {
        QoiConfig {
            k,
            realizations,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Usage("k must be at least 1".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Usage("at least one realization is required".into()));
        }
        Ok(())
    }
}

/// Identifies one (realization, hour) run and carries its seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HourContext {
    pub hour: usize,
    pub realization: usize,
    /// Seed of this run, derived from (base, realization, hour).
    pub seed: u64,
    /// Seed shared by every hour of the realization.
    pub realization_seed: u64,
}

/// A generator of hourly peak batches over a fixed weather sequence.
pub trait ResponseSource<T: Real>: Sync {
    type Output: PeakBatch<T>;

    fn n_hours(&self) -> usize;

    fn run_hour(&self, ctx: &HourContext) -> Result<Self::Output>;
}

pub struct SimulatorSource<'a, T: Real> {
    simulator: &'a Simulator<T>,
    weather: &'a [WeatherRecord<T>],
}

impl<'a, T: Real> SimulatorSource<'a, T> {
    pub fn new(simulator: &'a Simulator<T>, weather: &'a [WeatherRecord<T>]) -> Self {
        SimulatorSource { simulator, weather }
    }
}

impl<T: Real> ResponseSource<T> for SimulatorSource<'_, T> {
    type Output = SimOutput<T>;

    fn n_hours(&self) -> usize {
        self.weather.len()
    }

    fn run_hour(&self, ctx: &HourContext) -> Result<SimOutput<T>> {
        self.simulator.run(&self.weather[ctx.hour], ctx.seed)
    }
}

/// Surrogate over a weather sequence. Predictive moments depend only on the
/// weather, so they are computed once and reused by every realization.
pub struct SurrogateSource<'a, T: Real> {
    model: &'a SurrogateModel<T>,
    moments: Vec<HourMoments<T>>,
}

impl<'a, T: Real> SurrogateSource<'a, T> {
    pub fn new(model: &'a SurrogateModel<T>, weather: &[WeatherRecord<T>]) -> Self {
        let moments = weather.par_iter().map(|w| model.moments(w)).collect();
        SurrogateSource { model, moments }
    }
}

impl<T: Real> ResponseSource<T> for SurrogateSource<'_, T> {
    type Output = GeneratedOutput<T>;

    fn n_hours(&self) -> usize {
        self.moments.len()
    }

    fn run_hour(&self, ctx: &HourContext) -> Result<GeneratedOutput<T>> {
        let m = &self.moments[ctx.hour];
        let out = match self.model.refresh {
            ThetaRefresh::PerHour => self.model.generate_from(m, ctx.seed, None),
            ThetaRefresh::PerRealization => {
                let mut rng = seed::rng(ctx.realization_seed);
                let z: Vec<f64> = (0..m.params.len()).map(|_| rng.sample(StandardNormal)).collect();
                self.model.generate_from(m, ctx.seed, Some(&z))
            }
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub rank: usize,
    pub mean: f64,
    pub p2_5: f64,
    pub p97_5: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QoiResult<T> {
    pub k: usize,
    pub n_hours: usize,
    /// Top-k values of each realization, largest first.
    pub top: Vec<Vec<T>>,
    /// Peaks processed per realization.
    pub responses: Vec<u64>,
    pub ranks: Vec<RankSummary>,
}

impl<T: Real> QoiResult<T> {
    pub(crate) fn from_top(k: usize, n_hours: usize, top: Vec<Vec<T>>, responses: Vec<u64>) -> Self {
        let ranks = (0..k)
            .map(|j| {
                let mut col: Vec<f64> = top.iter().map(|r| r[j].as_f64()).collect();
                col.sort_by(f64::total_cmp);
                RankSummary {
                    rank: j + 1,
                    mean: mean_std(&col).0,
                    p2_5: percentile_sorted(&col, 0.025),
                    p97_5: percentile_sorted(&col, 0.975),
                }
            })
            .collect();
        QoiResult {
            k,
            n_hours,
            top,
            responses,
            ranks,
        }
    }

    /// One Y_k per realization.
    pub fn yk_samples(&self) -> Vec<T> {
        self.top.iter().map(|r| r[self.k - 1]).collect()
    }

    pub fn total_responses(&self) -> u64 {
        self.responses.iter().sum()
    }

    pub fn realizations(&self) -> usize {
        self.top.len()
    }
}

fn run_realization<T: Real, S: ResponseSource<T>>(
    cfg: &QoiConfig,
    source: &S,
    m: usize,
) -> Result<(Vec<T>, u64)> {
    let realization_seed = seed::derive2(cfg.base_seed, m as u64, REALIZATION_STREAM);
    let (acc, count) = (0..source.n_hours())
        .into_par_iter()
        .try_fold(
            || (TopK::new(cfg.k), 0u64),
            |(mut acc, count), hour| {
                let ctx = HourContext {
                    hour,
                    realization: m,
                    seed: seed::derive2(cfg.base_seed, m as u64, hour as u64),
                    realization_seed,
                };
                let out = source.run_hour(&ctx)?;
                acc.update(&out);
                Ok::<_, Error>((acc, count + out.peaks().len() as u64))
            },
        )
        .try_reduce(
            || (TopK::new(cfg.k), 0u64),
            |(a, ca), (b, cb)| Ok((a.merge(b), ca + cb)),
        )?;
    if !acc.is_full() {
        return Err(Error::InsufficientData(format!(
            "realization {m} produced {count} peaks, fewer than k = {}",
            cfg.k
        )));
    }
    Ok((acc.sorted_desc(), count))
}

/// Brute-force Y_k: every realization replays the whole weather sequence with
/// fresh per-(realization, hour) seeds. The result depends only on the
/// configuration, the source and the base seed.
pub fn run_qoi<T: Real, S: ResponseSource<T>>(cfg: &QoiConfig, source: &S) -> Result<QoiResult<T>> {
    cfg.validate()?;
    if source.n_hours() == 0 {
        return Err(Error::Usage("weather sequence is empty".into()));
    }
    let runs = (0..cfg.realizations)
        .into_par_iter()
        .map(|m| run_realization(cfg, source, m))
        .collect::<Result<Vec<_>>>()?;
    let (top, responses) = runs.into_iter().unzip();
    Ok(QoiResult::from_top(cfg.k, source.n_hours(), top, responses))
}

#[derive(Debug, Serialize, Deserialize)]
struct QoiSummaryFile {
    format_version: u32,
    k: usize,
    n_hours: usize,
    realizations: usize,
    total_responses: u64,
    yk_mean: f64,
    yk_std: f64,
    yk_p2_5: f64,
    yk_p50: f64,
    yk_p97_5: f64,
}

pub const YK_FILE: &str = "yk_samples.csv";
pub const RANKS_FILE: &str = "ranks.csv";
pub const REALIZATIONS_FILE: &str = "realizations.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `yk_samples.csv`, `ranks.csv`, `realizations.csv` and
/// `summary.json` into `dir`.
pub fn write_qoi<T: Real>(result: &QoiResult<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let mut w = BufWriter::new(File::create(dir.join(YK_FILE))?);
    writeln!(w, "realization,yk,responses")?;
    for (m, (yk, n)) in result.yk_samples().iter().zip(&result.responses).enumerate() {
        writeln!(w, "{m},{yk},{n}")?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(RANKS_FILE))?);
    writeln!(w, "rank,mean,p2.5,p97.5")?;
    for r in &result.ranks {
        writeln!(w, "{},{},{},{}", r.rank, r.mean, r.p2_5, r.p97_5)?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(REALIZATIONS_FILE))?);
    writeln!(w, "realization,rank,value")?;
    for (m, row) in result.top.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            writeln!(w, "{m},{},{v}", j + 1)?;
        }
    }
    w.flush()?;

    let mut yk: Vec<f64> = result.yk_samples().iter().map(|v| v.as_f64()).collect();
    yk.sort_by(f64::total_cmp);
    let (yk_mean, yk_std) = mean_std(&yk);
    let summary = QoiSummaryFile {
        format_version: QOI_FORMAT_VERSION,
        k: result.k,
        n_hours: result.n_hours,
        realizations: result.realizations(),
        total_responses: result.total_responses(),
        yk_mean,
        yk_std,
        yk_p2_5: percentile_sorted(&yk, 0.025),
        yk_p50: percentile_sorted(&yk, 0.5),
        yk_p97_5: percentile_sorted(&yk, 0.975),
    };
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

fn parse_field<V: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<V> {
    field
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid {what}"),
        })
}

/// Reads a result directory written by [`write_qoi`].
pub fn load_qoi<T: Real>(dir: impl AsRef<Path>) -> Result<QoiResult<T>> {
    let dir = dir.as_ref();
    let summary: QoiSummaryFile =
        serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE))?)?;
    if summary.format_version != QOI_FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported QoI format version {}",
            summary.format_version
        )));
    }
    let (k, m) = (summary.k, summary.realizations);
    if k == 0 || m == 0 {
        return Err(Error::Schema("summary must have k ≥ 1 and at least one realization".into()));
    }

    let mut top = vec![vec![T::nan(); k]; m];
    let mut seen = 0usize;
    let mut rdr = csv::Reader::from_path(dir.join(REALIZATIONS_FILE))?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let r: usize = parse_field(rec.get(0), line, "realization")?;
        let j: usize = parse_field(rec.get(1), line, "rank")?;
        let v: f64 = parse_field(rec.get(2), line, "value")?;
        if r >= m || j == 0 || j > k {
            return Err(Error::Parse {
                line,
                message: format!("realization {r} rank {j} outside {m} × {k}"),
            });
        }
        top[r][j - 1] = T::lit(v);
        seen += 1;
    }
    if seen != k * m {
        return Err(Error::Schema(format!(
            "{REALIZATIONS_FILE} has {seen} entries, expected {}",
            k * m
        )));
    }

    let mut responses = vec![0u64; m];
    let mut rdr = csv::Reader::from_path(dir.join(YK_FILE))?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let r: usize = parse_field(rec.get(0), i + 2, "realization")?;
        if r >= m {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("realization {r} out of range"),
            });
        }
        responses[r] = parse_field(rec.get(2), i + 2, "responses")?;
    }
    Ok(QoiResult::from_top(k, summary.n_hours, top, responses))
}
