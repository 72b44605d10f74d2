use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DistFamily, FitResult};
use crate::error::{Error, Result};
use crate::simulator::{SimConfig, Simulator};
use crate::weather::WeatherRecord;
use crate::{seed, Real};

pub const TABLE_HEADER: [&str; 16] = [
    "hs",
    "tp",
    "vw",
    "gumbel_mu",
    "gumbel_mu_std",
    "gumbel_beta",
    "gumbel_beta_std",
    "rayleigh_sigma",
    "rayleigh_sigma_std",
    "weibull_k",
    "weibull_k_std",
    "weibull_lambda",
    "weibull_lambda_std",
    "l_mean",
    "l_std",
    "split",
];

/// Mean and sample standard deviation of each parameter over M fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStats<T> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate<T> {
    pub family: DistFamily,
    pub stats: ParamStats<T>,
    pub l_mean: T,
    pub l_std: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One design point: inputs, per-family parameter statistics (absent when a
/// fit failed in any run) and statistics of the peak count L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow<T> {
    pub hs: T,
    pub tp: T,
    pub vw: T,
    /// Indexed by [`DistFamily::index`].
    pub families: [Option<ParamStats<T>>; 3],
    pub l_mean: T,
    pub l_std: T,
    pub split: Split,
}

impl<T: Real> TrainingRow<T> {
    pub fn inputs(&self) -> [T; 3] {
        [self.hs, self.tp, self.vw]
    }

    pub fn family(&self, family: DistFamily) -> Option<&ParamStats<T>> {
        self.families[family.index()].as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTable<T> {
    pub rows: Vec<TrainingRow<T>>,
}

impl<T: Real> TrainingTable<T> {
    pub fn split(&self, which: Split) -> impl Iterator<Item = &TrainingRow<T>> {
        self.rows.iter().filter(move |r| r.split == which)
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices(Split::Train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices(Split::Test)
    }

    fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].split == which)
            .collect()
    }
}

fn two_pass<T: Real>(xs: impl Iterator<Item = T> + Clone) -> (T, T) {
    let n = T::from_len(xs.clone().count());
    let mean = xs.clone().sum::<T>() / n;
    let ss: T = xs.map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - T::one())).sqrt())
}

/// Arithmetic mean and sample standard deviation (M − 1 denominator) of each
/// parameter across `fits`, and of the peak counts.
pub fn aggregate_fits<T: Real>(fits: &[FitResult<T>], counts: &[usize]) -> Result<Aggregate<T>> {
    if fits.len() < 2 {
        return Err(Error::Usage(format!(
            "need at least 2 fits to aggregate, got {}",
            fits.len()
        )));
    }
    if counts.len() != fits.len() {
        return Err(Error::Usage(format!(
            "{} fits but {} peak counts",
            fits.len(),
            counts.len()
        )));
    }
    let family = fits[0].family;
    if fits.iter().any(|f| f.family != family) {
        return Err(Error::Usage("cannot aggregate fits of mixed families".into()));
    }
    let (mut means, mut stds) = (Vec::new(), Vec::new());
    for p in 0..family.n_params() {
        let (m, s) = two_pass(fits.iter().map(|f| f.params[p]));
        means.push(m);
        stds.push(s);
    }
    let (l_mean, l_std) = two_pass(counts.iter().map(|&c| T::from_len(c)));
    Ok(Aggregate {
        family,
        stats: ParamStats { means, stds },
        l_mean,
        l_std,
    })
}

fn build_row<T: Real>(
    sim: &Simulator<T>,
    rec: &WeatherRecord<T>,
    m: usize,
    point_seed: u64,
) -> Result<TrainingRow<T>> {
    let mut fits: [Vec<FitResult<T>>; 3] = Default::default();
    let mut failed = [false; 3];
    let mut counts = Vec::with_capacity(m);
    for run in 0..m {
        let out = sim.run(rec, seed::derive(point_seed, run as u64))?;
        counts.push(out.count());
        for fam in DistFamily::ALL {
            let i = fam.index();
            if failed[i] {
                continue;
            }
            match fam.fit(&out.peaks) {
                Ok(f) => fits[i].push(f),
                Err(e) => {
                    log::debug!("{fam} fit failed at ({}, {}, {}): {e}", rec.hs, rec.tp, rec.vw);
                    failed[i] = true;
                }
            }
        }
    }
    let mut families: [Option<ParamStats<T>>; 3] = Default::default();
    for fam in DistFamily::ALL {
        let i = fam.index();
        if !failed[i] {
            families[i] = Some(aggregate_fits(&fits[i], &counts)?.stats);
        }
    }
    let (l_mean, l_std) = two_pass(counts.iter().map(|&c| T::from_len(c)));
    Ok(TrainingRow {
        hs: rec.hs,
        tp: rec.tp,
        vw: rec.vw,
        families,
        l_mean,
        l_std,
        split: Split::Train,
    })
}

/// Runs the simulator `m` times per design point, fits all three families to
/// every run and aggregates. Rows keep design order; a seeded shuffle marks
/// 20% of them as test rows.
pub fn build_training_table<T: Real>(
    design: &[WeatherRecord<T>],
    m: usize,
    cfg: &SimConfig<T>,
    base_seed: u64,
) -> Result<TrainingTable<T>> {
    if m < 2 {
        return Err(Error::Usage(format!(
            "need at least 2 runs per design point for a standard deviation, got {m}"
        )));
    }
    let sim = Simulator::new(*cfg)?;
    let mut rows = design
        .par_iter()
        .enumerate()
        .map(|(i, rec)| build_row(&sim, rec, m, seed::derive(base_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(base_seed, seed::stream::SPLIT)));
    let n_train = (rows.len() * 8 + 5) / 10;
    for &i in &order[n_train..] {
        rows[i].split = Split::Test;
    }
    Ok(TrainingTable { rows })
}

pub fn write_training_table<T: Real, W: Write>(table: &TrainingTable<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TABLE_HEADER)?;
    for r in &table.rows {
        let mut rec = vec![r.hs.to_string(), r.tp.to_string(), r.vw.to_string()];
        for fam in DistFamily::ALL {
            match r.family(fam) {
                Some(s) => {
                    for (m, sd) in s.means.iter().zip(&s.stds) {
                        rec.push(m.to_string());
                        rec.push(sd.to_string());
                    }
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 2 * fam.n_params())),
            }
        }
        rec.push(r.l_mean.to_string());
        rec.push(r.l_std.to_string());
        rec.push(r.split.as_str().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_training_table<T: Real, R: Read>(reader: R) -> Result<TrainingTable<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != TABLE_HEADER {
        return Err(Error::Schema(format!(
            "training table header must be {:?}",
            TABLE_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != TABLE_HEADER.len() {
            return Err(Error::Schema(format!(
                "line {line}: expected {} columns, found {}",
                TABLE_HEADER.len(),
                rec.len()
            )));
        }
        let num = |j: usize| -> Result<Option<T>> {
            let s = rec[j].trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(|v| Some(T::lit(v))).map_err(|_| Error::Parse {
                line,
                message: format!("{} value {s:?} is not numeric", TABLE_HEADER[j]),
            })
        };
        let required = |j: usize| -> Result<T> {
            num(j)?.ok_or_else(|| Error::Parse {
                line,
                message: format!("{} is required", TABLE_HEADER[j]),
            })
        };
        let mut families: [Option<ParamStats<T>>; 3] = Default::default();
        let mut col = 3;
        for fam in DistFamily::ALL {
            let width = 2 * fam.n_params();
            let vals = (col..col + width).map(num).collect::<Result<Vec<_>>>()?;
            if vals.iter().all(Option::is_some) {
                let vals: Vec<T> = vals.into_iter().flatten().collect();
                families[fam.index()] = Some(ParamStats {
                    means: vals.iter().step_by(2).copied().collect(),
                    stds: vals.iter().skip(1).step_by(2).copied().collect(),
                });
            } else if vals.iter().any(Option::is_some) {
                return Err(Error::Parse {
                    line,
                    message: format!("{fam} columns are partially empty"),
                });
            }
            col += width;
        }
        let split = match rec[15].trim() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("split must be train or test, got {other:?}"),
                })
            }
        };
        rows.push(TrainingRow {
            hs: required(0)?,
            tp: required(1)?,
            vw: required(2)?,
            families,
            l_mean: required(13)?,
            l_std: required(14)?,
            split,
        });
    }
    Ok(TrainingTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(family: DistFamily, params: Vec<f64>) -> FitResult<f64> {
        FitResult {
            family,
            params,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn identical_fits_have_zero_std() {
        let f = fit(DistFamily::Gumbel, vec![1.0, 2.0]);
        let agg = aggregate_fits(&[f.clone(), f], &[10, 10]).unwrap();
        assert_eq!(agg.stats.stds, vec![0.0, 0.0]);
        assert_eq!(agg.l_std, 0.0);
    }

    #[test]
    fn table_one_location_scale() {
        let a = fit(DistFamily::Gumbel, vec![75000.0, 1.0]);
        let b = fit(DistFamily::Gumbel, vec![75742.0, 1.0]);
        let agg = aggregate_fits(&[a, b], &[1, 2]).unwrap();
        assert_eq!(agg.stats.means[0], 75371.0);
        assert!((agg.stats.stds[0] - 524.6732).abs() < 1e-3);
    }

    #[test]
    fn aggregate_usage_errors() {
        let a = fit(DistFamily::Gumbel, vec![1.0, 1.0]);
        let b = fit(DistFamily::Rayleigh, vec![1.0]);
        assert!(matches!(aggregate_fits(std::slice::from_ref(&a), &[1]), Err(Error::Usage(_))));
        assert!(matches!(aggregate_fits(&[a, b], &[1, 1]), Err(Error::Usage(_))));
    }

    #[test]
    fn empty_design_gives_empty_table() {
        let t = build_training_table::<f64>(&[], 3, &SimConfig::default(), 1).unwrap();
        assert!(t.rows.is_empty());
    }

    #[test]
    fn single_run_is_usage_error() {
        assert!(matches!(
            build_training_table::<f64>(&[], 1, &SimConfig::default(), 1),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn csv_round_trip_with_missing_family() {
        let row = TrainingRow {
            hs: 3.2,
            tp: 11.3,
            vw: 1.2,
            families: [
                Some(ParamStats {
                    means: vec![75371.0, 20983.0],
                    stds: vec![891.0, 530.0],
                }),
                Some(ParamStats {
                    means: vec![60000.0],
                    stds: vec![400.0],
                }),
                None,
            ],
            l_mean: 350.5,
            l_std: 12.25,
            split: Split::Test,
        };
        let table = TrainingTable { rows: vec![row] };
        let mut buf = Vec::new();
        write_training_table(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&TABLE_HEADER.join(",")));
        assert!(text.contains("3.2,11.3,1.2,75371,891,20983,530,60000,400,,,,,350.5,12.25,test"));
        let back: TrainingTable<f64> = read_training_table(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }
}
