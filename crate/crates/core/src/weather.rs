//! Hourly sea-state inputs: CSV ingestion, synthetic multi-year sequences and
//! uniform training designs.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{seed, Real};

pub const WEATHER_HEADER: [&str; 4] = ["index", "hs", "tp", "vw"];

/// One hour of sea state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord<T> {
    pub index: usize,
    /// Significant wave height, m.
    pub hs: T,
    /// Peak period, s.
    pub tp: T,
    /// Mean wind speed, m/s.
    pub vw: T,
}

impl<T: Real> WeatherRecord<T> {
    /// Builds a record, rejecting physically impossible values.
    pub fn new(index: usize, hs: T, tp: T, vw: T) -> Result<Self> {
        let rec = WeatherRecord { index, hs, tp, vw };
        rec.check_physical().map_err(Error::Domain)?;
        Ok(rec)
    }

    fn check_physical(&self) -> std::result::Result<(), String> {
        if !(self.hs.is_finite() && self.hs > T::zero()) {
            return Err(format!("hs must be positive, got {}", self.hs));
        }
        if !(self.tp.is_finite() && self.tp > T::zero()) {
            return Err(format!("tp must be positive, got {}", self.tp));
        }
        if !(self.vw.is_finite() && self.vw >= T::zero()) {
            return Err(format!("vw must be non-negative, got {}", self.vw));
        }
        Ok(())
    }

    /// `[hs, tp, vw]`, the regression input.
    #[inline]
    pub fn inputs(&self) -> [T; 3] {
        [self.hs, self.tp, self.vw]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> Bounds<T> {
    pub fn new(min: T, max: T) -> Self {
        Bounds { min, max }
    }

    #[inline]
    pub fn width(&self) -> T {
        self.max - self.min
    }

    #[inline]
    pub fn contains(&self, v: T) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Per-variable design domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBox<T> {
    pub hs: Bounds<T>,
    pub tp: Bounds<T>,
    pub vw: Bounds<T>,
}

impl<T: Real> Default for InputBox<T> {
    fn default() -> Self {
        InputBox {
            hs: Bounds::new(T::lit(0.2), T::lit(12.0)),
            tp: Bounds::new(T::lit(4.0), T::lit(20.0)),
            vw: Bounds::new(T::zero(), T::lit(30.0)),
        }
    }
}

impl<T: Real> InputBox<T> {
    pub fn axes(&self) -> [Bounds<T>; 3] {
        [self.hs, self.tp, self.vw]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in ["hs", "tp", "vw"].iter().zip(self.axes()) {
            if !(b.min.is_finite() && b.max.is_finite()) {
                return Err(Error::Config(format!("{name} bounds must be finite")));
            }
            if b.min >= b.max {
                return Err(Error::Config(format!(
                    "degenerate {name} bounds: min {} >= max {}",
                    b.min, b.max
                )));
            }
        }
        if self.hs.min <= T::zero() || self.tp.min <= T::zero() {
            return Err(Error::Config("hs and tp lower bounds must be positive".into()));
        }
        if self.vw.min < T::zero() {
            return Err(Error::Config("vw lower bound must be non-negative".into()));
        }
        Ok(())
    }

    pub fn contains(&self, rec: &WeatherRecord<T>) -> bool {
        self.hs.contains(rec.hs) && self.tp.contains(rec.tp) && self.vw.contains(rec.vw)
    }
}

/// Parameters of the synthetic weather generator: one stationary AR(1)
/// process per variable in logit-of-box space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherModel {
    pub ar_coefficient: f64,
    /// Stationary standard deviation of the latent process.
    pub latent_std: f64,
}

impl Default for WeatherModel {
    fn default() -> Self {
        WeatherModel {
            ar_coefficient: 0.95,
            latent_std: 1.0,
        }
    }
}

pub fn load_weather<T: Real>(path: impl AsRef<Path>) -> Result<Vec<WeatherRecord<T>>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let records = read_weather(file)?;
    log::info!("loaded {} weather records from {}", records.len(), path.display());
    Ok(records)
}

/// Parses weather CSV. Line numbers in errors count the header as line 1.
pub fn read_weather<T: Real, R: Read>(reader: R) -> Result<Vec<WeatherRecord<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != WEATHER_HEADER {
        return Err(Error::Schema(format!(
            "expected header {:?}, found {:?}",
            WEATHER_HEADER.join(","),
            names.join(",")
        )));
    }

    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row?;
        if row.len() != WEATHER_HEADER.len() {
            return Err(Error::Schema(format!(
                "line {line}: expected {} columns, found {}",
                WEATHER_HEADER.len(),
                row.len()
            )));
        }
        let index: usize = row[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("index {:?} is not a non-negative integer", &row[0]),
        })?;
        let mut vals = [T::zero(); 3];
        for (j, v) in vals.iter_mut().enumerate() {
            let field = &row[j + 1];
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("{} value {field:?} is not numeric", WEATHER_HEADER[j + 1]),
            })?;
            *v = T::lit(x);
        }
        let rec = WeatherRecord {
            index,
            hs: vals[0],
            tp: vals[1],
            vw: vals[2],
        };
        rec.check_physical()
            .map_err(|message| Error::Parse { line, message })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_weather<T: Real, W: Write>(records: &[WeatherRecord<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(WEATHER_HEADER)?;
    for r in records {
        w.write_record([
            r.index.to_string(),
            r.hs.to_string(),
            r.tp.to_string(),
            r.vw.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Synthetic hourly sequence with the default [`WeatherModel`].
pub fn synthesize_weather<T: Real>(
    n_hours: usize,
    bx: &InputBox<T>,
    seed: u64,
) -> Result<Vec<WeatherRecord<T>>> {
    synthesize_weather_with(n_hours, bx, &WeatherModel::default(), seed)
}

pub fn synthesize_weather_with<T: Real>(
    n_hours: usize,
    bx: &InputBox<T>,
    model: &WeatherModel,
    seed: u64,
) -> Result<Vec<WeatherRecord<T>>> {
    bx.validate()?;
    if n_hours == 0 {
        return Err(Error::Usage("n_hours must be at least 1".into()));
    }
    let phi = model.ar_coefficient;
    if !(phi.abs() < 1.0) || !(model.latent_std > 0.0) {
        return Err(Error::Config(
            "AR coefficient must lie in (-1, 1) and latent std must be positive".into(),
        ));
    }
    let innov = model.latent_std * (1.0 - phi * phi).sqrt();
    let mut rng = seed::rng(seed);
    let mut z = [0.0f64; 3];
    for zi in &mut z {
        let e: f64 = rng.sample(StandardNormal);
        *zi = model.latent_std * e;
    }
    let axes = bx.axes();
    let mut out = Vec::with_capacity(n_hours);
    for index in 0..n_hours {
        if index > 0 {
            for zi in &mut z {
                let e: f64 = rng.sample(StandardNormal);
                *zi = phi * *zi + innov * e;
            }
        }
        let mut v = [T::zero(); 3];
        for d in 0..3 {
            let b = axes[d];
            let u = 1.0 / (1.0 + (-z[d]).exp());
            v[d] = (b.min + b.width() * T::lit(u)).min(b.max).max(b.min);
        }
        out.push(WeatherRecord {
            index,
            hs: v[0],
            tp: v[1],
            vw: v[2],
        });
    }
    Ok(out)
}

/// Independent uniform draws over the box.
pub fn sample_uniform_inputs<T: Real>(
    n: usize,
    bx: &InputBox<T>,
    seed: u64,
) -> Result<Vec<WeatherRecord<T>>> {
    bx.validate()?;
    if n == 0 {
        return Err(Error::Usage("design size must be at least 1".into()));
    }
    let mut rng = seed::rng(seed);
    let axes = bx.axes();
    Ok((0..n)
        .map(|index| {
            let mut v = [T::zero(); 3];
            for d in 0..3 {
                let u: f64 = rng.random();
                v[d] = axes[d].min + axes[d].width() * T::lit(u);
            }
            WeatherRecord {
                index,
                hs: v[0],
                tp: v[1],
                vw: v[2],
            }
        })
        .collect())
}
