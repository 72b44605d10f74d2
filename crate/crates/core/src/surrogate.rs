//! GP surrogate of the simulator: weather → distribution parameters and peak
//! count → synthetic peak responses.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distfit::{DistFamily, Split, TrainingRow, TrainingTable};
use crate::error::{Error, Result};
use crate::gp::{self, fit_hyperparams_with, GpModel, HyperOptions, Point, PredictiveMoments};
use crate::weather::WeatherRecord;
use crate::{seed, Real};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LENGTH_TARGET: &str = "l";
/// Minimum number of usable training rows per family.
pub const MIN_ROWS: usize = 20;

/// How distribution parameters are obtained from the GPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Posterior means.
    Point,
    /// One posterior draw per parameter.
    PosteriorSample,
}

/// When posterior draws are refreshed during a QoI run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRefresh {
    /// Independent draw for every (hour, realization) pair.
    #[default]
    PerHour,
    /// One standard-normal score per parameter and realization, shared by
    /// all hours of that realization.
    PerRealization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub hyper: HyperOptions,
    /// Training rows beyond this are subsampled (seeded).
    pub n_max: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            hyper: HyperOptions::default(),
            n_max: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateModel<T: Real> {
    pub family: DistFamily,
    /// One GP per distribution parameter, in [`DistFamily::param_names`] order.
    pub param_models: Vec<GpModel<T>>,
    /// GP for the peak count L.
    pub l_model: GpModel<T>,
    pub sampling_mode: SamplingMode,
    pub refresh: ThetaRefresh,
}

/// Predictive moments of every surrogate target at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct HourMoments<T> {
    pub params: Vec<PredictiveMoments<T>>,
    pub length: PredictiveMoments<T>,
}

/// Distribution parameters and peak count for one surrogate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDraw<T> {
    pub theta: Vec<T>,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance<T> {
    pub family: DistFamily,
    pub mode: SamplingMode,
    pub seed: u64,
    pub theta: Vec<T>,
}

/// Surrogate counterpart of [`SimOutput`](crate::simulator::SimOutput).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedOutput<T> {
    pub peaks: Vec<T>,
    pub provenance: Provenance<T>,
}

impl<T: Real> GeneratedOutput<T> {
    #[inline]
    pub fn count(&self) -> usize {
        self.peaks.len()
    }
}

fn family_rows<T: Real>(table: &TrainingTable<T>, family: DistFamily) -> Vec<&TrainingRow<T>> {
    table
        .split(Split::Train)
        .filter(|r| r.family(family).is_some())
        .collect()
}

fn fit_target<T: Real>(
    inputs: &[Point<T>],
    targets: &[T],
    noise: &[T],
    cfg: &GpConfig,
    seed: u64,
) -> Result<GpModel<T>> {
    let hyper = fit_hyperparams_with(inputs, targets, noise, &cfg.hyper, seed)?;
    log::debug!(
        "hyperparameters {:?} (lml {}, start {})",
        hyper.kernel,
        hyper.lml,
        hyper.restart
    );
    gp::train(inputs, targets, noise, hyper.kernel)
}

/// Trains one GP per parameter of `family` and one for L on the training
/// split. Noise variances are the squared M-run standard deviations.
pub fn train_surrogate<T: Real>(
    table: &TrainingTable<T>,
    family: DistFamily,
    cfg: &GpConfig,
    base_seed: u64,
) -> Result<SurrogateModel<T>> {
    let mut rows = family_rows(table, family);
    if rows.len() < MIN_ROWS {
        return Err(Error::InsufficientData(format!(
            "{family} surrogate needs at least {MIN_ROWS} training rows with fits, found {}",
            rows.len()
        )));
    }
    if rows.len() > cfg.n_max {
        let mut rng = seed::rng(seed::derive(base_seed, seed::stream::SUBSAMPLE));
        let mut keep = sample_indices(&mut rng, rows.len(), cfg.n_max).into_vec();
        keep.sort_unstable();
        log::info!(
            "subsampling {family} training rows from {} to {}",
            rows.len(),
            cfg.n_max
        );
        rows = keep.into_iter().map(|i| rows[i]).collect();
    }
    let inputs: Vec<Point<T>> = rows.iter().map(|r| r.inputs()).collect();
    let mut param_models = Vec::with_capacity(family.n_params());
    for p in 0..family.n_params() {
        let targets: Vec<T> = rows.iter().map(|r| r.family(family).unwrap().means[p]).collect();
        let noise: Vec<T> = rows
            .iter()
            .map(|r| {
                let s = r.family(family).unwrap().stds[p];
                s * s
            })
            .collect();
        param_models.push(fit_target(&inputs, &targets, &noise, cfg, seed::derive(base_seed, p as u64))?);
    }
    let l_targets: Vec<T> = rows.iter().map(|r| r.l_mean).collect();
    let l_noise: Vec<T> = rows.iter().map(|r| r.l_std * r.l_std).collect();
    let l_model = fit_target(&inputs, &l_targets, &l_noise, cfg, seed::derive(base_seed, 1000))?;
    Ok(SurrogateModel {
        family,
        param_models,
        l_model,
        sampling_mode: SamplingMode::PosteriorSample,
        refresh: ThetaRefresh::PerHour,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleManifest {
    format_version: u32,
    family: DistFamily,
    sampling_mode: SamplingMode,
    refresh: ThetaRefresh,
    /// `(target name, file name)` pairs, parameters first, L last.
    targets: Vec<(String, String)>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

impl<T: Real> SurrogateModel<T> {
    pub fn with_mode(mut self, mode: SamplingMode) -> Self {
        self.sampling_mode = mode;
        self
    }

    pub fn with_refresh(mut self, refresh: ThetaRefresh) -> Self {
        self.refresh = refresh;
        self
    }

    pub fn moments(&self, x: &WeatherRecord<T>) -> HourMoments<T> {
        let p = x.inputs();
        HourMoments {
            params: self.param_models.iter().map(|m| m.predict(&p)).collect(),
            length: self.l_model.predict(&p),
        }
    }

    /// Draws `(θ, L)` from precomputed moments. `frozen` supplies shared
    /// standard-normal scores for [`ThetaRefresh::PerRealization`].
    pub(crate) fn draw(
        &self,
        m: &HourMoments<T>,
        rng: &mut ChaCha8Rng,
        frozen: Option<&[f64]>,
    ) -> ParamDraw<T> {
        let mut theta = Vec::with_capacity(m.params.len());
        for (i, pm) in m.params.iter().enumerate() {
            let positive = self.family.is_positive(i);
            let floor = T::lit(1e-6) * pm.mean.abs().max(T::min_positive_value());
            let v = match self.sampling_mode {
                SamplingMode::Point => pm.mean,
                SamplingMode::PosteriorSample => {
                    let z = frozen.map_or_else(|| normal(rng), |f| f[i]);
                    let mut v = pm.mean + pm.std * T::lit(z);
                    if positive && v < floor {
                        v = pm.mean + pm.std * T::lit(normal(rng));
                    }
                    v
                }
            };
            theta.push(if positive { v.max(floor) } else { v });
        }
        let l = m.length.mean + m.length.std * T::lit(normal(rng));
        let length = l.round().max(T::zero()).to_usize().unwrap_or(0);
        ParamDraw { theta, length }
    }

    pub(crate) fn generate_from(
        &self,
        m: &HourMoments<T>,
        seed: u64,
        frozen: Option<&[f64]>,
    ) -> GeneratedOutput<T> {
        let mut rng = seed::rng(seed);
        let draw = self.draw(m, &mut rng, frozen);
        let params: Vec<f64> = draw.theta.iter().map(|t| t.as_f64()).collect();
        let peaks = (0..draw.length)
            .map(|_| T::lit(self.family.sample(&params, &mut rng)))
            .collect();
        GeneratedOutput {
            peaks,
            provenance: Provenance {
                family: self.family,
                mode: self.sampling_mode,
                seed,
                theta: draw.theta,
            },
        }
    }

    /// Distribution parameters and peak count for input `x`.
    pub fn predict_params(&self, x: &WeatherRecord<T>, seed: u64) -> ParamDraw<T> {
        self.draw(&self.moments(x), &mut seed::rng(seed), None)
    }

    /// One surrogate "simulator run": L draws from the predicted
    /// distribution. Uses the same random stream as
    /// [`predict_params`](Self::predict_params), so the θ and L behind the
    /// output equal `predict_params(x, seed)`.
    pub fn generate_responses(&self, x: &WeatherRecord<T>, seed: u64) -> GeneratedOutput<T> {
        self.generate_from(&self.moments(x), seed, None)
    }

    fn file_names(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = self
            .family
            .param_names()
            .iter()
            .map(|p| (p.to_string(), format!("{}_{p}.json", self.family)))
            .collect();
        v.push((LENGTH_TARGET.to_string(), format!("{LENGTH_TARGET}.json")));
        v
    }

    /// Writes the bundle: one model file per target plus `manifest.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let names = self.file_names();
        let models = self.param_models.iter().chain(std::iter::once(&self.l_model));
        for ((_, file), model) in names.iter().zip(models) {
            model.save(dir.join(file))?;
        }
        let manifest = BundleManifest {
            format_version: BUNDLE_FORMAT_VERSION,
            family: self.family,
            sampling_mode: self.sampling_mode,
            refresh: self.refresh,
            targets: names,
        };
        std::fs::write(
            dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest: BundleManifest = serde_json::from_str(&text)?;
        if manifest.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported bundle format version {}",
                manifest.format_version
            )));
        }
        let n = manifest.family.n_params();
        if manifest.targets.len() != n + 1 {
            return Err(Error::Schema(format!(
                "{} bundle must list {} targets, found {}",
                manifest.family,
                n + 1,
                manifest.targets.len()
            )));
        }
        let mut models = manifest
            .targets
            .iter()
            .map(|(_, file)| GpModel::load(dir.join(file)))
            .collect::<Result<Vec<_>>>()?;
        let l_model = models.pop().expect("length model listed");
        Ok(SurrogateModel {
            family: manifest.family,
            param_models: models,
            l_model,
            sampling_mode: manifest.sampling_mode,
            refresh: manifest.refresh,
        })
    }
}
