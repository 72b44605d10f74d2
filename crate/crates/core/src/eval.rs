//! Hold-out evaluation of a trained surrogate on the test split.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distfit::{DistFamily, Split, TrainingTable};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::surrogate::{SurrogateModel, LENGTH_TARGET};
use crate::Real;

/// Two-sided 95% standard-normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub hs: f64,
    pub tp: f64,
    pub vw: f64,
    pub truth: f64,
    pub pred_mean: f64,
    pub pred_std: f64,
}

impl EvalPoint {
    pub fn covered(&self) -> bool {
        (self.truth - self.pred_mean).abs() <= Z95 * self.pred_std
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEval {
    pub target: String,
    pub n: usize,
    pub rmse: f64,
    /// Share of test points inside the 95% predictive interval.
    pub coverage: f64,
    #[serde(skip)]
    pub points: Vec<EvalPoint>,
}

impl TargetEval {
    pub fn from_points(target: impl Into<String>, points: Vec<EvalPoint>) -> Self {
        let n = points.len();
        let sse: f64 = points.iter().map(|p| (p.truth - p.pred_mean).powi(2)).sum();
        let covered = points.iter().filter(|p| p.covered()).count();
        TargetEval {
            target: target.into(),
            n,
            rmse: (sse / n as f64).sqrt(),
            coverage: covered as f64 / n as f64,
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub family: DistFamily,
    /// Whether predictive intervals include each row's observation noise.
    pub include_noise: bool,
    pub targets: Vec<TargetEval>,
}

fn eval_target<T: Real>(
    name: &str,
    model: &GpModel<T>,
    rows: &[(&[T; 3], T, T)],
    include_noise: bool,
) -> TargetEval {
    let points = rows
        .iter()
        .map(|&(x, truth, noise_std)| {
            let noise = if include_noise { noise_std * noise_std } else { T::zero() };
            let m = model.predict_with_noise(x, noise);
            EvalPoint {
                hs: x[0].as_f64(),
                tp: x[1].as_f64(),
                vw: x[2].as_f64(),
                truth: truth.as_f64(),
                pred_mean: m.mean.as_f64(),
                pred_std: m.std.as_f64(),
            }
        })
        .collect();
    TargetEval::from_points(name, points)
}

/// Predicts every target of `model` on the test rows that carry a fit for its
/// family and scores the predictions against the recorded M-run means.
pub fn evaluate<T: Real>(
    model: &SurrogateModel<T>,
    table: &TrainingTable<T>,
    include_noise: bool,
) -> Result<EvalReport> {
    let family = model.family;
    let rows: Vec<_> = table
        .split(Split::Test)
        .filter_map(|r| r.family(family).map(|s| (r.inputs(), r, s)))
        .collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no test rows with {family} fits"
        )));
    }
    let mut targets = Vec::with_capacity(family.n_params() + 1);
    for (p, (name, gp)) in family.param_names().iter().zip(&model.param_models).enumerate() {
        let data: Vec<_> = rows.iter().map(|(x, _, s)| (x, s.means[p], s.stds[p])).collect();
        targets.push(eval_target(&format!("{family}_{name}"), gp, &data, include_noise));
    }
    let data: Vec<_> = rows.iter().map(|(x, r, _)| (x, r.l_mean, r.l_std)).collect();
    targets.push(eval_target(LENGTH_TARGET, &model.l_model, &data, include_noise));
    Ok(EvalReport {
        family,
        include_noise,
        targets,
    })
}

pub const EVAL_SUMMARY_FILE: &str = "eval.json";

/// Writes one `<target>.csv` per target plus `eval.json`.
pub fn write_eval(report: &EvalReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for t in &report.targets {
        let mut w = BufWriter::new(File::create(dir.join(format!("{}.csv", t.target)))?);
        writeln!(w, "hs,tp,vw,true,pred_mean,pred_std")?;
        for p in &t.points {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.hs, p.tp, p.vw, p.truth, p.pred_mean, p.pred_std
            )?;
        }
        w.flush()?;
    }
    std::fs::write(
        dir.join(EVAL_SUMMARY_FILE),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let pts = (0..5)
            .map(|i| EvalPoint {
                hs: 1.0,
                tp: 2.0,
                vw: i as f64,
                truth: i as f64,
                pred_mean: i as f64,
                pred_std: 0.0,
            })
            .collect();
        let t = TargetEval::from_points("x", pts);
        assert_eq!(t.rmse, 0.0);
        assert_eq!(t.coverage, 1.0);
    }

    #[test]
    fn rmse_and_coverage_by_hand() {
        let mk = |truth: f64, std: f64| EvalPoint {
            hs: 0.0,
            tp: 0.0,
            vw: 0.0,
            truth,
            pred_mean: 0.0,
            pred_std: std,
        };
        let t = TargetEval::from_points("x", vec![mk(3.0, 1.0), mk(-4.0, 3.0)]);
        assert!((t.rmse - (12.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(t.coverage, 0.5);
    }
}
