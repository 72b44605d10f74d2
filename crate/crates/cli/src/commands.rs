use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use orderstat_gp::distfit::{build_training_table, read_training_table, write_training_table};
use orderstat_gp::eval::{evaluate, write_eval, EVAL_SUMMARY_FILE};
use orderstat_gp::gp::MODEL_FORMAT_VERSION;
use orderstat_gp::manifest::RunManifest;
use orderstat_gp::orderstats::{
    compare_qoi, load_qoi, run_qoi, write_comparison, write_qoi, SimulatorSource, SurrogateSource,
};
use orderstat_gp::surrogate::{train_surrogate, GpConfig, BUNDLE_FORMAT_VERSION};
use orderstat_gp::weather::{load_weather, sample_uniform_inputs, synthesize_weather, write_weather};
use orderstat_gp::{
    seed, Error, InputBox64, QoiConfig, QoiResult64, Result, SimConfig64, Simulator64,
    SurrogateModel64, TrainingTable64, WeatherRecord64,
};
use serde::Serialize;

use crate::{Command, OutArgs, Source, WeatherCommand};

pub const WEATHER_FILE: &str = "weather.csv";
pub const TABLE_FILE: &str = "training_table.csv";

fn args() -> Vec<String> {
    std::env::args().skip(1).collect()
}

/// Creates the output directory, refusing to reuse a non-empty one unless
/// `force` is set.
fn prepare_out(out: &OutArgs) -> Result<&Path> {
    let dir = out.out.as_path();
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::Usage(format!("{} is not a directory", dir.display())));
        }
        let occupied = std::fs::read_dir(dir)?.next().is_some();
        if occupied && !out.force {
            return Err(Error::Usage(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir)?;
    Ok(dir)
}

fn sim_config(path: Option<&Path>) -> Result<SimConfig64> {
    match path {
        Some(p) => SimConfig64::load(p),
        None => Ok(SimConfig64::default()),
    }
}

fn write_csv_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    f(BufWriter::new(File::create(path)?))
}

fn load_table(path: &Path) -> Result<TrainingTable64> {
    read_training_table(File::open(path)?)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Weather(WeatherCommand::Synth { hours, seed, out }) => {
            let mut manifest = RunManifest::start("weather synth", args());
            let records = synthesize_weather(hours, &InputBox64::default(), seed)?;
            let dir = prepare_out(&out)?;
            let path = dir.join(WEATHER_FILE);
            write_csv_file(&path, |w| write_weather(&records, w))?;
            manifest
                .config(&serde_json::json!({ "hours": hours, "input_box": InputBox64::default() }))?
                .seed("weather", seed)
                .output(path);
            manifest.finish(dir)?;
            log::info!("wrote {hours} hours of weather");
            Ok(())
        }
        Command::Weather(WeatherCommand::Load { input, out }) => {
            let mut manifest = RunManifest::start("weather load", args());
            let records: Vec<WeatherRecord64> = load_weather(&input)?;
            let dir = prepare_out(&out)?;
            let path = dir.join(WEATHER_FILE);
            write_csv_file(&path, |w| write_weather(&records, w))?;
            manifest
                .config(&serde_json::json!({ "hours": records.len() }))?
                .input(input)
                .output(path);
            manifest.finish(dir)?;
            Ok(())
        }
        Command::Trainset {
            n,
            m,
            seed,
            sim_config: cfg_path,
            out,
        } => {
            let mut manifest = RunManifest::start("trainset", args());
            let cfg = sim_config(cfg_path.as_deref())?;
            let bx = InputBox64::default();
            let design_seed = seed::derive(seed, seed::stream::DESIGN);
            let design = sample_uniform_inputs(n, &bx, design_seed)?;
            let t0 = Instant::now();
            let table = build_training_table(&design, m, &cfg, seed)?;
            let elapsed = t0.elapsed().as_secs_f64();
            let dir = prepare_out(&out)?;
            let path = dir.join(TABLE_FILE);
            write_csv_file(&path, |w| write_training_table(&table, w))?;
            #[derive(Serialize)]
            struct Snapshot<'a> {
                n: usize,
                m: usize,
                input_box: &'a InputBox64,
                simulator: &'a SimConfig64,
            }
            manifest
                .config(&Snapshot {
                    n,
                    m,
                    input_box: &bx,
                    simulator: &cfg,
                })?
                .seed("base", seed)
                .seed("design", design_seed)
                .output(path)
                .timing("simulate_and_fit", elapsed);
            if let Some(p) = cfg_path {
                manifest.input(p);
            }
            manifest.finish(dir)?;
            Ok(())
        }
        Command::Train {
            table,
            family,
            seed,
            restarts,
            n_max,
            mode,
            refresh,
            out,
        } => {
            let mut manifest = RunManifest::start("train", args());
            let data = load_table(&table)?;
            let mut cfg = GpConfig {
                n_max,
                ..GpConfig::default()
            };
            cfg.hyper.restarts = restarts;
            let t0 = Instant::now();
            let model = train_surrogate(&data, family, &cfg, seed)?
                .with_mode(mode.into())
                .with_refresh(refresh.into());
            let elapsed = t0.elapsed().as_secs_f64();
            let dir = prepare_out(&out)?;
            model.save(dir)?;
            manifest
                .config(&serde_json::json!({
                    "family": family,
                    "gp": cfg,
                    "sampling_mode": model.sampling_mode,
                    "refresh": model.refresh,
                }))?
                .seed("base", seed)
                .input(table)
                .output(dir.to_path_buf())
                .format_version("surrogate_bundle", BUNDLE_FORMAT_VERSION)
                .format_version("gp_model", MODEL_FORMAT_VERSION)
                .timing("train", elapsed);
            manifest.finish(dir)?;
            Ok(())
        }
        Command::Eval {
            table,
            model,
            include_noise,
            out,
        } => {
            let mut manifest = RunManifest::start("eval", args());
            let surrogate = SurrogateModel64::load(&model)?;
            let data = load_table(&table)?;
            let report = evaluate(&surrogate, &data, include_noise)?;
            let dir = prepare_out(&out)?;
            write_eval(&report, dir)?;
            for t in &report.targets {
                println!(
                    "{:<16} n={:<5} rmse={:<12.6} coverage95={:.3}",
                    t.target, t.n, t.rmse, t.coverage
                );
            }
            manifest
                .config(&serde_json::json!({ "include_noise": include_noise }))?
                .input(table)
                .input(model)
                .output(dir.join(EVAL_SUMMARY_FILE));
            manifest.finish(dir)?;
            Ok(())
        }
        Command::Qoi {
            source,
            model,
            weather,
            hours,
            k,
            m,
            seed,
            sim_config: cfg_path,
            mode,
            refresh,
            out,
        } => {
            let mut manifest = RunManifest::start("qoi", args());
            let cfg = QoiConfig::new(k, m, seed);
            cfg.validate()?;
            let records = match (&weather, hours) {
                (Some(path), h) => {
                    let mut r: Vec<WeatherRecord64> = load_weather(path)?;
                    if let Some(h) = h {
                        r.truncate(h);
                    }
                    r
                }
                (None, Some(h)) => synthesize_weather(h, &InputBox64::default(), seed)?,
                (None, None) => {
                    return Err(Error::Usage("either --weather or --hours is required".into()))
                }
            };
            let t0;
            let result: QoiResult64 = match source {
                Source::Simulator => {
                    let sim = Simulator64::new(sim_config(cfg_path.as_deref())?)?;
                    manifest.config(&serde_json::json!({
                        "qoi": cfg,
                        "source": "simulator",
                        "hours": records.len(),
                        "simulator": sim.config(),
                    }))?;
                    t0 = Instant::now();
                    run_qoi(&cfg, &SimulatorSource::new(&sim, &records))?
                }
                Source::Surrogate => {
                    let path = model.as_ref().ok_or_else(|| {
                        Error::Usage("--source surrogate requires --model".into())
                    })?;
                    let mut sm = SurrogateModel64::load(path)?;
                    if let Some(mode) = mode {
                        sm.sampling_mode = mode.into();
                    }
                    if let Some(refresh) = refresh {
                        sm.refresh = refresh.into();
                    }
                    manifest.config(&serde_json::json!({
                        "qoi": cfg,
                        "source": "surrogate",
                        "hours": records.len(),
                        "family": sm.family,
                        "sampling_mode": sm.sampling_mode,
                        "refresh": sm.refresh,
                    }))?;
                    manifest.input(path.clone());
                    t0 = Instant::now();
                    run_qoi(&cfg, &SurrogateSource::new(&sm, &records))?
                }
            };
            let elapsed = t0.elapsed().as_secs_f64();
            let dir = prepare_out(&out)?;
            write_qoi(&result, dir)?;
            let yk = result.yk_samples();
            let mean = yk.iter().sum::<f64>() / yk.len() as f64;
            println!(
                "Y_{k}: mean {mean:.6} over {m} realizations, {} responses, {elapsed:.2} s",
                result.total_responses()
            );
            manifest
                .seed("base", seed)
                .output(dir.to_path_buf())
                .format_version("qoi", orderstat_gp::orderstats::QOI_FORMAT_VERSION)
                .timing("qoi", elapsed);
            if let Some(w) = weather {
                manifest.input(w);
            }
            if let Some(p) = cfg_path {
                manifest.input(p);
            }
            manifest.finish(dir)?;
            Ok(())
        }
        Command::Compare { a, b, out } => {
            let mut manifest = RunManifest::start("compare", args());
            let ra: QoiResult64 = load_qoi(&a)?;
            let rb: QoiResult64 = load_qoi(&b)?;
            let c = compare_qoi(&ra, &rb)?;
            let dir = prepare_out(&out)?;
            write_comparison(&c, dir)?;
            println!(
                "Y_{}: A mean {:.6}, B mean {:.6}, relative difference {:+.4} ({}), closest B rank {}, {:.0}% of A rank means inside B's 95% band",
                c.k,
                c.a_yk.mean,
                c.b_yk.mean,
                c.relative_mean_difference,
                if c.conservative { "conservative" } else { "non-conservative" },
                c.closest_rank,
                100.0 * c.fraction_in_band
            );
            manifest
                .config(&serde_json::json!({ "k": c.k }))?
                .input(a)
                .input(b)
                .output(PathBuf::from(dir));
            manifest.finish(dir)?;
            Ok(())
        }
    }
}
