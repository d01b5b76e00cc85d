mod attack;
mod data;
mod evaluate;

use recess_core::detector::detect_with;
use recess_core::imaging::{load_png, save_png};
use recess_core::metrics::{bench_filter, BenchReport};
use recess_core::predictor::PredictorSpec;
use recess_core::{feature_filter, FilterSpec, Shape, Transform};
use serde_json::json;

pub use attack::attack;
pub use data::{export, synth_cifar, train};
pub use evaluate::{eval, noise};

use crate::config::Config;
use crate::error::{usage, CliError};
use crate::report::{table, JsonLines};
use crate::{BenchArgs, DetectArgs, FilterArgs};

pub const DEFAULT_ALPHA: f64 = 0.8;
pub const DEFAULT_ALPHAS: [f64; 10] = [0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5];

fn predictor_spec(flag: Option<PredictorSpec>, cfg: &Config) -> Result<PredictorSpec, CliError> {
    match flag {
        Some(spec) => Ok(spec),
        None => cfg
            .get_parsed("predictor")?
            .ok_or_else(|| usage("missing --predictor")),
    }
}

pub fn filter(a: FilterArgs, cfg: &Config) -> Result<(), CliError> {
    let input = cfg.require(a.input, "input")?;
    let output = cfg.require(a.output, "output")?;
    let spec = FilterSpec::new(cfg.pick(a.alpha, "alpha", DEFAULT_ALPHA)?)?;
    let image = load_png(&input)?;
    save_png(&feature_filter(&image, spec)?, &output)?;
    Ok(())
}

pub fn detect(a: DetectArgs, cfg: &Config) -> Result<(), CliError> {
    let spec = predictor_spec(a.predictor, cfg)?;
    let input = cfg.require(a.input, "input")?;
    let transform = match a.transform {
        Some(t) => t,
        None => match (a.alpha, cfg.get_parsed::<Transform>("transform")?) {
            (None, Some(t)) => t,
            (alpha, _) => Transform::FeatureFilter(FilterSpec::new(cfg.pick(
                alpha,
                "alpha",
                DEFAULT_ALPHA,
            )?)?),
        },
    };
    let image = load_png(&input)?;
    let mut predictor = spec.open()?;
    let verdict = detect_with(&image, &mut *predictor, &transform)?;
    println!(
        "{}",
        serde_json::to_string(&verdict).expect("verdict serializes")
    );
    Ok(())
}

pub fn bench(a: BenchArgs, cfg: &Config) -> Result<(), CliError> {
    let seed = cfg.seed(a.seed)?;
    let shapes: Vec<Shape> = if a.shape.is_empty() {
        match cfg.get::<Vec<String>>("shape")? {
            Some(list) => list
                .iter()
                .map(|s| s.parse::<Shape>())
                .collect::<Result<_, _>>()?,
            None => vec![Shape::new(32, 32, 3)?, Shape::new(224, 224, 3)?],
        }
    } else {
        a.shape
    };
    let reps = cfg.pick(a.reps, "reps", 100)?;
    let alpha = cfg.pick(a.alpha, "alpha", DEFAULT_ALPHA)?;
    let reports: Vec<BenchReport> = shapes
        .iter()
        .map(|&s| bench_filter(s, alpha, reps, seed))
        .collect::<Result<_, _>>()?;

    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.shape.clone(),
                format!("{:.2}", r.alpha),
                r.repetitions.to_string(),
                format!("{:.6}", r.mean_seconds),
                format!("{:.6}", r.p95_seconds),
            ]
        })
        .collect();
    println!(
        "{}",
        table(&["shape", "α", "reps", "mean s", "p95 s"], &rows)
    );
    let mut out = JsonLines::default();
    for r in &reports {
        let mut line = serde_json::to_value(r).expect("report serializes");
        line["kind"] = json!("bench");
        line["seed"] = json!(seed);
        out.push(line);
    }
    out.write(a.report.as_deref())
}
