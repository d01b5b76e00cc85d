use std::path::PathBuf;

use recess_core::attacks::Noise;
use recess_core::detector::batch_detect_with;
use recess_core::metrics::{
    check_alphas, format_percent, topk_agreement, tpr_tnr, Rates, RocCurve, SweepRow,
};
use recess_core::{Image, Predictor, Transform, Verdict};
use serde_json::{json, Value};

use super::{predictor_spec, DEFAULT_ALPHAS};
use crate::config::Config;
use crate::dataset::Dataset;
use crate::error::{runtime, usage, CliError};
use crate::report::{table, JsonLines};
use crate::{EvalArgs, NoiseArgs};

pub const POOLED: &str = "all";

struct Group {
    name: String,
    images: Vec<Image>,
}

fn transforms_from(flag: Option<Vec<Transform>>, cfg: &Config) -> Result<Vec<Transform>, CliError> {
    match flag {
        Some(t) => Ok(t),
        None => cfg
            .get::<Vec<String>>("transforms")?
            .unwrap_or_default()
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|e: recess_core::Error| usage(e.to_string()))
            })
            .collect(),
    }
}

fn rates_value(rates: &Rates) -> Value {
    json!({
        "tpr": rates.tpr,
        "tnr": rates.tnr,
        "tp": rates.counts.tp,
        "fn": rates.counts.fn_,
        "tn": rates.counts.tn,
        "fp": rates.counts.fp,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

/// Verdicts on the benign set and on every adversarial group, plus the pooled
/// group when there is more than one, as `(name, rates)` pairs.
fn rates_for(
    transform: &Transform,
    benign: &[Image],
    groups: &[Group],
    predictor: &mut dyn Predictor,
) -> Result<Vec<(String, Rates)>, CliError> {
    let on_benign = batch_detect_with(benign, predictor, transform)?;
    let mut pooled: Vec<Verdict> = Vec::new();
    let mut out = Vec::with_capacity(groups.len() + 1);
    for g in groups {
        let on_adv = batch_detect_with(&g.images, predictor, transform)?;
        out.push((g.name.clone(), tpr_tnr(&on_adv, &on_benign)?));
        pooled.extend(on_adv);
    }
    if groups.len() > 1 {
        out.push((POOLED.to_owned(), tpr_tnr(&pooled, &on_benign)?));
    }
    Ok(out)
}

pub fn eval(a: EvalArgs, cfg: &Config) -> Result<(), CliError> {
    let seed = cfg.seed(a.seed)?;
    let spec = predictor_spec(a.predictor, cfg)?;
    let alphas = cfg.pick(a.alphas, "alphas", DEFAULT_ALPHAS.to_vec())?;
    let filters = check_alphas(&alphas)?;
    let benign_dir = cfg.require(a.benign_dir, "benign_dir")?;
    let adv_dirs: Vec<PathBuf> = if a.adv_dir.is_empty() {
        cfg.get("adv_dir")?.unwrap_or_default()
    } else {
        a.adv_dir
    };
    if adv_dirs.is_empty() {
        return Err(usage("missing --adv-dir"));
    }
    let transforms = transforms_from(a.transforms, cfg)?;
    let report = match a.report {
        Some(r) => Some(r),
        None => cfg.get("report")?,
    };

    let benign = Dataset::open(&benign_dir)?.images()?;
    if benign.is_empty() {
        return Err(runtime(format!(
            "benign set {} is empty",
            benign_dir.display()
        )));
    }
    let mut groups = Vec::with_capacity(adv_dirs.len());
    for dir in &adv_dirs {
        let ds = Dataset::open(dir)?;
        let images = ds.successful_images()?;
        if images.is_empty() {
            return Err(runtime(format!(
                "adversarial set {} contains no successful adversarial examples",
                dir.display()
            )));
        }
        let name = ds.attack_name().unwrap_or_else(|| {
            dir.file_name().map_or_else(
                || dir.display().to_string(),
                |n| n.to_string_lossy().into_owned(),
            )
        });
        groups.push(Group { name, images });
    }
    let mut predictor = spec.open()?;

    let group_sizes = |name: &str| -> usize {
        if name == POOLED {
            groups.iter().map(|g| g.images.len()).sum()
        } else {
            groups
                .iter()
                .find(|g| g.name == name)
                .map_or(0, |g| g.images.len())
        }
    };

    // α sweep of the DCT filter.
    let mut sweeps: Vec<(String, Vec<SweepRow>)> = Vec::new();
    for f in &filters {
        let t = Transform::FeatureFilter(*f);
        for (name, rates) in rates_for(&t, &benign, &groups, &mut *predictor)? {
            let row = SweepRow {
                alpha: f.alpha(),
                rates,
            };
            match sweeps.iter_mut().find(|(n, _)| *n == name) {
                Some((_, rows)) => rows.push(row),
                None => sweeps.push((name, vec![row])),
            }
        }
    }

    let mut lines = JsonLines::default();
    for (name, rows) in &sweeps {
        let curve = RocCurve::from_sweep(rows)?;
        let auc = curve.auc()?;
        println!(
            "feature-filter vs {name}: {} adversarial, {} benign",
            group_sizes(name),
            benign.len()
        );
        let table_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    format!("{:.2}", r.alpha),
                    format_percent(r.rates.tpr),
                    format_percent(r.rates.tnr),
                ]
            })
            .collect();
        println!("{}", table(&["α", "TPR", "TNR"], &table_rows));
        println!("AUC {}\n", format_percent(auc));
        for r in rows {
            lines.push(merge(
                json!({
                    "kind": "sweep",
                    "attack": name,
                    "seed": seed,
                    "transform": Transform::FeatureFilter(recess_core::FilterSpec::new(r.alpha)?).to_string(),
                    "alpha": r.alpha,
                    "adversarial": group_sizes(name),
                    "benign": benign.len(),
                }),
                rates_value(&r.rates),
            ));
        }
        lines.push(json!({
            "kind": "roc",
            "attack": name,
            "seed": seed,
            "alphas": alphas,
            "auc": auc,
            "points": curve.points,
        }));
    }

    // Baseline transforms.
    if !transforms.is_empty() {
        let mut table_rows = Vec::new();
        for t in &transforms {
            for (name, rates) in rates_for(t, &benign, &groups, &mut *predictor)? {
                table_rows.push(vec![
                    t.family().to_owned(),
                    t.parameter_label(),
                    name.clone(),
                    format_percent(rates.tpr),
                    format_percent(rates.tnr),
                ]);
                lines.push(merge(
                    json!({
                        "kind": "transform",
                        "attack": name,
                        "seed": seed,
                        "transform": t.to_string(),
                        "family": t.family(),
                        "parameter": t.parameter_label(),
                        "adversarial": group_sizes(&name),
                        "benign": benign.len(),
                    }),
                    rates_value(&rates),
                ));
            }
        }
        println!(
            "{}\n",
            table(
                &["approach", "parameters", "attack", "TPR", "TNR"],
                &table_rows
            )
        );
    }
    lines.write(report.as_deref())
}

pub const DEFAULT_NOISE: [(&str, f64); 3] =
    [("gaussian", 0.02), ("poisson", 255.0), ("saltpepper", 0.01)];

fn noise_seed(seed: u64, noise: usize, image: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((noise as u64) << 40) ^ image as u64
}

pub fn noise(a: NoiseArgs, cfg: &Config) -> Result<(), CliError> {
    let seed = cfg.seed(a.seed)?;
    let spec = predictor_spec(a.predictor, cfg)?;
    let alphas = cfg.pick(a.alphas, "alphas", DEFAULT_ALPHAS.to_vec())?;
    let filters = check_alphas(&alphas)?;
    let types = match a.types {
        Some(t) => Some(t),
        None => cfg.get::<Vec<String>>("types")?,
    };
    let params = match a.params {
        Some(p) => Some(p),
        None => cfg.get::<Vec<f64>>("params")?,
    };
    let noises: Vec<Noise> = match (types, params) {
        (None, None) => DEFAULT_NOISE
            .iter()
            .map(|&(n, p)| Noise::from_name(n, p))
            .collect::<Result<_, _>>()?,
        (Some(types), None) => types
            .iter()
            .map(|t| {
                let kind = Noise::from_name(t, 0.0)?.name();
                let (_, p) = DEFAULT_NOISE
                    .iter()
                    .find(|(n, _)| *n == kind)
                    .expect("every noise type has a default parameter");
                Noise::from_name(kind, *p)
            })
            .collect::<Result<_, _>>()?,
        (types, Some(params)) => {
            let types =
                types.unwrap_or_else(|| DEFAULT_NOISE.iter().map(|(n, _)| n.to_string()).collect());
            if types.len() != params.len() {
                return Err(usage(format!(
                    "{} noise types but {} parameters",
                    types.len(),
                    params.len()
                )));
            }
            types
                .iter()
                .zip(&params)
                .map(|(t, &p)| Noise::from_name(t, p))
                .collect::<Result<_, _>>()?
        }
    };
    let input_dir = cfg.require(a.input_dir, "input_dir")?;
    let top_k = cfg.pick(a.top_k, "top_k", 5)?;
    if top_k == 0 {
        return Err(usage("--top-k must be at least 1"));
    }
    let report = match a.report {
        Some(r) => Some(r),
        None => cfg.get("report")?,
    };

    let images = Dataset::open(&input_dir)?.images()?;
    if images.is_empty() {
        return Err(runtime(format!(
            "{} contains no images",
            input_dir.display()
        )));
    }
    let mut predictor = spec.open()?;
    let clean: Vec<_> = images
        .iter()
        .map(|img| predictor.predict(img))
        .collect::<Result<_, _>>()?;

    let mut lines = JsonLines::default();
    let mut columns: Vec<(String, Vec<(Option<f64>, Option<f64>)>)> = Vec::new();
    for (n, noise) in noises.iter().enumerate() {
        // Natural noise only counts when it leaves the clean label alone.
        let mut kept = Vec::new();
        for (i, img) in images.iter().enumerate() {
            let noisy = noise.apply(img, noise_seed(seed, n, i))?;
            if predictor.predict(&noisy)?.label == clean[i].label {
                kept.push((i, noisy));
            }
        }
        let mut cells = Vec::with_capacity(filters.len());
        for f in &filters {
            let mut benign = 0usize;
            let mut within_k = Some(0usize);
            for (i, noisy) in &kept {
                let filtered = predictor.predict(&recess_core::feature_filter(noisy, *f)?)?;
                if filtered.label == clean[*i].label {
                    benign += 1;
                }
                within_k = match (within_k, &clean[*i].scores, &filtered.scores) {
                    (Some(c), Some(cs), Some(fs)) => {
                        let k = top_k.min(cs.len());
                        Some(c + usize::from(topk_agreement(cs, fs, k)?))
                    }
                    _ => None,
                };
            }
            let rate = |c: usize| (!kept.is_empty()).then(|| c as f64 / kept.len() as f64);
            let benign_rate = rate(benign);
            let top_k_rate = within_k.and_then(rate);
            cells.push((benign_rate, top_k_rate));
            lines.push(json!({
                "kind": "noise",
                "noise": noise.name(),
                "parameter": noise.parameter(),
                "alpha": f.alpha(),
                "seed": seed,
                "images": images.len(),
                "label_preserved": kept.len(),
                "benign": benign,
                "benign_rate": benign_rate,
                "top_k": top_k,
                "top_k_rate": top_k_rate,
            }));
        }
        println!(
            "{} ({}): label preserved on {} of {} images",
            noise.name(),
            noise.parameter(),
            kept.len(),
            images.len()
        );
        columns.push((noise.name().to_owned(), cells));
    }

    let show = |r: Option<f64>| r.map_or_else(|| "-".to_owned(), format_percent);
    let mut header = vec!["α".to_owned()];
    for (name, _) in &columns {
        header.push(format!("{name} top-1"));
        header.push(format!("{name} top-{top_k}"));
    }
    let rows: Vec<Vec<String>> = filters
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let mut row = vec![format!("{:.2}", f.alpha())];
            for (_, cells) in &columns {
                row.push(show(cells[j].0));
                row.push(show(cells[j].1));
            }
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    println!("\n{}", table(&header, &rows));
    lines.write(report.as_deref())
}
