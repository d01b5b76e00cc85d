use std::fs;

use recess_core::attacks::{cw_l2, fgsm, runner_up_target, CwConfig};
use recess_core::predictor::load_model;
use serde_json::json;

use crate::config::Config;
use crate::dataset::{Dataset, Entry, Writer};
use crate::error::{runtime, usage, CliError};
use crate::AttackArgs;

pub const DEFAULT_EPS: f64 = 8.0 / 255.0;

enum Method {
    Fgsm { eps: f64 },
    Cw(CwConfig),
}

impl Method {
    fn name(&self) -> &'static str {
        match self {
            Method::Fgsm { .. } => "fgsm",
            Method::Cw(_) => "cw",
        }
    }
}

/// Attacks every correctly classified image of the input dataset and stores
/// the 8-bit result. Success is judged on the stored image, so examples that
/// only worked before quantization are kept but flagged `success: false`.
pub fn attack(a: AttackArgs, cfg: &Config) -> Result<(), CliError> {
    let seed = cfg.seed(a.seed)?;
    let model_path = cfg.require(a.model, "model")?;
    let in_dataset = cfg.require(a.in_dataset, "in_dataset")?;
    let out_dir = cfg.require(a.out_dir, "out_dir")?;
    let limit = match a.limit {
        Some(l) => Some(l),
        None => cfg.get("limit")?,
    };
    let method = match cfg.require(a.method, "method")?.as_str() {
        "fgsm" => Method::Fgsm {
            eps: cfg.pick(a.eps, "eps", DEFAULT_EPS)?,
        },
        "cw" => {
            let d = CwConfig::default();
            Method::Cw(CwConfig {
                c: cfg.pick(a.c, "c", d.c)?,
                confidence: cfg.pick(a.k, "k", d.confidence)?,
                steps: cfg.pick(a.steps, "steps", d.steps)?,
                step_size: cfg.pick(a.step_size, "step_size", d.step_size)?,
            })
        }
        other => {
            return Err(usage(format!(
                "--method must be `fgsm` or `cw`, got `{other}`"
            )))
        }
    };

    let model = load_model(&model_path)?;
    let input = Dataset::open(&in_dataset)?;
    let mut writer = Writer::create(&out_dir)?;
    let (mut attempted, mut misclassified, mut successes) = (0usize, 0usize, 0usize);
    let mut l2_sum = 0.0;
    for entry in &input.entries {
        if limit.is_some_and(|l| attempted + misclassified >= l) {
            break;
        }
        let clean = input.load(entry)?;
        let clean_label = model.classify(&clean)?.label;
        if clean_label != entry.label {
            misclassified += 1;
            continue;
        }
        attempted += 1;
        let (adversarial, target) = match method {
            Method::Fgsm { eps } => (fgsm(&model, &clean, entry.label, eps)?.adversarial, None),
            Method::Cw(config) => {
                let target = runner_up_target(&model, &clean)?;
                (
                    cw_l2(&model, &clean, target, &config)?.adversarial,
                    Some(target),
                )
            }
        };
        let stored = adversarial.quantized();
        let adversarial_label = model.classify(&stored)?.label;
        let success = match target {
            Some(t) => adversarial_label == t,
            None => adversarial_label != entry.label,
        };
        let l2 = stored.l2_distance(&clean)?;
        if success {
            successes += 1;
            l2_sum += l2;
        }
        let out = Entry {
            attack: Some(method.name().to_owned()),
            source: Some(entry.path.clone()),
            target,
            adversarial_label: Some(adversarial_label),
            l2: Some(l2),
            success: Some(success),
            ..Entry::benign(writer.next_name(), entry.label)
        };
        writer.push(&stored, &out)?;
    }
    writer.finish()?;

    let mut summary = json!({
        "kind": "attack",
        "attack": method.name(),
        "seed": seed,
        "attempted": attempted,
        "skipped_misclassified": misclassified,
        "successes": successes,
        "mean_l2": if successes > 0 { Some(l2_sum / successes as f64) } else { None },
    });
    match method {
        Method::Fgsm { eps } => summary["eps"] = json!(eps),
        Method::Cw(c) => {
            summary["c"] = json!(c.c);
            summary["k"] = json!(c.confidence);
            summary["steps"] = json!(c.steps);
            summary["step_size"] = json!(c.step_size);
        }
    }
    let path = out_dir.join("summary.json");
    fs::write(&path, format!("{summary}\n"))
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("{summary}");
    Ok(())
}
