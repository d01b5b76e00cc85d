use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use recess_core::imaging::{load_cifar10_classes, write_cifar10, CIFAR_CLASSES};
use recess_core::predictor::{save_model, train_builtin, TrainConfig};
use recess_core::synth::{generate, SynthConfig};
use recess_core::LabeledDataset;
use serde_json::json;

use crate::config::Config;
use crate::dataset::{Entry, Writer};
use crate::error::{runtime, usage, CliError};
use crate::{ExportArgs, SynthArgs, TrainArgs};

pub const TRAIN_BATCH: &str = "data_batch_1.bin";
pub const TEST_BATCH: &str = "test_batch.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(usage(format!(
                "split must be `train` or `test`, got `{other}`"
            ))),
        }
    }
}

/// Batch files of one split: `data_batch_*.bin` (sorted) or `test_batch.bin`.
pub fn batch_files(dir: &Path, split: Split) -> Result<Vec<PathBuf>, CliError> {
    let files = match split {
        Split::Test => {
            let path = dir.join(TEST_BATCH);
            if path.is_file() {
                vec![path]
            } else {
                vec![]
            }
        }
        Split::Train => {
            let read = fs::read_dir(dir)
                .map_err(|e| runtime(format!("cannot read {}: {e}", dir.display())))?;
            let mut files: Vec<PathBuf> = read
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("data_batch_") && n.ends_with(".bin"))
                })
                .collect();
            files.sort();
            files
        }
    };
    if files.is_empty() {
        return Err(runtime(format!(
            "no CIFAR-10 {} batches in {}",
            if split == Split::Train {
                "training"
            } else {
                "test"
            },
            dir.display()
        )));
    }
    Ok(files)
}

fn load_subset(
    dir: &Path,
    split: Split,
    classes: &[usize],
    per_class: usize,
) -> Result<LabeledDataset, CliError> {
    let ds = load_cifar10_classes(&batch_files(dir, split)?, classes, Some(per_class))?;
    if ds.is_empty() {
        return Err(runtime(format!(
            "no images of classes {classes:?} in {}",
            dir.display()
        )));
    }
    Ok(ds)
}

pub fn synth_cifar(a: SynthArgs, cfg: &Config) -> Result<(), CliError> {
    let out_dir = cfg.require(a.out_dir, "out_dir")?;
    let train_per_class = cfg.pick(a.train_per_class, "train_per_class", 1000)?;
    let test_per_class = cfg.pick(a.test_per_class, "test_per_class", 200)?;
    let synth = SynthConfig {
        seed: cfg.seed(a.seed)?,
        ..SynthConfig::default()
    };
    fs::create_dir_all(&out_dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    write_cifar10(
        out_dir.join(TRAIN_BATCH),
        &generate(&synth, train_per_class, 0)?,
    )?;
    write_cifar10(
        out_dir.join(TEST_BATCH),
        &generate(&synth, test_per_class, 1)?,
    )?;
    println!(
        "wrote {} training and {} test images ({CIFAR_CLASSES} classes) to {}",
        train_per_class * CIFAR_CLASSES,
        test_per_class * CIFAR_CLASSES,
        out_dir.display()
    );
    Ok(())
}

pub fn export(a: ExportArgs, cfg: &Config) -> Result<(), CliError> {
    let cifar_dir = cfg.require(a.cifar_dir, "cifar_dir")?;
    let classes = cfg.pick(a.classes, "classes", vec![0, 1])?;
    let split = Split::parse(&cfg.pick(a.split, "split", "test".to_owned())?)?;
    let per_class = cfg.pick(a.per_class, "per_class", 200)?;
    let out_dir = cfg.require(a.out_dir, "out_dir")?;

    let ds = load_subset(&cifar_dir, split, &classes, per_class)?;
    let mut writer = Writer::create(&out_dir)?;
    for (image, label) in ds.iter() {
        let entry = Entry::benign(writer.next_name(), label);
        writer.push(image, &entry)?;
    }
    let n = writer.finish()?;
    println!(
        "exported {n} images of classes {classes:?} to {}",
        out_dir.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs, cfg: &Config) -> Result<(), CliError> {
    let cifar_dir = cfg.require(a.cifar_dir, "cifar_dir")?;
    let classes = cfg.pick(a.classes, "classes", vec![0, 1])?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        hidden_size: cfg.pick(a.hidden, "hidden", defaults.hidden_size)?,
        epochs: cfg.pick(a.epochs, "epochs", defaults.epochs)?,
        batch_size: cfg.pick(a.batch_size, "batch_size", defaults.batch_size)?,
        learning_rate: cfg.pick(a.lr, "lr", defaults.learning_rate)?,
        seed: cfg.seed(a.seed)?,
    };
    let train_per_class = cfg.pick(a.train_per_class, "train_per_class", 1000)?;
    let test_per_class = cfg.pick(a.test_per_class, "test_per_class", 200)?;
    let out = cfg.require(a.out, "out")?;
    let report = cfg.get::<PathBuf>("report")?;
    let report = a.report.or(report);

    let train_set = load_subset(&cifar_dir, Split::Train, &classes, train_per_class)?;
    let test_set = match batch_files(&cifar_dir, Split::Test) {
        Ok(_) => Some(load_subset(
            &cifar_dir,
            Split::Test,
            &classes,
            test_per_class,
        )?),
        Err(_) => None,
    };

    let start = Instant::now();
    let (model, summary) = train_builtin(&train_set, &config)?;
    log::info!("trained in {:.1}s", start.elapsed().as_secs_f64());
    save_model(&model, &out)?;
    let test_accuracy = test_set.as_ref().map(|t| model.accuracy(t)).transpose()?;

    println!(
        "trained on {} images of classes {classes:?}: train accuracy {:.4}{}",
        train_set.len(),
        summary.train_accuracy,
        test_accuracy
            .map(|a| format!(
                ", test accuracy {a:.4} on {} images",
                test_set.as_ref().map_or(0, |t| t.len())
            ))
            .unwrap_or_default()
    );
    let line = json!({
        "kind": "train",
        "seed": config.seed,
        "classes": classes,
        "hidden": config.hidden_size,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "lr": config.learning_rate,
        "train_images": train_set.len(),
        "test_images": test_set.as_ref().map(|t| t.len()),
        "train_accuracy": summary.train_accuracy,
        "test_accuracy": test_accuracy,
        "epoch_losses": summary.epoch_losses,
    });
    if let Some(path) = report {
        fs::write(&path, format!("{line}\n"))
            .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
