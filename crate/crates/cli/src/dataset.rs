//! PNG datasets on disk: one image per file plus `manifest.jsonl`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use recess_core::imaging::{load_png, save_png};
use recess_core::Image;

use crate::error::{runtime, CliError};

pub const MANIFEST: &str = "manifest.jsonl";

/// One manifest line. Benign datasets only fill `path` and `label`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Entry {
    /// File name relative to the dataset directory.
    pub path: String,
    /// Ground-truth label of the clean image.
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<String>,
    /// Clean image the example was derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    /// Model label on the stored (8-bit) adversarial image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial_label: Option<usize>,
    /// L2 distance between the stored adversarial image and its source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    /// Whether the attack still succeeds after 8-bit storage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
}

impl Entry {
    pub fn benign(path: String, label: usize) -> Self {
        Entry {
            path,
            label,
            attack: None,
            source: None,
            target: None,
            adversarial_label: None,
            l2: None,
            success: None,
        }
    }
}

#[derive(Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub entries: Vec<Entry>,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let file = File::open(&path)
            .map_err(|e| runtime(format!("cannot open {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| runtime(format!("reading {}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: Entry = serde_json::from_str(&line)
                .map_err(|e| runtime(format!("{}:{}: {e}", path.display(), i + 1)))?;
            entries.push(entry);
        }
        Ok(Dataset {
            dir: dir.to_path_buf(),
            entries,
        })
    }

    pub fn load(&self, entry: &Entry) -> Result<Image, CliError> {
        Ok(load_png(self.dir.join(&entry.path))?)
    }

    /// Every image, in manifest order.
    pub fn images(&self) -> Result<Vec<Image>, CliError> {
        self.entries.iter().map(|e| self.load(e)).collect()
    }

    /// Images of the entries that count as adversarial examples: those
    /// without a success flag, and those whose attack succeeded.
    pub fn successful_images(&self) -> Result<Vec<Image>, CliError> {
        self.entries
            .iter()
            .filter(|e| e.success != Some(false))
            .map(|e| self.load(e))
            .collect()
    }

    /// Name of the attack that produced this set, if it is uniform.
    pub fn attack_name(&self) -> Option<String> {
        let first = self.entries.first()?.attack.clone()?;
        self.entries
            .iter()
            .all(|e| e.attack.as_deref() == Some(first.as_str()))
            .then_some(first)
    }
}

/// Writes images as `000000.png`, `000001.png`, ... and the manifest on `finish`.
pub struct Writer {
    dir: PathBuf,
    manifest: BufWriter<File>,
    count: usize,
}

impl Writer {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(MANIFEST);
        let file = File::create(&path)
            .map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            manifest: BufWriter::new(file),
            count: 0,
        })
    }

    pub fn next_name(&self) -> String {
        format!("{:06}.png", self.count)
    }

    /// Saves `image` under [`Writer::next_name`] and appends `entry`.
    pub fn push(&mut self, image: &Image, entry: &Entry) -> Result<(), CliError> {
        save_png(image, self.dir.join(&entry.path))?;
        let line = serde_json::to_string(entry).map_err(|e| runtime(e.to_string()))?;
        writeln!(self.manifest, "{line}").map_err(|e| runtime(format!("writing manifest: {e}")))?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize, CliError> {
        self.manifest
            .flush()
            .map_err(|e| runtime(format!("writing manifest: {e}")))?;
        Ok(self.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use recess_core::Shape;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::filled(Shape::new(2, 2, 3).unwrap(), 0.2)
            .unwrap()
            .quantized();
        let mut w = Writer::create(dir.path()).unwrap();
        let first = Entry::benign(w.next_name(), 1);
        w.push(&img, &first).unwrap();
        let second = Entry {
            attack: Some("cw".into()),
            success: Some(false),
            ..Entry::benign(w.next_name(), 0)
        };
        w.push(&img, &second).unwrap();
        assert_eq!(w.finish().unwrap(), 2);

        let ds = Dataset::open(dir.path()).unwrap();
        assert_eq!(ds.entries, vec![first, second]);
        assert_eq!(ds.images().unwrap(), vec![img.clone(), img.clone()]);
        assert_eq!(ds.successful_images().unwrap().len(), 1);
        assert_eq!(ds.attack_name(), None);
    }

    #[test]
    fn missing_manifest_is_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Dataset::open(dir.path()),
            Err(CliError::Runtime(_))
        ));
    }
}
