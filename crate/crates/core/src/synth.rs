//! Deterministic stand-in for CIFAR-10 when the real batches are not available.
//!
//! Each 32×32×3 image is synthesized in the DCT domain:
//! - a class-specific low-frequency layout and colour (what a person would recognise),
//! - a per-image background with a natural `1/f` amplitude spectrum,
//! - a faint class-specific high-frequency texture, standing in for the fine
//!   detail real classifiers latch onto,
//! - per-image contrast, brightness and translation jitter.
//!
//! The output is a regular [`LabeledDataset`] and can be written with
//! [`crate::imaging::write_cifar10`] so the whole tool chain runs unchanged.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::imaging::{Image, LabeledDataset, Shape, CIFAR_CLASSES, CIFAR_SIDE};
use crate::transform::idct2;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Amplitude of the class layout.
    pub layout: f64,
    /// Half-range of the per-class colour offset.
    pub colour: f64,
    /// Amplitude of the per-image `1/f` background.
    pub background: f64,
    /// Amplitude of the class texture in the high band.
    pub texture: f64,
    /// Lowest frequency index (`max(u, v)`) the texture occupies.
    pub texture_band: usize,
    /// Maximum translation of the layout, in pixels.
    pub jitter: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            layout: 0.04,
            colour: 0.02,
            background: 0.2,
            texture: 0.01,
            texture_band: 28,
            jitter: 2,
        }
    }
}

struct ClassModel {
    layout: Array2<f64>,
    colour: [f64; 3],
    texture: [Array2<f64>; 3],
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random field from DCT coefficients with std `amplitude(u, v)`, scaled to unit RMS.
fn field<F>(rng: &mut ChaCha8Rng, side: usize, amplitude: F) -> Array2<f64>
where
    F: Fn(usize, usize) -> f64,
{
    let spectrum = Array2::from_shape_fn((side, side), |(u, v)| {
        let a = amplitude(u, v);
        if a == 0.0 {
            0.0
        } else {
            a * normal(rng)
        }
    });
    let mut f = idct2(spectrum.view()).expect("finite spectrum");
    let rms = (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt();
    if rms > 0.0 {
        f.mapv_inplace(|v| v / rms);
    }
    f
}

fn class_model(seed: u64, class: usize, cfg: &SynthConfig) -> ClassModel {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ (0x9e37_79b9_7f4a_7c15 ^ class as u64).wrapping_mul(0x2545_f491_4f6c_dd1d),
    );
    let side = CIFAR_SIDE;
    let layout = field(&mut rng, side, |u, v| {
        if (u, v) != (0, 0) && u < 6 && v < 6 {
            1.0 / (1.0 + (u * u + v * v) as f64).sqrt()
        } else {
            0.0
        }
    });
    let colour = [0.0; 3].map(|_| cfg.colour * rng.random_range(-1.0..1.0));
    let band = cfg.texture_band;
    let texture = [(); 3].map(|_| {
        field(
            &mut rng,
            side,
            |u, v| if u.max(v) >= band { 1.0 } else { 0.0 },
        )
    });
    ClassModel {
        layout,
        colour,
        texture,
    }
}

fn render(model: &ClassModel, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Image> {
    let side = CIFAR_SIDE;
    let shape = Shape::new(side, side, 3)?;
    let background = field(rng, side, |u, v| {
        if (u, v) == (0, 0) {
            0.0
        } else {
            1.0 / ((u * u + v * v) as f64).sqrt()
        }
    });
    let tint = [0.0; 3].map(|_| 0.4 * normal(rng));
    let contrast = rng.random_range(0.6..1.4);
    let brightness = rng.random_range(-0.08..0.08);
    let j = cfg.jitter as i64;
    let (dy, dx) = (
        rng.random_range(-j..=j) as isize,
        rng.random_range(-j..=j) as isize,
    );

    let mut raster = Vec::with_capacity(shape.len());
    for r in 0..side {
        for c in 0..side {
            let lr = (r as isize - dy).clamp(0, side as isize - 1) as usize;
            let lc = (c as isize - dx).clamp(0, side as isize - 1) as usize;
            let layout = cfg.layout * contrast * model.layout[[lr, lc]];
            for ch in 0..3 {
                let bg = cfg.background * background[[r, c]] * (1.0 + 0.3 * tint[ch]);
                let v = 0.5
                    + brightness
                    + model.colour[ch]
                    + layout
                    + bg
                    + cfg.texture * model.texture[ch][[r, c]];
                raster.push(v);
            }
        }
    }
    Image::clamped(shape, raster)
}

/// `per_class` images for each of the ten classes, interleaved by class.
pub fn generate(cfg: &SynthConfig, per_class: usize, split: u64) -> Result<LabeledDataset> {
    let models: Vec<ClassModel> = (0..CIFAR_CLASSES)
        .map(|c| class_model(cfg.seed, c, cfg))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed
            .wrapping_add(split.wrapping_mul(0x517c_c1b7_2722_0a95)),
    );
    let mut images = Vec::with_capacity(per_class * CIFAR_CLASSES);
    let mut labels = Vec::with_capacity(per_class * CIFAR_CLASSES);
    for _ in 0..per_class {
        for (class, model) in models.iter().enumerate() {
            // 8-bit storage, as a real batch file would hold.
            images.push(render(model, cfg, &mut rng)?.quantized());
            labels.push(class);
        }
    }
    LabeledDataset::new(images, labels, CIFAR_CLASSES)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_split_dependent() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg, 2, 0).unwrap();
        assert_eq!(a, generate(&cfg, 2, 0).unwrap());
        assert_ne!(a, generate(&cfg, 2, 1).unwrap());
        assert_eq!(a.len(), 20);
        assert_eq!(&a.labels()[..3], &[0, 1, 2]);
        assert_eq!(a.shape(), Some(Shape::new(32, 32, 3).unwrap()));
    }
}
