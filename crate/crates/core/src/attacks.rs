//! Adversarial example generation against the built-in model (FGSM and a
//! projected-gradient C&W L2 variant) and natural-noise corruption.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::predictor::{argmax, BuiltinModel, LossSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub adversarial: Image,
    /// Label changed (untargeted) or target reached (targeted).
    pub success: bool,
    pub original_label: usize,
    pub adversarial_label: usize,
    pub target: Option<usize>,
    pub perturbation_l2: f64,
    pub iterations_used: usize,
}

fn result(
    model: &BuiltinModel,
    original: &Image,
    original_label: usize,
    adversarial: Image,
    target: Option<usize>,
    iterations_used: usize,
) -> Result<AttackResult> {
    let adversarial_label = model.classify(&adversarial)?.label;
    let success = match target {
        Some(t) => adversarial_label == t,
        None => adversarial_label != original_label,
    };
    Ok(AttackResult {
        perturbation_l2: original.l2_distance(&adversarial)?,
        adversarial,
        success,
        original_label,
        adversarial_label,
        target,
        iterations_used,
    })
}

/// One-step attack: `clamp(x + ε·sign(∇ₓ CE(x, true_label)), 0, 1)` with `sign(0) = 0`.
pub fn fgsm(
    model: &BuiltinModel,
    image: &Image,
    true_label: usize,
    epsilon: f64,
) -> Result<AttackResult> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!(
            "epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    let original_label = model.classify(image)?.label;
    let grad = model.input_gradient(image, LossSpec::CrossEntropy { label: true_label })?;
    let raster = image
        .pixels()
        .iter()
        .zip(&grad)
        .map(|(&x, &g)| {
            let sign = if g > 0.0 {
                1.0
            } else if g < 0.0 {
                -1.0
            } else {
                0.0
            };
            x + epsilon * sign
        })
        .collect();
    let adversarial = Image::clamped(image.shape(), raster)?;
    result(model, image, original_label, adversarial, None, 1)
}

/// Hyperparameters of the C&W L2 attack.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CwConfig {
    /// Weight of the margin loss against the squared L2 distance.
    pub c: f64,
    /// Confidence margin `k`.
    pub confidence: f64,
    pub steps: usize,
    pub step_size: f64,
}

impl Default for CwConfig {
    fn default() -> Self {
        CwConfig {
            c: 1.0,
            confidence: 0.0,
            steps: 1000,
            step_size: 0.01,
        }
    }
}

/// How many times the step size may be halved before the attack gives up.
pub const MAX_HALVINGS: usize = 10;

/// Margin loss `max(max_{i≠t} Z_i − Z_t, −k)`.
pub fn cw_loss(logits: &[f64], target: usize, confidence: f64) -> f64 {
    LossSpec::CarliniWagner { target, confidence }.value(logits)
}

/// The class with the second-largest logit: the cheapest target for an untargeted flip.
pub fn runner_up_target(model: &BuiltinModel, image: &Image) -> Result<usize> {
    let logits = model.logits(image)?;
    let top = argmax(&logits).expect("non-empty logits");
    let mut rest: Vec<(usize, f64)> = logits
        .iter()
        .copied()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .collect();
    if rest.is_empty() {
        return Err(Error::Contract(
            "a single-class model has no runner-up".into(),
        ));
    }
    rest.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(rest[0].0)
}

/// Targeted C&W L2 attack by gradient descent on `‖δ‖₂² + c·Loss(x+δ)`, projecting
/// each iterate into `[0, 1]`. A step that raises the objective is retried at
/// half the step size; after [`MAX_HALVINGS`] halvings the search stops.
/// Returns the successful iterate with the smallest `‖δ‖₂`, else the last iterate.
pub fn cw_l2(
    model: &BuiltinModel,
    image: &Image,
    target: usize,
    config: &CwConfig,
) -> Result<AttackResult> {
    let CwConfig {
        c,
        confidence,
        steps,
        step_size,
    } = *config;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("c must be positive, got {c}")));
    }
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::Parameter(format!(
            "step size must be positive, got {step_size}"
        )));
    }
    let loss = LossSpec::CarliniWagner { target, confidence };
    let shape = image.shape();
    let origin = image.pixels();
    let original_label = model.classify(image)?.label;

    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (l, g, logits) = model.loss_and_gradient(x, shape, loss)?;
        let dist: f64 = x.iter().zip(origin).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((dist + c * l, g, logits))
    };

    let mut current = origin.to_vec();
    let (mut obj, mut loss_grad, mut logits) = objective(&current)?;
    if !obj.is_finite() {
        return Err(Error::AttackDivergence {
            step: 0,
            objective: obj,
        });
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    if argmax(&logits) == Some(target) {
        best = Some((0.0, current.clone()));
    }

    let mut step = step_size;
    let mut halvings = 0;
    let mut accepted = 0;
    'outer: for it in 0..steps {
        let grad: Vec<f64> = current
            .iter()
            .zip(origin)
            .zip(&loss_grad)
            .map(|((x, x0), g)| 2.0 * (x - x0) + c * g)
            .collect();
        if grad.iter().all(|&g| g == 0.0) {
            break;
        }
        loop {
            let candidate: Vec<f64> = current
                .iter()
                .zip(&grad)
                .map(|(x, g)| (x - step * g).clamp(0.0, 1.0))
                .collect();
            let (cand_obj, cand_grad, cand_logits) = objective(&candidate)?;
            if !cand_obj.is_finite() {
                return Err(Error::AttackDivergence {
                    step: it,
                    objective: cand_obj,
                });
            }
            if cand_obj <= obj {
                current = candidate;
                obj = cand_obj;
                loss_grad = cand_grad;
                logits = cand_logits;
                accepted += 1;
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                break 'outer;
            }
            step *= 0.5;
        }
        if argmax(&logits) == Some(target) {
            let l2 = current
                .iter()
                .zip(origin)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if best.as_ref().is_none_or(|(b, _)| l2 < *b) {
                best = Some((l2, current.clone()));
            }
        }
    }

    let chosen = best.map(|(_, x)| x).unwrap_or(current);
    let adversarial = Image::clamped(shape, chosen)?;
    result(
        model,
        image,
        original_label,
        adversarial,
        Some(target),
        accepted,
    )
}

/// Additive Gaussian noise `N(0, σ²)`, clamped to `[0, 1]`.
pub fn gaussian_noise(image: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let raster = image
        .pixels()
        .iter()
        .map(|&p| p + normal.sample(&mut rng))
        .collect();
    Image::clamped(image.shape(), raster)
}

/// Shot noise: each pixel becomes `Poisson(pixel · scale) / scale`, clamped.
pub fn poisson_noise(image: &Image, scale: f64, seed: u64) -> Result<Image> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Parameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raster = Vec::with_capacity(image.pixels().len());
    for &p in image.pixels() {
        let rate = p * scale;
        let count = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| Error::Parameter(e.to_string()))?
                .sample(&mut rng)
        } else {
            0.0
        };
        raster.push(count / scale);
    }
    Image::clamped(image.shape(), raster)
}

/// Each pixel is replaced, with probability `p`, by 0 or 1 with equal odds.
pub fn salt_pepper(image: &Image, p: f64, seed: u64) -> Result<Image> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!(
            "probability must be in [0, 1], got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raster = image
        .pixels()
        .iter()
        .map(|&px| {
            if rng.random::<f64>() < p {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            } else {
                px
            }
        })
        .collect();
    Image::from_shape(image.shape(), raster)
}

/// The three natural-noise families.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "type", content = "param", rename_all = "lowercase")]
pub enum Noise {
    Gaussian(f64),
    Poisson(f64),
    SaltPepper(f64),
}

impl Noise {
    pub fn apply(&self, image: &Image, seed: u64) -> Result<Image> {
        match *self {
            Noise::Gaussian(sigma) => gaussian_noise(image, sigma, seed),
            Noise::Poisson(scale) => poisson_noise(image, scale, seed),
            Noise::SaltPepper(p) => salt_pepper(image, p, seed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Noise::Gaussian(_) => "gaussian",
            Noise::Poisson(_) => "poisson",
            Noise::SaltPepper(_) => "saltpepper",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Noise::Gaussian(v) | Noise::Poisson(v) | Noise::SaltPepper(v) => v,
        }
    }

    /// `gaussian`, `poisson` or `saltpepper` with its parameter.
    pub fn from_name(name: &str, parameter: f64) -> Result<Self> {
        match name {
            "gaussian" => Ok(Noise::Gaussian(parameter)),
            "poisson" => Ok(Noise::Poisson(parameter)),
            "saltpepper" | "salt-pepper" | "salt_pepper" => Ok(Noise::SaltPepper(parameter)),
            other => Err(Error::Parameter(format!("unknown noise type `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Shape;
    use ndarray::{Array1, Array2};

    fn one_pixel_model(w: [f64; 2]) -> BuiltinModel {
        // hidden unit copies the pixel; logits = w * pixel.
        BuiltinModel::from_parts(
            Shape::new(1, 1, 1).unwrap(),
            Array2::from_elem((1, 1), 1.0),
            Array1::zeros(1),
            Array2::from_shape_vec((2, 1), w.to_vec()).unwrap(),
            Array1::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn margin_loss_examples() {
        assert_eq!(cw_loss(&[2.0, 5.0, 3.0], 0, 0.0), 3.0);
        assert_eq!(cw_loss(&[9.0, 1.0, 1.0], 0, 0.0), 0.0);
    }

    #[test]
    fn fgsm_zero_epsilon_is_identity() {
        let m = BuiltinModel::random(Shape::new(2, 2, 1).unwrap(), 3, 2, 1).unwrap();
        let img = Image::new(2, 2, 1, vec![0.1, 0.4, 0.6, 0.9]).unwrap();
        let r = fgsm(&m, &img, 0, 0.0).unwrap();
        assert_eq!(r.adversarial, img);
        assert!(!r.success);
        assert_eq!(r.perturbation_l2, 0.0);
    }

    #[test]
    fn fgsm_zero_model_is_identity() {
        let m = BuiltinModel::zeros(Shape::new(2, 2, 1).unwrap(), 3, 2).unwrap();
        let img = Image::new(2, 2, 1, vec![0.1, 0.4, 0.6, 0.9]).unwrap();
        assert_eq!(fgsm(&m, &img, 1, 0.3).unwrap().adversarial, img);
    }

    #[test]
    fn fgsm_one_pixel_hand_computed() {
        // logits = (w0 x, w1 x); dCE/dx = (p0 - 1[y=0]) w0 + (p1 - 1[y=1]) w1.
        // With w = (1, -1), y = 0: dCE/dx = (p0 - 1) - p1 < 0, so the pixel moves down.
        let m = one_pixel_model([1.0, -1.0]);
        let img = Image::new(1, 1, 1, vec![0.3]).unwrap();
        let r = fgsm(&m, &img, 0, 0.1).unwrap();
        assert!((r.adversarial.pixels()[0] - 0.2).abs() < 1e-15);
        // Clamped at the boundary.
        let low = Image::new(1, 1, 1, vec![0.05]).unwrap();
        assert_eq!(fgsm(&m, &low, 0, 0.1).unwrap().adversarial.pixels()[0], 0.0);
        // y = 1 flips the sign.
        let up = fgsm(&m, &img, 1, 0.1).unwrap();
        assert!((up.adversarial.pixels()[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn runner_up_is_second_best() {
        let m = BuiltinModel::from_parts(
            Shape::new(1, 1, 1).unwrap(),
            Array2::from_elem((1, 1), 1.0),
            Array1::zeros(1),
            Array2::zeros((3, 1)),
            Array1::from(vec![0.5, 2.0, 1.0]),
        )
        .unwrap();
        let img = Image::new(1, 1, 1, vec![0.5]).unwrap();
        assert_eq!(runner_up_target(&m, &img).unwrap(), 2);
    }

    #[test]
    fn cw_rejects_bad_parameters() {
        let m = one_pixel_model([1.0, -1.0]);
        let img = Image::new(1, 1, 1, vec![0.3]).unwrap();
        let bad_c = CwConfig {
            c: 0.0,
            ..CwConfig::default()
        };
        assert!(cw_l2(&m, &img, 1, &bad_c).is_err());
        assert!(cw_l2(&m, &img, 5, &CwConfig::default()).is_err());
    }

    #[test]
    fn noise_degenerate_parameters() {
        let img = Image::new(1, 3, 1, vec![0.2, 0.5, 0.8]).unwrap();
        assert_eq!(gaussian_noise(&img, 0.0, 1).unwrap(), img);
        assert_eq!(salt_pepper(&img, 0.0, 1).unwrap(), img);
        assert!(salt_pepper(&img, 1.0, 1)
            .unwrap()
            .pixels()
            .iter()
            .all(|&p| p == 0.0 || p == 1.0));
        assert!(gaussian_noise(&img, -1.0, 1).is_err());
        assert!(poisson_noise(&img, 0.0, 1).is_err());
        assert!(salt_pepper(&img, 1.5, 1).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let img = Image::filled(Shape::new(4, 4, 3).unwrap(), 0.5).unwrap();
        for noise in [
            Noise::Gaussian(0.1),
            Noise::Poisson(50.0),
            Noise::SaltPepper(0.3),
        ] {
            assert_eq!(noise.apply(&img, 9).unwrap(), noise.apply(&img, 9).unwrap());
            assert_ne!(
                noise.apply(&img, 9).unwrap(),
                noise.apply(&img, 10).unwrap()
            );
        }
    }

    #[test]
    fn poisson_keeps_black_black() {
        let img = Image::filled(Shape::new(2, 2, 1).unwrap(), 0.0).unwrap();
        assert_eq!(poisson_noise(&img, 255.0, 3).unwrap(), img);
    }
}
