mod common;

use common::{random_image, rng};
use ndarray::{array, Array1, Array2};
use recess_core::attacks::{cw_l2, fgsm, gaussian_noise, salt_pepper, CwConfig};
use recess_core::predictor::train_builtin;
use recess_core::predictor::TrainConfig;
use recess_core::{BuiltinModel, Image, LabeledDataset, Shape};

fn toy_set() -> LabeledDataset {
    let shape = Shape::new(4, 4, 1).unwrap();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..100 {
        let class = i % 2;
        images.push(Image::filled(shape, class as f64).unwrap());
        labels.push(class);
    }
    LabeledDataset::new(images, labels, 2).unwrap()
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        hidden_size: 8,
        epochs: 10,
        batch_size: 10,
        learning_rate: 0.1,
        seed: 7,
    }
}

#[test]
fn separable_toy_set_is_learned() {
    let (_, report) = train_builtin(&toy_set(), &toy_config()).unwrap();
    assert!(
        report.train_accuracy >= 0.99,
        "accuracy {}",
        report.train_accuracy
    );
}

#[test]
fn training_is_bit_reproducible() {
    let (a, ra) = train_builtin(&toy_set(), &toy_config()).unwrap();
    let (b, rb) = train_builtin(&toy_set(), &toy_config()).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(ra, rb);
    let (c, _) = train_builtin(
        &toy_set(),
        &TrainConfig {
            seed: 8,
            ..toy_config()
        },
    )
    .unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
}

/// One pixel, one hidden unit passing the pixel through, logits `(2x, −x)`.
fn one_pixel_model() -> BuiltinModel {
    BuiltinModel::from_parts(
        Shape::new(1, 1, 1).unwrap(),
        array![[1.0]],
        Array1::zeros(1),
        Array2::from_shape_vec((2, 1), vec![2.0, -1.0]).unwrap(),
        Array1::zeros(2),
    )
    .unwrap()
}

#[test]
fn fgsm_on_one_pixel_matches_hand_gradient() {
    // d CE/dx = (p − e_0)·(2, −1) = −3·p_1 < 0, so the step is −ε.
    let model = one_pixel_model();
    let x = Image::new(1, 1, 1, vec![0.5]).unwrap();
    let adv = fgsm(&model, &x, 0, 0.1).unwrap();
    assert!((adv.adversarial.pixels()[0] - 0.4).abs() < 1e-15);
    let x = Image::new(1, 1, 1, vec![0.05]).unwrap();
    assert_eq!(
        fgsm(&model, &x, 0, 0.1).unwrap().adversarial.pixels()[0],
        0.0
    );
    // Against label 1 the sign flips.
    let x = Image::new(1, 1, 1, vec![0.5]).unwrap();
    assert!((fgsm(&model, &x, 1, 0.1).unwrap().adversarial.pixels()[0] - 0.6).abs() < 1e-15);
}

#[test]
fn fgsm_stays_inside_the_epsilon_box() {
    let mut r = rng(40);
    let shape = Shape::new(6, 6, 3).unwrap();
    for seed in 0..20 {
        let model = BuiltinModel::random(shape, 16, 4, seed).unwrap();
        let img = random_image(&mut r, 6, 6, 3);
        for eps in [0.0, 0.01, 8.0 / 255.0, 0.3] {
            let adv = fgsm(&model, &img, (seed % 4) as usize, eps).unwrap();
            let linf = adv
                .adversarial
                .pixels()
                .iter()
                .zip(img.pixels())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(linf <= eps + 1e-15);
            if eps == 0.0 {
                assert_eq!(adv.adversarial, img);
                assert!(!adv.success);
            }
        }
    }
}

#[test]
fn cw_finds_a_smaller_flip_than_fgsm() {
    let (model, _) = train_builtin(&toy_set(), &toy_config()).unwrap();
    let shape = Shape::new(4, 4, 1).unwrap();
    // The class-0 image closest to the boundary that FGSM at ε = 0.1 still flips.
    let start = (0..=100)
        .map(|i| i as f64 / 100.0)
        .map(|v| Image::filled(shape, v).unwrap())
        .filter(|img| model.classify(img).unwrap().label == 0)
        .find(|img| fgsm(&model, img, 0, 0.1).unwrap().success)
        .expect("some class-0 image flips under FGSM");
    let f = fgsm(&model, &start, 0, 0.1).unwrap();
    let config = CwConfig {
        c: 10.0,
        confidence: 0.0,
        steps: 500,
        step_size: 0.01,
    };
    let cw = cw_l2(&model, &start, 1, &config).unwrap();
    assert!(cw.success, "C&W did not reach the target");
    assert!(
        cw.perturbation_l2 < f.perturbation_l2,
        "C&W {} vs FGSM {}",
        cw.perturbation_l2,
        f.perturbation_l2
    );
}

#[test]
fn salt_and_pepper_replaces_the_requested_fraction() {
    let img = Image::filled(Shape::new(100, 1000, 1).unwrap(), 0.5).unwrap();
    let noisy = salt_pepper(&img, 0.1, 3).unwrap();
    let replaced = noisy.pixels().iter().filter(|&&v| v != 0.5).count() as f64 / 1e5;
    assert!((replaced - 0.1).abs() <= 0.01, "replaced {replaced}");
    assert!(noisy
        .pixels()
        .iter()
        .all(|&v| v == 0.5 || v == 0.0 || v == 1.0));
    let all = salt_pepper(&img, 1.0, 3).unwrap();
    assert!(all.pixels().iter().all(|&v| v == 0.0 || v == 1.0));
    assert_eq!(salt_pepper(&img, 0.0, 3).unwrap(), img);
    assert_eq!(gaussian_noise(&img, 0.0, 3).unwrap(), img);
}
