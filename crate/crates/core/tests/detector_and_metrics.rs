mod common;

use common::{random_image, rng};
use rand::seq::SliceRandom;
use rand::Rng;
use recess_core::detector::batch_detect;
use recess_core::metrics::{auc, tpr_tnr, RocCurve, RocPoint};
use recess_core::predictor::FnPredictor;
use recess_core::{detect, BuiltinModel, Decision, FilterSpec, Image, Shape, Verdict};

fn mean_threshold() -> FnPredictor<impl FnMut(&Image) -> recess_core::Result<usize>> {
    FnPredictor(|img: &Image| Ok(usize::from(img.mean() > 0.5)))
}

#[test]
fn clipping_can_push_the_mean_across_the_threshold() {
    // Bright grid lines on a dark field: the low-passed image undershoots below
    // zero between the lines, and clipping those lobes raises the mean.
    let px: Vec<f64> = (0..64)
        .map(|i| {
            if (i / 8) % 4 == 0 || (i % 8) % 4 == 0 {
                1.0
            } else {
                0.1
            }
        })
        .collect();
    let img = Image::new(8, 8, 1, px).unwrap();
    assert!(img.mean() < 0.5);
    let v = detect(&img, &mut mean_threshold(), FilterSpec::new(0.5).unwrap()).unwrap();
    assert_eq!(v.decision, Decision::Adversarial);
    assert_eq!((v.original_label, v.filtered_label), (0, 1));
}

#[test]
fn constant_images_are_benign() {
    let shape = Shape::new(8, 8, 3).unwrap();
    // Levels away from the predictor's threshold, where rounding alone could decide.
    let images: Vec<Image> = (0..6)
        .map(|i| Image::filled(shape, i as f64 / 5.0).unwrap())
        .collect();
    let verdicts = batch_detect(
        &images,
        &mut mean_threshold(),
        FilterSpec::new(0.3).unwrap(),
    )
    .unwrap();
    assert!(verdicts.iter().all(|v| v.decision == Decision::Benign));
    assert!(
        batch_detect(&[], &mut mean_threshold(), FilterSpec::new(0.3).unwrap())
            .unwrap()
            .is_empty()
    );
}

#[test]
fn permuting_the_batch_permutes_the_verdicts() {
    let mut r = rng(50);
    let model = BuiltinModel::random(Shape::new(8, 8, 3).unwrap(), 16, 3, 5).unwrap();
    let images: Vec<Image> = (0..40).map(|_| random_image(&mut r, 8, 8, 3)).collect();
    let spec = FilterSpec::new(0.5).unwrap();
    let base = batch_detect(&images, &mut &model, spec).unwrap();
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.shuffle(&mut r);
    let shuffled: Vec<Image> = order.iter().map(|&i| images[i].clone()).collect();
    let got = batch_detect(&shuffled, &mut &model, spec).unwrap();
    for (pos, &i) in order.iter().enumerate() {
        assert_eq!(got[pos], base[i]);
    }
    for v in &base {
        assert_eq!(v.is_adversarial(), v.original_label != v.filtered_label);
    }
}

#[test]
fn label_only_predictor_gives_the_same_verdicts() {
    let mut r = rng(51);
    let model = BuiltinModel::random(Shape::new(8, 8, 1).unwrap(), 16, 3, 6).unwrap();
    let mut labels_only = FnPredictor(|img: &Image| Ok(model.classify(img)?.label));
    for _ in 0..20 {
        let img = random_image(&mut r, 8, 8, 1);
        let spec = FilterSpec::new(0.4).unwrap();
        assert_eq!(
            detect(&img, &mut labels_only, spec).unwrap(),
            detect(&img, &mut &model, spec).unwrap()
        );
    }
}

fn verdicts(adversarial: usize, benign: usize) -> Vec<Verdict> {
    let mut p = FnPredictor(|_: &Image| Ok(0));
    let img = Image::filled(Shape::new(2, 2, 1).unwrap(), 0.5).unwrap();
    let mut out = Vec::new();
    for i in 0..adversarial + benign {
        let mut v = detect(&img, &mut p, FilterSpec::new(1.0).unwrap()).unwrap();
        if i < adversarial {
            v.filtered_label = 1;
            v.decision = Decision::Adversarial;
        }
        out.push(v);
    }
    out
}

#[test]
fn rates_follow_their_definition() {
    let on_adv = verdicts(98, 2);
    let on_benign = verdicts(3, 97);
    let rates = tpr_tnr(&on_adv, &on_benign).unwrap();
    assert_eq!((rates.tpr, rates.tnr), (0.98, 0.97));
    let rates = tpr_tnr(&verdicts(0, 10), &verdicts(0, 10)).unwrap();
    assert_eq!((rates.tpr, rates.tnr), (0.0, 1.0));
}

/// Shoelace area of the polygon under the curve, closed through (1, 0).
fn area_oracle(points: &[(f64, f64)]) -> f64 {
    let mut poly: Vec<(f64, f64)> = points.to_vec();
    poly.push((1.0, 0.0));
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % poly.len()];
        twice += x1 * y2 - x2 * y1;
    }
    twice.abs() / 2.0
}

#[test]
fn auc_matches_polygon_area() {
    let mut r = rng(52);
    for _ in 0..200 {
        let n = r.random_range(0..20);
        let mut fpr: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let mut tpr: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        fpr.sort_by(f64::total_cmp);
        tpr.sort_by(f64::total_cmp);
        let mut pts = vec![(0.0, 0.0)];
        pts.extend(fpr.into_iter().zip(tpr));
        pts.push((1.0, 1.0));
        let curve: Vec<RocPoint> = pts.iter().map(|&(f, t)| RocPoint::new(f, t)).collect();
        let got = auc(&curve).unwrap();
        let want = area_oracle(&pts);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn auc_reference_values() {
    assert_eq!(RocCurve::from_points([]).unwrap().auc().unwrap(), 0.5);
    let three = [
        RocPoint::new(0.0, 0.0),
        RocPoint::new(0.2, 0.9),
        RocPoint::new(1.0, 1.0),
    ];
    assert!((auc(&three).unwrap() - 0.85).abs() < 1e-12);
    let step = [
        RocPoint::new(0.0, 0.0),
        RocPoint::new(0.0, 1.0),
        RocPoint::new(1.0, 1.0),
    ];
    assert_eq!(auc(&step).unwrap(), 1.0);
    let flag_all = RocCurve::from_points([RocPoint::new(1.0, 1.0)]).unwrap();
    assert_eq!(flag_all.auc().unwrap(), 0.5);
    let unsorted = [RocPoint::new(0.5, 0.5), RocPoint::new(0.2, 0.9)];
    assert!(auc(&unsorted).is_err());
}
