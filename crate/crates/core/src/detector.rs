//! Filter → predict twice → compare labels.

use crate::error::{Error, Result};
use crate::filters::{FilterSpec, Transform};
use crate::imaging::Image;
use crate::predictor::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Benign,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub original_label: usize,
    pub filtered_label: usize,
    /// Feature reservation ratio, when the transform was the DCT filter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Verdict {
    fn new(original_label: usize, filtered_label: usize, alpha: Option<f64>) -> Self {
        let decision = if original_label == filtered_label {
            Decision::Benign
        } else {
            Decision::Adversarial
        };
        Verdict {
            decision,
            original_label,
            filtered_label,
            alpha,
        }
    }

    pub fn is_adversarial(&self) -> bool {
        self.decision == Decision::Adversarial
    }
}

/// Flags `image` as adversarial when the predictor's label changes after the
/// DCT feature filter. Only labels are compared; scores are never read.
pub fn detect<P: Predictor + ?Sized>(
    image: &Image,
    predictor: &mut P,
    spec: FilterSpec,
) -> Result<Verdict> {
    detect_with(image, predictor, &Transform::FeatureFilter(spec))
}

/// Same pipeline with any single input transform in place of the DCT filter.
pub fn detect_with<P: Predictor + ?Sized>(
    image: &Image,
    predictor: &mut P,
    transform: &Transform,
) -> Result<Verdict> {
    let filtered = transform.apply(image)?;
    let original = predictor.predict(image)?.label;
    let after = predictor.predict(&filtered)?.label;
    let alpha = match transform {
        Transform::FeatureFilter(spec) => Some(spec.alpha()),
        _ => None,
    };
    Ok(Verdict::new(original, after, alpha))
}

/// Order-preserving [`detect`] over a batch; the first failure aborts with its index.
pub fn batch_detect<P: Predictor + ?Sized>(
    images: &[Image],
    predictor: &mut P,
    spec: FilterSpec,
) -> Result<Vec<Verdict>> {
    batch_detect_with(images, predictor, &Transform::FeatureFilter(spec))
}

pub fn batch_detect_with<P: Predictor + ?Sized>(
    images: &[Image],
    predictor: &mut P,
    transform: &Transform,
) -> Result<Vec<Verdict>> {
    images
        .iter()
        .enumerate()
        .map(|(i, img)| detect_with(img, predictor, transform).map_err(|e| Error::at(i, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Shape;
    use crate::predictor::{FnPredictor, Prediction};

    struct Counting(usize);

    impl Predictor for Counting {
        fn predict(&mut self, _: &Image) -> Result<Prediction> {
            self.0 += 1;
            Ok(Prediction::label_only(1))
        }
    }

    struct Broken;

    impl Predictor for Broken {
        fn predict(&mut self, _: &Image) -> Result<Prediction> {
            Err(Error::Transport("child died".into()))
        }
    }

    #[test]
    fn exactly_two_predictor_calls() {
        let img = Image::filled(Shape::new(4, 4, 1).unwrap(), 0.3).unwrap();
        let mut p = Counting(0);
        let v = detect(&img, &mut p, FilterSpec::new(0.5).unwrap()).unwrap();
        assert_eq!(p.0, 2);
        assert_eq!(v.decision, Decision::Benign);
        assert_eq!(v.alpha, Some(0.5));
    }

    #[test]
    fn transport_errors_are_not_verdicts() {
        let img = Image::filled(Shape::new(4, 4, 1).unwrap(), 0.3).unwrap();
        assert!(matches!(
            detect(&img, &mut Broken, FilterSpec::new(0.5).unwrap()),
            Err(Error::Transport(_))
        ));
        let imgs = vec![img.clone(), img];
        match batch_detect(&imgs, &mut Broken, FilterSpec::new(0.5).unwrap()) {
            Err(Error::AtIndex { index: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_batch() {
        let mut p = FnPredictor(|_: &Image| Ok(0));
        assert!(batch_detect(&[], &mut p, FilterSpec::new(0.8).unwrap())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn verdict_json() {
        let v = Verdict::new(2, 5, Some(0.8));
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(
            json,
            r#"{"decision":"adversarial","original_label":2,"filtered_label":5,"alpha":0.8}"#
        );
    }
}
