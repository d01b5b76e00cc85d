use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::{Prediction, Predictor};
use crate::error::{Error, Result};
use crate::imaging::{ensure_same_shape, Image, LabeledDataset, Shape};

/// flatten → dense(hidden, ReLU) → dense(classes). Outputs are pre-softmax logits.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinModel {
    pub(crate) shape: Shape,
    /// hidden × inputs
    pub(crate) w1: Array2<f64>,
    pub(crate) b1: Array1<f64>,
    /// classes × hidden
    pub(crate) w2: Array2<f64>,
    pub(crate) b2: Array1<f64>,
}

/// Loss whose input gradient is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// Softmax cross-entropy against `label`.
    CrossEntropy { label: usize },
    /// `max(max_{i≠t} Z_i − Z_t, −k)` on the logits.
    CarliniWagner { target: usize, confidence: f64 },
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// Largest logit other than `target`, with its index (lowest index on ties).
fn runner_up(logits: &[f64], target: usize) -> (usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (i, &z) in logits.iter().enumerate() {
        if i != target && (best.0 == usize::MAX || z > best.1) {
            best = (i, z);
        }
    }
    best
}

impl LossSpec {
    fn check(&self, classes: usize) -> Result<()> {
        let (which, idx) = match *self {
            LossSpec::CrossEntropy { label } => ("label", label),
            LossSpec::CarliniWagner { target, confidence } => {
                if !(confidence >= 0.0 && confidence.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "confidence must be finite and non-negative, got {confidence}"
                    )));
                }
                ("target", target)
            }
        };
        if idx >= classes {
            return Err(Error::Contract(format!(
                "{which} {idx} out of range for {classes} classes"
            )));
        }
        if let LossSpec::CarliniWagner { .. } = self {
            if classes < 2 {
                return Err(Error::Contract(
                    "margin loss needs at least two classes".into(),
                ));
            }
        }
        Ok(())
    }

    /// Loss value for a logit vector.
    pub fn value(&self, logits: &[f64]) -> f64 {
        match *self {
            LossSpec::CrossEntropy { label } => log_sum_exp(logits) - logits[label],
            LossSpec::CarliniWagner { target, confidence } => {
                let (_, other) = runner_up(logits, target);
                // `+ 0.0` turns the `-0.0` floor at k = 0 into a plain zero.
                (other - logits[target]).max(-confidence) + 0.0
            }
        }
    }

    /// Gradient of the loss with respect to the logits.
    pub fn logit_gradient(&self, logits: &[f64]) -> Vec<f64> {
        match *self {
            LossSpec::CrossEntropy { label } => {
                let mut g = softmax(logits);
                g[label] -= 1.0;
                g
            }
            LossSpec::CarliniWagner { target, confidence } => {
                let mut g = vec![0.0; logits.len()];
                let (j, other) = runner_up(logits, target);
                if other - logits[target] > -confidence {
                    g[j] = 1.0;
                    g[target] = -1.0;
                }
                g
            }
        }
    }
}

impl BuiltinModel {
    /// All-zero weights and biases.
    pub fn zeros(shape: Shape, hidden: usize, classes: usize) -> Result<Self> {
        Self::from_parts(
            shape,
            Array2::zeros((hidden, shape.len())),
            Array1::zeros(hidden),
            Array2::zeros((classes, hidden)),
            Array1::zeros(classes),
        )
    }

    /// Uniform `[-1/√fan_in, 1/√fan_in]` weights and zero biases, drawn from `seed`.
    pub fn random(shape: Shape, hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(shape, hidden, classes, &mut rng)
    }

    fn init_with(
        shape: Shape,
        hidden: usize,
        classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut layer = |rows: usize, fan_in: usize| -> Result<Array2<f64>> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound)
                .map_err(|e| Error::Parameter(format!("weight init: {e}")))?;
            Ok(Array2::from_shape_simple_fn((rows, fan_in), || {
                dist.sample(rng)
            }))
        };
        let w1 = layer(hidden, shape.len())?;
        let w2 = layer(classes, hidden)?;
        Self::from_parts(shape, w1, Array1::zeros(hidden), w2, Array1::zeros(classes))
    }

    pub fn from_parts(
        shape: Shape,
        w1: Array2<f64>,
        b1: Array1<f64>,
        w2: Array2<f64>,
        b2: Array1<f64>,
    ) -> Result<Self> {
        let hidden = w1.nrows();
        let classes = w2.nrows();
        if hidden == 0 || classes == 0 {
            return Err(Error::Parameter(
                "hidden size and class count must be positive".into(),
            ));
        }
        let ok = w1.ncols() == shape.len()
            && b1.len() == hidden
            && w2.ncols() == hidden
            && b2.len() == classes;
        if !ok {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "w1 {hidden}x{}, b1 {hidden}, w2 {classes}x{hidden}, b2 {classes}",
                    shape.len()
                ),
                actual: format!(
                    "w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                    w1.dim(),
                    b1.len(),
                    w2.dim(),
                    b2.len()
                ),
            });
        }
        Ok(BuiltinModel {
            shape,
            w1: w1.as_standard_layout().into_owned(),
            b1,
            w2: w2.as_standard_layout().into_owned(),
            b2,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.shape
    }

    pub fn hidden_size(&self) -> usize {
        self.w1.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.nrows()
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    pub fn b1(&self) -> &Array1<f64> {
        &self.b1
    }

    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }

    pub fn b2(&self) -> &Array1<f64> {
        &self.b2
    }

    pub fn b2_mut(&mut self) -> &mut Array1<f64> {
        &mut self.b2
    }

    fn check_input(&self, image: &Image) -> Result<()> {
        ensure_same_shape(self.shape, image.shape())
    }

    /// Hidden pre-activations and logits.
    fn forward(&self, x: ArrayView1<'_, f64>) -> (Array1<f64>, Array1<f64>) {
        let pre = self.w1.dot(&x) + &self.b1;
        let act = pre.mapv(|v| v.max(0.0));
        let logits = self.w2.dot(&act) + &self.b2;
        (pre, logits)
    }

    /// Pre-softmax outputs `Z(x)`.
    pub fn logits(&self, image: &Image) -> Result<Vec<f64>> {
        self.check_input(image)?;
        Ok(self.forward(ArrayView1::from(image.pixels())).1.to_vec())
    }

    /// Label plus softmax scores.
    pub fn classify(&self, image: &Image) -> Result<Prediction> {
        Prediction::from_scores(softmax(&self.logits(image)?))
    }

    /// Exact gradient of `loss` with respect to the input pixels, image-shaped.
    pub fn input_gradient(&self, image: &Image, loss: LossSpec) -> Result<Vec<f64>> {
        Ok(self
            .loss_and_gradient(image.pixels(), image.shape(), loss)?
            .1)
    }

    /// Loss value and input gradient for a raw raster (attacks iterate on rasters).
    pub(crate) fn loss_and_gradient(
        &self,
        pixels: &[f64],
        shape: Shape,
        loss: LossSpec,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        ensure_same_shape(self.shape, shape)?;
        loss.check(self.num_classes())?;
        let (pre, logits) = self.forward(ArrayView1::from(pixels));
        let logits = logits.to_vec();
        let g_logits = Array1::from(loss.logit_gradient(&logits));
        let mut g_hidden = self.w2.t().dot(&g_logits);
        g_hidden.zip_mut_with(&pre, |g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
        let g_input = self.w1.t().dot(&g_hidden);
        Ok((loss.value(&logits), g_input.to_vec(), logits))
    }

    /// Fraction of `dataset` classified correctly.
    pub fn accuracy(&self, dataset: &LabeledDataset) -> Result<f64> {
        if dataset.is_empty() {
            return Err(Error::Parameter("accuracy of an empty dataset".into()));
        }
        let mut correct = 0usize;
        for (img, label) in dataset.iter() {
            if self.classify(img)?.label == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / dataset.len() as f64)
    }
}

impl Predictor for BuiltinModel {
    fn predict(&mut self, image: &Image) -> Result<Prediction> {
        self.classify(image)
    }
}

impl Predictor for &BuiltinModel {
    fn predict(&mut self, image: &Image) -> Result<Prediction> {
        self.classify(image)
    }
}

/// Mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_size: 256,
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.02,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrainReport {
    /// Mean cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
}

/// Trains a [`BuiltinModel`] with softmax cross-entropy. Initialization and the
/// per-epoch shuffle both come from one generator seeded with `config.seed`.
pub fn train_builtin(
    dataset: &LabeledDataset,
    config: &TrainConfig,
) -> Result<(BuiltinModel, TrainReport)> {
    let shape = dataset
        .shape()
        .ok_or_else(|| Error::Parameter("cannot train on an empty dataset".into()))?;
    if config.hidden_size == 0 || config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Parameter(
            "hidden_size, batch_size and epochs must be positive".into(),
        ));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::Parameter(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    let classes = dataset.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = BuiltinModel::init_with(shape, config.hidden_size, classes, &mut rng)?;

    let n = dataset.len();
    let d = shape.len();
    let inputs = Array2::from_shape_fn((n, d), |(i, j)| dataset.images()[i].pixels()[j]);
    let labels = dataset.labels();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let b = batch.len();
            let x = inputs.select(Axis(0), batch);
            let pre = x.dot(&model.w1.t()) + &model.b1;
            let act = pre.mapv(|v| v.max(0.0));
            let logits = act.dot(&model.w2.t()) + &model.b2;

            // dL/dZ for the batch-mean cross-entropy.
            let mut g_logits = Array2::zeros((b, classes));
            for (r, &idx) in batch.iter().enumerate() {
                let z = logits.row(r).to_vec();
                let label = labels[idx];
                total_loss += log_sum_exp(&z) - z[label];
                let mut p = softmax(&z);
                p[label] -= 1.0;
                for (c, v) in p.into_iter().enumerate() {
                    g_logits[[r, c]] = v / b as f64;
                }
            }

            let g_w2 = g_logits.t().dot(&act);
            let g_b2 = g_logits.sum_axis(Axis(0));
            let mut g_act = g_logits.dot(&model.w2);
            g_act.zip_mut_with(&pre, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            let g_w1 = g_act.t().dot(&x);
            let g_b1 = g_act.sum_axis(Axis(0));

            let lr = config.learning_rate;
            model.w2.scaled_add(-lr, &g_w2);
            model.b2.scaled_add(-lr, &g_b2);
            model.w1.scaled_add(-lr, &g_w1);
            model.b1.scaled_add(-lr, &g_b1);
        }
        let mean_loss = total_loss / n as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: mean_loss,
            });
        }
        log::debug!("epoch {epoch}: mean loss {mean_loss:.6}");
        epoch_losses.push(mean_loss);
    }

    let train_accuracy = model.accuracy(dataset)?;
    Ok((
        model,
        TrainReport {
            epoch_losses,
            train_accuracy,
        },
    ))
}

/// Dense-layer helper kept for slicing tests: logits of row `i` of a batch.
#[cfg(test)]
pub(crate) fn batch_logits(model: &BuiltinModel, x: &Array2<f64>) -> Array2<f64> {
    let pre = x.dot(&model.w1.t()) + &model.b1;
    pre.mapv(|v| v.max(0.0)).dot(&model.w2.t()) + &model.b2
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::s;

    fn shape(h: usize, w: usize, c: usize) -> Shape {
        Shape::new(h, w, c).unwrap()
    }

    #[test]
    fn zero_model_ties_to_label_zero() {
        let m = BuiltinModel::zeros(shape(2, 2, 1), 3, 4).unwrap();
        let img = Image::filled(shape(2, 2, 1), 0.7).unwrap();
        assert_eq!(m.logits(&img).unwrap(), vec![0.0; 4]);
        let p = m.classify(&img).unwrap();
        assert_eq!(p.label, 0);
        assert_eq!(p.scores.unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn bias_dominates_zero_weights() {
        let mut m = BuiltinModel::zeros(shape(2, 2, 1), 3, 4).unwrap();
        m.b2_mut()[3] = 10.0;
        let img = Image::filled(shape(2, 2, 1), 0.1).unwrap();
        assert_eq!(m.classify(&img).unwrap().label, 3);
    }

    #[test]
    fn single_pixel_linear_case() {
        // hidden unit passes the pixel through (ReLU of a positive value),
        // output = w * pixel + b.
        let (w, b, px) = (2.5, -0.3, 0.6);
        let m = BuiltinModel::from_parts(
            shape(1, 1, 1),
            Array2::from_elem((1, 1), 1.0),
            Array1::zeros(1),
            Array2::from_elem((1, 1), w),
            Array1::from_elem(1, b),
        )
        .unwrap();
        let img = Image::new(1, 1, 1, vec![px]).unwrap();
        assert!((m.logits(&img).unwrap()[0] - (w * px + b)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let m = BuiltinModel::zeros(shape(2, 2, 1), 3, 2).unwrap();
        let img = Image::filled(shape(2, 3, 1), 0.0).unwrap();
        assert!(matches!(m.logits(&img), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn zero_model_has_zero_gradient() {
        let m = BuiltinModel::zeros(shape(3, 3, 1), 4, 3).unwrap();
        let img = Image::filled(shape(3, 3, 1), 0.5).unwrap();
        let g = m
            .input_gradient(&img, LossSpec::CrossEntropy { label: 1 })
            .unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_loss_label() {
        let m = BuiltinModel::zeros(shape(1, 1, 1), 1, 2).unwrap();
        let img = Image::filled(shape(1, 1, 1), 0.5).unwrap();
        assert!(m
            .input_gradient(&img, LossSpec::CrossEntropy { label: 2 })
            .is_err());
        assert!(m
            .input_gradient(
                &img,
                LossSpec::CarliniWagner {
                    target: 0,
                    confidence: -1.0
                }
            )
            .is_err());
    }

    #[test]
    fn margin_loss_values() {
        let cw = |t, k| LossSpec::CarliniWagner {
            target: t,
            confidence: k,
        };
        assert_eq!(cw(0, 0.0).value(&[2.0, 5.0, 3.0]), 3.0);
        assert_eq!(cw(0, 0.0).value(&[9.0, 1.0, 1.0]), 0.0);
        assert_eq!(cw(0, 2.0).value(&[9.0, 1.0, 1.0]), -2.0);
        assert_eq!(cw(0, 2.0).logit_gradient(&[9.0, 1.0, 1.0]), vec![0.0; 3]);
        assert_eq!(
            cw(0, 100.0).logit_gradient(&[9.0, 1.0, 1.0]),
            vec![-1.0, 1.0, 0.0]
        );
        assert_eq!(
            cw(0, 0.0).logit_gradient(&[2.0, 5.0, 3.0]),
            vec![-1.0, 1.0, 0.0]
        );
    }

    #[test]
    fn batch_forward_matches_single() {
        let m = BuiltinModel::random(shape(2, 2, 3), 5, 3, 7).unwrap();
        let img = Image::new(2, 2, 3, (0..12).map(|i| i as f64 / 12.0).collect()).unwrap();
        let x = Array2::from_shape_vec((1, 12), img.pixels().to_vec()).unwrap();
        let batch = batch_logits(&m, &x);
        let single = m.logits(&img).unwrap();
        for (a, b) in batch.slice(s![0, ..]).iter().zip(&single) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn training_rejects_empty_and_bad_config() {
        let empty = LabeledDataset::new(vec![], vec![], 2).unwrap();
        assert!(train_builtin(&empty, &TrainConfig::default()).is_err());
        let img = Image::filled(shape(1, 1, 1), 0.0).unwrap();
        let ds = LabeledDataset::new(vec![img], vec![0], 2).unwrap();
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train_builtin(&ds, &cfg).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let imgs: Vec<_> = (0..8)
            .map(|i| Image::filled(shape(2, 2, 1), (i % 2) as f64).unwrap())
            .collect();
        let labels = (0..8).map(|i| i % 2).collect();
        let ds = LabeledDataset::new(imgs, labels, 2).unwrap();
        let cfg = TrainConfig {
            hidden_size: 4,
            epochs: 50,
            batch_size: 2,
            learning_rate: f64::MAX / 4.0,
            seed: 1,
        };
        assert!(matches!(
            train_builtin(&ds, &cfg),
            Err(Error::Divergence { .. })
        ));
    }
}
