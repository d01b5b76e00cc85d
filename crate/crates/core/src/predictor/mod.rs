//! Classifiers the detector queries: a small built-in dense network and a
//! subprocess client for external models.

mod builtin;
mod external;
mod model_file;

use std::path::PathBuf;
use std::str::FromStr;

pub use builtin::{softmax, train_builtin, BuiltinModel, LossSpec, TrainConfig, TrainReport};
pub use external::{ExternalPredictor, Request, Response};
pub use model_file::{load_model, save_model, MODEL_MAGIC};

use crate::error::{Error, Result};
use crate::imaging::Image;

/// A predicted class, optionally with the score vector it was derived from.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Prediction {
    pub label: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl Prediction {
    pub fn label_only(label: usize) -> Self {
        Prediction {
            label,
            scores: None,
        }
    }

    /// Label is the argmax of `scores`, lowest index on ties.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        let label = argmax(&scores)
            .ok_or_else(|| Error::Contract("cannot take argmax of an empty score vector".into()))?;
        Ok(Prediction {
            label,
            scores: Some(scores),
        })
    }
}

/// Index of the largest value; the lowest index wins ties. NaN never wins.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if !(v > values[b]) => {}
            _ if v.is_nan() => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Anything that maps an image to a class label.
///
/// `predict` takes `&mut self` because external predictors own a child process
/// that serves one request at a time.
pub trait Predictor {
    fn predict(&mut self, image: &Image) -> Result<Prediction>;
}

impl<P: Predictor + ?Sized> Predictor for &mut P {
    fn predict(&mut self, image: &Image) -> Result<Prediction> {
        (**self).predict(image)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict(&mut self, image: &Image) -> Result<Prediction> {
        (**self).predict(image)
    }
}

/// Wraps a labelling closure as a score-free predictor.
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: FnMut(&Image) -> Result<usize>,
{
    fn predict(&mut self, image: &Image) -> Result<Prediction> {
        (self.0)(image).map(Prediction::label_only)
    }
}

/// Where predictions come from: `builtin:<model-file>` or `exec:<command line>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorSpec {
    Builtin(PathBuf),
    Exec(Vec<String>),
}

impl FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("builtin:") {
            if path.is_empty() {
                return Err(Error::Parameter(
                    "builtin predictor needs a model path".into(),
                ));
            }
            Ok(PredictorSpec::Builtin(PathBuf::from(path)))
        } else if let Some(cmd) = s.strip_prefix("exec:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
            if argv.is_empty() {
                return Err(Error::Parameter("exec predictor needs a command".into()));
            }
            Ok(PredictorSpec::Exec(argv))
        } else {
            Err(Error::Parameter(format!(
                "predictor spec `{s}` must start with `builtin:` or `exec:`"
            )))
        }
    }
}

impl PredictorSpec {
    pub fn open(&self) -> Result<Box<dyn Predictor>> {
        Ok(match self {
            PredictorSpec::Builtin(path) => Box::new(load_model(path)?),
            PredictorSpec::Exec(argv) => Box::new(ExternalPredictor::spawn(argv)?),
        })
    }
}
