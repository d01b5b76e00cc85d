//! Label-only adversarial example detection by DCT low-pass filtering.
//!
//! An input is run through the classifier twice: once as-is and once after
//! discarding its high-frequency DCT coefficients. If the two labels differ,
//! the input is flagged as adversarial.
//!
//! Beyond the detector itself the crate carries what is needed to evaluate it:
//! a small trainable classifier with exact input gradients, FGSM and C&W L2
//! attacks, natural-noise generators, baseline input transforms, and
//! TPR/TNR/ROC/AUC metrics.

pub mod attacks;
pub mod detector;
pub mod error;
pub mod filters;
pub mod imaging;
pub mod metrics;
pub mod predictor;
pub mod synth;
pub mod transform;

pub use detector::{batch_detect, detect, Decision, Verdict};
pub use error::{Error, Result};
pub use filters::{feature_filter, FilterSpec, Transform};
pub use imaging::{Image, LabeledDataset, Shape};
pub use predictor::{BuiltinModel, Prediction, Predictor};
