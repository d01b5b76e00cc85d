//! Detection-quality metrics: TPR/TNR, ROC over a feature-reservation sweep,
//! trapezoidal AUC, top-k agreement, and filter timing.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detector::{batch_detect, Verdict};
use crate::error::{Error, Result};
use crate::filters::{feature_filter_counted, FilterSpec};
use crate::imaging::{Image, Shape};
use crate::predictor::Predictor;

/// Confusion counts with adversarial as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Rates {
    pub tpr: f64,
    pub tnr: f64,
    pub counts: ConfusionCounts,
}

/// TPR over verdicts on adversarial inputs and TNR over verdicts on benign inputs.
pub fn tpr_tnr(on_adversarial: &[Verdict], on_benign: &[Verdict]) -> Result<Rates> {
    if on_adversarial.is_empty() {
        return Err(Error::UndefinedRate(
            "TPR needs at least one adversarial input".into(),
        ));
    }
    if on_benign.is_empty() {
        return Err(Error::UndefinedRate(
            "TNR needs at least one benign input".into(),
        ));
    }
    let tp = on_adversarial.iter().filter(|v| v.is_adversarial()).count();
    let fp = on_benign.iter().filter(|v| v.is_adversarial()).count();
    let counts = ConfusionCounts {
        tp,
        fn_: on_adversarial.len() - tp,
        tn: on_benign.len() - fp,
        fp,
    };
    Ok(Rates {
        tpr: tp as f64 / on_adversarial.len() as f64,
        tnr: counts.tn as f64 / on_benign.len() as f64,
        counts,
    })
}

/// `0.982` → `"98.20%"`.
pub fn format_percent(rate: f64) -> String {
    format!("{:.2}%", rate * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Sweep parameter that produced the point; `None` for the anchors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl RocPoint {
    pub fn new(fpr: f64, tpr: f64) -> Self {
        RocPoint {
            fpr,
            tpr,
            alpha: None,
        }
    }
}

/// ROC points sorted by FPR, anchored at (0,0) and (1,1), one point per FPR
/// (the highest TPR wins).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn from_points(interior: impl IntoIterator<Item = RocPoint>) -> Result<Self> {
        let mut points = vec![RocPoint::new(0.0, 0.0), RocPoint::new(1.0, 1.0)];
        for p in interior {
            if !((0.0..=1.0).contains(&p.fpr) && (0.0..=1.0).contains(&p.tpr)) {
                return Err(Error::Contract(format!(
                    "ROC point ({}, {}) lies outside the unit square",
                    p.fpr, p.tpr
                )));
            }
            points.push(p);
        }
        points.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(b.tpr.total_cmp(&a.tpr)));
        points.dedup_by(|later, kept| later.fpr == kept.fpr);
        Ok(RocCurve { points })
    }

    /// One interior point per sweep row at `(1 − TNR, TPR)`.
    pub fn from_sweep(rows: &[SweepRow]) -> Result<Self> {
        Self::from_points(rows.iter().map(|r| RocPoint {
            fpr: 1.0 - r.rates.tnr,
            tpr: r.rates.tpr,
            alpha: Some(r.alpha),
        }))
    }

    pub fn auc(&self) -> Result<f64> {
        auc(&self.points)
    }
}

/// Trapezoidal area under a curve given by points in non-decreasing FPR order.
pub fn auc(points: &[RocPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Contract(format!(
            "AUC needs at least two points, got {}",
            points.len()
        )));
    }
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.fpr < a.fpr {
            return Err(Error::Contract(format!(
                "ROC points are not sorted by FPR ({} after {})",
                b.fpr, a.fpr
            )));
        }
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    Ok(area)
}

/// Detection rates at one feature reservation ratio.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub rates: Rates,
}

/// Validates a sweep: non-empty, strictly descending, every α in (0, 1].
pub fn check_alphas(alphas: &[f64]) -> Result<Vec<FilterSpec>> {
    if alphas.is_empty() {
        return Err(Error::Parameter("alpha list is empty".into()));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter(format!(
            "alphas must be strictly descending, got {alphas:?}"
        )));
    }
    alphas.iter().map(|&a| FilterSpec::new(a)).collect()
}

/// Runs the detector at every α over both sets.
pub fn sweep_alpha<P: Predictor + ?Sized>(
    adversarial: &[Image],
    benign: &[Image],
    predictor: &mut P,
    alphas: &[f64],
) -> Result<Vec<SweepRow>> {
    if adversarial.is_empty() || benign.is_empty() {
        return Err(Error::UndefinedRate(
            "ROC sweep needs non-empty adversarial and benign sets".into(),
        ));
    }
    check_alphas(alphas)?
        .into_iter()
        .map(|spec| {
            let on_adv = batch_detect(adversarial, predictor, spec)?;
            let on_benign = batch_detect(benign, predictor, spec)?;
            Ok(SweepRow {
                alpha: spec.alpha(),
                rates: tpr_tnr(&on_adv, &on_benign)?,
            })
        })
        .collect()
}

/// ROC curve traced by sweeping the feature reservation ratio.
pub fn roc_over_alpha<P: Predictor + ?Sized>(
    adversarial: &[Image],
    benign: &[Image],
    predictor: &mut P,
    alphas: &[f64],
) -> Result<RocCurve> {
    RocCurve::from_sweep(&sweep_alpha(adversarial, benign, predictor, alphas)?)
}

/// Indices of the `k` largest scores, ties to the lowest index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// True when the noisy top-1 label is among the clean top-k labels.
pub fn topk_agreement(clean: &[f64], noisy: &[f64], k: usize) -> Result<bool> {
    if clean.len() != noisy.len() {
        return Err(Error::Contract(format!(
            "score vectors differ in length ({} vs {})",
            clean.len(),
            noisy.len()
        )));
    }
    if k == 0 || k > clean.len() {
        return Err(Error::Parameter(format!(
            "k = {k} out of range for {} classes",
            clean.len()
        )));
    }
    let noisy_top = top_k(noisy, 1)[0];
    Ok(top_k(clean, k).contains(&noisy_top))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BenchReport {
    pub shape: String,
    pub alpha: f64,
    pub repetitions: usize,
    pub mean_seconds: f64,
    pub p95_seconds: f64,
    /// Deterministic workload counters.
    pub pixels_processed: usize,
    pub coefficients_zeroed: usize,
}

/// Times [`crate::filters::feature_filter`] on `repetitions` random images of `shape`.
pub fn bench_filter(
    shape: Shape,
    alpha: f64,
    repetitions: usize,
    seed: u64,
) -> Result<BenchReport> {
    if repetitions < 10 {
        return Err(Error::Parameter(format!(
            "need at least 10 repetitions, got {repetitions}"
        )));
    }
    let spec = FilterSpec::new(alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(repetitions);
    let (mut pixels, mut zeroed) = (0, 0);
    for _ in 0..repetitions {
        let img = Image::from_shape(
            shape,
            (0..shape.len()).map(|_| rng.random::<f64>()).collect(),
        )?;
        let start = Instant::now();
        let (out, z) = feature_filter_counted(&img, spec)?;
        times.push(start.elapsed().as_secs_f64());
        pixels += out.pixels().len();
        zeroed += z;
    }
    Ok(BenchReport {
        shape: shape.to_string(),
        alpha,
        repetitions,
        mean_seconds: times.iter().sum::<f64>() / repetitions as f64,
        p95_seconds: percentile(&mut times, 0.95),
        pixels_processed: pixels,
        coefficients_zeroed: zeroed,
    })
}

/// Nearest-rank percentile.
pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}
