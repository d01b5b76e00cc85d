//! The subprocess predictor client against the fixture predictor binary.

use recess_core::predictor::ExternalPredictor;
use recess_core::{detect, Error, FilterSpec, Image, Prediction, Predictor, Shape};

fn fixture(args: &[&str]) -> ExternalPredictor {
    let mut argv = vec![env!("CARGO_BIN_EXE_recess-fixture")];
    argv.extend_from_slice(args);
    ExternalPredictor::spawn(&argv).unwrap()
}

fn flat(v: f64) -> Image {
    Image::filled(Shape::new(4, 4, 3).unwrap(), v).unwrap()
}

#[test]
fn fixed_label_with_one_hot_scores() {
    let mut p = fixture(&["--label", "3", "--classes", "5"]);
    let got = p.predict(&flat(0.5)).unwrap();
    assert_eq!(got.label, 3);
    assert_eq!(got.scores, Some(vec![0.0, 0.0, 0.0, 1.0, 0.0]));
}

#[test]
fn label_only_answers() {
    let mut p = fixture(&["--label", "2", "--no-scores"]);
    assert_eq!(p.predict(&flat(0.1)).unwrap(), Prediction::label_only(2));
}

#[test]
fn soak_1000_requests_in_order() {
    let mut p = fixture(&["--mean-threshold", "0.5"]);
    for i in 0..1000 {
        let v = if i % 3 == 0 { 0.9 } else { 0.1 };
        let got = p.predict(&flat(v)).unwrap();
        assert_eq!(got.label, usize::from(i % 3 == 0), "request {i}");
    }
}

#[test]
fn stderr_chatter_is_ignored() {
    let mut p = fixture(&["--label", "1", "--chatty"]);
    for _ in 0..100 {
        assert_eq!(p.predict(&flat(0.3)).unwrap().label, 1);
    }
}

#[test]
fn malformed_response_surfaces_as_transport_error() {
    let mut p = fixture(&["--label", "1", "--malformed-at", "5"]);
    for _ in 0..5 {
        assert_eq!(p.predict(&flat(0.3)).unwrap().label, 1);
    }
    let err = p.predict(&flat(0.3)).unwrap_err();
    assert!(
        matches!(err, Error::Transport(ref m) if m.contains("malformed")),
        "{err}"
    );
    // The stream can no longer be trusted; the handle stays failed.
    assert!(matches!(p.predict(&flat(0.3)), Err(Error::Transport(_))));
}

#[test]
fn error_object_keeps_the_stream_usable() {
    let mut p = fixture(&["--label", "4", "--error-at", "1"]);
    assert_eq!(p.predict(&flat(0.3)).unwrap().label, 4);
    let err = p.predict(&flat(0.3)).unwrap_err();
    assert!(
        matches!(err, Error::Transport(ref m) if m.contains("injected failure")),
        "{err}"
    );
    assert_eq!(p.predict(&flat(0.3)).unwrap().label, 4);
}

#[test]
fn id_mismatch_is_transport_error() {
    let mut p = fixture(&["--label", "0", "--wrong-id-at", "0"]);
    let err = p.predict(&flat(0.3)).unwrap_err();
    assert!(
        matches!(err, Error::Transport(ref m) if m.contains("does not match")),
        "{err}"
    );
}

#[test]
fn child_exit_is_transport_error() {
    let mut p = fixture(&["--label", "0", "--exit-at", "2"]);
    p.predict(&flat(0.3)).unwrap();
    p.predict(&flat(0.3)).unwrap();
    assert!(matches!(p.predict(&flat(0.3)), Err(Error::Transport(_))));
}

#[test]
fn detector_runs_over_the_wire() {
    let mut p = fixture(&["--mean-threshold", "0.5"]);
    let spec = FilterSpec::new(0.5).unwrap();
    // The same decision rule evaluated in-process must give the same verdict.
    let checker = Image::new(
        4,
        4,
        1,
        (0..16)
            .map(|i| if (i / 4 + i % 4) % 2 == 0 { 1.0 } else { 0.1 })
            .collect(),
    )
    .unwrap();
    let remote = detect(&checker, &mut p, spec).unwrap();
    let mut local =
        recess_core::predictor::FnPredictor(|img: &Image| Ok(usize::from(img.mean() > 0.5)));
    assert_eq!(remote, detect(&checker, &mut local, spec).unwrap());
    assert_eq!(detect(&flat(0.2), &mut p, spec).unwrap().original_label, 0);
}
