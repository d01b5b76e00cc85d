//! Stand-in external predictor for protocol tests. Reads request lines on
//! stdin and answers on stdout; misbehaviour can be injected per request index.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use clap::Parser;
use recess_core::predictor::{Request, Response};

#[derive(Debug, Parser)]
#[command(
    name = "recess-fixture",
    about = "Fixture predictor speaking the recess wire protocol"
)]
struct Args {
    /// Always answer this label (one-hot scores).
    #[arg(long, conflicts_with = "mean_threshold")]
    label: Option<usize>,
    /// Answer 1 when the mean pixel exceeds the threshold, else 0.
    #[arg(long)]
    mean_threshold: Option<f64>,
    /// Length of the score vector.
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Answer labels only.
    #[arg(long)]
    no_scores: bool,
    /// Reply with a line that is not JSON to this request index.
    #[arg(long)]
    malformed_at: Option<u64>,
    /// Reply with an error object to this request index.
    #[arg(long)]
    error_at: Option<u64>,
    /// Reply with the wrong id to this request index.
    #[arg(long)]
    wrong_id_at: Option<u64>,
    /// Exit without answering this request index.
    #[arg(long)]
    exit_at: Option<u64>,
    /// Write a diagnostic line to stderr for every request.
    #[arg(long)]
    chatty: bool,
}

fn answer(args: &Args, request: &Request) -> Response {
    let pixels = match request.decode_pixels() {
        Ok(p) => p,
        Err(e) => {
            return Response {
                id: request.id,
                label: None,
                scores: None,
                error: Some(e.to_string()),
            }
        }
    };
    let (label, scores) = match args.mean_threshold {
        Some(t) => {
            let mean =
                pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / pixels.len().max(1) as f64;
            let label = usize::from(mean > t);
            (label, vec![1.0 - mean, mean])
        }
        None => {
            let label = args.label.unwrap_or(0);
            let mut scores = vec![0.0; args.classes.max(label + 1)];
            scores[label] = 1.0;
            (label, scores)
        }
    };
    Response {
        id: request.id,
        label: Some(label as i64),
        scores: (!args.no_scores).then_some(scores),
        error: None,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdin = io::stdin().lock();
    let mut stdout = io::stdout().lock();
    for (index, line) in stdin.lines().enumerate() {
        let index = index as u64;
        let Ok(line) = line else {
            return ExitCode::FAILURE;
        };
        if args.chatty {
            eprintln!("fixture: request {index}");
        }
        if args.exit_at == Some(index) {
            return ExitCode::SUCCESS;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(request) => {
                let mut response = answer(&args, &request);
                if args.error_at == Some(index) {
                    response = Response {
                        id: request.id,
                        label: None,
                        scores: None,
                        error: Some("injected failure".into()),
                    };
                }
                if args.wrong_id_at == Some(index) {
                    response.id = request.id.wrapping_add(1000);
                }
                serde_json::to_string(&response).expect("response serializes")
            }
            Err(e) => {
                serde_json::json!({ "id": 0, "error": format!("bad request: {e}") }).to_string()
            }
        };
        let reply = if args.malformed_at == Some(index) {
            "{this is not json".to_owned()
        } else {
            reply
        };
        if writeln!(stdout, "{reply}")
            .and_then(|_| stdout.flush())
            .is_err()
        {
            return ExitCode::FAILURE;
        }
    }
    ExitCode::SUCCESS
}
