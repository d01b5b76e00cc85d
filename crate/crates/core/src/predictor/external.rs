//! Client for predictors running in a child process.
//!
//! Line-delimited JSON over the child's stdin/stdout. A request carries the
//! raw pixels as base64 of little-endian f32 values; the child answers each
//! request, in order, with the same id. Anything on the child's stderr is
//! forwarded to the log and never parsed.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::thread;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use super::{argmax, Prediction, Predictor};
use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Request {
    pub id: u64,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// base64 of H·W·C little-endian f32 values, row-major, channels interleaved.
    pub pixels: String,
}

impl Request {
    pub fn encode(id: u64, image: &Image) -> Self {
        let mut raw = Vec::with_capacity(image.pixels().len() * 4);
        for &p in image.pixels() {
            raw.extend_from_slice(&(p as f32).to_le_bytes());
        }
        Request {
            id,
            height: image.height(),
            width: image.width(),
            channels: image.channels(),
            pixels: STANDARD.encode(raw),
        }
    }

    /// Decodes the pixel payload, checking its length against the declared shape.
    pub fn decode_pixels(&self) -> Result<Vec<f32>> {
        let raw = STANDARD
            .decode(&self.pixels)
            .map_err(|e| Error::Decode(format!("pixels are not valid base64: {e}")))?;
        let expected = self.height * self.width * self.channels * 4;
        if raw.len() != expected {
            return Err(Error::Decode(format!(
                "pixel payload has {} bytes, expected {expected}",
                raw.len()
            )));
        }
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A child process serving predictions. One request is in flight at a time.
pub struct ExternalPredictor {
    argv: Vec<String>,
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
    broken: Option<String>,
}

impl ExternalPredictor {
    pub fn spawn<S: AsRef<str>>(argv: &[S]) -> Result<Self> {
        let argv: Vec<String> = argv.iter().map(|s| s.as_ref().to_owned()).collect();
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::Parameter("empty predictor command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Transport(format!("failed to spawn `{program}`: {e}")))?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        if let Some(stderr) = child.stderr.take() {
            let name = program.clone();
            thread::spawn(move || {
                for line in BufReader::new(stderr).lines().map_while(|l| l.ok()) {
                    log::warn!("[{name}] {line}");
                }
            });
        }
        Ok(ExternalPredictor {
            argv,
            child,
            stdin,
            stdout,
            next_id: 0,
            broken: None,
        })
    }

    pub fn command(&self) -> &[String] {
        &self.argv
    }

    /// Kills the child and marks the handle unusable.
    fn fail(&mut self, message: String) -> Error {
        let _ = self.child.kill();
        let _ = self.child.wait();
        self.broken = Some(message.clone());
        Error::Transport(message)
    }

    fn round_trip(&mut self, image: &Image) -> Result<Prediction> {
        if let Some(reason) = &self.broken {
            return Err(Error::Transport(format!(
                "predictor is no longer usable: {reason}"
            )));
        }
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&Request::encode(id, image))
            .map_err(|e| Error::Transport(format!("encoding request: {e}")))?;
        line.push('\n');
        if let Err(e) = self
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
        {
            return Err(self.fail(format!("writing request {id}: {e}")));
        }

        let mut reply = String::new();
        match self.stdout.read_line(&mut reply) {
            Ok(0) => {
                let status = self
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "closed stdout".into());
                return Err(self.fail(format!(
                    "predictor exited before answering request {id} ({status})"
                )));
            }
            Ok(_) => {}
            Err(e) => return Err(self.fail(format!("reading response {id}: {e}"))),
        }

        let response: Response = match serde_json::from_str(reply.trim_end()) {
            Ok(r) => r,
            Err(e) => {
                return Err(self.fail(format!(
                    "malformed response to request {id}: {e}: {:?}",
                    truncate(&reply, 120)
                )))
            }
        };
        if response.id != id {
            return Err(self.fail(format!(
                "response id {} does not match request id {id}",
                response.id
            )));
        }
        if let Some(msg) = response.error {
            // The child reported a per-request failure and stays in sync.
            return Err(Error::Transport(format!(
                "predictor rejected request {id}: {msg}"
            )));
        }
        let label = match response.label {
            Some(l) if l >= 0 => l as usize,
            Some(l) => return Err(self.fail(format!("negative label {l} in response {id}"))),
            None => return Err(self.fail(format!("response {id} carries no label"))),
        };
        if let Some(scores) = &response.scores {
            if argmax(scores) != Some(label) {
                return Err(self.fail(format!(
                    "response {id}: label {label} is not the argmax of its scores"
                )));
            }
        }
        Ok(Prediction {
            label,
            scores: response.scores,
        })
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl Predictor for ExternalPredictor {
    fn predict(&mut self, image: &Image) -> Result<Prediction> {
        self.round_trip(image)
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
