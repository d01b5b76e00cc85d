//! Binary model format: magic `RFF1`, five little-endian u32 header fields
//! (height, width, channels, hidden, classes), then w1, b1, w2, b2 as
//! little-endian f64 in row-major order.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::BuiltinModel;
use crate::error::{Error, Result};
use crate::imaging::Shape;

pub const MODEL_MAGIC: &[u8; 4] = b"RFF1";
const HEADER_LEN: usize = 4 + 5 * 4;

impl BuiltinModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (h, c) = (self.hidden_size(), self.num_classes());
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (self.w1.len() + h + self.w2.len() + c));
        out.extend_from_slice(MODEL_MAGIC);
        for field in [
            self.shape.height,
            self.shape.width,
            self.shape.channels,
            h,
            c,
        ] {
            out.extend_from_slice(&(field as u32).to_le_bytes());
        }
        for tensor in [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ] {
            for v in tensor {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
            return Err(Error::Format(
                "bad magic: not an RFF1 model file (or unsupported version)".into(),
            ));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "truncated header: expected {HEADER_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let field = |i: usize| {
            let at = 4 + 4 * i;
            u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
        };
        let shape = Shape::new(field(0), field(1), field(2))
            .map_err(|e| Error::Format(format!("header: {e}")))?;
        let (hidden, classes) = (field(3), field(4));
        let d = shape.len();
        let counts = [hidden * d, hidden, classes * hidden, classes];
        let expected = HEADER_LEN + 8 * counts.iter().sum::<usize>();
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "model length mismatch: expected {expected} bytes, got {}",
                bytes.len()
            )));
        }
        let mut values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f64>>();
        let w1 = Array2::from_shape_vec((hidden, d), take(counts[0]))
            .map_err(|e| Error::Format(e.to_string()))?;
        let b1 = Array1::from(take(counts[1]));
        let w2 = Array2::from_shape_vec((classes, hidden), take(counts[2]))
            .map_err(|e| Error::Format(e.to_string()))?;
        let b2 = Array1::from(take(counts[3]));
        BuiltinModel::from_parts(shape, w1, b1, w2, b2).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn save_model(model: &BuiltinModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BuiltinModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    BuiltinModel::from_bytes(&bytes)
}
