//! Reference implementations written straight from the defining formulas,
//! deliberately naive and independent of the crate's code paths.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recess_core::{Image, Shape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
    let shape = Shape::new(h, w, c).unwrap();
    Image::from_shape(
        shape,
        (0..shape.len()).map(|_| rng.random::<f64>()).collect(),
    )
    .unwrap()
}

fn norm(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Orthonormal 2-D DCT-II by the quadruple sum.
pub fn dct_oracle(f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, n) = (f.len(), f[0].len());
    let mut out = vec![vec![0.0; n]; m];
    for (u, row) in out.iter_mut().enumerate() {
        for (v, slot) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for (x, fr) in f.iter().enumerate() {
                for (y, &fxy) in fr.iter().enumerate() {
                    s += fxy
                        * (PI * (2 * x + 1) as f64 * u as f64 / (2 * m) as f64).cos()
                        * (PI * (2 * y + 1) as f64 * v as f64 / (2 * n) as f64).cos();
                }
            }
            *slot = norm(u, m) * norm(v, n) * s;
        }
    }
    out
}

/// Its inverse, also by the quadruple sum.
pub fn idct_oracle(c: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, n) = (c.len(), c[0].len());
    let mut out = vec![vec![0.0; n]; m];
    for (x, row) in out.iter_mut().enumerate() {
        for (y, slot) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for (u, cr) in c.iter().enumerate() {
                for (v, &cuv) in cr.iter().enumerate() {
                    s += norm(u, m)
                        * norm(v, n)
                        * cuv
                        * (PI * (2 * x + 1) as f64 * u as f64 / (2 * m) as f64).cos()
                        * (PI * (2 * y + 1) as f64 * v as f64 / (2 * n) as f64).cos();
                }
            }
            *slot = s;
        }
    }
    out
}

/// Channel `ch` of an interleaved image as rows.
pub fn plane(img: &Image, ch: usize) -> Vec<Vec<f64>> {
    (0..img.height())
        .map(|r| (0..img.width()).map(|c| img.get(r, c, ch)).collect())
        .collect()
}

/// Low-pass by the oracle transforms: keep `floor(αM) × floor(αN)` (at least 1), clip.
pub fn filter_oracle(img: &Image, alpha: f64) -> Vec<f64> {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let keep = |len: usize| ((alpha * len as f64 + 1e-9).floor() as usize).max(1);
    let (kr, kc) = (keep(h), keep(w));
    let planes: Vec<Vec<Vec<f64>>> = (0..ch)
        .map(|c| {
            let mut spec = dct_oracle(&plane(img, c));
            for (u, row) in spec.iter_mut().enumerate() {
                for (v, x) in row.iter_mut().enumerate() {
                    if u >= kr || v >= kc {
                        *x = 0.0;
                    }
                }
            }
            idct_oracle(&spec)
        })
        .collect();
    let mut out = Vec::with_capacity(h * w * ch);
    for r in 0..h {
        for c in 0..w {
            for p in &planes {
                out.push(p[r][c].clamp(0.0, 1.0));
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Dense → ReLU → dense by explicit loops over the model's weights.
pub fn forward_oracle(model: &recess_core::BuiltinModel, x: &[f64]) -> Vec<f64> {
    let (w1, b1, w2, b2) = (model.w1(), model.b1(), model.w2(), model.b2());
    let hidden: Vec<f64> = (0..w1.nrows())
        .map(|j| {
            let mut s = b1[j];
            for (i, xi) in x.iter().enumerate() {
                s += w1[[j, i]] * xi;
            }
            s.max(0.0)
        })
        .collect();
    (0..w2.nrows())
        .map(|k| {
            let mut s = b2[k];
            for (j, hj) in hidden.iter().enumerate() {
                s += w2[[k, j]] * hj;
            }
            s
        })
        .collect()
}

pub fn cross_entropy(z: &[f64], label: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - z[label]
}

/// `max(max_{i≠t} z_i − z_t, −k)`.
pub fn margin_loss(z: &[f64], target: usize, k: f64) -> f64 {
    let other = z
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    (other - z[target]).max(-k)
}

/// Central differences of `f` at `x` with step `h`.
pub fn finite_difference(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
