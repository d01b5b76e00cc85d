//! Orthonormal two-dimensional DCT-II and its inverse.
//!
//! `S(u,v) = a_u a_v Σ_x Σ_y s(x,y) cos(πu(2x+1)/2M) cos(πv(2y+1)/2N)` with
//! `a_0 = 1/√M` and `a_k = √(2/M)` otherwise (likewise for the column axis).
//! The transform is evaluated separably as `B_M · X · B_Nᵀ`, where `B_L` is the
//! L×L orthonormal basis matrix. Basis matrices are built once per length and cached.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::imaging::{Image, Shape};

/// Normalization factor `a_k` for a transform of length `len`.
#[inline]
pub fn alpha(k: usize, len: usize) -> f64 {
    if k == 0 {
        (1.0 / len as f64).sqrt()
    } else {
        (2.0 / len as f64).sqrt()
    }
}

fn build_basis(len: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, len), |(k, n)| {
        alpha(k, len) * (PI * k as f64 * (2 * n + 1) as f64 / (2 * len) as f64).cos()
    })
}

/// Row `k`, column `n` holds `a_k cos(πk(2n+1)/2L)`. Shared across threads.
pub fn basis(len: usize) -> Arc<Array2<f64>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<Array2<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(b) = cache.read().unwrap_or_else(|e| e.into_inner()).get(&len) {
        return Arc::clone(b);
    }
    let mut guard = cache.write().unwrap_or_else(|e| e.into_inner());
    Arc::clone(
        guard
            .entry(len)
            .or_insert_with(|| Arc::new(build_basis(len))),
    )
}

fn check_matrix(m: &ArrayView2<'_, f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::Parameter(format!(
            "DCT input must be non-empty, got {rows}x{cols}"
        )));
    }
    if let Some(((r, c), v)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(format!("DCT input at ({r}, {c}) is {v}")));
    }
    Ok(())
}

/// Forward 2D DCT of an M×N matrix.
pub fn dct2(channel: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_matrix(&channel)?;
    let (m, n) = channel.dim();
    let (bm, bn) = (basis(m), basis(n));
    Ok(bm.dot(&channel).dot(&bn.t()))
}

/// Inverse 2D DCT of an M×N coefficient matrix.
pub fn idct2(spectrum: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_matrix(&spectrum)?;
    let (m, n) = spectrum.dim();
    let (bm, bn) = (basis(m), basis(n));
    Ok(bm.t().dot(&spectrum).dot(&*bn))
}

/// Per-channel DCT coefficients of an image, stored like the image itself
/// (row-major, channels interleaved).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    shape: Shape,
    coefficients: Vec<f64>,
}

impl Spectrum {
    pub fn new(shape: Shape, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coefficients", shape.len()),
                actual: format!("{}", coefficients.len()),
            });
        }
        Ok(Spectrum {
            shape,
            coefficients,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, channel: usize) -> f64 {
        self.coefficients[(u * self.shape.width + v) * self.shape.channels + channel]
    }

    /// Sum of squared coefficients of one channel.
    pub fn channel_energy(&self, channel: usize) -> f64 {
        self.coefficients
            .iter()
            .skip(channel)
            .step_by(self.shape.channels)
            .map(|c| c * c)
            .sum()
    }
}

fn map_planes<F>(shape: Shape, data: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(ArrayView2<'_, f64>) -> Result<Array2<f64>>,
{
    let Shape {
        height,
        width,
        channels,
    } = shape;
    let mut out = vec![0.0; data.len()];
    for c in 0..channels {
        let plane: Array2<f64> = Array2::from_shape_fn((height, width), |(r, col)| {
            data[(r * width + col) * channels + c]
        });
        let result = f(plane.view())?;
        for ((r, col), v) in result.indexed_iter() {
            out[(r * width + col) * channels + c] = *v;
        }
    }
    Ok(out)
}

/// Channel-wise forward DCT.
pub fn dct_image(image: &Image) -> Result<Spectrum> {
    let coefficients = map_planes(image.shape(), image.pixels(), dct2)?;
    Spectrum::new(image.shape(), coefficients)
}

/// Channel-wise inverse DCT. The raster is returned unclipped and may leave `[0, 1]`.
pub fn idct_image(spectrum: &Spectrum) -> Result<Vec<f64>> {
    map_planes(spectrum.shape(), spectrum.coefficients(), idct2)
}
