//! The DCT feature filter and the baseline input transforms it is compared against.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::transform::{dct_image, idct_image, Spectrum};

/// Feature reservation ratio: the fraction of low-frequency rows and columns kept.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    alpha: f64,
}

impl FilterSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!(
                "feature reservation ratio must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(FilterSpec { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `max(1, floor(alpha * rows))`; the DC row is always kept.
    pub fn kept_rows(&self, rows: usize) -> usize {
        kept(self.alpha, rows)
    }

    pub fn kept_cols(&self, cols: usize) -> usize {
        kept(self.alpha, cols)
    }

    /// Whether coefficient `(u, v)` of an M×N spectrum survives the filter.
    pub fn keeps(&self, u: usize, v: usize, rows: usize, cols: usize) -> bool {
        u < self.kept_rows(rows) && v < self.kept_cols(cols)
    }

    /// Zeroes every coefficient outside the kept top-left block.
    /// Returns the number of coefficients zeroed.
    pub fn truncate(&self, spectrum: &mut Spectrum) -> usize {
        let shape = spectrum.shape();
        let (kr, kc) = (self.kept_rows(shape.height), self.kept_cols(shape.width));
        let mut zeroed = 0;
        for (i, coef) in spectrum.coefficients_mut().iter_mut().enumerate() {
            let pixel = i / shape.channels;
            let (u, v) = (pixel / shape.width, pixel % shape.width);
            if u >= kr || v >= kc {
                *coef = 0.0;
                zeroed += 1;
            }
        }
        zeroed
    }
}

fn kept(alpha: f64, len: usize) -> usize {
    // A tiny relative nudge keeps products like 0.7 * 10 = 6.999... on the intended side.
    ((alpha * len as f64 * (1.0 + 1e-12)).floor() as usize).clamp(1, len)
}

/// Low-pass raster before clipping: DCT, truncate, inverse DCT.
pub fn low_pass(image: &Image, spec: FilterSpec) -> Result<Vec<f64>> {
    let mut spectrum = dct_image(image)?;
    spec.truncate(&mut spectrum);
    idct_image(&spectrum)
}

/// The DCT-based filter: keeps the top-left `floor(αM) × floor(αN)` block of
/// coefficients per channel and clips the reconstruction to `[0, 1]`.
pub fn feature_filter(image: &Image, spec: FilterSpec) -> Result<Image> {
    feature_filter_counted(image, spec).map(|(img, _)| img)
}

/// [`feature_filter`] that also reports how many coefficients were zeroed.
pub fn feature_filter_counted(image: &Image, spec: FilterSpec) -> Result<(Image, usize)> {
    let mut spectrum = dct_image(image)?;
    let zeroed = spec.truncate(&mut spectrum);
    Ok((
        Image::clamped(image.shape(), idct_image(&spectrum)?)?,
        zeroed,
    ))
}

/// Quantizes each pixel to `2^bits` levels.
pub fn bit_depth_reduce(image: &Image, bits: u32) -> Result<Image> {
    if !(1..=7).contains(&bits) {
        return Err(Error::Parameter(format!(
            "bit depth must be in [1, 7], got {bits}"
        )));
    }
    let levels = f64::from((1u32 << bits) - 1);
    let px = image
        .pixels()
        .iter()
        .map(|&p| (p * levels).round() / levels)
        .collect();
    Image::from_shape(image.shape(), px)
}

/// Window offsets along one axis: centered for odd sizes, `[0, k)` for even sizes.
fn window_offsets(k: usize) -> std::ops::Range<isize> {
    if k % 2 == 1 {
        let r = (k / 2) as isize;
        -r..r + 1
    } else {
        0..k as isize
    }
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Median over a k×k window with edge replication. Even-sized windows average
/// the two middle order statistics.
pub fn median_smooth(image: &Image, k: usize) -> Result<Image> {
    let (h, w) = (image.height(), image.width());
    if k < 2 || k > h.min(w) {
        return Err(Error::Parameter(format!(
            "median window {k} must be in [2, {}]",
            h.min(w)
        )));
    }
    let offsets = window_offsets(k);
    let raster = image.map_channels(|plane| {
        let mut window = Vec::with_capacity(k * k);
        let mut out = Vec::with_capacity(plane.len());
        for r in 0..h {
            for c in 0..w {
                window.clear();
                for dr in offsets.clone() {
                    let rr = clamp_index(r as isize + dr, h);
                    for dc in offsets.clone() {
                        window.push(plane[rr * w + clamp_index(c as isize + dc, w)]);
                    }
                }
                window.sort_unstable_by(f64::total_cmp);
                let mid = window.len() / 2;
                out.push(if window.len() % 2 == 1 {
                    window[mid]
                } else {
                    0.5 * (window[mid - 1] + window[mid])
                });
            }
        }
        Ok(out)
    })?;
    Image::from_shape(image.shape(), raster)
}

/// Non-local means denoising. Weights are
/// `exp(-‖patch_i - patch_j‖² / (strength² · patch_area))` over a centered search
/// window; both search window and patches replicate edges.
pub fn non_local_mean(image: &Image, search: usize, patch: usize, strength: f64) -> Result<Image> {
    let (h, w) = (image.height(), image.width());
    if search.is_multiple_of(2) || patch.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "search ({search}) and patch ({patch}) windows must be odd"
        )));
    }
    if search <= patch {
        return Err(Error::Parameter(format!(
            "search window ({search}) must exceed patch ({patch})"
        )));
    }
    if search > h.min(w) {
        return Err(Error::Parameter(format!(
            "search window {search} does not fit a {h}x{w} image"
        )));
    }
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(Error::Parameter(format!(
            "strength must be positive, got {strength}"
        )));
    }
    let (sr, pr) = ((search / 2) as isize, (patch / 2) as isize);
    let denom = strength * strength * (patch * patch) as f64;

    let raster = image.map_channels(|plane| {
        // Pad once so patch and search lookups are plain index arithmetic.
        let pad = (sr + pr) as usize;
        let (ph, pw) = (h + 2 * pad, w + 2 * pad);
        let mut padded = vec![0.0; ph * pw];
        for r in 0..ph {
            let sr_ = clamp_index(r as isize - pad as isize, h);
            for c in 0..pw {
                padded[r * pw + c] = plane[sr_ * w + clamp_index(c as isize - pad as isize, w)];
            }
        }
        let at = |r: isize, c: isize| {
            padded[(r + pad as isize) as usize * pw + (c + pad as isize) as usize]
        };

        let mut out = Vec::with_capacity(h * w);
        for r in 0..h as isize {
            for c in 0..w as isize {
                let mut num = 0.0;
                let mut wsum = 0.0;
                for dr in -sr..=sr {
                    for dc in -sr..=sr {
                        let (qr, qc) = (r + dr, c + dc);
                        let mut dist = 0.0;
                        for pr_ in -pr..=pr {
                            for pc in -pr..=pr {
                                let d = at(r + pr_, c + pc) - at(qr + pr_, qc + pc);
                                dist += d * d;
                            }
                        }
                        let weight = (-dist / denom).exp();
                        num += weight * at(qr, qc);
                        wsum += weight;
                    }
                }
                out.push(num / wsum);
            }
        }
        Ok(out)
    })?;
    Image::clamped(image.shape(), raster)
}

/// Counterclockwise rotation about the image center with bilinear sampling;
/// samples falling outside the image replicate the nearest edge.
pub fn rotate(image: &Image, degrees: f64) -> Result<Image> {
    if !degrees.is_finite() {
        return Err(Error::Parameter(format!(
            "rotation angle {degrees} is not finite"
        )));
    }
    let (h, w) = (image.height(), image.width());
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    // Snap tiny residuals (e.g. sin(2π)) so grid points map exactly onto grid points.
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < 1e-9 {
            r
        } else {
            v
        }
    };
    let raster = image.map_channels(|plane| {
        let sample = |r: isize, c: isize| plane[clamp_index(r, h) * w + clamp_index(c, w)];
        let mut out = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let sx = snap(cx + cos * dx - sin * dy);
                let sy = snap(cy + sin * dx + cos * dy);
                let (x0, y0) = (sx.floor(), sy.floor());
                let (fx, fy) = (sx - x0, sy - y0);
                let (x0, y0) = (x0 as isize, y0 as isize);
                let top = sample(y0, x0) * (1.0 - fx) + sample(y0, x0 + 1) * fx;
                let bottom = sample(y0 + 1, x0) * (1.0 - fx) + sample(y0 + 1, x0 + 1) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
        Ok(out)
    })?;
    Image::clamped(image.shape(), raster)
}

/// One of the single-transformation squeezers a detector can be built on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    FeatureFilter(FilterSpec),
    BitDepth(u32),
    Median(usize),
    NonLocalMean {
        search: usize,
        patch: usize,
        /// Strength on the 0–255 pixel scale, as the parameters are usually quoted.
        strength_255: f64,
    },
    Rotate(f64),
}

impl Transform {
    pub fn apply(&self, image: &Image) -> Result<Image> {
        match *self {
            Transform::FeatureFilter(spec) => feature_filter(image, spec),
            Transform::BitDepth(bits) => bit_depth_reduce(image, bits),
            Transform::Median(k) => median_smooth(image, k),
            Transform::NonLocalMean {
                search,
                patch,
                strength_255,
            } => non_local_mean(image, search, patch, strength_255 / 255.0),
            Transform::Rotate(deg) => rotate(image, deg),
        }
    }

    /// Family name used in report rows.
    pub fn family(&self) -> &'static str {
        match self {
            Transform::FeatureFilter(_) => "feature-filter",
            Transform::BitDepth(_) => "bit-depth",
            Transform::Median(_) => "median",
            Transform::NonLocalMean { .. } => "non-local-mean",
            Transform::Rotate(_) => "rotation",
        }
    }

    /// Parameter label in the style of the comparison tables (`0.80`, `3-bit`, `2x2`, `11-3-2`, `-10`).
    pub fn parameter_label(&self) -> String {
        match *self {
            Transform::FeatureFilter(spec) => format!("{:.2}", spec.alpha()),
            Transform::BitDepth(bits) => format!("{bits}-bit"),
            Transform::Median(k) => format!("{k}x{k}"),
            Transform::NonLocalMean {
                search,
                patch,
                strength_255,
            } => format!("{search}-{patch}-{strength_255}"),
            Transform::Rotate(deg) => format!("{deg}"),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Transform::FeatureFilter(spec) => write!(f, "dct:{}", spec.alpha()),
            Transform::BitDepth(bits) => write!(f, "bits:{bits}"),
            Transform::Median(k) => write!(f, "median:{k}"),
            Transform::NonLocalMean {
                search,
                patch,
                strength_255,
            } => write!(f, "nlm:{search}-{patch}-{strength_255}"),
            Transform::Rotate(deg) => write!(f, "rotate:{deg}"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    /// Parses `dct:<alpha>`, `bits:<n>`, `median:<k>`, `nlm:<search>-<patch>-<h>` or `rotate:<deg>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parameter(format!("bad transform `{s}`: {what}"));
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| bad("expected <kind>:<param>"))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let int = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("not an integer"));
        let t = match kind.trim() {
            "dct" => Transform::FeatureFilter(FilterSpec::new(num(arg)?)?),
            "bits" => Transform::BitDepth(int(arg)? as u32),
            "median" => Transform::Median(int(arg)?),
            "nlm" => {
                let parts: Vec<&str> = arg.split('-').collect();
                let [search, patch, strength] = parts[..] else {
                    return Err(bad("expected search-patch-strength"));
                };
                Transform::NonLocalMean {
                    search: int(search)?,
                    patch: int(patch)?,
                    strength_255: num(strength)?,
                }
            }
            "rotate" => Transform::Rotate(num(arg)?),
            other => return Err(bad(&format!("unknown kind `{other}`"))),
        };
        Ok(t)
    }
}
