//! Image data model, 8-bit conversion, and dataset ingestion (PNG, CIFAR-10 binary batches).
//!
//! Pixels are real values in `[0, 1]`, stored row-major with channels interleaved.
//! Conversion to and from bytes only happens at the I/O boundary.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Height, width and channel count of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        Ok(Shape {
            height,
            width,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

impl FromStr for Shape {
    type Err = Error;

    /// `HxWxC`, e.g. `32x32x3`.
    fn from_str(s: &str) -> Result<Self> {
        let dims: Vec<usize> = s
            .split('x')
            .map(|d| d.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parameter(format!("shape `{s}` is not of the form HxWxC")))?;
        match dims[..] {
            [h, w, c] => Shape::new(h, w, c).map_err(|e| Error::Parameter(e.to_string())),
            _ => Err(Error::Parameter(format!(
                "shape `{s}` is not of the form HxWxC"
            ))),
        }
    }
}

/// An H×W×C raster with every pixel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    shape: Shape,
    pixels: Vec<f64>,
}

impl Image {
    /// Validating constructor: shape, length and pixel range are all checked.
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(height, width, channels)?;
        Self::from_shape(shape, pixels)
    }

    pub fn from_shape(shape: Shape, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != shape.len() {
            return Err(Error::InvalidImage(format!(
                "{shape} image needs {} pixels, got {}",
                shape.len(),
                pixels.len()
            )));
        }
        if let Some((i, v)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidImage(format!(
                "pixel {i} = {v} lies outside [0, 1]"
            )));
        }
        Ok(Image { shape, pixels })
    }

    /// Builds an image from an unconstrained raster by clamping every value to `[0, 1]`.
    /// Non-finite values are rejected rather than clamped.
    pub fn clamped(shape: Shape, mut raster: Vec<f64>) -> Result<Self> {
        if let Some(i) = raster.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("raster value at {i}")));
        }
        for v in &mut raster {
            *v = v.clamp(0.0, 1.0);
        }
        Self::from_shape(shape, raster)
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self> {
        Self::from_shape(shape, vec![value; shape.len()])
    }

    pub fn from_bytes(shape: Shape, bytes: &[u8]) -> Result<Self> {
        Self::from_shape(shape, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.pixels[(row * self.shape.width + col) * self.shape.channels + channel]
    }

    /// Copies one channel out as a row-major H×W plane.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.pixels
            .iter()
            .skip(channel)
            .step_by(self.shape.channels)
            .copied()
            .collect()
    }

    /// Applies `f` to every channel plane independently and reassembles a raster
    /// (not range-checked; callers decide how to turn it back into an image).
    pub fn map_channels<F>(&self, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let channels = self.shape.channels;
        let mut out = vec![0.0; self.pixels.len()];
        for c in 0..channels {
            let plane = f(&self.channel(c))?;
            debug_assert_eq!(plane.len(), self.shape.plane_len());
            for (i, v) in plane.into_iter().enumerate() {
                out[i * channels + c] = v;
            }
        }
        Ok(out)
    }

    /// 8-bit encoding of every pixel.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&p| quantize_byte(p)).collect()
    }

    /// The image as it would be after a save/load cycle through 8-bit storage.
    pub fn quantized(&self) -> Image {
        Image {
            shape: self.shape,
            pixels: self
                .pixels
                .iter()
                .map(|&p| f64::from(quantize_byte(p)) / 255.0)
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Euclidean distance between the pixel vectors of two same-shaped images.
    pub fn l2_distance(&self, other: &Image) -> Result<f64> {
        ensure_same_shape(self.shape, other.shape)?;
        Ok(self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

pub(crate) fn ensure_same_shape(expected: Shape, actual: Shape) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        });
    }
    Ok(())
}

/// `clamp(round(pixel * 255), 0, 255)` with rounding half away from zero.
#[inline]
pub fn quantize_byte(pixel: f64) -> u8 {
    // f64::round rounds half away from zero; NaN saturates to 0 in the cast.
    (pixel * 255.0).round().clamp(0.0, 255.0) as u8
}

/// A set of same-shaped images with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Vec<Image>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(images: Vec<Image>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Parameter("num_classes must be positive".into()));
        }
        if images.len() != labels.len() {
            return Err(Error::Contract(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(first) = images.first() {
            for img in &images[1..] {
                ensure_same_shape(first.shape(), img.shape())?;
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Contract(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabeledDataset {
            images,
            labels,
            num_classes,
        })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Shape shared by all images, `None` when empty.
    pub fn shape(&self) -> Option<Shape> {
        self.images.first().map(Image::shape)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Image, usize)> {
        self.images.iter().zip(self.labels.iter().copied())
    }

    /// Keeps only records whose label is in `classes`, relabelling them to their
    /// position in `classes` (so `[3, 5]` maps 3 → 0 and 5 → 1).
    pub fn select_classes(
        &self,
        classes: &[usize],
        limit_per_class: Option<usize>,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Parameter("class list is empty".into()));
        }
        let mut taken = vec![0usize; classes.len()];
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (img, label) in self.iter() {
            let Some(pos) = classes.iter().position(|&c| c == label) else {
                continue;
            };
            if limit_per_class.is_some_and(|lim| taken[pos] >= lim) {
                continue;
            }
            taken[pos] += 1;
            images.push(img.clone());
            labels.push(pos);
        }
        LabeledDataset::new(images, labels, classes.len())
    }
}

/// Reads an 8-bit grayscale or RGB PNG.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Decode(format!(
            "{}: unsupported bit depth {:?} (only 8-bit is supported)",
            path.display(),
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        png::ColorType::Indexed => {
            return Err(Error::Decode(format!(
                "{}: unsupported palette (indexed) color",
                path.display()
            )))
        }
        other => {
            return Err(Error::Decode(format!(
                "{}: unsupported color type {other:?} (alpha channels are not supported)",
                path.display()
            )))
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf =
        vec![
            0u8;
            reader
                .output_buffer_size()
                .ok_or_else(|| Error::Decode(format!("{}: image too large", path.display())))?
        ];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    let row_bytes = width * channels;
    let mut bytes = Vec::with_capacity(height * row_bytes);
    for row in buf[..frame.buffer_size()]
        .chunks(frame.line_size)
        .take(height)
    {
        bytes.extend_from_slice(&row[..row_bytes]);
    }
    Image::from_bytes(Shape::new(height, width, channels)?, &bytes)
}

/// Writes an 8-bit grayscale or RGB PNG.
pub fn save_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        image.width() as u32,
        image.height() as u32,
    );
    encoder.set_color(if image.channels() == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer
        .write_image_data(&image.to_bytes())
        .map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_CLASSES: usize = 10;
const CIFAR_PLANE: usize = CIFAR_SIDE * CIFAR_SIDE;
pub const CIFAR_RECORD: usize = 1 + 3 * CIFAR_PLANE;

/// Reads CIFAR-10 binary batches (label byte + planar 32×32 RGB per record),
/// stopping after `limit` records when given.
pub fn load_cifar10<P: AsRef<Path>>(paths: &[P], limit: Option<usize>) -> Result<LabeledDataset> {
    let mut kept = 0;
    let (images, labels) = read_cifar_records(paths, |label| {
        if limit.is_some_and(|lim| kept >= lim) {
            return Keep::Stop;
        }
        kept += 1;
        Keep::As(label)
    })?;
    LabeledDataset::new(images, labels, CIFAR_CLASSES)
}

/// Reads only the records of `classes`, at most `per_class` of each, relabelled
/// to their position in `classes`. Equivalent to loading everything and calling
/// [`LabeledDataset::select_classes`], without holding the other classes in memory.
pub fn load_cifar10_classes<P: AsRef<Path>>(
    paths: &[P],
    classes: &[usize],
    per_class: Option<usize>,
) -> Result<LabeledDataset> {
    if classes.is_empty() {
        return Err(Error::Parameter("class list is empty".into()));
    }
    if let Some(&bad) = classes.iter().find(|&&c| c >= CIFAR_CLASSES) {
        return Err(Error::Parameter(format!(
            "class {bad} does not exist in CIFAR-10"
        )));
    }
    let mut taken = vec![0usize; classes.len()];
    let (images, labels) = read_cifar_records(paths, |label| {
        if per_class.is_some_and(|lim| taken.iter().all(|&t| t >= lim)) {
            return Keep::Stop;
        }
        match classes.iter().position(|&c| c == label) {
            Some(pos) if per_class.is_none_or(|lim| taken[pos] < lim) => {
                taken[pos] += 1;
                Keep::As(pos)
            }
            _ => Keep::Skip,
        }
    })?;
    LabeledDataset::new(images, labels, classes.len())
}

enum Keep {
    As(usize),
    Skip,
    Stop,
}

fn read_cifar_records<P, F>(paths: &[P], mut decide: F) -> Result<(Vec<Image>, Vec<usize>)>
where
    P: AsRef<Path>,
    F: FnMut(usize) -> Keep,
{
    let shape = Shape::new(CIFAR_SIDE, CIFAR_SIDE, 3)?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    'files: for path in paths {
        let path = path.as_ref();
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        if data.len() % CIFAR_RECORD != 0 {
            return Err(Error::Format(format!(
                "{}: size {} is not a multiple of the {CIFAR_RECORD}-byte record",
                path.display(),
                data.len()
            )));
        }
        for (i, record) in data.chunks_exact(CIFAR_RECORD).enumerate() {
            let label = record[0] as usize;
            if label >= CIFAR_CLASSES {
                return Err(Error::Format(format!(
                    "{}: record {i} has label byte {label} (must be < {CIFAR_CLASSES})",
                    path.display()
                )));
            }
            let stored = match decide(label) {
                Keep::As(l) => l,
                Keep::Skip => continue,
                Keep::Stop => break 'files,
            };
            let planes = &record[1..];
            let mut bytes = Vec::with_capacity(3 * CIFAR_PLANE);
            for p in 0..CIFAR_PLANE {
                bytes.extend_from_slice(&[
                    planes[p],
                    planes[CIFAR_PLANE + p],
                    planes[2 * CIFAR_PLANE + p],
                ]);
            }
            images.push(Image::from_bytes(shape, &bytes)?);
            labels.push(stored);
        }
    }
    Ok((images, labels))
}

/// Encodes images in the CIFAR-10 binary record layout. Every image must be
/// 32×32×3 and every label below 10.
pub fn write_cifar10(path: impl AsRef<Path>, dataset: &LabeledDataset) -> Result<()> {
    let path = path.as_ref();
    let shape = Shape::new(CIFAR_SIDE, CIFAR_SIDE, 3)?;
    let mut out = Vec::with_capacity(dataset.len() * CIFAR_RECORD);
    for (img, label) in dataset.iter() {
        ensure_same_shape(shape, img.shape())?;
        if label >= CIFAR_CLASSES {
            return Err(Error::Format(format!(
                "label {label} does not fit CIFAR-10"
            )));
        }
        out.push(label as u8);
        let bytes = img.to_bytes();
        for c in 0..3 {
            out.extend(bytes.iter().skip(c).step_by(3));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
