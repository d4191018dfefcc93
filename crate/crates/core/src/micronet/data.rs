//! Image datasets: IDX files and a synthetic blob generator.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AdasError, Result};
use crate::rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }
}

/// 8-bit images stored `(count, height, width, channels)` with one label each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    shape: ImageShape,
    images: Vec<u8>,
    labels: Vec<u8>,
    classes: usize,
}

impl Dataset {
    pub fn new(shape: ImageShape, images: Vec<u8>, labels: Vec<u8>, classes: usize) -> Result<Self> {
        if shape.pixels() == 0 {
            return Err(AdasError::Shape(format!("empty image shape {shape:?}")));
        }
        if images.len() != labels.len() * shape.pixels() {
            return Err(AdasError::Shape(format!(
                "{} labels need {} pixels, got {}",
                labels.len(),
                labels.len() * shape.pixels(),
                images.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(AdasError::Input(format!("label {bad} outside {classes} classes")));
        }
        Ok(Self { shape, images, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.shape.pixels();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Pixels scaled to `[0, 1]`.
    pub fn input(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| p as f64 / 255.0).collect()
    }

    pub fn with_labels(&self, labels: Vec<u8>, classes: usize) -> Result<Self> {
        Self::new(self.shape, self.images.clone(), labels, classes)
    }

    /// The first `n` examples.
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            shape: self.shape,
            images: self.images[..n * self.shape.pixels()].to_vec(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
        }
    }

    /// Writes the images and labels as IDX files (single channel only).
    pub fn write_idx(&self, images_path: &Path, labels_path: &Path) -> Result<()> {
        fs::write(images_path, self.idx_image_bytes()?)?;
        fs::write(labels_path, self.idx_label_bytes())?;
        Ok(())
    }

    pub fn idx_image_bytes(&self) -> Result<Vec<u8>> {
        if self.shape.channels != 1 {
            return Err(AdasError::Shape("IDX image files hold one channel".into()));
        }
        let mut out = Vec::with_capacity(16 + self.images.len());
        out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        for d in [self.len(), self.shape.height, self.shape.width] {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.images);
        Ok(out)
    }

    pub fn idx_label_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| AdasError::Format(format!("{what}: truncated header")))
}

fn parse_idx_images(bytes: &[u8]) -> Result<(usize, ImageShape, Vec<u8>)> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(AdasError::Format(format!(
            "images: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let height = be_u32(bytes, 8, "images")? as usize;
    let width = be_u32(bytes, 12, "images")? as usize;
    let shape = ImageShape { height, width, channels: 1 };
    let expected = count * shape.pixels();
    let body = &bytes[16..];
    if body.len() != expected {
        return Err(AdasError::Format(format!(
            "images: {count} x {height}x{width} needs {expected} bytes, found {}",
            body.len()
        )));
    }
    Ok((count, shape, body.to_vec()))
}

fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(AdasError::Format(format!(
            "labels: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(AdasError::Format(format!(
            "labels: header says {count}, found {}",
            body.len()
        )));
    }
    Ok(body.to_vec())
}

/// Parses an IDX image/label pair from memory. The class count is
/// `max(label) + 1`.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Dataset> {
    let (count, shape, images) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if labels.len() != count {
        return Err(AdasError::Format(format!(
            "{count} images but {} labels",
            labels.len()
        )));
    }
    let classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
    Dataset::new(shape, images, labels, classes)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = fs::read(images_path.as_ref())?;
    let labels = fs::read(labels_path.as_ref())?;
    parse_idx(&images, &labels)
}

/// Class-conditional Gaussian blobs rendered on a dark background.
///
/// Every class owns `blobs` bump centres; a sample draws its class, jitters
/// each centre by `jitter` pixels (std), scales brightness, and adds pixel
/// noise of std `noise` (in 0..255 units). A fraction `label_noise` of the
/// labels is then replaced with a uniformly drawn class.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub image_size: usize,
    pub classes: usize,
    pub blobs: usize,
    pub blob_width: f64,
    pub jitter: f64,
    pub noise: f64,
    pub label_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            samples: 1000,
            image_size: 12,
            classes: 10,
            blobs: 2,
            blob_width: 1.5,
            jitter: 1.0,
            noise: 70.0,
            label_noise: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(AdasError::config(key, msg));
        if self.samples == 0 {
            return bad("samples", "must be >= 1");
        }
        if self.image_size < 2 {
            return bad("image_size", "must be >= 2");
        }
        if !(1..=256).contains(&self.classes) {
            return bad("classes", "must lie in 1..=256");
        }
        if self.blobs == 0 {
            return bad("blobs", "must be >= 1");
        }
        if !(self.blob_width > 0.0) {
            return bad("blob_width", "must be positive");
        }
        if !(self.jitter >= 0.0 && self.noise >= 0.0) {
            return bad("noise", "jitter and noise must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad("label_noise", "must lie in [0, 1]");
        }
        Ok(())
    }

    /// Class prototypes depend only on `layout_seed`, so train and test
    /// splits drawn with different sample seeds share them.
    pub fn generate(&self, layout_seed: u64, sample_seed: u64) -> Result<Dataset> {
        self.validate()?;
        let size = self.image_size as f64;
        let mut layout = rng::seeded(layout_seed);
        let centres: Vec<Vec<(f64, f64)>> = (0..self.classes)
            .map(|_| {
                (0..self.blobs)
                    .map(|_| {
                        (
                            layout.random_range(1.0..size - 1.0),
                            layout.random_range(1.0..size - 1.0),
                        )
                    })
                    .collect()
            })
            .collect();

        let mut rng = rng::seeded(sample_seed);
        let pixels = self.image_size * self.image_size;
        let mut images = Vec::with_capacity(self.samples * pixels);
        let mut labels = Vec::with_capacity(self.samples);
        let inv_two_w2 = 1.0 / (2.0 * self.blob_width * self.blob_width);
        let mut canvas = vec![0.0f64; pixels];
        for _ in 0..self.samples {
            let class = rng.random_range(0..self.classes);
            canvas.iter_mut().for_each(|v| *v = 0.0);
            for &(cy, cx) in &centres[class] {
                let jy: f64 = StandardNormal.sample(&mut rng);
                let jx: f64 = StandardNormal.sample(&mut rng);
                let (cy, cx) = (cy + self.jitter * jy, cx + self.jitter * jx);
                let amp = 255.0 * rng.random_range(0.6..1.0);
                for y in 0..self.image_size {
                    for x in 0..self.image_size {
                        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                        canvas[y * self.image_size + x] += amp * (-d2 * inv_two_w2).exp();
                    }
                }
            }
            for v in &canvas {
                let n: f64 = StandardNormal.sample(&mut rng);
                images.push((v + self.noise * n).round().clamp(0.0, 255.0) as u8);
            }
            let label = if rng.random::<f64>() < self.label_noise {
                rng.random_range(0..self.classes)
            } else {
                class
            };
            labels.push(label as u8);
        }
        let shape = ImageShape { height: self.image_size, width: self.image_size, channels: 1 };
        Dataset::new(shape, images, labels, self.classes)
    }
}
