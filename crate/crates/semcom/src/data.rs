//! Dataset ingestion and synthetic data generation.
//!
//! Covers the IDX binary format used by the standard MNIST distribution,
//! paired Gaussian sampling for the linear-encoder experiments, and
//! piecewise-constant test images for the topology experiments.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ib::GaussianJointModel;
use crate::topo::image::GrayImage;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Flattened labeled image set: `n` rows of `rows * cols` intensities in
/// [0, 1] plus one digit label per row.
#[derive(Debug, Clone)]
pub struct LabeledImageSet {
    pub images: Array2<f32>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

impl LabeledImageSet {
    pub fn new(images: Array2<f32>, labels: Vec<u8>, rows: usize, cols: usize) -> Result<Self> {
        if images.nrows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} images but {} labels",
                images.nrows(),
                labels.len()
            )));
        }
        if images.ncols() != rows * cols {
            return Err(Error::invalid("image width != rows * cols"));
        }
        if images.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid("intensities must lie in [0, 1]"));
        }
        Ok(LabeledImageSet {
            images,
            labels,
            rows,
            cols,
        })
    }

    /// Loads the image/label IDX pair.
    pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Self> {
        let (images, rows, cols) = load_idx_images(images_path)?;
        let labels = load_idx_labels(labels_path)?;
        Self::new(images, labels, rows, cols)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` items (or all, when fewer).
    pub fn head(&self, n: usize) -> LabeledImageSet {
        let n = n.min(self.len());
        LabeledImageSet {
            images: self.images.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    if bytes.len() < offset + 4 {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated file while reading {what}"),
        ));
    }
    Ok(BigEndian::read_u32(&bytes[offset..offset + 4]))
}

/// Parses an IDX image file (magic 0x00000803): returns the `n x (rows*cols)`
/// array scaled to [0, 1] plus the image dimensions.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<(Array2<f32>, usize, usize)> {
    let bytes = fs::read(path)?;
    let magic = read_u32(&bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(
            0,
            format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = read_u32(&bytes, 4, "image count")? as usize;
    let rows = read_u32(&bytes, 8, "row count")? as usize;
    let cols = read_u32(&bytes, 12, "column count")? as usize;
    let expected = 16 + n * rows * cols;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("payload is {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let data: Vec<f32> = bytes[16..].iter().map(|&b| b as f32 / 255.0).collect();
    let images = Array2::from_shape_vec((n, rows * cols), data)
        .map_err(|e| Error::invalid(format!("shape error: {e}")))?;
    Ok((images, rows, cols))
}

/// Parses an IDX label file (magic 0x00000801) into digit labels.
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    let magic = read_u32(&bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(
            0,
            format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let n = read_u32(&bytes, 4, "label count")? as usize;
    if bytes.len() != 8 + n {
        return Err(Error::format(
            bytes.len() as u64,
            format!("payload is {} bytes, header implies {}", bytes.len(), 8 + n),
        ));
    }
    for (i, &b) in bytes[8..].iter().enumerate() {
        if b > 9 {
            return Err(Error::format(
                (8 + i) as u64,
                format!("label {b} outside 0..=9"),
            ));
        }
    }
    Ok(bytes[8..].to_vec())
}

/// Writes raw pixels as an IDX image file (inverse of [`load_idx_images`]).
pub fn write_idx_images(
    path: impl AsRef<Path>,
    n: usize,
    rows: usize,
    cols: usize,
    pixels: &[u8],
) -> Result<()> {
    if pixels.len() != n * rows * cols {
        return Err(Error::invalid("pixel buffer does not match dimensions"));
    }
    let mut f = fs::File::create(path)?;
    let mut header = [0u8; 16];
    BigEndian::write_u32(&mut header[0..4], IDX_IMAGES_MAGIC);
    BigEndian::write_u32(&mut header[4..8], n as u32);
    BigEndian::write_u32(&mut header[8..12], rows as u32);
    BigEndian::write_u32(&mut header[12..16], cols as u32);
    f.write_all(&header)?;
    f.write_all(pixels)?;
    Ok(())
}

/// Writes labels as an IDX label file (inverse of [`load_idx_labels`]).
pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    let mut header = [0u8; 8];
    BigEndian::write_u32(&mut header[0..4], IDX_LABELS_MAGIC);
    BigEndian::write_u32(&mut header[4..8], labels.len() as u32);
    f.write_all(&header)?;
    f.write_all(labels)?;
    Ok(())
}

/// Draws `n` paired samples of `(X, Y)` from the joint Gaussian model via a
/// symmetric square root of the joint covariance. Rows are samples.
pub fn synth_gaussian(
    model: &GaussianJointModel,
    n: usize,
    seed: u64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nx = model.n();
    let ny = model.m();
    let dim = nx + ny;
    let mut joint = DMatrix::<f64>::zeros(dim, dim);
    joint.view_mut((0, 0), (nx, nx)).copy_from(model.sigma_x());
    joint.view_mut((0, nx), (nx, ny)).copy_from(model.sigma_xy());
    joint
        .view_mut((nx, 0), (ny, nx))
        .copy_from(&model.sigma_xy().transpose());
    joint.view_mut((nx, nx), (ny, ny)).copy_from(model.sigma_y());

    // PSD square root; eigenvalues clamped at zero against roundoff.
    let eig = joint.symmetric_eigen();
    let mut root = eig.eigenvectors.clone();
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        for r in 0..dim {
            root[(r, c)] *= s;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = DMatrix::<f64>::zeros(n, nx);
    let mut ys = DMatrix::<f64>::zeros(n, ny);
    let mut z = nalgebra::DVector::<f64>::zeros(dim);
    for row in 0..n {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let s = &root * &z;
        for c in 0..nx {
            xs[(row, c)] = s[c];
        }
        for c in 0..ny {
            ys[(row, c)] = s[nx + c];
        }
    }
    (xs, ys)
}

/// Polygonal region of a synthetic piecewise-constant image. Vertices are in
/// unit-square coordinates; later regions paint over earlier ones.
#[derive(Debug, Clone)]
pub struct PiecewiseRegion {
    pub polygon: Vec<(f64, f64)>,
    pub level: f64,
}

/// Renders a piecewise-constant image: each pixel takes the level of the
/// last region containing its center, or `base_level` when none does.
/// The `seed` parameter is accepted for interface uniformity with the other
/// generators; rendering is deterministic.
pub fn synth_piecewise_image(
    regions: &[PiecewiseRegion],
    size: usize,
    base_level: f64,
    _seed: u64,
) -> Result<GrayImage> {
    let mut pixels = vec![base_level; size * size];
    for y in 0..size {
        for x in 0..size {
            let cx = (x as f64 + 0.5) / size as f64;
            let cy = (y as f64 + 0.5) / size as f64;
            for region in regions.iter().rev() {
                if point_in_polygon(cx, cy, &region.polygon) {
                    pixels[y * size + x] = region.level;
                    break;
                }
            }
        }
    }
    GrayImage::new(size, size, pixels)
}

/// Even-odd ray casting; boundary handling is consistent for a fixed input.
fn point_in_polygon(px: f64, py: f64, polygon: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    for i in 0..n {
        let (x1, y1) = polygon[i];
        let (x2, y2) = polygon[(i + 1) % n];
        if (y1 > py) != (y2 > py) {
            let x_cross = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
            if px < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// The bundled synthetic: a piecewise-constant image with six axis-aligned
/// polygonal regions at well-separated levels, used by the topology demo and
/// acceptance checks.
pub fn six_region_image(size: usize) -> GrayImage {
    let regions = vec![
        PiecewiseRegion {
            // Bottom-right square.
            polygon: vec![(0.55, 0.55), (1.01, 0.55), (1.01, 1.01), (0.55, 1.01)],
            level: 0.9,
        },
        PiecewiseRegion {
            // Top band.
            polygon: vec![(-0.01, -0.01), (1.01, -0.01), (1.01, 0.18), (-0.01, 0.18)],
            level: 0.27,
        },
        PiecewiseRegion {
            // Left column below the band.
            polygon: vec![(-0.01, 0.18), (0.22, 0.18), (0.22, 1.01), (-0.01, 1.01)],
            level: 0.45,
        },
        PiecewiseRegion {
            // Center diamond.
            polygon: vec![(0.48, 0.25), (0.68, 0.42), (0.48, 0.59), (0.28, 0.42)],
            level: 0.63,
        },
        PiecewiseRegion {
            // Bottom-left notch.
            polygon: vec![(0.25, 0.75), (0.5, 0.75), (0.5, 1.01), (0.25, 1.01)],
            level: 0.08,
        },
    ];
    synth_piecewise_image(&regions, size, 1.0, 0).expect("levels are in range")
}
