//! Grayscale images and PGM input/output.
//!
//! Intensities are stored as `f64` in [0, 1]; PGM files (maxval 255) are
//! scaled by 1/255 on read and by 255 on write.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel count {} != {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if pixels.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid("intensities must lie in [0, 1]"));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Constant-intensity image.
    pub fn constant(width: usize, height: usize, level: f64) -> Result<Self> {
        Self::new(width, height, vec![level; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Reads a PGM file, accepting both the binary (P5) and plain (P2)
    /// variants with maxval 255.
    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        parse_pgm(&bytes)
    }

    /// Writes the image as binary PGM (P5, maxval 255).
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.pixels
                .iter()
                .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8),
        );
        fs::write(path, out)?;
        Ok(())
    }
}

/// Pulls the next whitespace-separated token, skipping `#` comment lines.
/// Returns the token and the offset just past it.
fn next_token(bytes: &[u8], mut pos: usize) -> Result<(&[u8], usize)> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        break;
    }
    if pos >= bytes.len() {
        return Err(Error::format(pos as u64, "unexpected end of PGM header"));
    }
    let start = pos;
    while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    Ok((&bytes[start..pos], pos))
}

fn parse_usize(tok: &[u8], offset: usize, what: &str) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::format(offset as u64, format!("invalid {what} field")))
}

fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let (magic, mut pos) = next_token(bytes, 0)?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(Error::format(0, "not a PGM file (expected P5 or P2)")),
    };
    let (w_tok, p) = next_token(bytes, pos)?;
    let width = parse_usize(w_tok, pos, "width")?;
    pos = p;
    let (h_tok, p) = next_token(bytes, pos)?;
    let height = parse_usize(h_tok, pos, "height")?;
    pos = p;
    let (max_tok, p) = next_token(bytes, pos)?;
    let maxval = parse_usize(max_tok, pos, "maxval")?;
    pos = p;
    if maxval != 255 {
        return Err(Error::format(pos as u64, "only maxval 255 is supported"));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(pos as u64, "image dimensions overflow"))?;

    let mut pixels = Vec::with_capacity(n);
    if binary {
        // Single whitespace byte separates header from raster.
        pos += 1;
        if bytes.len() < pos + n {
            return Err(Error::format(
                bytes.len() as u64,
                format!("raster truncated: expected {n} bytes"),
            ));
        }
        pixels.extend(bytes[pos..pos + n].iter().map(|&b| b as f64 / 255.0));
    } else {
        for _ in 0..n {
            let (tok, p) = next_token(bytes, pos).map_err(|_| {
                Error::format(bytes.len() as u64, format!("raster truncated: expected {n} samples"))
            })?;
            let v = parse_usize(tok, pos, "sample")?;
            if v > 255 {
                return Err(Error::format(pos as u64, "sample exceeds maxval"));
            }
            pixels.push(v as f64 / 255.0);
            pos = p;
        }
    }
    GrayImage::new(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_round_trip() {
        let img = GrayImage::new(3, 2, vec![0.0, 51.0 / 255.0, 1.0, 0.5019607843137255, 0.2, 0.8])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        img.write_pgm(&path).unwrap();
        let back = GrayImage::read_pgm(&path).unwrap();
        assert_eq!(back.width(), 3);
        assert_eq!(back.height(), 2);
        // Values on the /255 grid survive exactly; others round.
        assert_eq!(back.get(0, 0), 0.0);
        assert_eq!(back.get(1, 0), 51.0 / 255.0);
        assert_eq!(back.get(2, 0), 1.0);
    }

    #[test]
    fn p2_parses_with_comments() {
        let text = b"P2\n# plain variant\n2 2\n255\n0 128\n# row two\n255 64\n";
        let img = parse_pgm(text).unwrap();
        assert_eq!(img.width(), 2);
        assert_eq!(img.get(1, 0), 128.0 / 255.0);
        assert_eq!(img.get(0, 1), 1.0);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let err = parse_pgm(b"P6\n1 1\n255\n\x00").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn truncated_raster_reports_offset() {
        let err = parse_pgm(b"P5\n4 4\n255\n\x01\x02").unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 13),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_intensity() {
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.5]).is_err());
    }
}
