//! PPM (P6) image decoding, PGM (P5) export and the normalized image tensor.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An RGB image as row-major floats in `[0, 1]` (channels innermost).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl ImageTensor {
    pub fn zeros(height: usize, width: usize) -> Self {
        ImageTensor {
            height,
            width,
            channels: 3,
            data: vec![0.0; height * width * 3],
        }
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn mean(&self) -> f32 {
        let sum: f64 = self.data.iter().map(|&v| v as f64).sum();
        (sum / self.data.len() as f64) as f32
    }
}

/// Reads PPM header tokens, skipping whitespace and `#` comments.
fn read_header_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    // skip whitespace and comments
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        None
    } else {
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    }
}

fn parse_pnm(path: &Path, expected_magic: &str) -> Result<(usize, usize, Vec<u8>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let magic = read_header_token(&bytes, &mut pos).ok_or_else(|| err("missing magic".into()))?;
    if magic != expected_magic {
        return Err(err(format!(
            "unsupported format {magic:?}, expected {expected_magic}"
        )));
    }
    let width: usize = read_header_token(&bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err("invalid width".into()))?;
    let height: usize = read_header_token(&bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err("invalid height".into()))?;
    let maxval: usize = read_header_token(&bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err("invalid maxval".into()))?;
    if maxval != 255 {
        return Err(err(format!("unsupported maxval {maxval}, expected 255")));
    }
    // single whitespace byte separates header from raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(err("missing raster separator".into()));
    }
    pos += 1;
    let depth = if expected_magic == "P6" { 3 } else { 1 };
    let expected = width * height * depth;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(err(format!(
            "truncated raster: expected {expected} bytes, found {}",
            raster.len()
        )));
    }
    Ok((width, height, raster[..expected].to_vec()))
}

/// Loads a binary PPM (P6) image, scales pixel values by 1/255 and resizes
/// bilinearly to `target` (height, width) when the stored resolution differs.
pub fn load_image(path: &Path, target: (usize, usize)) -> Result<ImageTensor> {
    let (width, height, raster) = parse_pnm(path, "P6")?;
    let mut img = ImageTensor {
        height,
        width,
        channels: 3,
        data: raster.iter().map(|&b| b as f32 / 255.0).collect(),
    };
    if (height, width) != target {
        img = resize_bilinear(&img, target.0, target.1);
    }
    Ok(img)
}

/// Bilinear resize with half-pixel centers.
pub fn resize_bilinear(src: &ImageTensor, height: usize, width: usize) -> ImageTensor {
    let mut out = ImageTensor {
        height,
        width,
        channels: src.channels,
        data: vec![0.0; height * width * src.channels],
    };
    let sy = src.height as f32 / height as f32;
    let sx = src.width as f32 / width as f32;
    for y in 0..height {
        let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, src.height as f32 - 1.0);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src.height - 1);
        let wy = fy - y0 as f32;
        for x in 0..width {
            let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, src.width as f32 - 1.0);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src.width - 1);
            let wx = fx - x0 as f32;
            for c in 0..src.channels {
                let v00 = src.get(y0, x0, c);
                let v01 = src.get(y0, x1, c);
                let v10 = src.get(y1, x0, c);
                let v11 = src.get(y1, x1, c);
                let top = v00 + (v01 - v00) * wx;
                let bot = v10 + (v11 - v10) * wx;
                out.set(y, x, c, top + (bot - top) * wy);
            }
        }
    }
    out
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a binary PPM (P6) with maxval 255; values quantized by
/// `round(255 * v)`.
pub fn write_ppm(path: &Path, img: &ImageTensor) -> Result<()> {
    assert_eq!(img.channels, 3, "PPM output requires 3 channels");
    let mut buf = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    buf.extend(img.data.iter().map(|&v| quantize(v)));
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

/// Writes a binary PGM (P5) from a single-channel map in `[0, 1]`.
pub fn write_pgm(path: &Path, height: usize, width: usize, values: &[f32]) -> Result<()> {
    assert_eq!(values.len(), height * width);
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    buf.extend(values.iter().map(|&v| quantize(v)));
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

/// Reads a binary PGM (P5) back as floats in `[0, 1]`; used by round-trip
/// tests and the composite exporter.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let (width, height, raster) = parse_pnm(path, "P5")?;
    Ok((
        height,
        width,
        raster.iter().map(|&b| b as f32 / 255.0).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_and_white_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("black.ppm");
        let black = ImageTensor::zeros(64, 64);
        write_ppm(&p, &black).unwrap();
        let loaded = load_image(&p, (64, 64)).unwrap();
        assert!(loaded.data.iter().all(|&v| v == 0.0));

        let mut white = ImageTensor::zeros(64, 64);
        white.data.fill(1.0);
        write_ppm(&p, &white).unwrap();
        let loaded = load_image(&p, (64, 64)).unwrap();
        assert!(loaded.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn checkerboard_resize_preserves_mean() {
        // 128x128 one-pixel checkerboard has analytic mean 0.5.
        let mut img = ImageTensor::zeros(128, 128);
        for y in 0..128 {
            for x in 0..128 {
                let v = if (x + y) % 2 == 0 { 1.0 } else { 0.0 };
                for c in 0..3 {
                    img.set(y, x, c, v);
                }
            }
        }
        let small = resize_bilinear(&img, 64, 64);
        assert_eq!(small.height, 64);
        assert!((small.mean() - 0.5).abs() < 0.005, "mean {}", small.mean());
    }

    #[test]
    fn corrupt_file_is_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.ppm");
        std::fs::write(&p, b"P6\n4 4\n255\nshort").unwrap();
        assert!(load_image(&p, (4, 4)).is_err());

        std::fs::write(&p, b"P5\n1 1\n255\nx").unwrap();
        assert!(load_image(&p, (1, 1)).is_err());
    }

    #[test]
    fn ppm_comments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ppm");
        let mut bytes = b"P6\n# a comment\n1 1\n255\n".to_vec();
        bytes.extend([10u8, 20, 30]);
        std::fs::write(&p, &bytes).unwrap();
        let img = load_image(&p, (1, 1)).unwrap();
        assert!((img.get(0, 0, 0) - 10.0 / 255.0).abs() < 1e-6);
        assert!((img.get(0, 0, 2) - 30.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn pgm_roundtrip_equals_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let values = [0.0f32, 0.25, 0.5, 1.0];
        write_pgm(&p, 2, 2, &values).unwrap();
        let (h, w, back) = read_pgm(&p).unwrap();
        assert_eq!((h, w), (2, 2));
        for (orig, got) in values.iter().zip(&back) {
            let quantized = (orig * 255.0).round() / 255.0;
            assert!((got - quantized).abs() < 1e-6);
        }
    }
}
