//! Single-channel luminance rasters, PGM I/O and box resampling.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::RenderError;

/// Row-major luminance in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    /// Values are clamped into `[0, 1]`.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, RenderError> {
        if pixels.len() != width * height {
            return Err(RenderError::PixelCount {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if pixels.iter().any(|v| v.is_nan()) {
            return Err(RenderError::NanPixel);
        }
        Ok(GrayImage {
            width,
            height,
            pixels: pixels.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// Rounds every value to the nearest of 256 levels, as an 8-bit PGM stores it.
    pub fn quantized(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.to_u8().into_iter().map(|b| b as f64 / 255.0).collect(),
        }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    /// Copies `src` with its top-left corner at `(x0, y0)`; parts falling
    /// outside are cut off.
    pub fn blit(&mut self, src: &GrayImage, x0: usize, y0: usize) {
        for y in 0..src.height.min(self.height.saturating_sub(y0)) {
            for x in 0..src.width.min(self.width.saturating_sub(x0)) {
                self.pixels[(y0 + y) * self.width + x0 + x] = src.get(x, y);
            }
        }
    }

    /// Binary (P5) PGM with maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_u8());
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), RenderError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }

    pub fn read_pgm(path: &Path) -> Result<GrayImage, RenderError> {
        parse_pgm(&fs::read(path)?)
    }
}

/// Reads binary (P5) or ASCII (P2) PGM with maxval up to 65535.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, RenderError> {
    let bad = |m: &str| RenderError::Pgm(m.to_string());
    let mut pos = 0;
    let mut token = || -> Result<String, RenderError> {
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
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(RenderError::Pgm("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |t: String| t.parse::<usize>().map_err(|_| bad("invalid header number"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval out of range"));
    }
    let n = width * height;
    let scale = maxval as f64;
    let pixels: Vec<f64> = match magic.as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            let data = &bytes[pos + 1..];
            if maxval < 256 {
                if data.len() < n {
                    return Err(bad("truncated raster"));
                }
                data[..n].iter().map(|&b| b as f64 / scale).collect()
            } else {
                if data.len() < 2 * n {
                    return Err(bad("truncated raster"));
                }
                data[..2 * n]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
                    .collect()
            }
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[pos..]);
            let vals: Vec<f64> = text
                .split_ascii_whitespace()
                .take(n)
                .map(|t| t.parse::<f64>().map(|v| v / scale))
                .collect::<Result<_, _>>()
                .map_err(|_| bad("invalid ASCII raster"))?;
            if vals.len() < n {
                return Err(bad("truncated raster"));
            }
            vals
        }
        _ => return Err(bad("not a PGM (expected P2 or P5)")),
    };
    GrayImage::from_pixels(width, height, pixels)
}

/// Area-averaging (box filter) resample to `width × height`.
pub fn resize_box(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    if (width, height) == img.dimensions() {
        return img.clone();
    }
    let cols = box_weights(img.width, width);
    let rows = box_weights(img.height, height);
    let mut tmp = vec![0.0; width * img.height];
    for y in 0..img.height {
        for (x, taps) in cols.iter().enumerate() {
            tmp[y * width + x] = taps.iter().map(|&(j, w)| w * img.get(j, y)).sum();
        }
    }
    let mut out = vec![0.0; width * height];
    for (y, taps) in rows.iter().enumerate() {
        for x in 0..width {
            out[y * width + x] = taps.iter().map(|&(j, w)| w * tmp[j * width + x]).sum();
        }
    }
    GrayImage::from_pixels(width, height, out).expect("weights are a partition of unity")
}

/// For every output index, the source indices it covers and their
/// normalized overlap.
fn box_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (lo, hi) = (i as f64 * ratio, (i + 1) as f64 * ratio);
            let mut taps = Vec::new();
            let mut j = lo.floor() as usize;
            while (j as f64) < hi && j < src {
                let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((j, overlap / ratio));
                }
                j += 1;
            }
            taps
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let mut img = GrayImage::new(3, 2);
        img.set(0, 0, 1.0);
        img.set(2, 1, 0.5);
        let back = parse_pgm(&img.to_pgm()).unwrap();
        assert_eq!(back, img.quantized());
        let ascii = parse_pgm(b"P2\n# c\n2 1\n4\n0 4\n").unwrap();
        assert_eq!(ascii.pixels(), &[0.0, 1.0]);
        let wide = parse_pgm(&[b"P5 1 1 65535\n".as_slice(), &[0x80, 0x00]].concat()).unwrap();
        assert!((wide.get(0, 0) - 32768.0 / 65535.0).abs() < 1e-15);
        assert!(parse_pgm(b"P6 1 1 255\n\0\0\0").is_err());
        assert!(parse_pgm(b"P5 4 4 255\n\0").is_err());
    }

    #[test]
    fn box_resize_preserves_mean() {
        let px: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let img = GrayImage::from_pixels(4, 3, px).unwrap();
        let mean = img.sum() / 12.0;
        let down = resize_box(&img, 3, 2);
        assert!((down.sum() / 6.0 - mean).abs() < 1e-12);
        let half = resize_box(&GrayImage::from_pixels(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap(), 1, 1);
        assert!((half.get(0, 0) - 0.5).abs() < 1e-15);
        let up = resize_box(&img, 8, 6);
        assert!((up.sum() / 48.0 - mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(GrayImage::from_pixels(2, 2, vec![0.0; 3]).is_err());
        assert_eq!(GrayImage::from_pixels(1, 1, vec![4.0]).unwrap().get(0, 0), 1.0);
    }
}
