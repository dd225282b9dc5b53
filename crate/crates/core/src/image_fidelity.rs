//! Image-space fidelity: pixel MSE and a simplified visible-difference
//! predictor whose per-pixel detection map is averaged into one number.
//!
//! The predictor runs five steps:
//! 1. display value `v` → luminance `Y = v · max_luminance` → lightness
//!    `(Y / WHITE_REFERENCE)^(1/3)`;
//! 2. an undecimated Laplacian stack of `BANDS` bands (binomial 5-tap kernel
//!    dilated by `2^k`, clamped edges), turned into local contrast
//!    `B_k / (G_{k+1} + CONTRAST_FLOOR)`;
//! 3. each band scaled by `PEAK_SENSITIVITY · csf(f_k)`, with
//!    `f_k = BAND_PEAK_CYCLES_PER_PIXEL / 2^k · pixels_per_degree`;
//! 4. masked difference `|Wa − Wb| / max(1, min(|Wa|, |Wb|)^MASKING_EXPONENT)`;
//! 5. Minkowski pooling over bands (`POOLING_EXPONENT`) and the psychometric
//!    map `1 − exp(−R^PSYCHOMETRIC_SLOPE)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::GrayImage;

/// Model constants, kept in one place for tuning.
pub mod constants {
    pub const BANDS: usize = 5;
    /// cd/m² mapped to lightness 1.
    pub const WHITE_REFERENCE: f64 = 100.0;
    pub const LIGHTNESS_EXPONENT: f64 = 1.0 / 3.0;
    pub const CONTRAST_FLOOR: f64 = 0.05;
    pub const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    /// Approximate peak frequency of band 0 of the stack.
    pub const BAND_PEAK_CYCLES_PER_PIXEL: f64 = 0.4;
    pub const CSF_PEAK_CPD: f64 = 4.0;
    /// Contrast sensitivity at the CSF peak (inverse threshold contrast).
    pub const PEAK_SENSITIVITY: f64 = 100.0;
    pub const MASKING_EXPONENT: f64 = 0.7;
    pub const POOLING_EXPONENT: f64 = 4.0;
    pub const PSYCHOMETRIC_SLOPE: f64 = 3.5;
    /// Guards black reference pixels in the normalized MSE.
    pub const MSE_EPSILON: f64 = 1e-6;

    pub const DISPLAY_DIAGONAL_INCHES: f64 = 17.0;
    pub const DISPLAY_WIDTH_PIXELS: f64 = 1024.0;
    pub const VIEWING_DISTANCE_M: f64 = 0.7;
    pub const DEFAULT_MAX_LUMINANCE: f64 = 100.0;
}

use constants::*;

#[derive(Debug, Error, PartialEq)]
pub enum ImageFidelityError {
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("view parameters must be positive and finite")]
    InvalidViewParams,
    #[error("difference image is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewParams {
    pub pixels_per_degree: f64,
    /// cd/m² of a display value of 1.
    pub max_luminance: f64,
}

impl Default for ViewParams {
    fn default() -> Self {
        ViewParams {
            pixels_per_degree: display_pixels_per_degree(DISPLAY_DIAGONAL_INCHES, DISPLAY_WIDTH_PIXELS, VIEWING_DISTANCE_M),
            max_luminance: DEFAULT_MAX_LUMINANCE,
        }
    }
}

impl ViewParams {
    pub fn validate(&self) -> Result<(), ImageFidelityError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.pixels_per_degree) && ok(self.max_luminance) {
            Ok(())
        } else {
            Err(ImageFidelityError::InvalidViewParams)
        }
    }
}

/// Pixels spanned by one degree at the screen center of a 4:3 display.
pub fn display_pixels_per_degree(diagonal_inches: f64, width_pixels: f64, distance_m: f64) -> f64 {
    let width_m = diagonal_inches * 0.0254 * 4.0 / 5.0;
    let one_degree_m = 2.0 * distance_m * 0.5f64.to_radians().tan();
    one_degree_m / (width_m / width_pixels)
}

/// Per-pixel detection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DiffImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_pixels(self.width, self.height, self.values.clone()).expect("values lie in [0, 1]")
    }
}

fn same_size(a: &GrayImage, b: &GrayImage) -> Result<(), ImageFidelityError> {
    if a.dimensions() != b.dimensions() {
        return Err(ImageFidelityError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// Mean squared pixel difference. With `normalized`, each term is divided
/// by `max(a², MSE_EPSILON)`, `a` being the reference.
pub fn mse(a: &GrayImage, b: &GrayImage, normalized: bool) -> Result<f64, ImageFidelityError> {
    same_size(a, b)?;
    let n = a.pixels().len();
    if n == 0 {
        return Err(ImageFidelityError::Empty);
    }
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = (x - y) * (x - y);
            if normalized {
                d / (x * x).max(MSE_EPSILON)
            } else {
                d
            }
        })
        .sum();
    Ok(sum / n as f64)
}

/// Band-pass contrast sensitivity, 1 at `CSF_PEAK_CPD`.
pub fn csf(cpd: f64) -> f64 {
    let r = cpd / CSF_PEAK_CPD;
    r * (1.0 - r).exp()
}

pub fn band_frequency_cpd(band: usize, pixels_per_degree: f64) -> f64 {
    BAND_PEAK_CYCLES_PER_PIXEL / (1u32 << band) as f64 * pixels_per_degree
}

/// One pass of the dilated binomial filter along rows then columns.
fn blur(src: &[f64], w: usize, h: usize, dilation: usize) -> Vec<f64> {
    let clampi = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (t, k) in BINOMIAL.iter().enumerate() {
                let xx = clampi(x as isize + (t as isize - 2) * dilation as isize, w);
                s += k * src[y * w + xx];
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (t, k) in BINOMIAL.iter().enumerate() {
                let yy = clampi(y as isize + (t as isize - 2) * dilation as isize, h);
                s += k * tmp[yy * w + x];
            }
            out[y * w + x] = s;
        }
    }
    out
}

/// CSF-weighted band contrasts of one image, `BANDS` planes.
fn weighted_bands(img: &GrayImage, vp: &ViewParams) -> Vec<Vec<f64>> {
    let (w, h) = img.dimensions();
    let mut g: Vec<f64> = img
        .pixels()
        .iter()
        .map(|&v| (v * vp.max_luminance / WHITE_REFERENCE).powf(LIGHTNESS_EXPONENT))
        .collect();
    let mut bands = Vec::with_capacity(BANDS);
    for k in 0..BANDS {
        let next = blur(&g, w, h, 1 << k);
        let gain = PEAK_SENSITIVITY * csf(band_frequency_cpd(k, vp.pixels_per_degree));
        bands.push(
            g.iter()
                .zip(&next)
                .map(|(&gk, &gk1)| gain * (gk - gk1) / (gk1 + CONTRAST_FLOOR))
                .collect(),
        );
        g = next;
    }
    bands
}

/// Per-pixel probability that the two images are told apart.
pub fn perceptual_diff(a: &GrayImage, b: &GrayImage, vp: &ViewParams) -> Result<DiffImage, ImageFidelityError> {
    same_size(a, b)?;
    vp.validate()?;
    let (width, height) = a.dimensions();
    let (wa, wb) = rayon::join(|| weighted_bands(a, vp), || weighted_bands(b, vp));
    let values = (0..width * height)
        .map(|i| {
            let mut pooled = 0.0;
            for k in 0..BANDS {
                let (x, y) = (wa[k][i], wb[k][i]);
                let mask = x.abs().min(y.abs());
                let elevation = mask.powf(MASKING_EXPONENT).max(1.0);
                pooled += ((x - y).abs() / elevation).powf(POOLING_EXPONENT);
            }
            let r = pooled.powf(1.0 / POOLING_EXPONENT);
            1.0 - (-r.powf(PSYCHOMETRIC_SLOPE)).exp()
        })
        .collect();
    Ok(DiffImage { width, height, values })
}

/// Mean of the detection map.
pub fn summarize_diff(d: &DiffImage) -> Result<f64, ImageFidelityError> {
    if d.values.is_empty() {
        return Err(ImageFidelityError::Empty);
    }
    Ok(d.values.iter().sum::<f64>() / d.values.len() as f64)
}

/// `summarize_diff(perceptual_diff(a, b))`, with identical images
/// short-circuited to exactly 0.
pub fn bm(a: &GrayImage, b: &GrayImage, vp: &ViewParams) -> Result<f64, ImageFidelityError> {
    same_size(a, b)?;
    if a == b {
        vp.validate()?;
        return Ok(0.0);
    }
    summarize_diff(&perceptual_diff(a, b, vp)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                px.push(f(x, y));
            }
        }
        GrayImage::from_pixels(w, h, px).unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = GrayImage::from_pixels(2, 1, vec![0.0, 0.5]).unwrap();
        let b = GrayImage::from_pixels(2, 1, vec![0.25, 0.5]).unwrap();
        assert_eq!(mse(&a, &b, false).unwrap(), 0.03125);
        assert_eq!(mse(&a, &a, false).unwrap(), 0.0);
        assert_eq!(mse(&GrayImage::new(3, 3), &GrayImage::filled(3, 3, 1.0), false).unwrap(), 1.0);
        assert_eq!(mse(&a, &b, false).unwrap(), mse(&b, &a, false).unwrap());
        // black reference pixel: 0.0625 / 1e-6
        assert!((mse(&a, &b, true).unwrap() - 0.0625 / 1e-6 / 2.0).abs() < 1e-6);
        assert_ne!(mse(&a, &b, true).unwrap(), mse(&b, &a, true).unwrap());
        assert!(mse(&a, &GrayImage::new(1, 2), false).is_err());
    }

    #[test]
    fn csf_shape() {
        assert_eq!(csf(CSF_PEAK_CPD), 1.0);
        assert!(csf(1.0) < 1.0 && csf(16.0) < 1.0);
        assert!(csf(3.9) < 1.0 && csf(4.1) < 1.0);
    }

    #[test]
    fn default_viewing_geometry() {
        let vp = ViewParams::default();
        assert!((vp.pixels_per_degree - 36.22).abs() < 0.01, "{}", vp.pixels_per_degree);
        assert!(ViewParams { pixels_per_degree: 0.0, ..vp }.validate().is_err());
    }

    #[test]
    fn identical_images_give_zero_map() {
        let a = img(40, 30, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
        let d = perceptual_diff(&a, &a, &ViewParams::default()).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
        assert_eq!(bm(&a, &a, &ViewParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_exactly() {
        let a = img(48, 40, |x, y| 0.3 + 0.4 * ((x as f64 / 5.0).sin() * (y as f64 / 7.0).cos()).abs());
        let b = img(48, 40, |x, y| if (10..20).contains(&x) && y > 12 { 0.9 } else { a_val(x, y) });
        fn a_val(x: usize, y: usize) -> f64 {
            0.3 + 0.4 * ((x as f64 / 5.0).sin() * (y as f64 / 7.0).cos()).abs()
        }
        let vp = ViewParams::default();
        assert_eq!(perceptual_diff(&a, &b, &vp).unwrap(), perceptual_diff(&b, &a, &vp).unwrap());
    }

    #[test]
    fn grows_with_contrast() {
        let vp = ViewParams::default();
        let base = img(64, 64, |x, _| 0.2 + 0.3 * (x as f64 / 63.0));
        let mut last = 0.0;
        for delta in [0.02, 0.05, 0.1] {
            let b = img(64, 64, |x, y| {
                let p = if (x / 4 + y / 4) % 2 == 0 { 1.0 } else { 0.0 };
                0.2 + 0.3 * (x as f64 / 63.0) + delta * p
            });
            let s = bm(&base, &b, &vp).unwrap();
            assert!(s >= last && s <= 1.0, "{delta}: {s} after {last}");
            last = s;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn summary_values() {
        let d = |v: Vec<f64>| DiffImage {
            width: v.len(),
            height: 1,
            values: v,
        };
        assert_eq!(summarize_diff(&d(vec![0.0; 4])).unwrap(), 0.0);
        assert_eq!(summarize_diff(&d(vec![1.0; 4])).unwrap(), 1.0);
        assert_eq!(summarize_diff(&d(vec![0.0, 1.0, 0.0, 1.0])).unwrap(), 0.5);
        assert!(summarize_diff(&d(vec![])).is_err());
    }
}
