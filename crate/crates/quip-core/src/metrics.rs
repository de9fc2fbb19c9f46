//! PSNR and single-scale SSIM on [0, 1] grayscale images.

use crate::error::{Error, Result};
use crate::grid::Image;

/// SSIM window side (11x11 Gaussian, sigma 1.5) and stability constants
/// C1 = 0.01^2, C2 = 0.03^2 — the universal single-scale defaults.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// PSNR in decibels plus SSIM as a fraction in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityScore {
    /// The "PSNR/SSIM" presentation used in result tables: PSNR in dB with
    /// two decimals ("inf" for identical images) and SSIM as a percentage.
    pub fn display(&self) -> String {
        let psnr = if self.psnr.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.2}", self.psnr)
        };
        format!("{psnr}/{:.2}", self.ssim * 100.0)
    }
}

fn check_shapes(op: &'static str, reference: &Image, test: &Image) -> Result<()> {
    if reference.height() != test.height() || reference.width() != test.width() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: vec![reference.height(), reference.width()],
            rhs: vec![test.height(), test.width()],
        });
    }
    Ok(())
}

/// 10 log10(1 / MSE); identical images give +inf.
pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    check_shapes("psnr", reference, test)?;
    let mse = reference
        .values()
        .iter()
        .zip(test.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Mean single-scale SSIM over all fully valid window positions.
pub fn ssim(reference: &Image, test: &Image) -> Result<f64> {
    check_shapes("ssim", reference, test)?;
    let (h, w) = (reference.height(), reference.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            n: SSIM_WINDOW,
        });
    }
    let window = gaussian_window();
    let x = reference.values();
    let y = test.values();

    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p * q).collect()
    };
    let mx = filter_valid(x, h, w, &window);
    let my = filter_valid(y, h, w, &window);
    let mxx = filter_valid(&mul(x, x), h, w, &window);
    let myy = filter_valid(&mul(y, y), h, w, &window);
    let mxy = filter_valid(&mul(x, y), h, w, &window);

    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let vxy = mxy[i] - ux * uy;
        total += ((2.0 * ux * uy + C1) * (2.0 * vxy + C2))
            / ((ux * ux + uy * uy + C1) * (vx + vy + C2));
    }
    Ok(total / mx.len() as f64)
}

pub fn quality(reference: &Image, test: &Image) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr: psnr(reference, test)?,
        ssim: ssim(reference, test)?,
    })
}

/// Normalized 1-D Gaussian; the separable 2-D window multiplies to sum 1.
fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Valid-mode separable weighted filtering (no padding).
fn filter_valid(data: &[f64], h: usize, w: usize, window: &[f64]) -> Vec<f64> {
    let k = window.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            let mut acc = 0.0;
            for (j, wj) in window.iter().enumerate() {
                acc += wj * data[r * w + c + j];
            }
            rows[r * ow + c] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (j, wj) in window.iter().enumerate() {
                acc += wj * rows[(r + j) * ow + c];
            }
            out[r * ow + c] = acc;
        }
    }
    out
}
