//! Synthetic degradations: AWGN, blur, downsampling, and pixel masking.
//!
//! Everything is deterministic given the spec's seed. Noise standard
//! deviations are quoted on the 0-255 scale and divided by 255 internally,
//! matching [0, 1]-clipped images.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{Grid, Image};

/// A normalized, nonnegative 2D blur kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl Kernel {
    /// Validates nonnegativity and normalizes the weights to sum 1.
    pub fn new(height: usize, width: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != height * width || weights.is_empty() {
            return Err(Error::BadKernel(format!(
                "{} weights for a {height}x{width} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::BadKernel("negative or non-finite weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::BadKernel("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Kernel {
            height,
            width,
            weights,
        })
    }

    /// Normalized 2D Gaussian, `size` odd.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if size % 2 == 0 || sigma <= 0.0 {
            return Err(Error::BadKernel(format!(
                "gaussian kernel needs odd size and positive sigma, got {size}, {sigma}"
            )));
        }
        let half = (size / 2) as f64;
        let mut weights = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                let dr = r as f64 - half;
                let dc = c as f64 - half;
                weights.push((-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp());
            }
        }
        Kernel::new(size, size, weights)
    }

    /// Parses the plain-text kernel format: whitespace-separated decimal
    /// numbers, one row per line. Warns if the raw sum deviates from 1 by
    /// more than 1e-6 before normalizing.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let row = row.map_err(|e| {
                Error::BadKernel(format!("line {}: {e}", lineno + 1))
            })?;
            rows.push(row);
        }
        let height = rows.len();
        if height == 0 {
            return Err(Error::BadKernel("empty kernel file".into()));
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::BadKernel("rows have unequal lengths".into()));
        }
        let weights: Vec<f64> = rows.into_iter().flatten().collect();
        let raw_sum: f64 = weights.iter().sum();
        if (raw_sum - 1.0).abs() > 1e-6 {
            log::warn!("kernel weights sum to {raw_sum:.8}; normalizing to 1");
        }
        Kernel::new(height, width, weights)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// What the degradation operator does, with its operator-specific data.
#[derive(Debug, Clone)]
pub enum DegradationKind {
    /// Identity operator: noise only.
    Awgn,
    GaussianBlur { kernel: Kernel },
    MotionBlur { kernel: Kernel },
    /// Antialiased bicubic filter then decimation.
    BicubicDown { scale: u32 },
    /// Blur with the kernel then decimate.
    GaussianDown { scale: u32, kernel: Kernel },
    /// Zero a uniformly random pixel subset of exactly this rate.
    RandomMask { rate: f64 },
}

/// A degradation operator plus its noise level and seed.
#[derive(Debug, Clone)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    /// AWGN standard deviation on the 0-255 scale; 0 disables noise.
    pub sigma: f64,
    pub seed: u64,
}

fn check_scale(scale: u32) -> Result<()> {
    if !(2..=4).contains(&scale) {
        return Err(Error::BadDegradation(format!(
            "scale {scale} not in {{2, 3, 4}}"
        )));
    }
    Ok(())
}

impl DegradationSpec {
    pub fn awgn(sigma: f64) -> Result<Self> {
        DegradationSpec::build(DegradationKind::Awgn, sigma)
    }

    pub fn gaussian_blur(kernel: Kernel, sigma: f64) -> Result<Self> {
        DegradationSpec::build(DegradationKind::GaussianBlur { kernel }, sigma)
    }

    pub fn motion_blur(kernel: Kernel, sigma: f64) -> Result<Self> {
        DegradationSpec::build(DegradationKind::MotionBlur { kernel }, sigma)
    }

    pub fn bicubic_down(scale: u32, sigma: f64) -> Result<Self> {
        check_scale(scale)?;
        DegradationSpec::build(DegradationKind::BicubicDown { scale }, sigma)
    }

    /// The conventional Gaussian-downsampling setup: 7x7 kernel, sigma 1.6.
    pub fn gaussian_down(scale: u32, sigma: f64) -> Result<Self> {
        check_scale(scale)?;
        let kernel = Kernel::gaussian(7, 1.6)?;
        DegradationSpec::build(DegradationKind::GaussianDown { scale, kernel }, sigma)
    }

    pub fn random_mask(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::BadDegradation(format!(
                "mask rate {rate} not in (0, 1)"
            )));
        }
        DegradationSpec::build(DegradationKind::RandomMask { rate }, 0.0)
    }

    fn build(kind: DegradationKind, sigma: f64) -> Result<Self> {
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::BadDegradation(format!("sigma {sigma} < 0")));
        }
        Ok(DegradationSpec {
            kind,
            sigma,
            seed: 0,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::BadDegradation(format!("sigma {sigma} < 0")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// The downsampling factor, if this degradation shrinks the image.
    pub fn scale(&self) -> Option<u32> {
        match self.kind {
            DegradationKind::BicubicDown { scale } | DegradationKind::GaussianDown { scale, .. } => {
                Some(scale)
            }
            _ => None,
        }
    }

    /// Applies the operator; deterministic for a fixed seed.
    pub fn apply(&self, image: &Image) -> Result<Degraded> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match &self.kind {
            DegradationKind::Awgn => Ok(Degraded {
                image: add_awgn(image.grid().clone(), self.sigma, &mut rng),
                mask: None,
            }),
            DegradationKind::GaussianBlur { kernel } | DegradationKind::MotionBlur { kernel } => {
                let blurred = convolve_mirrored(image.grid(), kernel);
                Ok(Degraded {
                    image: add_awgn(blurred, self.sigma, &mut rng),
                    mask: None,
                })
            }
            DegradationKind::BicubicDown { scale } => {
                let small = bicubic_resize(image, *scale, ResizeDirection::Down)?;
                Ok(Degraded {
                    image: add_awgn(small.into_grid(), self.sigma, &mut rng),
                    mask: None,
                })
            }
            DegradationKind::GaussianDown { scale, kernel } => {
                let blurred = convolve_mirrored(image.grid(), kernel);
                let small = decimate(&blurred, *scale as usize)?;
                Ok(Degraded {
                    image: add_awgn(small, self.sigma, &mut rng),
                    mask: None,
                })
            }
            DegradationKind::RandomMask { rate } => {
                let noisy = add_awgn(image.grid().clone(), self.sigma, &mut rng);
                let (masked, mask) = apply_mask(noisy.into_grid(), *rate, &mut rng);
                Ok(Degraded {
                    image: masked,
                    mask: Some(mask),
                })
            }
        }
    }
}

/// Result of a degradation; masking also returns the observation mask
/// (1 = observed, 0 = missing).
#[derive(Debug, Clone)]
pub struct Degraded {
    pub image: Image,
    pub mask: Option<Image>,
}

fn add_awgn(mut grid: Grid, sigma_255: f64, rng: &mut ChaCha8Rng) -> Image {
    if sigma_255 > 0.0 {
        let normal = Normal::new(0.0, sigma_255 / 255.0).expect("positive sigma");
        for v in grid.values_mut() {
            *v += normal.sample(rng);
        }
    }
    Image::from_grid_clipped(grid)
}

/// 2D convolution with mirrored boundary handling.
pub fn convolve_mirrored(grid: &Grid, kernel: &Kernel) -> Grid {
    let (h, w) = (grid.height(), grid.width());
    let (kh, kw) = (kernel.height, kernel.width);
    let (oy, ox) = (kh as isize / 2, kw as isize / 2);
    let mut out = vec![0.0; h * w];
    let reflect = |i: isize, len: usize| -> usize {
        let len = len as isize;
        let mut i = i;
        while i < 0 || i >= len {
            if i < 0 {
                i = -i;
            }
            if i >= len {
                i = 2 * len - 2 - i;
            }
        }
        i as usize
    };
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..kh {
                for kx in 0..kw {
                    let iy = reflect(y as isize + ky as isize - oy, h);
                    let ix = reflect(x as isize + kx as isize - ox, w);
                    acc += kernel.weights[ky * kw + kx] * grid.get(iy, ix);
                }
            }
            out[y * w + x] = acc;
        }
    }
    Grid::new(h, w, out)
}

fn decimate(grid: &Grid, scale: usize) -> Result<Grid> {
    let oh = grid.height().div_ceil(scale);
    let ow = grid.width().div_ceil(scale);
    if oh == 0 || ow == 0 {
        return Err(Error::ResizeTooSmall {
            height: oh,
            width: ow,
        });
    }
    Ok(Grid::from_fn(oh, ow, |r, c| grid.get(r * scale, c * scale)))
}

fn apply_mask(mut grid: Grid, rate: f64, rng: &mut ChaCha8Rng) -> (Image, Image) {
    let len = grid.len();
    let missing = (rate * len as f64).round() as usize;
    let mut indices: Vec<usize> = (0..len).collect();
    // Exact cardinality: a seeded partial shuffle picks the missing set.
    let (chosen, _) = indices.partial_shuffle(rng, missing);
    let mut mask = vec![1.0; len];
    for &i in chosen.iter() {
        grid.values_mut()[i] = 0.0;
        mask[i] = 0.0;
    }
    let (h, w) = (grid.height(), grid.width());
    (
        Image::from_grid_clipped(grid),
        Image::from_grid_clipped(Grid::new(h, w, mask)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeDirection {
    Up,
    Down,
}

/// Bicubic resize (Catmull-Rom constant a = -0.5) with an antialias
/// prefilter on downsampling; boundary pixels replicate.
pub fn bicubic_resize(image: &Image, scale: u32, direction: ResizeDirection) -> Result<Image> {
    check_scale(scale)?;
    let s = scale as f64;
    let (h, w) = (image.height(), image.width());
    let (oh, ow) = match direction {
        ResizeDirection::Up => (
            (h as f64 * s).round() as usize,
            (w as f64 * s).round() as usize,
        ),
        ResizeDirection::Down => (
            (h as f64 / s).round() as usize,
            (w as f64 / s).round() as usize,
        ),
    };
    if oh == 0 || ow == 0 {
        return Err(Error::ResizeTooSmall {
            height: oh,
            width: ow,
        });
    }
    let rows = resample_weights(h, oh);
    let cols = resample_weights(w, ow);

    // Horizontal pass then vertical pass.
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        for (c, taps) in cols.iter().enumerate() {
            let mut acc = 0.0;
            for (i, wgt) in taps.offsets() {
                acc += wgt * image.get(r, i);
            }
            tmp[r * ow + c] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for (r, taps) in rows.iter().enumerate() {
        for c in 0..ow {
            let mut acc = 0.0;
            for (i, wgt) in taps.offsets() {
                acc += wgt * tmp[i * ow + c];
            }
            out[r * ow + c] = acc;
        }
    }
    Ok(Image::from_grid_clipped(Grid::new(oh, ow, out)))
}

struct Taps {
    start: usize,
    weights: Vec<f64>,
}

impl Taps {
    fn offsets(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(|(j, &w)| (self.start + j, w))
    }
}

fn cubic(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Normalized source taps for every output index along one axis. When
/// shrinking, the kernel is widened by the inverse ratio (antialias).
fn resample_weights(in_len: usize, out_len: usize) -> Vec<Taps> {
    let ratio = out_len as f64 / in_len as f64;
    let widen = if ratio < 1.0 { 1.0 / ratio } else { 1.0 };
    let support = 2.0 * widen;
    let mut all = Vec::with_capacity(out_len);
    for u in 0..out_len {
        let x = (u as f64 + 0.5) / ratio - 0.5;
        let left = (x - support).ceil() as isize;
        let right = (x + support).floor() as isize;
        let mut start = usize::MAX;
        let mut weights: Vec<f64> = Vec::with_capacity((right - left + 1) as usize);
        let mut buckets: Vec<(usize, f64)> = Vec::with_capacity((right - left + 1) as usize);
        for i in left..=right {
            let wgt = cubic((i as f64 - x) / widen);
            if wgt == 0.0 {
                continue;
            }
            // Symmetric boundary: out-of-range taps fold back across the edge.
            let mut idx = i;
            while idx < 0 || idx >= in_len as isize {
                if idx < 0 {
                    idx = -1 - idx;
                }
                if idx >= in_len as isize {
                    idx = 2 * in_len as isize - 1 - idx;
                }
            }
            buckets.push((idx as usize, wgt));
        }
        buckets.sort_by_key(|&(i, _)| i);
        for (idx, wgt) in buckets {
            if start == usize::MAX {
                start = idx;
            }
            let offset = idx - start;
            if offset >= weights.len() {
                weights.resize(offset + 1, 0.0);
            }
            weights[offset] += wgt;
        }
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        all.push(Taps { start, weights });
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;

    fn textured(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |r, c| {
            let x = c as f64 / w as f64;
            let y = r as f64 / h as f64;
            0.5 + 0.3 * (6.0 * x).sin() * (5.0 * y).cos() + 0.15 * (x - y)
        })
    }

    #[test]
    fn zero_sigma_awgn_is_identity() {
        let img = textured(16, 16);
        let out = DegradationSpec::awgn(0.0).unwrap().apply(&img).unwrap();
        assert_eq!(out.image.values(), img.values());
    }

    #[test]
    fn awgn_sigma25_psnr_near_20() {
        let img = textured(96, 96);
        let out = DegradationSpec::awgn(25.0)
            .unwrap()
            .with_seed(42)
            .apply(&img)
            .unwrap();
        let psnr = metrics::psnr(&img, &out.image).unwrap();
        assert!((psnr - 20.2).abs() < 0.3, "psnr = {psnr}");
    }

    #[test]
    fn awgn_deterministic_per_seed() {
        let img = textured(16, 16);
        let spec = DegradationSpec::awgn(15.0).unwrap().with_seed(7);
        let a = spec.apply(&img).unwrap();
        let b = spec.apply(&img).unwrap();
        assert_eq!(a.image.values(), b.image.values());
        let c = DegradationSpec::awgn(15.0)
            .unwrap()
            .with_seed(8)
            .apply(&img)
            .unwrap();
        assert_ne!(a.image.values(), c.image.values());
    }

    #[test]
    fn mask_rate_half_exact_count() {
        let img = Image::constant(100, 100, 0.8);
        let out = DegradationSpec::random_mask(0.5)
            .unwrap()
            .with_seed(3)
            .apply(&img)
            .unwrap();
        let zeroed = out.image.values().iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zeroed, 5000);
        let mask = out.mask.unwrap();
        let missing = mask.values().iter().filter(|&&v| v == 0.0).count();
        assert_eq!(missing, 5000);
        // Observed pixels unchanged.
        for (i, &m) in mask.values().iter().enumerate() {
            if m == 1.0 {
                assert_eq!(out.image.values()[i], 0.8);
            } else {
                assert_eq!(out.image.values()[i], 0.0);
            }
        }
    }

    #[test]
    fn blur_preserves_constant_mean_exactly() {
        let img = Image::constant(12, 12, 0.37);
        let kernel = Kernel::gaussian(5, 1.1).unwrap();
        let out = convolve_mirrored(img.grid(), &kernel);
        for v in out.values() {
            assert!((v - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_text_parses_and_normalizes() {
        let k = Kernel::from_text("0.25 0.25\n0.25 0.25\n").unwrap();
        assert_eq!(k.weights(), &[0.25; 4]);
        let k2 = Kernel::from_text("1 1\n1 1").unwrap();
        assert_eq!(k2.weights(), &[0.25; 4]);
        assert!(Kernel::from_text("1 2\n3").is_err());
        assert!(Kernel::from_text("").is_err());
    }

    #[test]
    fn scale_out_of_range_rejected() {
        assert!(DegradationSpec::bicubic_down(5, 0.0).is_err());
        assert!(DegradationSpec::bicubic_down(1, 0.0).is_err());
        assert!(DegradationSpec::bicubic_down(2, 0.0).is_ok());
    }

    #[test]
    fn bicubic_constant_stays_constant() {
        let img = Image::constant(10, 10, 0.63);
        for dir in [ResizeDirection::Up, ResizeDirection::Down] {
            let out = bicubic_resize(&img, 2, dir).unwrap();
            for v in out.values() {
                assert!((v - 0.63).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bicubic_up_doubles_dimensions() {
        let img = Image::constant(2, 2, 0.2);
        let out = bicubic_resize(&img, 2, ResizeDirection::Up).unwrap();
        assert_eq!((out.height(), out.width()), (4, 4));
    }

    #[test]
    fn bicubic_down_then_up_recovers_smooth_ramp() {
        let img = Image::from_fn(64, 64, |r, c| 0.1 + 0.8 * (r + c) as f64 / 126.0);
        for scale in [2u32, 4] {
            let down = bicubic_resize(&img, scale, ResizeDirection::Down).unwrap();
            let up = bicubic_resize(&down, scale, ResizeDirection::Up).unwrap();
            assert_eq!((up.height(), up.width()), (64, 64));
            let max_err = up
                .values()
                .iter()
                .zip(img.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_err < 0.02, "scale {scale}: {max_err}");
        }
    }

    #[test]
    fn gaussian_down_shrinks_by_scale() {
        let img = textured(30, 30);
        let out = DegradationSpec::gaussian_down(3, 0.0)
            .unwrap()
            .apply(&img)
            .unwrap();
        assert_eq!((out.image.height(), out.image.width()), (10, 10));
    }

    #[test]
    fn noise_applied_after_blur() {
        // With sigma > 0 a blurred image and a blurred-then-noised image
        // differ, but their means stay close (noise is zero-mean).
        let img = textured(24, 24);
        let kernel = Kernel::gaussian(5, 1.0).unwrap();
        let clean = DegradationSpec::gaussian_blur(kernel.clone(), 0.0)
            .unwrap()
            .apply(&img)
            .unwrap();
        let noisy = DegradationSpec::gaussian_blur(kernel, 10.0)
            .unwrap()
            .with_seed(1)
            .apply(&img)
            .unwrap();
        assert_ne!(clean.image.values(), noisy.image.values());
        assert!((clean.image.grid().mean() - noisy.image.grid().mean()).abs() < 0.01);
    }
}
