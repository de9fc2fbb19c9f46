//! Supervised residual training: pair synthesis with augmentation, the
//! residual MSE loss, the exponential LR schedule, and the epoch loop.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::degrade::{bicubic_resize, DegradationSpec, ResizeDirection};
use crate::diva::{self, DivaModel};
use crate::error::{Error, Result};
use crate::grid::{Grid, Image};
use crate::metrics;
use crate::tensor::Adam;

/// Per-sample noise level: a fixed sigma, or blind training with sigma drawn
/// uniformly from a range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    Fixed(f64),
    Blind { lo: f64, hi: f64 },
}

impl SigmaMode {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            SigmaMode::Fixed(s) => s,
            SigmaMode::Blind { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }
        }
    }
}

/// Training hyperparameters and data-synthesis settings.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub sigma_mode: SigmaMode,
    /// Base degradation; its sigma is replaced per sample from `sigma_mode`
    /// and its seed per sample from `seed`.
    pub degradation: DegradationSpec,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Square crop side for training samples; 0 selects
    /// max(window, 24) rounded up to a multiple of the degradation scale.
    pub crop_size: usize,
    pub crops_per_image: usize,
}

impl TrainConfig {
    /// Paper-style defaults around a degradation: 60 epochs, batch 128,
    /// exponential LR from 1e-3 to 1e-6, 10% validation split.
    pub fn new(degradation: DegradationSpec) -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 128,
            lr_start: 1e-3,
            lr_end: 1e-6,
            sigma_mode: SigmaMode::Fixed(degradation.sigma),
            degradation,
            seed: 0,
            validation_fraction: 0.1,
            crop_size: 0,
            crops_per_image: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::BadTrainConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::BadTrainConfig("batch size must be >= 1".into()));
        }
        if !(self.lr_start.is_finite() && self.lr_end.is_finite())
            || self.lr_start < 0.0
            || self.lr_end < 0.0
        {
            return Err(Error::BadTrainConfig("learning rates must be >= 0".into()));
        }
        if self.lr_start < self.lr_end {
            return Err(Error::BadTrainConfig(
                "lr_start must be >= lr_end".into(),
            ));
        }
        if self.lr_start > self.lr_end && self.lr_end <= 0.0 {
            return Err(Error::BadTrainConfig(
                "a decaying schedule needs lr_end > 0".into(),
            ));
        }
        if let SigmaMode::Blind { lo, hi } = self.sigma_mode {
            if lo < 0.0 || hi < lo {
                return Err(Error::BadTrainConfig(format!(
                    "blind sigma range [{lo}, {hi}] is invalid"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::BadTrainConfig(
                "validation fraction must be in [0, 1)".into(),
            ));
        }
        if self.crops_per_image == 0 {
            return Err(Error::BadTrainConfig("crops_per_image must be >= 1".into()));
        }
        Ok(())
    }

    /// The crop side used for training samples with this model geometry.
    pub fn resolved_crop(&self, model: &DivaModel) -> Result<usize> {
        let window = model.geometry().window;
        let scale = self.degradation.scale().unwrap_or(1) as usize;
        let mut crop = if self.crop_size == 0 {
            window.max(24)
        } else {
            self.crop_size
        };
        if self.crop_size == 0 {
            crop = crop.div_ceil(scale) * scale;
        } else {
            if crop < window {
                return Err(Error::BadTrainConfig(format!(
                    "crop {crop} smaller than the model window {window}"
                )));
            }
            if crop % scale != 0 {
                return Err(Error::BadTrainConfig(format!(
                    "crop {crop} not divisible by the degradation scale {scale}"
                )));
            }
        }
        Ok(crop)
    }
}

/// One training sample: a clean crop, its degraded observation (resized back
/// to the crop size for downsampling operators), and the residual target
/// degraded - clean.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub clean: Image,
    pub degraded: Image,
    pub residual: Grid,
}

fn mix_seed(base: u64, salt: u64) -> u64 {
    // splitmix64 over base xor salt.
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Degrades a clean image into a network input and residual target. For
/// downsampling operators the observation is brought back to the clean size
/// by bicubic upsampling.
pub fn synthesize_pair(clean: &Image, spec: &DegradationSpec) -> Result<SamplePair> {
    let degraded = spec.apply(clean)?.image;
    let degraded = match spec.scale() {
        Some(scale) if degraded.height() != clean.height() => {
            bicubic_resize(&degraded, scale, ResizeDirection::Up)?
        }
        _ => degraded,
    };
    if degraded.height() != clean.height() || degraded.width() != clean.width() {
        return Err(Error::ShapeMismatch {
            op: "synthesize_pair",
            lhs: vec![clean.height(), clean.width()],
            rhs: vec![degraded.height(), degraded.width()],
        });
    }
    let residual = degraded.grid().sub(clean.grid())?;
    Ok(SamplePair {
        clean: clean.clone(),
        degraded,
        residual,
    })
}

fn augment(image: &Image, code: u8) -> Image {
    let grid = image.grid();
    let rotated = if code & 1 != 0 {
        grid.rotate90()
    } else {
        grid.clone()
    };
    let flipped = match code >> 1 {
        1 => rotated.flip_horizontal(),
        2 => rotated.flip_vertical(),
        _ => rotated,
    };
    Image::from_grid_clipped(flipped)
}

/// Builds one epoch's worth of training pairs in seeded-shuffled order.
///
/// Crops are drawn uniformly from each image, augmented by a random element
/// of {identity, rot90} x {identity, h-flip, v-flip}, then degraded. Images
/// smaller than the crop are skipped with a warning.
pub fn make_dataset(
    images: &[Image],
    config: &TrainConfig,
    crop: usize,
    epoch: usize,
) -> Result<Vec<SamplePair>> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("no images supplied".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x1000 + epoch as u64));
    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    for (i, image) in images.iter().enumerate() {
        if image.height() < crop || image.width() < crop {
            log::warn!(
                "image {i} ({}x{}) smaller than the {crop}-pixel crop; skipped",
                image.height(),
                image.width()
            );
            skipped += 1;
            continue;
        }
        for _ in 0..config.crops_per_image {
            let r = rng.random_range(0..=image.height() - crop);
            let c = rng.random_range(0..=image.width() - crop);
            let code = rng.random_range(0..6u8);
            let clean = augment(&image.crop(r, c, crop), code);
            let sigma = config.sigma_mode.draw(&mut rng);
            let spec = config
                .degradation
                .clone()
                .with_sigma(sigma)?
                .with_seed(rng.random());
            pairs.push(synthesize_pair(&clean, &spec)?);
        }
    }
    if skipped == images.len() {
        return Err(Error::EmptyDataset(format!(
            "all {skipped} images smaller than the {crop}-pixel crop"
        )));
    }
    pairs.shuffle(&mut rng);
    Ok(pairs)
}

/// Mean over pixels of (predicted - (degraded - clean))^2.
pub fn residual_loss(predicted: &Grid, degraded: &Grid, clean: &Grid) -> Result<f64> {
    let same = |a: &Grid, b: &Grid| a.height() == b.height() && a.width() == b.width();
    if !same(predicted, degraded) || !same(predicted, clean) {
        return Err(Error::ShapeMismatch {
            op: "residual_loss",
            lhs: vec![predicted.height(), predicted.width()],
            rhs: vec![degraded.height(), degraded.width()],
        });
    }
    let mut total = 0.0;
    for i in 0..predicted.len() {
        let target = degraded.values()[i] - clean.values()[i];
        let diff = predicted.values()[i] - target;
        total += diff * diff;
    }
    Ok(total / predicted.len() as f64)
}

/// Geometric interpolation from lr_start (epoch 0) to lr_end (last epoch).
pub fn lr_at(epoch: usize, config: &TrainConfig) -> f64 {
    debug_assert!(epoch < config.epochs);
    if config.epochs == 1 || config.lr_start == config.lr_end {
        return config.lr_start;
    }
    let t = epoch as f64 / (config.epochs - 1) as f64;
    config.lr_start * (config.lr_end / config.lr_start).powf(t)
}

/// One epoch's summary line.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_psnr: f64,
    pub val_ssim: f64,
    pub seconds: f64,
}

/// Full training outcome.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the best validation PSNR, if validation ran.
    pub best_epoch: Option<usize>,
}

impl TrainReport {
    pub fn loss_trajectory(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    pub fn first_loss(&self) -> f64 {
        self.epochs.first().map(|e| e.train_loss).unwrap_or(f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map(|e| e.train_loss).unwrap_or(f64::NAN)
    }

    /// Population variance of the last `k` epoch losses.
    pub fn loss_variance(&self, k: usize) -> f64 {
        let losses: Vec<f64> = self
            .epochs
            .iter()
            .rev()
            .take(k)
            .map(|e| e.train_loss)
            .collect();
        if losses.is_empty() {
            return f64::NAN;
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / losses.len() as f64
    }

    pub fn final_val_psnr(&self) -> f64 {
        self.epochs.last().map(|e| e.val_psnr).unwrap_or(f64::NAN)
    }

    pub fn best_val_psnr(&self) -> f64 {
        self.best_epoch
            .map(|i| self.epochs[i].val_psnr)
            .unwrap_or(f64::NAN)
    }

    pub fn best_val_ssim(&self) -> f64 {
        self.best_epoch
            .map(|i| self.epochs[i].val_ssim)
            .unwrap_or(f64::NAN)
    }

    /// Machine-readable record stream: one epoch per line.
    pub fn write_tsv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch\tlr\ttrain_loss\tval_psnr\tval_ssim\tseconds")?;
        for e in &self.epochs {
            writeln!(
                w,
                "{}\t{:.6e}\t{:.10e}\t{:.4}\t{:.6}\t{:.2}",
                e.epoch, e.lr, e.train_loss, e.val_psnr, e.val_ssim, e.seconds
            )?;
        }
        Ok(())
    }
}

/// Fixed gradient-chunk size: per-chunk gradients are computed in parallel
/// and merged in chunk order, so results do not depend on thread count.
const GRAD_CHUNK: usize = 8;

fn batch_step(model: &mut DivaModel, batch: &[SamplePair]) -> Result<f64> {
    let chunk_count = batch.len().div_ceil(GRAD_CHUNK);
    let shared: &DivaModel = model;
    type ChunkGrads = (f64, Vec<crate::tensor::Tensor>);
    let results: Vec<ChunkGrads> =
        crate::exec::try_map_indexed(chunk_count, |ci| -> Result<ChunkGrads> {
            let start = ci * GRAD_CHUNK;
            let end = (start + GRAD_CHUNK).min(batch.len());
            let mut sink = shared.params().clone();
            sink.zero_grads();
            let mut loss_sum = 0.0;
            for pair in &batch[start..end] {
                loss_sum += shared.loss_and_grads(&pair.degraded, &pair.residual, &mut sink)?;
            }
            Ok((loss_sum, sink.grads()))
        })?;
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (loss_sum, grads) in &results {
        total += loss_sum;
        model.params_mut().add_scaled_grads(grads, scale)?;
    }
    Ok(total * scale)
}

/// Runs the full training loop; checkpoints the best-validation weights to
/// `checkpoint` (DIVA1 format) when given.
pub fn train(
    model: &mut DivaModel,
    images: &[Image],
    config: &TrainConfig,
    checkpoint: Option<&Path>,
) -> Result<TrainReport> {
    config.validate()?;
    if images.is_empty() {
        return Err(Error::EmptyDataset("no training images".into()));
    }
    let crop = config.resolved_crop(model)?;

    // Validation split on shuffled image indices.
    let mut indices: Vec<usize> = (0..images.len()).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0xA11));
    indices.shuffle(&mut split_rng);
    let val_count = ((config.validation_fraction * images.len() as f64).round() as usize)
        .min(images.len() - 1);
    let (val_idx, train_idx) = indices.split_at(val_count);
    let train_images: Vec<Image> = train_idx.iter().map(|&i| images[i].clone()).collect();

    // Validation pairs are synthesized once with fixed per-image seeds so
    // epoch-to-epoch scores are comparable.
    let mut val_pairs = Vec::with_capacity(val_count);
    for (j, &i) in val_idx.iter().enumerate() {
        let sigma = match config.sigma_mode {
            SigmaMode::Fixed(s) => s,
            SigmaMode::Blind { lo, hi } => 0.5 * (lo + hi),
        };
        let spec = config
            .degradation
            .clone()
            .with_sigma(sigma)?
            .with_seed(mix_seed(config.seed, 0xE0_0000 + j as u64));
        let image = trim_to_scale(&images[i], config.degradation.scale());
        val_pairs.push(synthesize_pair(&image, &spec)?);
    }

    let mut optimizer = Adam::new(model.params());
    let mut report = TrainReport::default();
    let mut best_psnr = f64::NEG_INFINITY;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let pairs = make_dataset(&train_images, config, crop, epoch)?;
        let lr = lr_at(epoch, config);
        let mut loss_weighted = 0.0;
        for (bi, batch) in pairs.chunks(config.batch_size).enumerate() {
            model.params_mut().zero_grads();
            let loss = batch_step(model, batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            optimizer.step(model.params_mut(), lr)?;
            loss_weighted += loss * batch.len() as f64;
        }
        let train_loss = loss_weighted / pairs.len() as f64;

        let (val_psnr, val_ssim) = if val_pairs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mut psnr_sum = 0.0;
            let mut ssim_sum = 0.0;
            for pair in &val_pairs {
                let (_, restored) = model.model_forward(&pair.degraded)?;
                psnr_sum += metrics::psnr(&pair.clean, &restored)?;
                ssim_sum += metrics::ssim(&pair.clean, &restored)?;
            }
            (
                psnr_sum / val_pairs.len() as f64,
                ssim_sum / val_pairs.len() as f64,
            )
        };

        let seconds = started.elapsed().as_secs_f64();
        log::info!(
            "epoch {}/{}: lr {:.3e} loss {:.6e} val {:.2}/{:.4} ({:.1}s)",
            epoch + 1,
            config.epochs,
            lr,
            train_loss,
            val_psnr,
            val_ssim,
            seconds
        );
        report.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_psnr,
            val_ssim,
            seconds,
        });

        if !val_pairs.is_empty() && val_psnr > best_psnr {
            best_psnr = val_psnr;
            report.best_epoch = Some(epoch);
            if let Some(path) = checkpoint {
                diva::save_model(model, path)?;
            }
        }
    }

    // Without validation there is no selection signal; keep the final weights.
    if val_pairs.is_empty() {
        if let Some(path) = checkpoint {
            diva::save_model(model, path)?;
        }
    }
    Ok(report)
}

/// Crops an image down to dimensions divisible by the degradation scale.
fn trim_to_scale(image: &Image, scale: Option<u32>) -> Image {
    let Some(scale) = scale else {
        return image.clone();
    };
    let s = scale as usize;
    let h = (image.height() / s) * s;
    let w = (image.width() / s) * s;
    if h == image.height() && w == image.width() {
        image.clone()
    } else {
        image.crop_rect(0, 0, h, w)
    }
}
