//! Patch-based image restoration: the classical De-QuIP denoiser and its
//! unfolded, trainable counterparts DIVA and DIVA-A.
//!
//! The crate is organized around the restoration pipeline:
//!
//! * [`tensor`] — dense f64 tensors, a reverse-mode tape, and ADAM;
//! * [`patch`] — overlapping patch extraction, local neighbor groups, and
//!   overlap-mean aggregation;
//! * [`dequip`] — the classical pipeline: interaction, patch Hamiltonian,
//!   adaptive eigenbasis, coefficient thresholding;
//! * [`diva`] — the unfolded networks with learnable interaction,
//!   Hamiltonian-kernel projection, inverse projection, and neutralization;
//! * [`degrade`] — noise, blur, resampling and masking synthesis;
//! * [`train`] — residual-loss training with the exponential LR schedule;
//! * [`metrics`] — PSNR and SSIM.
//!
//! Per-patch and per-sample work runs on rayon when the `parallel` feature
//! (default) is enabled; reductions stay in deterministic order either way.

pub mod degrade;
pub mod dequip;
pub mod diva;
mod error;
pub mod exec;
pub mod gradcheck;
mod grid;
pub mod laplacian;
pub mod metrics;
pub mod patch;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use grid::{Grid, Image};
