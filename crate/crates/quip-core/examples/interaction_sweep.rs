//! Dev probe: sweep corpus texture, neighbor stride and interaction init to
//! find where the interaction layer's advantage emerges.

use quip_core::degrade::DegradationSpec;
use quip_core::diva::{DivaModel, InteractionSetting, ModelConfig, ProjectionKind};
use quip_core::patch::PatchGeometry;
use quip_core::synth;
use quip_core::tensor::Tensor;
use quip_core::train::{train, TrainConfig};
use quip_core::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Heavier texturing than synth::scene: global stripes plus high-frequency
/// bands, so neighbor patches inside a 15px window often repeat the center.
fn textured_scene(side: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBEEF);
    let tau = std::f64::consts::TAU;
    let base = synth::scene(side, side, seed);
    let theta: f64 = rng.random_range(0.0..tau);
    let (tc, ts) = (theta.cos(), theta.sin());
    // Period 3-6 px: neighbor offsets of a few pixels land near-in-phase.
    let freq = rng.random_range(side as f64 / 6.0..side as f64 / 3.0);
    let amp = rng.random_range(0.22..0.35);
    let phase = rng.random_range(0.0..tau);
    let theta2: f64 = rng.random_range(0.0..tau);
    let (tc2, ts2) = (theta2.cos(), theta2.sin());
    let freq2 = rng.random_range(side as f64 / 16.0..side as f64 / 10.0);
    let amp2 = rng.random_range(0.12..0.2);
    Image::from_fn(side, side, |r, c| {
        let x = (c as f64 + 0.5) / side as f64;
        let y = (r as f64 + 0.5) / side as f64;
        let u = x * tc + y * ts;
        let u2 = x * tc2 + y * ts2;
        (base.get(r, c) + amp * (tau * freq * u + phase).sin() + amp2 * (tau * freq2 * u2).sin())
            .clamp(0.02, 0.98)
    })
}

fn run(
    label: &str,
    images: &[Image],
    ns: usize,
    interaction: InteractionSetting,
    init_scale: Option<f64>,
) {
    let geometry = PatchGeometry::new(7, 15)
        .unwrap()
        .with_stride(3)
        .unwrap()
        .with_neighbor_stride(ns)
        .unwrap();
    let mut model = DivaModel::new(
        geometry,
        ModelConfig {
            interaction,
            projection: ProjectionKind::Hamiltonian,
            init_seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    if let Some(scale) = init_scale {
        if let Ok(slot) = model.params().slot("interaction.weights") {
            let shape = model.params().get(slot).value().shape().to_vec();
            let len: usize = shape.iter().product();
            let kappa = model.kappa() as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let data: Vec<f64> = (0..len)
                .map(|_| rng.random_range(0.0..scale / kappa))
                .collect();
            model
                .params_mut()
                .get_mut(slot)
                .set_value(Tensor::new(shape, data).unwrap());
        }
    }
    let mut cfg = TrainConfig::new(DegradationSpec::awgn(15.0).unwrap());
    cfg.epochs = 15;
    cfg.batch_size = 16;
    cfg.crops_per_image = 200;
    cfg.crop_size = 24;
    cfg.seed = 3;
    let t0 = std::time::Instant::now();
    let report = train(&mut model, images, &cfg, None).unwrap();
    println!(
        "{label}: kappa {} val {:.2} dB / {:.4} ssim, loss r {:.2}, last10 var {:.2e} [{:.0?}]",
        model.kappa(),
        report.best_val_psnr(),
        report.best_val_ssim(),
        report.final_loss() / report.first_loss(),
        report.loss_variance(10),
        t0.elapsed()
    );
}

fn main() {
    println!("== textured corpus ==");
    let images: Vec<Image> = (0..20).map(|i| textured_scene(128, i)).collect();
    run("full ns3", &images, 3, InteractionSetting::Learned, None);
    run("noint ns3", &images, 3, InteractionSetting::Disabled, None);
    run("full ns2", &images, 2, InteractionSetting::Learned, None);
    run("noint ns2", &images, 2, InteractionSetting::Disabled, None);
    run("full ns3 smallinit", &images, 3, InteractionSetting::Learned, Some(0.5));
}
