//! Dev probe: ablation orderings and the DIVA-A inpainting smoke test at
//! desk scale, on the textured synthetic corpus.

use quip_core::degrade::DegradationSpec;
use quip_core::diva::{DivaModel, InteractionSetting, ModelConfig, ProjectionKind, TaskMode};
use quip_core::metrics;
use quip_core::patch::PatchGeometry;
use quip_core::synth;
use quip_core::train::{synthesize_pair, train, SigmaMode, TrainConfig, TrainReport};

fn geometry() -> PatchGeometry {
    PatchGeometry::new(7, 15).unwrap().with_stride(3).unwrap()
}

fn denoise_cfg() -> TrainConfig {
    let mut cfg = TrainConfig::new(DegradationSpec::awgn(15.0).unwrap());
    cfg.epochs = 15;
    cfg.batch_size = 16;
    cfg.crops_per_image = 200;
    cfg.crop_size = 24;
    cfg.seed = 3;
    cfg
}

fn summarize(label: &str, report: &TrainReport, t: std::time::Duration) {
    println!(
        "{label}: loss {:.3e}->{:.3e} (r {:.2}) best val {:.2} dB / {:.4} ssim, last-10 var {:.3e} [{:.0?}]",
        report.first_loss(),
        report.final_loss(),
        report.final_loss() / report.first_loss(),
        report.best_val_psnr(),
        report.best_val_ssim(),
        report.loss_variance(10),
        t
    );
}

fn main() {
    // Criterion-5-style check: AWGN sigma 25 input PSNR anchor.
    let anchors = synth::corpus(6, 96, 500);
    let mut psnr_sum = 0.0;
    for (i, img) in anchors.iter().enumerate() {
        let noisy = DegradationSpec::awgn(25.0)
            .unwrap()
            .with_seed(40 + i as u64)
            .apply(img)
            .unwrap()
            .image;
        psnr_sum += metrics::psnr(img, &noisy).unwrap();
    }
    println!("sigma-25 mean input psnr: {:.3} dB (anchor 20.2 +/- 0.3)", psnr_sum / 6.0);

    let images = synth::corpus(20, 128, 0);

    for (label, interaction, projection) in [
        ("full", InteractionSetting::Learned, ProjectionKind::Hamiltonian),
        ("no-interaction", InteractionSetting::Disabled, ProjectionKind::Hamiltonian),
        ("conv-projection", InteractionSetting::Learned, ProjectionKind::Conv),
    ] {
        let t0 = std::time::Instant::now();
        let mut model = DivaModel::new(
            geometry(),
            ModelConfig {
                interaction,
                projection,
                init_seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let report = train(&mut model, &images, &denoise_cfg(), None).unwrap();
        summarize(label, &report, t0.elapsed());
    }

    // DIVA-A inpainting smoke: 50% random mask, trimmed budget.
    let t0 = std::time::Instant::now();
    let mut model = DivaModel::new(
        geometry(),
        ModelConfig {
            mode: TaskMode::Restore,
            feature_width: 4,
            init_seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let mut cfg = denoise_cfg();
    cfg.degradation = DegradationSpec::random_mask(0.5).unwrap();
    cfg.sigma_mode = SigmaMode::Fixed(0.0);
    cfg.epochs = 12;
    cfg.crops_per_image = 120;
    let report = train(&mut model, &images, &cfg, None).unwrap();
    summarize("diva-a mask50", &report, t0.elapsed());
    for i in 100..102u64 {
        let clean = synth::scene(128, 128, i);
        let pair = synthesize_pair(
            &clean,
            &DegradationSpec::random_mask(0.5).unwrap().with_seed(700 + i),
        )
        .unwrap();
        let (_, restored) = model.model_forward(&pair.degraded).unwrap();
        let input_psnr = metrics::psnr(&clean, &pair.degraded).unwrap();
        let out_psnr = metrics::psnr(&clean, &restored).unwrap();
        println!(
            "  inpaint held-out {i}: {input_psnr:.2} -> {out_psnr:.2} dB ({:+.2})",
            out_psnr - input_psnr
        );
    }
    println!("inpaint total {:.0?}", t0.elapsed());
}
