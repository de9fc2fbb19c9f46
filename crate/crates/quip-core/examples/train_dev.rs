//! Dev probe: desk-scale DIVA denoising run shaped like the acceptance
//! setup — 20 images of 128x128, n=7/W=15/depth 2, sigma 15, 15 epochs.

use quip_core::degrade::DegradationSpec;
use quip_core::diva::{DivaModel, ModelConfig};
use quip_core::metrics;
use quip_core::patch::PatchGeometry;
use quip_core::train::{synthesize_pair, train, TrainConfig};
use quip_core::Image;

fn corpus_image(side: usize, seed: u64) -> Image {
    let fx = 2.0 + (seed % 7) as f64 * 0.8;
    let fy = 1.5 + (seed % 5) as f64 * 0.9;
    let phase = seed as f64 * 0.71;
    Image::from_fn(side, side, |r, c| {
        let x = c as f64 / side as f64;
        let y = r as f64 / side as f64;
        let mut v = 0.5
            + 0.22 * (fx * x * std::f64::consts::PI + phase).sin()
                * (fy * y * std::f64::consts::PI).cos()
            + 0.12 * (x - y);
        let cx = 0.2 + 0.6 * (((seed * 29) % 17) as f64 / 17.0);
        let cy = 0.2 + 0.6 * (((seed * 13) % 19) as f64 / 19.0);
        if (x - cx) * (x - cx) + (y - cy) * (y - cy) < 0.02 + 0.01 * ((seed % 3) as f64) {
            v += if seed % 2 == 0 { 0.22 } else { -0.22 };
        }
        let bx = 0.1 + 0.5 * (((seed * 7) % 11) as f64 / 11.0);
        if x > bx && x < bx + 0.25 && y > 0.6 && y < 0.85 {
            v -= 0.15;
        }
        v
    })
}

fn main() {
    let t0 = std::time::Instant::now();
    let images: Vec<Image> = (0..20).map(|i| corpus_image(128, i)).collect();

    let geometry = PatchGeometry::new(7, 15).unwrap().with_stride(3).unwrap();
    let mut model = DivaModel::new(
        geometry,
        ModelConfig {
            init_seed: 1,
            ..ModelConfig::default()
        },
    )
    .unwrap();
    println!("kappa {}, params {}", model.kappa(), model.num_params());

    let mut cfg = TrainConfig::new(DegradationSpec::awgn(15.0).unwrap());
    cfg.epochs = 15;
    cfg.batch_size = 32;
    cfg.crops_per_image = 56;
    cfg.crop_size = 24;
    cfg.seed = 3;
    cfg.validation_fraction = 0.1;

    let report = train(&mut model, &images, &cfg, None).unwrap();
    println!(
        "first loss {:.5e}, final loss {:.5e} (ratio {:.3})",
        report.first_loss(),
        report.final_loss(),
        report.final_loss() / report.first_loss()
    );

    // Held-out check on fresh images the training never saw.
    let mut gains = Vec::new();
    for i in 100..103u64 {
        let clean = corpus_image(128, i);
        let pair = synthesize_pair(
            &clean,
            &DegradationSpec::awgn(15.0).unwrap().with_seed(900 + i),
        )
        .unwrap();
        let (_, restored) = model.model_forward(&pair.degraded).unwrap();
        let input_psnr = metrics::psnr(&clean, &pair.degraded).unwrap();
        let out_psnr = metrics::psnr(&clean, &restored).unwrap();
        println!(
            "held-out {i}: input {input_psnr:.2} dB -> restored {out_psnr:.2} dB ({:+.2})",
            out_psnr - input_psnr
        );
        gains.push(out_psnr - input_psnr);
    }
    let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;
    println!("mean gain {mean_gain:+.2} dB, total {:.1?}", t0.elapsed());
}
