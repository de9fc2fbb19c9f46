//! Dev probe: gradient magnitudes and a longer run to find where the
//! desk-scale denoiser converges.

use quip_core::degrade::DegradationSpec;
use quip_core::diva::{DivaModel, ModelConfig};
use quip_core::metrics;
use quip_core::patch::PatchGeometry;
use quip_core::train::{make_dataset, synthesize_pair, train, TrainConfig};
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
        v
    })
}

fn main() {
    let images: Vec<Image> = (0..20).map(|i| corpus_image(128, i)).collect();
    let geometry = PatchGeometry::new(7, 15).unwrap().with_stride(3).unwrap();

    // Gradient magnitudes at init.
    {
        let model = DivaModel::new(geometry, ModelConfig { init_seed: 1, ..Default::default() })
            .unwrap();
        let mut cfg = TrainConfig::new(DegradationSpec::awgn(15.0).unwrap());
        cfg.crop_size = 24;
        cfg.crops_per_image = 2;
        let pairs = make_dataset(&images, &cfg, 24, 0).unwrap();
        let mut sink = model.params().clone();
        sink.zero_grads();
        let mut loss = 0.0;
        for p in pairs.iter().take(16) {
            loss += model.loss_and_grads(&p.degraded, &p.residual, &mut sink).unwrap();
        }
        println!("init mean loss {:.4e}", loss / 16.0);
        for p in sink.iter() {
            let norm = (p.grad().iter().map(|g| g * g).sum::<f64>() / p.grad().len() as f64).sqrt();
            let vnorm =
                (p.value().iter().map(|v| v * v).sum::<f64>() / p.value().len() as f64).sqrt();
            println!("  {:<24} rms grad {:.3e}  rms value {:.3e}", p.name(), norm, vnorm);
        }
    }

    // Longer, higher-step run: does the model escape the zero plateau?
    for (label, epochs, crops, batch, lr_end) in [
        ("15ep/200crops/b16", 15usize, 200usize, 16usize, 1e-6f64),
        ("15ep/200crops/b16/lrend1e-5", 15, 200, 16, 1e-5),
    ] {
        let t0 = std::time::Instant::now();
        let mut model =
            DivaModel::new(geometry, ModelConfig { init_seed: 1, ..Default::default() }).unwrap();
        let mut cfg = TrainConfig::new(DegradationSpec::awgn(15.0).unwrap());
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        cfg.crops_per_image = crops;
        cfg.crop_size = 24;
        cfg.seed = 3;
        cfg.lr_end = lr_end;
        let report = train(&mut model, &images, &cfg, None).unwrap();
        let clean = corpus_image(128, 100);
        let pair = synthesize_pair(
            &clean,
            &DegradationSpec::awgn(15.0).unwrap().with_seed(901),
        )
        .unwrap();
        let (_, restored) = model.model_forward(&pair.degraded).unwrap();
        let gain = metrics::psnr(&clean, &restored).unwrap()
            - metrics::psnr(&clean, &pair.degraded).unwrap();
        println!(
            "{label}: loss {:.3e} -> {:.3e} (ratio {:.3}), held-out gain {gain:+.2} dB [{:.0?}]",
            report.first_loss(),
            report.final_loss(),
            report.final_loss() / report.first_loss(),
            t0.elapsed()
        );
    }
}
