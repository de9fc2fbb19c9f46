//! Dev probe: grid-search De-QuIP hyperparameters at sigma = 15.

use quip_core::degrade::DegradationSpec;
use quip_core::dequip::{dequip_denoise, ThresholdRule};
use quip_core::metrics;
use quip_core::patch::PatchGeometry;
use quip_core::Image;

fn toy_natural(side: usize, seed: u64) -> Image {
    // Smooth shaded background with a few hard-edged shapes, mid-range values.
    Image::from_fn(side, side, |r, c| {
        let x = c as f64 / side as f64;
        let y = r as f64 / side as f64;
        let mut v = 0.45 + 0.25 * (3.1 * x + 0.7).sin() * (2.3 * y).cos() + 0.15 * (x - y);
        let cx = 0.3 + 0.1 * ((seed % 5) as f64);
        if (x - cx) * (x - cx) + (y - 0.4) * (y - 0.4) < 0.04 {
            v += 0.25;
        }
        if x > 0.65 && x < 0.85 && y > 0.55 && y < 0.9 {
            v -= 0.2;
        }
        v
    })
}

fn main() {
    let clean = toy_natural(96, 1);
    let noisy = DegradationSpec::awgn(15.0)
        .unwrap()
        .with_seed(11)
        .apply(&clean)
        .unwrap()
        .image;
    let input_psnr = metrics::psnr(&clean, &noisy).unwrap();
    println!("input psnr {input_psnr:.2}");

    let g = PatchGeometry::new(7, 15).unwrap().with_stride(3).unwrap();
    let mean = noisy.grid().mean();
    println!("image mean {mean:.3}");

    for p in [0.1, 0.3, 1.0] {
        for planck in [0.3, 0.6, 1.0, 2.0] {
            for margin in [0.1, 0.3, 0.6, 1.0, 2.0] {
                let cutoff = mean + planck * margin;
                let t0 = std::time::Instant::now();
                let out =
                    dequip_denoise(&noisy, g, p, planck, &ThresholdRule::hard(cutoff)).unwrap();
                let psnr = metrics::psnr(&clean, &out).unwrap();
                let gain = psnr - input_psnr;
                if gain > 0.5 {
                    println!(
                        "p {p:<4} planck {planck:<4} margin {margin:<4} cutoff {cutoff:.2}: psnr {psnr:.2} ({gain:+.2} dB) [{:?}]",
                        t0.elapsed()
                    );
                }
            }
        }
    }
}
