//! The classical De-QuIP denoiser: neighbor interaction, patch Hamiltonian,
//! adaptive eigenbasis, coefficient thresholding, and aggregation.

mod eigen;

pub use eigen::{eigen_symmetric, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::laplacian;
use crate::patch::{self, LocalGroup, PatchGeometry};
use crate::tensor::Tensor;

/// Neighbor interaction terms of one local group.
#[derive(Debug, Clone)]
pub struct InteractionField {
    /// (kappa-1) x n^2 absolute pixel differences against the center patch.
    pub pixel_differences: Vec<f64>,
    /// (kappa-1) x n^2 differences divided by squared anchor distance.
    pub ratios: Vec<f64>,
    /// n^2 total interaction of the center patch.
    pub total: Vec<f64>,
    pub patch_len: usize,
}

/// Evaluates the power-law interaction of a group with a single global
/// proportionality constant.
pub fn baseline_interaction(group: &LocalGroup, p: f64) -> Result<InteractionField> {
    let len = group.patch_len();
    let kappa = group.kappa();
    let center = group.center_values();
    let mut pixel_differences = Vec::with_capacity((kappa - 1) * len);
    let mut ratios = Vec::with_capacity((kappa - 1) * len);
    for b in 1..kappa {
        let d = group.distances[b];
        if d == 0.0 {
            let a = group.member_anchors[b];
            return Err(Error::DuplicateAnchor {
                row: a.row,
                col: a.col,
            });
        }
        let d2 = d * d;
        let member = group.member(b);
        for k in 0..len {
            let diff = (center[k] - member[k]).abs();
            pixel_differences.push(diff);
            ratios.push(diff / d2);
        }
    }
    let mut sums = vec![0.0; len];
    for b in 0..kappa - 1 {
        for k in 0..len {
            sums[k] += ratios[b * len + k];
        }
    }
    let total = sums.iter().map(|s| p * s).collect();
    Ok(InteractionField {
        pixel_differences,
        ratios,
        total,
        patch_len: len,
    })
}

/// The per-patch energy operator: -planck * Lap + diag(patch + interaction).
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    pub matrix: Tensor,
    pub planck: f64,
    pub patch_side: usize,
}

/// Builds the dense Hamiltonian of a patch. `lap` must be the dense
/// [`laplacian::matrix`] for the same patch side; callers cache it across
/// patches.
pub fn build_hamiltonian(
    patch: &[f64],
    interaction: &[f64],
    planck: f64,
    patch_side: usize,
    lap: &Tensor,
) -> Result<HamiltonianMatrix> {
    let size = patch_side * patch_side;
    if patch.len() != size || interaction.len() != size || lap.shape() != [size, size] {
        return Err(Error::ShapeMismatch {
            op: "build_hamiltonian",
            lhs: vec![patch.len()],
            rhs: vec![interaction.len(), size],
        });
    }
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let mut v = -planck * lap.at(i, j);
            if i == j {
                v += patch[i] + interaction[i];
            }
            data.push(v);
        }
    }
    Ok(HamiltonianMatrix {
        matrix: Tensor::new(vec![size, size], data)?,
        planck,
        patch_side,
    })
}

/// Orthonormal eigenbasis of a patch Hamiltonian, ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct AdaptiveBasis {
    /// Column j is the eigenvector of eigenvalues[j].
    pub vectors: Tensor,
    pub eigenvalues: Vec<f64>,
}

pub fn eigendecompose(hamiltonian: &HamiltonianMatrix) -> Result<AdaptiveBasis> {
    let e = eigen_symmetric(&hamiltonian.matrix)?;
    Ok(AdaptiveBasis {
        vectors: e.vectors,
        eigenvalues: e.eigenvalues,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    Hard,
    Soft,
}

/// Energy cutoff applied to projection coefficients.
///
/// Hard mode zeroes coefficients whose eigenvalue exceeds the cutoff; soft
/// mode scales coefficient i by max(0, 1 - eigenvalue_i / cutoff).
#[derive(Debug, Clone, Copy)]
pub struct ThresholdRule {
    pub mode: ThresholdMode,
    pub energy_cutoff: f64,
}

impl ThresholdRule {
    pub fn hard(energy_cutoff: f64) -> Self {
        ThresholdRule {
            mode: ThresholdMode::Hard,
            energy_cutoff,
        }
    }

    pub fn soft(energy_cutoff: f64) -> Self {
        ThresholdRule {
            mode: ThresholdMode::Soft,
            energy_cutoff,
        }
    }

    /// Keeps every coefficient; turns the pipeline into the identity.
    pub fn keep_all() -> Self {
        ThresholdRule::hard(f64::INFINITY)
    }

    pub fn apply(&self, coefficient: f64, eigenvalue: f64) -> f64 {
        match self.mode {
            ThresholdMode::Hard => {
                if eigenvalue <= self.energy_cutoff {
                    coefficient
                } else {
                    0.0
                }
            }
            ThresholdMode::Soft => coefficient * (1.0 - eigenvalue / self.energy_cutoff).max(0.0),
        }
    }
}

/// Projects a patch onto the basis, thresholds the coefficients, and
/// reconstructs.
pub fn denoise_patch(patch: &[f64], basis: &AdaptiveBasis, rule: &ThresholdRule) -> Vec<f64> {
    let size = patch.len();
    debug_assert_eq!(basis.vectors.shape(), [size, size]);
    let mut kept = vec![0.0; size];
    for i in 0..size {
        let mut coefficient = 0.0;
        for k in 0..size {
            coefficient += basis.vectors.at(k, i) * patch[k];
        }
        kept[i] = rule.apply(coefficient, basis.eigenvalues[i]);
    }
    let mut out = vec![0.0; size];
    for k in 0..size {
        let mut acc = 0.0;
        for i in 0..size {
            acc += basis.vectors.at(k, i) * kept[i];
        }
        out[k] = acc;
    }
    out
}

/// The full classical pipeline over one image.
pub fn dequip_denoise(
    image: &Image,
    geometry: PatchGeometry,
    p: f64,
    planck: f64,
    rule: &ThresholdRule,
) -> Result<Image> {
    let grid = patch::extract(image, geometry)?;
    let groups = patch::local_groups(&grid, image)?;
    let lap = laplacian::matrix(geometry.n);
    let denoised: Vec<Vec<f64>> = crate::exec::try_map_indexed(groups.len(), |i| -> Result<Vec<f64>> {
        let group = &groups[i];
        let interaction = baseline_interaction(group, p)?;
        let h = build_hamiltonian(
            group.center_values(),
            &interaction.total,
            planck,
            geometry.n,
            &lap,
        )?;
        let basis = eigendecompose(&h)?;
        Ok(denoise_patch(group.center_values(), &basis, rule))
    })?;
    let mut flat = Vec::with_capacity(denoised.len() * geometry.patch_len());
    for p in &denoised {
        flat.extend_from_slice(p);
    }
    patch::aggregate(
        &flat,
        &grid.anchors,
        geometry.n,
        image.height(),
        image.width(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::Anchor;

    fn group_of_two(center: Vec<f64>, other: Vec<f64>, distance: f64) -> LocalGroup {
        let len = center.len();
        let mut members = center;
        members.extend(other);
        LocalGroup::from_parts(
            vec![Anchor::new(0, 0), Anchor::new(0, distance as usize)],
            members,
            vec![0.0, distance],
            len,
        )
        .unwrap()
    }

    #[test]
    fn identical_members_no_interaction() {
        let g = group_of_two(vec![0.3, 0.7], vec![0.3, 0.7], 2.0);
        let f = baseline_interaction(&g, 5.0).unwrap();
        assert_eq!(f.total, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_evaluated_two_patch_interaction() {
        let g = group_of_two(vec![0.0, 1.0], vec![1.0, 1.0], 2.0);
        let f = baseline_interaction(&g, 4.0).unwrap();
        assert_eq!(f.pixel_differences, vec![1.0, 0.0]);
        assert_eq!(f.ratios, vec![0.25, 0.0]);
        assert_eq!(f.total, vec![1.0, 0.0]);
    }

    #[test]
    fn interaction_linear_in_p() {
        let g = group_of_two(vec![0.2, 0.9], vec![0.6, 0.1], 3.0);
        let f1 = baseline_interaction(&g, 1.5).unwrap();
        let f2 = baseline_interaction(&g, 3.0).unwrap();
        for (a, b) in f1.total.iter().zip(&f2.total) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn zero_distance_member_is_error() {
        let g = group_of_two(vec![0.0, 1.0], vec![1.0, 0.0], 0.0);
        assert!(matches!(
            baseline_interaction(&g, 1.0),
            Err(Error::DuplicateAnchor { .. })
        ));
    }

    #[test]
    fn interaction_matches_brute_force_loop() {
        // Independent term-by-term evaluation over (b, k), bit-exact.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let len = 9;
            let kappa = 4;
            let mut anchors = vec![Anchor::new(10, 10)];
            let mut members: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            let mut distances = vec![0.0];
            for b in 1..kappa {
                anchors.push(Anchor::new(10 + b, 10 + 2 * b));
                members.extend((0..len).map(|_| rng.random::<f64>()));
                distances.push(anchors[0].distance(&anchors[b]));
            }
            let g = LocalGroup::from_parts(anchors, members, distances, len).unwrap();
            let p = 3.7;
            let field = baseline_interaction(&g, p).unwrap();

            let center = g.center_values();
            let mut sums = vec![0.0; len];
            for b in 1..kappa {
                let d = g.distances[b];
                let member = g.member(b);
                for k in 0..len {
                    sums[k] += (center[k] - member[k]).abs() / (d * d);
                }
            }
            for k in 0..len {
                assert_eq!((p * sums[k]).to_bits(), field.total[k].to_bits());
            }
        }
    }

    #[test]
    fn zero_planck_hamiltonian_is_diagonal() {
        let lap = laplacian::matrix(2);
        let h = build_hamiltonian(&[0.1, 0.2, 0.3, 0.4], &[0.0; 4], 0.0, 2, &lap).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.1 + 0.1 * i as f64 } else { 0.0 };
                assert!((h.matrix.at(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pure_laplacian_hamiltonian_rows_sum_zero() {
        let lap = laplacian::matrix(3);
        let h = build_hamiltonian(&[0.0; 9], &[0.0; 9], 0.7, 3, &lap).unwrap();
        for i in 0..9 {
            let sum: f64 = (0..9).map(|j| h.matrix.at(i, j)).sum();
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let lap = laplacian::matrix(3);
        let patch: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let inter: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let h = build_hamiltonian(&patch, &inter, 0.31, 3, &lap).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert!((h.matrix.at(i, j) - h.matrix.at(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negated_laplacian_ground_mode_is_constant() {
        let lap = laplacian::matrix(3);
        let h = build_hamiltonian(&[0.0; 9], &[0.0; 9], 1.0, 3, &lap).unwrap();
        let basis = eigendecompose(&h).unwrap();
        assert!(basis.eigenvalues[0].abs() < 1e-10);
        let first = basis.vectors.at(0, 0);
        assert!(first > 0.0);
        for k in 0..9 {
            assert!((basis.vectors.at(k, 0) - first).abs() < 1e-9);
        }
    }

    #[test]
    fn keep_all_round_trips_patch() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let lap = laplacian::matrix(3);
        let patch: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let h = build_hamiltonian(&patch, &[0.0; 9], 0.4, 3, &lap).unwrap();
        let basis = eigendecompose(&h).unwrap();
        let out = denoise_patch(&patch, &basis, &ThresholdRule::keep_all());
        for (a, b) in out.iter().zip(&patch) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cutoff_below_spectrum_zeroes_patch() {
        let lap = laplacian::matrix(2);
        let h = build_hamiltonian(&[0.5; 4], &[0.0; 4], 1.0, 2, &lap).unwrap();
        let basis = eigendecompose(&h).unwrap();
        let rule = ThresholdRule::hard(basis.eigenvalues[0] - 1.0);
        let out = denoise_patch(&[0.5; 4], &basis, &rule);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_patch_survives_ground_mode_only() {
        // For H = -Lap the constant patch lives entirely in the zero mode.
        let lap = laplacian::matrix(3);
        let h = build_hamiltonian(&[0.0; 9], &[0.0; 9], 1.0, 3, &lap).unwrap();
        let basis = eigendecompose(&h).unwrap();
        let rule = ThresholdRule::hard(basis.eigenvalues[0] + 1e-9);
        let patch = [0.42; 9];
        let out = denoise_patch(&patch, &basis, &rule);
        for v in &out {
            assert!((v - 0.42).abs() < 1e-10);
        }
    }

    #[test]
    fn hard_threshold_retention_is_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let eigenvalues: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..3.0)).collect();
        let retained = |cutoff: f64| {
            let rule = ThresholdRule::hard(cutoff);
            eigenvalues
                .iter()
                .filter(|&&l| rule.apply(1.0, l) != 0.0)
                .count()
        };
        let mut cutoffs: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..4.0)).collect();
        cutoffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in cutoffs.windows(2) {
            assert!(retained(w[0]) <= retained(w[1]));
        }
    }

    #[test]
    fn keep_all_pipeline_is_identity() {
        let img = Image::from_fn(10, 10, |r, c| ((r * 13 + c * 7) % 29) as f64 / 29.0);
        let g = PatchGeometry::new(3, 7).unwrap();
        let out = dequip_denoise(&img, g, 0.5, 0.1, &ThresholdRule::keep_all()).unwrap();
        for (a, b) in out.values().iter().zip(img.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma15_denoising_improves_psnr() {
        use crate::degrade::DegradationSpec;
        use crate::metrics;
        let clean = Image::from_fn(48, 48, |r, c| {
            let x = c as f64 / 48.0;
            let y = r as f64 / 48.0;
            let mut v = 0.45 + 0.25 * (3.1 * x + 0.7).sin() * (2.3 * y).cos() + 0.15 * (x - y);
            if (x - 0.3) * (x - 0.3) + (y - 0.4) * (y - 0.4) < 0.04 {
                v += 0.25;
            }
            v
        });
        let noisy = DegradationSpec::awgn(15.0)
            .unwrap()
            .with_seed(4)
            .apply(&clean)
            .unwrap()
            .image;
        let g = PatchGeometry::new(7, 15).unwrap().with_stride(3).unwrap();
        let out = dequip_denoise(&noisy, g, 0.3, 2.0, &ThresholdRule::hard(2.5)).unwrap();
        let input_psnr = metrics::psnr(&clean, &noisy).unwrap();
        let output_psnr = metrics::psnr(&clean, &out).unwrap();
        assert!(
            output_psnr > input_psnr + 2.0,
            "input {input_psnr:.2} dB, output {output_psnr:.2} dB"
        );
    }

    #[test]
    fn smoothing_reduces_variance_of_noisy_constant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let img = Image::from_fn(16, 16, |_, _| 0.5 + 0.08 * (rng.random::<f64>() - 0.5));
        let g = PatchGeometry::new(3, 7).unwrap();
        // Potential sits near 0.5 + interaction while the kinetic gap is
        // about the planck value, so a cutoff of 1.0 keeps only the smooth
        // ground modes.
        let rule = ThresholdRule::hard(1.0);
        let out = dequip_denoise(&img, g, 0.5, 1.0, &rule).unwrap();
        assert!(out.grid().variance() < img.grid().variance());
    }
}
