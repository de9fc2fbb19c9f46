//! Overlapping patch extraction, local neighbor groups, and overlap-mean
//! aggregation.

use crate::error::{Error, Result};
use crate::grid::{Grid, Image};

/// Upper-left pixel position of a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Anchor {
    pub row: usize,
    pub col: usize,
}

impl Anchor {
    pub fn new(row: usize, col: usize) -> Self {
        Anchor { row, col }
    }

    /// Euclidean distance between anchor positions.
    pub fn distance(&self, other: &Anchor) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        (dr * dr + dc * dc).sqrt()
    }
}

/// Patch and window sizing for a whole pipeline run.
///
/// `n` is the patch side (n*n pixels), `window` the local search window side,
/// `stride` the patch-grid step, `neighbor_stride` the lattice step for
/// neighbor enumeration inside the window, and `kappa_max` caps the group
/// cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    pub n: usize,
    pub window: usize,
    pub stride: usize,
    pub neighbor_stride: usize,
    pub kappa_max: usize,
}

impl PatchGeometry {
    /// Stride and neighbor stride default to n/2 (at least 1), the group
    /// cardinality cap to 16.
    pub fn new(n: usize, window: usize) -> Result<Self> {
        let g = PatchGeometry {
            n,
            window,
            stride: (n / 2).max(1),
            neighbor_stride: (n / 2).max(1),
            kappa_max: 16,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        self.stride = stride;
        self.validate()?;
        Ok(self)
    }

    pub fn with_neighbor_stride(mut self, neighbor_stride: usize) -> Result<Self> {
        self.neighbor_stride = neighbor_stride;
        self.validate()?;
        Ok(self)
    }

    pub fn with_kappa_max(mut self, kappa_max: usize) -> Result<Self> {
        self.kappa_max = kappa_max;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::BadGeometry(format!("patch side {} < 2", self.n)));
        }
        if self.window < self.n {
            return Err(Error::BadGeometry(format!(
                "window {} smaller than patch side {}",
                self.window, self.n
            )));
        }
        if self.stride == 0 || self.neighbor_stride == 0 {
            return Err(Error::BadGeometry("strides must be at least 1".into()));
        }
        if self.kappa_max < 1 {
            return Err(Error::BadGeometry("kappa_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn patch_len(&self) -> usize {
        self.n * self.n
    }

    /// Group cardinality for an image of the given extent. Uniform across
    /// all groups: the neighbor lattice inside the (clamped) window always
    /// has the same cell count.
    pub fn kappa_for(&self, height: usize, width: usize) -> usize {
        let span_r = self.window.min(height).saturating_sub(self.n);
        let span_c = self.window.min(width).saturating_sub(self.n);
        let cells = (span_r / self.neighbor_stride + 1) * (span_c / self.neighbor_stride + 1);
        cells.min(self.kappa_max)
    }

    /// Group cardinality assuming the image is at least window-sized.
    pub fn kappa(&self) -> usize {
        self.kappa_for(self.window, self.window)
    }
}

/// All patches of an image on the stride grid (plus edge-flush anchors).
#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub geometry: PatchGeometry,
    pub anchors: Vec<Anchor>,
    /// zeta x n^2 patch values, row-major.
    pub patches: Vec<f64>,
    pub image_height: usize,
    pub image_width: usize,
}

impl PatchGrid {
    pub fn zeta(&self) -> usize {
        self.anchors.len()
    }

    pub fn patch(&self, index: usize) -> &[f64] {
        let len = self.geometry.patch_len();
        &self.patches[index * len..(index + 1) * len]
    }
}

/// One patch with its neighbor set. Member 0 is the center; the others are
/// the spatially nearest lattice neighbors, ordered by (distance, row, col).
#[derive(Debug, Clone)]
pub struct LocalGroup {
    pub center: Anchor,
    pub member_anchors: Vec<Anchor>,
    /// kappa x n^2 member patch values, center first.
    pub members: Vec<f64>,
    /// Spatial anchor distances; distances[0] == 0 for the center.
    pub distances: Vec<f64>,
    patch_len: usize,
}

impl LocalGroup {
    /// Assembles a group from raw parts; lengths must be consistent and the
    /// center must come first with distance 0.
    pub fn from_parts(
        member_anchors: Vec<Anchor>,
        members: Vec<f64>,
        distances: Vec<f64>,
        patch_len: usize,
    ) -> Result<Self> {
        let kappa = member_anchors.len();
        if kappa == 0 || members.len() != kappa * patch_len || distances.len() != kappa {
            return Err(Error::BadGeometry(
                "inconsistent local group part lengths".into(),
            ));
        }
        Ok(LocalGroup {
            center: member_anchors[0],
            member_anchors,
            members,
            distances,
            patch_len,
        })
    }

    pub fn kappa(&self) -> usize {
        self.member_anchors.len()
    }

    pub fn patch_len(&self) -> usize {
        self.patch_len
    }

    pub fn member(&self, index: usize) -> &[f64] {
        &self.members[index * self.patch_len..(index + 1) * self.patch_len]
    }

    pub fn center_values(&self) -> &[f64] {
        self.member(0)
    }

    /// L[b-1][k] = |J_a[k] - J_b[k]| / D_ab^2 for the non-center members,
    /// as a (kappa-1) x n^2 row-major matrix.
    pub fn interaction_ratios(&self) -> Vec<f64> {
        let len = self.patch_len;
        let center = self.center_values();
        let mut out = Vec::with_capacity((self.kappa() - 1) * len);
        for b in 1..self.kappa() {
            let d = self.distances[b];
            let d2 = d * d;
            let row = self.member(b);
            for k in 0..len {
                out.push((center[k] - row[k]).abs() / d2);
            }
        }
        out
    }
}

/// Anchor coordinates along one axis: the stride lattice from 0 plus an
/// edge-flush anchor so the last pixels are covered.
fn axis_anchors(extent: usize, n: usize, stride: usize) -> Vec<usize> {
    let last = extent - n;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().expect("at least one anchor") != last {
        out.push(last);
    }
    out
}

/// Extracts the overlapping patch grid of an image.
pub fn extract(image: &Image, geometry: PatchGeometry) -> Result<PatchGrid> {
    let (h, w, n) = (image.height(), image.width(), geometry.n);
    if h < n || w < n {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            n,
        });
    }
    let rows = axis_anchors(h, n, geometry.stride);
    let cols = axis_anchors(w, n, geometry.stride);
    let mut anchors = Vec::with_capacity(rows.len() * cols.len());
    let mut patches = Vec::with_capacity(rows.len() * cols.len() * geometry.patch_len());
    for &r in &rows {
        for &c in &cols {
            anchors.push(Anchor::new(r, c));
            patches.extend_from_slice(&image.grid().window(r, c, n));
        }
    }
    Ok(PatchGrid {
        geometry,
        anchors,
        patches,
        image_height: h,
        image_width: w,
    })
}

/// Builds the local neighbor group of every grid patch.
///
/// Candidates lie on the neighbor-stride lattice of the window centered on
/// the patch; windows near the border are clamped flush to the image edge so
/// no synthetic pixels are read. Every group has exactly
/// `geometry.kappa_for(h, w)` members.
pub fn local_groups(grid: &PatchGrid, image: &Image) -> Result<Vec<LocalGroup>> {
    let g = grid.geometry;
    let (h, w) = (image.height(), image.width());
    if h != grid.image_height || w != grid.image_width {
        return Err(Error::BadGeometry(format!(
            "grid built for {}x{} but image is {}x{}",
            grid.image_height, grid.image_width, h, w
        )));
    }
    let kappa = g.kappa_for(h, w);
    let groups = crate::exec::map_indexed(grid.zeta(), |i| {
        let center = grid.anchors[i];
        build_group(image, g, center, kappa)
    });
    Ok(groups)
}

fn build_group(image: &Image, g: PatchGeometry, center: Anchor, kappa: usize) -> LocalGroup {
    let (h, w, n) = (image.height(), image.width(), g.n);
    let row0 = window_start(center.row, g.n, g.window, h);
    let col0 = window_start(center.col, g.n, g.window, w);
    let span_r = g.window.min(h) - n;
    let span_c = g.window.min(w) - n;

    let mut candidates: Vec<(f64, Anchor)> = Vec::new();
    for jr in 0..=span_r / g.neighbor_stride {
        for jc in 0..=span_c / g.neighbor_stride {
            let cand = Anchor::new(
                row0 + jr * g.neighbor_stride,
                col0 + jc * g.neighbor_stride,
            );
            if cand != center {
                candidates.push((center.distance(&cand), cand));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then(a.1.row.cmp(&b.1.row))
            .then(a.1.col.cmp(&b.1.col))
    });
    candidates.truncate(kappa - 1);

    let len = g.patch_len();
    let mut member_anchors = Vec::with_capacity(kappa);
    let mut members = Vec::with_capacity(kappa * len);
    let mut distances = Vec::with_capacity(kappa);
    member_anchors.push(center);
    members.extend_from_slice(&image.grid().window(center.row, center.col, n));
    distances.push(0.0);
    for (d, a) in candidates {
        member_anchors.push(a);
        members.extend_from_slice(&image.grid().window(a.row, a.col, n));
        distances.push(d);
    }
    LocalGroup {
        center,
        member_anchors,
        members,
        distances,
        patch_len: len,
    }
}

/// Upper-left row/col of the window centered on a patch anchor, clamped so
/// the window stays inside the image.
fn window_start(anchor: usize, n: usize, window: usize, extent: usize) -> usize {
    if extent <= window {
        return 0;
    }
    let half = (window - n) / 2;
    anchor.saturating_sub(half).min(extent - window)
}

/// Sums patch contributions per pixel along with coverage counts.
pub(crate) fn accumulate(
    anchors: &[Anchor],
    n: usize,
    height: usize,
    width: usize,
    values: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = n * n;
    assert_eq!(values.len(), anchors.len() * len);
    let mut sums = vec![0.0; height * width];
    let mut counts = vec![0.0; height * width];
    for (i, a) in anchors.iter().enumerate() {
        if a.row + n > height || a.col + n > width {
            return Err(Error::AnchorOutOfBounds {
                row: a.row,
                col: a.col,
                n,
                height,
                width,
            });
        }
        let patch = &values[i * len..(i + 1) * len];
        for pr in 0..n {
            for pc in 0..n {
                let px = (a.row + pr) * width + (a.col + pc);
                sums[px] += patch[pr * n + pc];
                counts[px] += 1.0;
            }
        }
    }
    Ok((sums, counts))
}

pub(crate) fn coverage_counts(anchors: &[Anchor], n: usize, height: usize, width: usize) -> Vec<f64> {
    let mut counts = vec![0.0; height * width];
    for a in anchors {
        for pr in 0..n {
            for pc in 0..n {
                counts[(a.row + pr) * width + (a.col + pc)] += 1.0;
            }
        }
    }
    counts
}

/// Overlap-mean aggregation to a raw grid (no range clipping); pixels must
/// be covered by at least one patch.
pub fn aggregate_values(
    values: &[f64],
    anchors: &[Anchor],
    patch_side: usize,
    height: usize,
    width: usize,
) -> Result<Grid> {
    let (sums, counts) = accumulate(anchors, patch_side, height, width, values)?;
    let mut out = vec![0.0; height * width];
    for (i, (s, c)) in sums.iter().zip(&counts).enumerate() {
        if *c == 0.0 {
            return Err(Error::BadGeometry(format!("pixel {i} not covered by any patch")));
        }
        out[i] = s / c;
    }
    Ok(Grid::new(height, width, out))
}

/// Overlap-mean aggregation clipped to a valid image.
pub fn aggregate(
    values: &[f64],
    anchors: &[Anchor],
    patch_side: usize,
    height: usize,
    width: usize,
) -> Result<Image> {
    Ok(Image::from_grid_clipped(aggregate_values(
        values, anchors, patch_side, height, width,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_image(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |r, c| ((r * w + c) as f64) / ((h * w) as f64))
    }

    #[test]
    fn extract_4x4_stride_2() {
        let img = ramp_image(4, 4);
        let g = PatchGeometry::new(2, 2).unwrap().with_stride(2).unwrap();
        let grid = extract(&img, g).unwrap();
        assert_eq!(grid.zeta(), 4);
        let expect = [(0, 0), (0, 2), (2, 0), (2, 2)];
        for (a, (r, c)) in grid.anchors.iter().zip(expect) {
            assert_eq!((a.row, a.col), (r, c));
        }
    }

    #[test]
    fn extract_degenerate_single_patch() {
        let img = ramp_image(3, 3);
        let g = PatchGeometry::new(3, 3).unwrap().with_stride(7).unwrap();
        let grid = extract(&img, g).unwrap();
        assert_eq!(grid.zeta(), 1);
        assert_eq!(grid.patch(0), img.values());
    }

    #[test]
    fn extract_5x5_edge_flush() {
        let img = ramp_image(5, 5);
        let g = PatchGeometry::new(2, 2).unwrap().with_stride(2).unwrap();
        let grid = extract(&img, g).unwrap();
        assert_eq!(grid.zeta(), 9);
        let has = |r, c| grid.anchors.contains(&Anchor::new(r, c));
        assert!(has(0, 3) && has(3, 0) && has(3, 3));
    }

    #[test]
    fn extract_rejects_small_image() {
        let img = ramp_image(3, 3);
        let g = PatchGeometry::new(4, 4).unwrap();
        assert!(matches!(extract(&img, g), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn window_equals_patch_gives_singleton_groups() {
        let img = ramp_image(6, 6);
        let g = PatchGeometry::new(2, 2).unwrap().with_stride(2).unwrap();
        let grid = extract(&img, g).unwrap();
        let groups = local_groups(&grid, &img).unwrap();
        for gr in &groups {
            assert_eq!(gr.kappa(), 1);
            assert!(gr.interaction_ratios().is_empty());
        }
    }

    #[test]
    fn interior_group_distances() {
        let img = ramp_image(6, 6);
        let g = PatchGeometry::new(2, 6)
            .unwrap()
            .with_stride(2)
            .unwrap()
            .with_neighbor_stride(2)
            .unwrap();
        let grid = extract(&img, g).unwrap();
        let groups = local_groups(&grid, &img).unwrap();
        let center = groups
            .iter()
            .find(|gr| gr.center == Anchor::new(2, 2))
            .expect("center group");
        assert_eq!(center.kappa(), 9);
        let idx = center
            .member_anchors
            .iter()
            .position(|a| *a == Anchor::new(0, 0))
            .expect("corner neighbor");
        assert!((center.distances[idx] - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn groups_have_uniform_kappa() {
        let img = ramp_image(10, 10);
        let g = PatchGeometry::new(3, 7).unwrap().with_neighbor_stride(2).unwrap();
        let grid = extract(&img, g).unwrap();
        let groups = local_groups(&grid, &img).unwrap();
        let k = g.kappa_for(10, 10);
        // Lattice span (7-3)/2+1 = 3 per axis; 9 cells capped at 9.
        assert_eq!(k, 9);
        for gr in &groups {
            assert_eq!(gr.kappa(), k);
            // All members distinct, no zero distance off-center.
            for b in 1..gr.kappa() {
                assert!(gr.distances[b] > 0.0);
            }
        }
    }

    #[test]
    fn kappa_max_caps_group_size() {
        let img = ramp_image(12, 12);
        let g = PatchGeometry::new(3, 9)
            .unwrap()
            .with_neighbor_stride(1)
            .unwrap()
            .with_kappa_max(5)
            .unwrap();
        let grid = extract(&img, g).unwrap();
        let groups = local_groups(&grid, &img).unwrap();
        for gr in &groups {
            assert_eq!(gr.kappa(), 5);
        }
    }

    #[test]
    fn distance_symmetry() {
        let a = Anchor::new(1, 5);
        let b = Anchor::new(4, 2);
        assert_eq!(a.distance(&b).to_bits(), b.distance(&a).to_bits());
    }

    #[test]
    fn aggregate_round_trip_is_identity() {
        let img = ramp_image(8, 8);
        for (n, stride) in [(2, 1), (3, 2), (3, 3), (4, 3)] {
            let g = PatchGeometry::new(n, n).unwrap().with_stride(stride).unwrap();
            let grid = extract(&img, g).unwrap();
            let out = aggregate(&grid.patches, &grid.anchors, n, 8, 8).unwrap();
            for (a, b) in out.values().iter().zip(img.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overlapping_constant_patches_average() {
        // Two 2x2 patches sharing a 2x1 column: shared pixels get (0+1)/2.
        let anchors = [Anchor::new(0, 0), Anchor::new(0, 1)];
        let values = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let out = aggregate(&values, &anchors, 2, 2, 3).unwrap();
        assert_eq!(out.get(0, 1), 0.5);
        assert_eq!(out.get(1, 1), 0.5);
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.get(0, 2), 1.0);
    }

    #[test]
    fn aggregate_rejects_out_of_bounds_anchor() {
        let anchors = [Anchor::new(3, 3)];
        let values = [0.0; 4];
        assert!(matches!(
            aggregate(&values, &anchors, 2, 4, 4),
            Err(Error::AnchorOutOfBounds { .. })
        ));
    }

    #[test]
    fn round_trip_random_images_stride_1() {
        use rand::{Rng, SeedableRng};
        for seed in 0..5u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = Image::from_fn(9, 7, |_, _| rng.random::<f64>());
            let g = PatchGeometry::new(3, 3).unwrap().with_stride(1).unwrap();
            let grid = extract(&img, g).unwrap();
            let out = aggregate(&grid.patches, &grid.anchors, 3, 9, 7).unwrap();
            let max_err = out
                .values()
                .iter()
                .zip(img.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_err < 1e-12, "seed {seed}: {max_err}");
        }
    }
}
