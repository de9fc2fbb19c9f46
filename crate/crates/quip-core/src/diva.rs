//! The unfolded networks: DIVA (denoising) and DIVA-A (restoration).
//!
//! Every classical step becomes a differentiable layer over shared learnable
//! parameters: the interaction layer re-weights neighbor similarity ratios,
//! the projection layer applies a data-dependent Hamiltonian-structured
//! kernel, a ReLU thresholds the coefficients, a dense map inverts the
//! projection, and (for DIVA-A) three convolutions neutralize the
//! degradation operator. The aggregated output is the predicted residual;
//! the restored image is the input minus that residual.
//!
//! Parameters are shared across all patches: per-patch behavior comes from
//! the patch values and interactions inside the projection kernel, which is
//! the only reading that keeps the parameter set a fixed size independent of
//! the image.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, Image};
use crate::patch::{self, LocalGroup, PatchGeometry};
use crate::tensor::{Padding, ParamSet, Tape, Tensor, Var};

/// Denoise = identity degradation operator; Restore adds the neutralization
/// stage for non-identity operators (blur, downsampling, masking).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskMode {
    Denoise,
    Restore,
}

/// Whether the interaction layer is learned or frozen at zero (the
/// single-particle ablation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionSetting {
    Learned,
    Disabled,
}

/// Projection kernel structure: the Hamiltonian-shaped data-dependent
/// operator, or a plain learned 3x3 convolution per depth (the structure
/// ablation; parameter count per depth stays comparable).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Hamiltonian,
    Conv,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct ModelConfig {
    /// Projection layer depth; 2 balances accuracy against cost.
    pub depth: usize,
    /// Neutralization feature width (DIVA-A only).
    pub feature_width: usize,
    pub mode: TaskMode,
    pub interaction: InteractionSetting,
    pub projection: ProjectionKind,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            depth: 2,
            feature_width: 64,
            mode: TaskMode::Denoise,
            interaction: InteractionSetting::Learned,
            projection: ProjectionKind::Hamiltonian,
            init_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct NeutralSlots {
    kernel1: usize,
    bias1: usize,
    kernel2: usize,
    bias2: usize,
    kernel3: usize,
    bias3: usize,
}

#[derive(Debug, Clone)]
struct Slots {
    interaction_weights: Option<usize>,
    interaction_bias: Option<usize>,
    projection_eta: Vec<usize>,
    projection_conv: Vec<usize>,
    projection_bias: Vec<usize>,
    inverse_matrix: usize,
    inverse_bias: usize,
    neutral: Option<NeutralSlots>,
}

/// A DIVA or DIVA-A network with its full learnable parameter set.
#[derive(Debug, Clone)]
pub struct DivaModel {
    geometry: PatchGeometry,
    config: ModelConfig,
    kappa: usize,
    params: ParamSet,
    slots: Slots,
}

impl DivaModel {
    /// Builds a freshly initialized model. Interaction weights start
    /// uniform in (0, 2/kappa) — nonnegative like the physical constant they
    /// generalize — planck scalars uniform in (0, 0.1), dense kernels
    /// fan-in-scaled uniform, biases zero.
    pub fn new(geometry: PatchGeometry, config: ModelConfig) -> Result<Self> {
        if config.depth == 0 {
            return Err(Error::BadGeometry("projection depth must be >= 1".into()));
        }
        if config.mode == TaskMode::Restore && config.feature_width == 0 {
            return Err(Error::BadGeometry("feature width must be >= 1".into()));
        }
        if config.projection == ProjectionKind::Conv
            && config.interaction == InteractionSetting::Learned
        {
            return Err(Error::BadGeometry(
                "a plain conv projection has no pathway for the interaction \
                 layer; disable the interaction"
                    .into(),
            ));
        }
        let kappa = geometry.kappa();
        let n2 = geometry.patch_len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamSet::new();

        let uniform = |rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..len).map(|_| rng.random_range(lo..hi)).collect()
        };

        let (interaction_weights, interaction_bias) = match config.interaction {
            InteractionSetting::Learned => {
                let w = if kappa >= 2 {
                    let data = uniform(&mut rng, (kappa - 1) * n2, 0.0, 2.0 / kappa as f64);
                    Some(params.add(
                        "interaction.weights",
                        Tensor::new(vec![kappa - 1, n2], data)?,
                    )?)
                } else {
                    None
                };
                let b = Some(params.add("interaction.bias", Tensor::zeros(vec![n2]))?);
                (w, b)
            }
            InteractionSetting::Disabled => (None, None),
        };

        let mut projection_eta = Vec::new();
        let mut projection_conv = Vec::new();
        let mut projection_bias = Vec::new();
        for l in 0..config.depth {
            match config.projection {
                ProjectionKind::Hamiltonian => {
                    let eta = uniform(&mut rng, 1, 0.0, 0.1);
                    projection_eta.push(params.add(
                        format!("projection.{l}.planck"),
                        Tensor::new(vec![1], eta)?,
                    )?);
                }
                ProjectionKind::Conv => {
                    let bound = 1.0 / 3.0;
                    let data = uniform(&mut rng, 9, -bound, bound);
                    projection_conv.push(params.add(
                        format!("projection.{l}.kernel"),
                        Tensor::new(vec![1, 1, 3, 3], data)?,
                    )?);
                }
            }
            projection_bias.push(params.add(
                format!("projection.{l}.bias"),
                Tensor::zeros(vec![n2]),
            )?);
        }

        let bound = 1.0 / (n2 as f64).sqrt();
        let inverse_matrix = params.add(
            "inverse.matrix",
            Tensor::new(vec![n2, n2], uniform(&mut rng, n2 * n2, -bound, bound))?,
        )?;
        let inverse_bias = params.add("inverse.bias", Tensor::zeros(vec![n2]))?;

        let neutral = if config.mode == TaskMode::Restore {
            let f = config.feature_width;
            let b1 = 1.0 / (9.0f64).sqrt();
            let bf = 1.0 / (9.0 * f as f64).sqrt();
            Some(NeutralSlots {
                kernel1: params.add(
                    "neutralize.conv1.kernel",
                    Tensor::new(vec![f, 1, 3, 3], uniform(&mut rng, f * 9, -b1, b1))?,
                )?,
                bias1: params.add("neutralize.conv1.bias", Tensor::zeros(vec![f]))?,
                kernel2: params.add(
                    "neutralize.conv2.kernel",
                    Tensor::new(vec![f, f, 3, 3], uniform(&mut rng, f * f * 9, -bf, bf))?,
                )?,
                bias2: params.add("neutralize.conv2.bias", Tensor::zeros(vec![f]))?,
                kernel3: params.add(
                    "neutralize.conv3.kernel",
                    Tensor::new(vec![1, f, 3, 3], uniform(&mut rng, f * 9, -bf, bf))?,
                )?,
                bias3: params.add("neutralize.conv3.bias", Tensor::zeros(vec![1]))?,
            })
        } else {
            None
        };

        Ok(DivaModel {
            geometry,
            config,
            kappa,
            params,
            slots: Slots {
                interaction_weights,
                interaction_bias,
                projection_eta,
                projection_conv,
                projection_bias,
                inverse_matrix,
                inverse_bias,
                neutral,
            },
        })
    }

    pub fn geometry(&self) -> PatchGeometry {
        self.geometry
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Group cardinality the model was built for.
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Total scalar parameter count.
    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.value().len()).sum()
    }

    /// Sets every parameter to zero (useful as the no-op model: the inverse
    /// projection then kills every patch and the residual is zero).
    pub fn zero_params(&mut self) {
        for slot in 0..self.params.len() {
            let shape = self.params.get(slot).value().shape().to_vec();
            self.params.get_mut(slot).set_value(Tensor::zeros(shape));
        }
    }

    /// Clone with parameter values copied from a slot-aligned set.
    pub fn with_param_values(&self, values: &ParamSet) -> DivaModel {
        let mut m = self.clone();
        for slot in 0..m.params.len() {
            let v = values.get(slot).value().clone();
            m.params.get_mut(slot).set_value(v);
        }
        m
    }

    /// Learned interaction of one local group: ReLU(sum_b w[b] * L[b] + bias)
    /// where L[b] holds the center-vs-neighbor similarity ratios. With the
    /// layer disabled this is a frozen zero vector.
    pub fn interaction_forward(&self, tape: &mut Tape, group: &LocalGroup) -> Result<Var> {
        if group.kappa() != self.kappa {
            return Err(Error::GroupCardinalityMismatch {
                got: group.kappa(),
                expected: self.kappa,
            });
        }
        let n2 = self.geometry.patch_len();
        if self.config.interaction == InteractionSetting::Disabled {
            return Ok(tape.constant(Tensor::zeros(vec![n2])));
        }
        let bias = tape.param(&self.params, self.slots.interaction_bias.expect("bias slot"));
        let pre = match self.slots.interaction_weights {
            Some(weights_slot) => {
                let ratios = tape.constant(Tensor::new(
                    vec![self.kappa - 1, n2],
                    group.interaction_ratios(),
                )?);
                let w = tape.param(&self.params, weights_slot);
                let weighted = tape.mul(w, ratios)?;
                let sums = tape.sum_rows(weighted)?;
                tape.add(sums, bias)?
            }
            // kappa == 1: no neighbors, only the bias.
            None => bias,
        };
        Ok(tape.relu(pre))
    }

    /// Depth-d projection with the data-dependent kernel
    /// H_l = eta_l * Lap + diag(patch + interaction): ReLU between depths,
    /// linear output at the last depth.
    pub fn projection_forward(&self, tape: &mut Tape, patch: Var, interaction: Var) -> Result<Var> {
        let n = self.geometry.n;
        let potential = tape.add(patch, interaction)?;
        let mut z = patch;
        for l in 0..self.config.depth {
            let applied = match self.config.projection {
                ProjectionKind::Hamiltonian => {
                    let lap = tape.laplacian(z, n)?;
                    let eta = tape.param(&self.params, self.slots.projection_eta[l]);
                    let diffusion = tape.scale(lap, eta)?;
                    let pointwise = tape.mul(potential, z)?;
                    tape.add(diffusion, pointwise)?
                }
                ProjectionKind::Conv => {
                    let kernel = tape.param(&self.params, self.slots.projection_conv[l]);
                    let zero_bias = tape.constant(Tensor::zeros(vec![1]));
                    let as_map = tape.reshape(z, vec![1, n, n])?;
                    let convolved = tape.conv2d(as_map, kernel, zero_bias, Padding::Zero)?;
                    tape.reshape(convolved, vec![n * n])?
                }
            };
            let bias = tape.param(&self.params, self.slots.projection_bias[l]);
            let with_bias = tape.add(applied, bias)?;
            z = if l + 1 < self.config.depth {
                tape.relu(with_bias)
            } else {
                with_bias
            };
        }
        Ok(z)
    }

    /// ReLU thresholding of projection coefficients.
    pub fn threshold_forward(&self, tape: &mut Tape, coefficients: Var) -> Var {
        tape.relu(coefficients)
    }

    /// Dense inverse projection, learned independently of the projection.
    pub fn inverse_projection_forward(&self, tape: &mut Tape, kept: Var) -> Result<Var> {
        let m = tape.param(&self.params, self.slots.inverse_matrix);
        let out = tape.matmul(m, kept)?;
        let bias = tape.param(&self.params, self.slots.inverse_bias);
        tape.add(out, bias)
    }

    /// Degradation neutralization: conv(1->F), ReLU, conv(F->F), conv(F->1),
    /// all 3x3 zero-padded on the patch grid.
    pub fn neutralization_forward(&self, tape: &mut Tape, patch_vec: Var) -> Result<Var> {
        let n = self.geometry.n;
        let slots = self
            .slots
            .neutral
            .as_ref()
            .expect("neutralization requires restore mode");
        let as_map = tape.reshape(patch_vec, vec![1, n, n])?;
        let k1 = tape.param(&self.params, slots.kernel1);
        let b1 = tape.param(&self.params, slots.bias1);
        let c1 = tape.conv2d(as_map, k1, b1, Padding::Zero)?;
        let r1 = tape.relu(c1);
        let k2 = tape.param(&self.params, slots.kernel2);
        let b2 = tape.param(&self.params, slots.bias2);
        let c2 = tape.conv2d(r1, k2, b2, Padding::Zero)?;
        let k3 = tape.param(&self.params, slots.kernel3);
        let b3 = tape.param(&self.params, slots.bias3);
        let c3 = tape.conv2d(c2, k3, b3, Padding::Zero)?;
        tape.reshape(c3, vec![n * n])
    }

    /// Full per-patch pipeline producing that patch's predicted residual.
    pub fn patch_residual(&self, tape: &mut Tape, group: &LocalGroup) -> Result<Var> {
        let patch = tape.constant(Tensor::from_vec(group.center_values().to_vec()));
        let interaction = self.interaction_forward(tape, group)?;
        let coefficients = self.projection_forward(tape, patch, interaction)?;
        let kept = self.threshold_forward(tape, coefficients);
        let inverted = self.inverse_projection_forward(tape, kept)?;
        if self.config.mode == TaskMode::Restore {
            self.neutralization_forward(tape, inverted)
        } else {
            Ok(inverted)
        }
    }

    /// Residual over a full pixel grid, differentiable through every layer.
    pub fn forward_groups(
        &self,
        tape: &mut Tape,
        groups: &[LocalGroup],
        anchors: &[patch::Anchor],
        height: usize,
        width: usize,
    ) -> Result<Var> {
        let n2 = self.geometry.patch_len();
        let mut residuals = Vec::with_capacity(groups.len());
        for group in groups {
            residuals.push(self.patch_residual(tape, group)?);
        }
        let flat = tape.concat(&residuals)?;
        let stacked = tape.reshape(flat, vec![groups.len(), n2])?;
        tape.aggregate_patches(stacked, anchors, self.geometry.n, height, width)
    }

    fn check_image(&self, image: &Image) -> Result<()> {
        let (h, w) = (image.height(), image.width());
        if h < self.geometry.window || w < self.geometry.window {
            return Err(Error::ImageSmallerThanWindow {
                height: h,
                width: w,
                window: self.geometry.window,
            });
        }
        Ok(())
    }

    /// Inference: predicted residual and clipped restored image.
    ///
    /// Patches are evaluated in fixed-size chunks (parallel across chunks,
    /// deterministic assembly order) on throwaway tapes.
    pub fn model_forward(&self, image: &Image) -> Result<(Grid, Image)> {
        self.check_image(image)?;
        let grid = patch::extract(image, self.geometry)?;
        let groups = patch::local_groups(&grid, image)?;
        let n2 = self.geometry.patch_len();

        const CHUNK: usize = 64;
        let chunk_count = groups.len().div_ceil(CHUNK);
        let chunks: Vec<Vec<f64>> = crate::exec::try_map_indexed(chunk_count, |ci| -> Result<Vec<f64>> {
            let start = ci * CHUNK;
            let end = (start + CHUNK).min(groups.len());
            let mut tape = Tape::new();
            let mut out = Vec::with_capacity((end - start) * n2);
            for group in &groups[start..end] {
                let v = self.patch_residual(&mut tape, group)?;
                out.extend_from_slice(tape.value(v).data());
            }
            Ok(out)
        })?;
        let mut flat = Vec::with_capacity(groups.len() * n2);
        for c in chunks {
            flat.extend(c);
        }
        let residual = patch::aggregate_values(
            &flat,
            &grid.anchors,
            self.geometry.n,
            image.height(),
            image.width(),
        )?;
        let restored = Image::from_grid_clipped(image.grid().sub(&residual)?);
        Ok((residual, restored))
    }

    /// Scalar residual loss of one degraded/target pair on a fresh tape,
    /// with gradients accumulated into `sink` (slot-aligned with this
    /// model's parameters).
    pub fn loss_and_grads(&self, input: &Image, target: &Grid, sink: &mut ParamSet) -> Result<f64> {
        let mut tape = Tape::new();
        let loss = self.loss_on_tape(&mut tape, input, target)?;
        let value = tape.value(loss).item();
        tape.backward(loss, sink)?;
        Ok(value)
    }

    /// Forward-only loss evaluation.
    pub fn loss_value(&self, input: &Image, target: &Grid) -> Result<f64> {
        let mut tape = Tape::new();
        let loss = self.loss_on_tape(&mut tape, input, target)?;
        Ok(tape.value(loss).item())
    }

    fn loss_on_tape(&self, tape: &mut Tape, input: &Image, target: &Grid) -> Result<Var> {
        self.check_image(input)?;
        if target.height() != input.height() || target.width() != input.width() {
            return Err(Error::ShapeMismatch {
                op: "residual_loss",
                lhs: vec![input.height(), input.width()],
                rhs: vec![target.height(), target.width()],
            });
        }
        let grid = patch::extract(input, self.geometry)?;
        let groups = patch::local_groups(&grid, input)?;
        let residual =
            self.forward_groups(tape, &groups, &grid.anchors, input.height(), input.width())?;
        let target_var = tape.constant(Tensor::new(
            vec![target.height(), target.width()],
            target.values().to_vec(),
        )?);
        let diff = tape.sub(residual, target_var)?;
        let squared = tape.square(diff);
        Ok(tape.mean(squared))
    }
}

/// Compares every parameter gradient of the model's residual loss against
/// central finite differences; returns one worst-case entry per parameter.
pub fn gradcheck_model(
    model: &DivaModel,
    input: &Image,
    target: &Grid,
) -> Result<Vec<crate::gradcheck::ParamCheck>> {
    let mut scratch = model.params().clone();
    scratch.zero_grads();
    model.loss_and_grads(input, target, &mut scratch)?;
    crate::gradcheck::check_all(&mut scratch, |ps| {
        model.with_param_values(ps).loss_value(input, target)
    })
}

/// One labeled section of the end-to-end gradient suite.
pub struct GradcheckGroup {
    pub label: String,
    pub checks: Vec<crate::gradcheck::ParamCheck>,
}

/// The standard end-to-end finite-difference suite: an 8x8 image, 3x3
/// patches in a 7-pixel window with group size capped at 4, depth 2, run
/// with and without the neutralization stage.
pub fn standard_gradcheck(seed: u64) -> Result<Vec<GradcheckGroup>> {
    let geometry = PatchGeometry::new(3, 7)?
        .with_stride(2)?
        .with_neighbor_stride(1)?
        .with_kappa_max(4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = Image::from_fn(8, 8, |_, _| rng.random_range(0.1..0.9));
    let noisy = crate::degrade::DegradationSpec::awgn(25.0)?
        .with_seed(seed ^ 0x5EED)
        .apply(&clean)?
        .image;
    let target = noisy.grid().sub(clean.grid())?;

    let mut groups = Vec::new();
    for (label, mode, feature_width) in [
        ("denoise", TaskMode::Denoise, 0usize),
        ("restore+neutralization", TaskMode::Restore, 3),
    ] {
        let model = DivaModel::new(
            geometry,
            ModelConfig {
                depth: 2,
                feature_width,
                mode,
                init_seed: seed,
                ..ModelConfig::default()
            },
        )?;
        groups.push(GradcheckGroup {
            label: label.to_string(),
            checks: gradcheck_model(&model, &noisy, &target)?,
        });
    }
    Ok(groups)
}

// --- DIVA1 weight container ---------------------------------------------
//
// Layout (all integers little-endian):
//   magic   5 bytes  "DIVA1"
//   version u8       1
//   mode    u8       0 = denoise, 1 = restore
//   flags   u8       bit 0: interaction disabled, bit 1: conv projection
//   n, window, stride, neighbor_stride, kappa_max, depth, feature_width
//           u32 x 7
//   count   u32      number of parameter blocks
//   blocks  count x [ name_len u32, name utf-8, ndim u32, dims u32 x ndim,
//                     values f64-le x prod(dims) ]

const MAGIC: &[u8; 5] = b"DIVA1";
const FORMAT_VERSION: u8 = 1;

/// Serializes a model to the DIVA1 container.
pub fn save_model(model: &DivaModel, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.push(match model.config.mode {
        TaskMode::Denoise => 0,
        TaskMode::Restore => 1,
    });
    let mut flags = 0u8;
    if model.config.interaction == InteractionSetting::Disabled {
        flags |= 1;
    }
    if model.config.projection == ProjectionKind::Conv {
        flags |= 2;
    }
    out.push(flags);
    let g = model.geometry;
    for v in [
        g.n,
        g.window,
        g.stride,
        g.neighbor_stride,
        g.kappa_max,
        model.config.depth,
        model.config.feature_width,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for p in model.params.iter() {
        let name = p.name().as_bytes();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        let shape = p.value().shape();
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value().data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Loads a DIVA1 container; validates the magic, geometry, and that the
/// parameter blocks match the architecture exactly.
pub fn load_model(path: &Path) -> Result<DivaModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    let take = |cursor: &mut usize, len: usize| -> Result<&[u8]> {
        if *cursor + len > bytes.len() {
            return Err(Error::BadModelFile("truncated file".into()));
        }
        let s = &bytes[*cursor..*cursor + len];
        *cursor += len;
        Ok(s)
    };
    let take_u32 = |cursor: &mut usize| -> Result<u32> {
        let b = take(cursor, 4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };

    if take(&mut cursor, 5)? != MAGIC {
        return Err(Error::BadModelFile("bad magic string".into()));
    }
    let version = take(&mut cursor, 1)?[0];
    if version != FORMAT_VERSION {
        return Err(Error::BadModelFile(format!("unsupported version {version}")));
    }
    let mode = match take(&mut cursor, 1)?[0] {
        0 => TaskMode::Denoise,
        1 => TaskMode::Restore,
        m => return Err(Error::BadModelFile(format!("unknown mode {m}"))),
    };
    let flags = take(&mut cursor, 1)?[0];

    let mut dims = [0usize; 7];
    for d in dims.iter_mut() {
        *d = take_u32(&mut cursor)? as usize;
    }
    let [n, window, stride, neighbor_stride, kappa_max, depth, feature_width] = dims;
    let geometry = PatchGeometry::new(n, window)
        .and_then(|g| g.with_stride(stride))
        .and_then(|g| g.with_neighbor_stride(neighbor_stride))
        .and_then(|g| g.with_kappa_max(kappa_max))
        .map_err(|e| Error::BadModelFile(format!("invalid geometry: {e}")))?;
    let config = ModelConfig {
        depth,
        feature_width,
        mode,
        interaction: if flags & 1 != 0 {
            InteractionSetting::Disabled
        } else {
            InteractionSetting::Learned
        },
        projection: if flags & 2 != 0 {
            ProjectionKind::Conv
        } else {
            ProjectionKind::Hamiltonian
        },
        init_seed: 0,
    };
    let mut model = DivaModel::new(geometry, config)
        .map_err(|e| Error::BadModelFile(format!("invalid architecture: {e}")))?;

    let count = take_u32(&mut cursor)? as usize;
    if count != model.params.len() {
        return Err(Error::BadModelFile(format!(
            "{count} parameter blocks, architecture has {}",
            model.params.len()
        )));
    }
    for _ in 0..count {
        let name_len = take_u32(&mut cursor)? as usize;
        let name = String::from_utf8(take(&mut cursor, name_len)?.to_vec())
            .map_err(|_| Error::BadModelFile("non-utf8 parameter name".into()))?;
        let ndim = take_u32(&mut cursor)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(take_u32(&mut cursor)? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = take(&mut cursor, numel * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect();
        let slot = model
            .params
            .slot(&name)
            .map_err(|_| Error::BadModelFile(format!("unexpected parameter `{name}`")))?;
        if model.params.get(slot).value().shape() != shape.as_slice() {
            return Err(Error::BadModelFile(format!(
                "parameter `{name}` has shape {shape:?}, architecture expects {:?}",
                model.params.get(slot).value().shape()
            )));
        }
        model
            .params
            .get_mut(slot)
            .set_value(Tensor::new(shape, data).map_err(|e| Error::BadModelFile(e.to_string()))?);
    }
    if cursor != bytes.len() {
        return Err(Error::BadModelFile("trailing bytes".into()));
    }
    Ok(model)
}
