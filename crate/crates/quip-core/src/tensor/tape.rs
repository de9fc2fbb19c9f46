//! Single-use differentiation tape over tensor operations.
//!
//! A forward pass appends nodes; `backward` consumes the tape, walks it in
//! reverse and accumulates d(loss)/d(parameter) into the bound [`ParamSet`].
//! Node indices only ever reference earlier nodes, so one reverse sweep
//! suffices.

use std::collections::HashMap;

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::laplacian;
use crate::patch::Anchor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Boundary handling for [`Tape::conv2d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    /// Out-of-range taps read zero.
    #[default]
    Zero,
    /// Out-of-range taps reflect about the image edge.
    Reflect,
}

enum Op {
    Constant,
    Param(usize),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// Elementwise product with a one-element tensor.
    Scale(Var, Var),
    Matmul(Var, Var),
    Relu(Var),
    Abs(Var),
    Square(Var),
    Mean(Var),
    /// Column sums of a 2-D tensor; rows are added in ascending order.
    SumRows(Var),
    /// Join along axis 0; inputs must share trailing dimensions.
    Concat(Vec<Var>),
    /// Rows `[start, end)` along axis 0.
    Slice(Var, usize, usize),
    Reshape(Var),
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        padding: Padding,
    },
    /// 5-point mirrored-boundary Laplacian on an n*n vector.
    Laplacian(Var, usize),
    /// Overlap-mean patch accumulation onto an image grid.
    Aggregate {
        patches: Var,
        anchors: Vec<Anchor>,
        patch_side: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Records one forward pass; consumed by [`Tape::backward`].
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_vars: HashMap<usize, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Records a leaf tensor that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Records a parameter leaf. Repeated calls for the same slot on one
    /// tape return the same variable so gradients accumulate on one node.
    pub fn param(&mut self, params: &ParamSet, slot: usize) -> Var {
        if let Some(&v) = self.param_vars.get(&slot) {
            return v;
        }
        let v = self.push(params.get(slot).value().clone(), Op::Param(slot));
        self.param_vars.insert(slot, v);
        v
    }

    fn binary_same_shape(&mut self, op_name: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op: op_name,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    /// Elementwise product of `a` with the single value of `s`.
    pub fn scale(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::BadShape {
                op: "scale",
                shape: self.shape(s).to_vec(),
                reason: "scale factor must hold exactly one value",
            });
        }
        let factor = self.value(s).data()[0];
        let data = self.value(a).data().iter().map(|x| x * factor).collect();
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(t, Op::Scale(a, s)))
    }

    /// `(m,k) x (k,n) -> (m,n)` or `(m,k) x (k) -> (m)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ash, bsh) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if ash.len() != 2 || (bsh.len() != 1 && bsh.len() != 2) || ash[1] != bsh[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: ash,
                rhs: bsh,
            });
        }
        let (m, k) = (ash[0], ash[1]);
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let t = if bsh.len() == 1 {
            let mut out = vec![0.0; m];
            for i in 0..m {
                let mut acc = 0.0;
                for j in 0..k {
                    acc += av[i * k + j] * bv[j];
                }
                out[i] = acc;
            }
            Tensor::new(vec![m], out)?
        } else {
            let n = bsh[1];
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..k {
                    let x = av[i * k + j];
                    for c in 0..n {
                        out[i * n + c] += x * bv[j * n + c];
                    }
                }
            }
            Tensor::new(vec![m, n], out)?
        };
        Ok(self.push(t, Op::Matmul(a, b)))
    }

    /// max(x, 0) elementwise; the subgradient at 0 is 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let data = self.value(a).data().iter().map(|&x| x.max(0.0)).collect();
        let t = Tensor {
            shape: self.shape(a).to_vec(),
            data,
        };
        self.push(t, Op::Relu(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let data = self.value(a).data().iter().map(|x| x.abs()).collect();
        let t = Tensor {
            shape: self.shape(a).to_vec(),
            data,
        };
        self.push(t, Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let data = self.value(a).data().iter().map(|x| x * x).collect();
        let t = Tensor {
            shape: self.shape(a).to_vec(),
            data,
        };
        self.push(t, Op::Square(a))
    }

    /// Mean over all entries; result has shape [1].
    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Tensor::scalar(m), Op::Mean(a))
    }

    /// Column sums of a 2-D tensor, shape (r, c) -> (c).
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let sh = self.shape(a).to_vec();
        if sh.len() != 2 {
            return Err(Error::BadShape {
                op: "sum_rows",
                shape: sh,
                reason: "expects a 2-D tensor",
            });
        }
        let (r, c) = (sh[0], sh[1]);
        let v = self.value(a).data();
        let mut out = vec![0.0; c];
        for row in 0..r {
            for col in 0..c {
                out[col] += v[row * c + col];
            }
        }
        Ok(self.push(Tensor::new(vec![c], out)?, Op::SumRows(a)))
    }

    /// Joins tensors along axis 0; trailing dimensions must match.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(Error::BadShape {
            op: "concat",
            shape: vec![],
            reason: "needs at least one input",
        })?;
        let trailing = self.shape(*first)[1..].to_vec();
        let mut rows = 0;
        for &p in parts {
            if self.shape(p)[1..] != trailing[..] {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: self.shape(*first).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            rows += self.shape(p)[0];
        }
        let mut data = Vec::with_capacity(rows * trailing.iter().product::<usize>().max(1));
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(&trailing);
        Ok(self.push(Tensor::new(shape, data)?, Op::Concat(parts.to_vec())))
    }

    /// Rows `[start, end)` along axis 0.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let sh = self.shape(a).to_vec();
        let rows = sh[0];
        if start >= end || end > rows {
            return Err(Error::BadShape {
                op: "slice",
                shape: sh,
                reason: "row range out of bounds",
            });
        }
        let row_len: usize = sh[1..].iter().product::<usize>().max(1);
        let data = self.value(a).data()[start * row_len..end * row_len].to_vec();
        let mut shape = vec![end - start];
        shape.extend_from_slice(&sh[1..]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Slice(a, start, end)))
    }

    pub fn reshape(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != self.value(a).len() {
            return Err(Error::BadShape {
                op: "reshape",
                shape,
                reason: "element count must be preserved",
            });
        }
        let t = Tensor::new(shape, self.value(a).data().to_vec())?;
        Ok(self.push(t, Op::Reshape(a)))
    }

    /// Same-size 2-D convolution: input (ci, h, w), kernel (co, ci, kh, kw)
    /// with odd extents, bias (co), stride 1.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, padding: Padding) -> Result<Var> {
        let ish = self.shape(input).to_vec();
        let ksh = self.shape(kernel).to_vec();
        let bsh = self.shape(bias).to_vec();
        if ish.len() != 3 || ksh.len() != 4 {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: ish,
                rhs: ksh,
            });
        }
        if ksh[2] % 2 == 0 || ksh[3] % 2 == 0 {
            return Err(Error::BadShape {
                op: "conv2d",
                shape: ksh,
                reason: "kernel extents must be odd",
            });
        }
        if ksh[1] != ish[0] || bsh != [ksh[0]] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: ish,
                rhs: ksh,
            });
        }
        let (ci, h, w) = (ish[0], ish[1], ish[2]);
        let (co, kh, kw) = (ksh[0], ksh[2], ksh[3]);
        let iv = self.value(input).data();
        let kv = self.value(kernel).data();
        let bv = self.value(bias).data();
        let mut out = vec![0.0; co * h * w];
        for oc in 0..co {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bv[oc];
                    for ic in 0..ci {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let Some((iy, ix)) =
                                    pad_map(padding, y, x, ky, kx, kh, kw, h, w)
                                else {
                                    continue;
                                };
                                acc += kv[((oc * ci + ic) * kh + ky) * kw + kx]
                                    * iv[(ic * h + iy) * w + ix];
                            }
                        }
                    }
                    out[(oc * h + y) * w + x] = acc;
                }
            }
        }
        let t = Tensor::new(vec![co, h, w], out)?;
        Ok(self.push(
            t,
            Op::Conv2d {
                input,
                kernel,
                bias,
                padding,
            },
        ))
    }

    /// Applies the mirrored-boundary 5-point Laplacian to an n*n vector.
    pub fn laplacian(&mut self, a: Var, n: usize) -> Result<Var> {
        let sh = self.shape(a).to_vec();
        if sh != [n * n] {
            return Err(Error::BadShape {
                op: "laplacian",
                shape: sh,
                reason: "expects a flat n*n vector",
            });
        }
        let mut out = vec![0.0; n * n];
        laplacian::apply_stencil(n, self.value(a).data(), &mut out);
        Ok(self.push(Tensor::new(vec![n * n], out)?, Op::Laplacian(a, n)))
    }

    /// Scatters per-patch values to their anchors and divides every pixel by
    /// its coverage count. `patches` must be (count, side*side).
    pub fn aggregate_patches(
        &mut self,
        patches: Var,
        anchors: &[Anchor],
        patch_side: usize,
        height: usize,
        width: usize,
    ) -> Result<Var> {
        let sh = self.shape(patches).to_vec();
        if sh.len() != 2 || sh[0] != anchors.len() || sh[1] != patch_side * patch_side {
            return Err(Error::BadShape {
                op: "aggregate_patches",
                shape: sh,
                reason: "expects (anchor count, side*side)",
            });
        }
        let (sums, counts) =
            crate::patch::accumulate(anchors, patch_side, height, width, self.value(patches).data())?;
        let mut out = vec![0.0; height * width];
        for (i, (s, c)) in sums.iter().zip(&counts).enumerate() {
            if *c == 0.0 {
                return Err(Error::BadGeometry(format!(
                    "pixel {i} not covered by any patch"
                )));
            }
            out[i] = s / c;
        }
        let t = Tensor::new(vec![height, width], out)?;
        Ok(self.push(
            t,
            Op::Aggregate {
                patches,
                anchors: anchors.to_vec(),
                patch_side,
            },
        ))
    }

    /// Reverse sweep: accumulates d(loss)/d(parameter) into `params` for
    /// every parameter recorded on this tape. Consumes the tape.
    pub fn backward(self, loss: Var, params: &mut ParamSet) -> Result<()> {
        let nodes = self.nodes;
        if loss.0 >= nodes.len() {
            return Err(Error::NotOnTape {
                index: loss.0,
                len: nodes.len(),
            });
        }
        if nodes[loss.0].value.len() != 1 {
            return Err(Error::LossNotScalar {
                shape: nodes[loss.0].value.shape().to_vec(),
            });
        }

        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let g = g.data();
            match &nodes[i].op {
                Op::Constant => {}
                Op::Param(slot) => {
                    let t = Tensor::new(nodes[i].value.shape().to_vec(), g.to_vec())?;
                    params.accumulate_grad(*slot, &t)?;
                }
                Op::Add(a, b) => {
                    add_into(&mut grads, *a, &nodes, |d| {
                        for (o, gi) in d.iter_mut().zip(g) {
                            *o += gi;
                        }
                    });
                    add_into(&mut grads, *b, &nodes, |d| {
                        for (o, gi) in d.iter_mut().zip(g) {
                            *o += gi;
                        }
                    });
                }
                Op::Sub(a, b) => {
                    add_into(&mut grads, *a, &nodes, |d| {
                        for (o, gi) in d.iter_mut().zip(g) {
                            *o += gi;
                        }
                    });
                    add_into(&mut grads, *b, &nodes, |d| {
                        for (o, gi) in d.iter_mut().zip(g) {
                            *o -= gi;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                    add_into(&mut grads, *a, &nodes, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] * bv[k];
                        }
                    });
                    add_into(&mut grads, *b, &nodes, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] * av[k];
                        }
                    });
                }
                Op::Scale(a, s) => {
                    let factor = nodes[s.0].value.data()[0];
                    let av = nodes[a.0].value.data();
                    add_into(&mut grads, *a, &nodes, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] * factor;
                        }
                    });
                    add_into(&mut grads, *s, &nodes, |d| {
                        let mut acc = 0.0;
                        for k in 0..av.len() {
                            acc += g[k] * av[k];
                        }
                        d[0] += acc;
                    });
                }
                Op::Matmul(a, b) => {
                    let ash = nodes[a.0].value.shape();
                    let (m, k) = (ash[0], ash[1]);
                    let av = nodes[a.0].value.data();
                    let bv = nodes[b.0].value.data();
                    if nodes[b.0].value.shape().len() == 1 {
                        add_into(&mut grads, *a, &nodes, |d| {
                            for i in 0..m {
                                for j in 0..k {
                                    d[i * k + j] += g[i] * bv[j];
                                }
                            }
                        });
                        add_into(&mut grads, *b, &nodes, |d| {
                            for i in 0..m {
                                for j in 0..k {
                                    d[j] += av[i * k + j] * g[i];
                                }
                            }
                        });
                    } else {
                        let n = nodes[b.0].value.shape()[1];
                        add_into(&mut grads, *a, &nodes, |d| {
                            for i in 0..m {
                                for j in 0..k {
                                    let mut acc = 0.0;
                                    for c in 0..n {
                                        acc += g[i * n + c] * bv[j * n + c];
                                    }
                                    d[i * k + j] += acc;
                                }
                            }
                        });
                        add_into(&mut grads, *b, &nodes, |d| {
                            for i in 0..m {
                                for j in 0..k {
                                    let x = av[i * k + j];
                                    for c in 0..n {
                                        d[j * n + c] += x * g[i * n + c];
                                    }
                                }
                            }
                        });
                    }
                }
                Op::Relu(a) => {
                    let av = nodes[a.0].value.data();
                    add_into(&mut grads, *a, &nodes, |d| {
                        for k in 0..d.len() {
                            if av[k] > 0.0 {
                                d[k] += g[k];
                            }
                        }
                    });
                }
                Op::Abs(a) => {
                    let av = nodes[a.0].value.data();
                    add_into(&mut grads, *a, &nodes, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] * sign(av[k]);
                        }
                    });
                }
                Op::Square(a) => {
                    let av = nodes[a.0].value.data();
                    add_into(&mut grads, *a, &nodes, |d| {
                        for k in 0..d.len() {
                            d[k] += 2.0 * g[k] * av[k];
                        }
                    });
                }
                Op::Mean(a) => {
                    let n = nodes[a.0].value.len() as f64;
                    let gi = g[0] / n;
                    add_into(&mut grads, *a, &nodes, |d| {
                        for o in d.iter_mut() {
                            *o += gi;
                        }
                    });
                }
                Op::SumRows(a) => {
                    let sh = nodes[a.0].value.shape();
                    let (r, c) = (sh[0], sh[1]);
                    add_into(&mut grads, *a, &nodes, |d| {
                        for row in 0..r {
                            for col in 0..c {
                                d[row * c + col] += g[col];
                            }
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = nodes[p.0].value.len();
                        let gp = &g[offset..offset + len];
                        add_into(&mut grads, p, &nodes, |d| {
                            for (o, gi) in d.iter_mut().zip(gp) {
                                *o += gi;
                            }
                        });
                        offset += len;
                    }
                }
                Op::Slice(a, start, _end) => {
                    let row_len: usize =
                        nodes[a.0].value.shape()[1..].iter().product::<usize>().max(1);
                    let offset = start * row_len;
                    add_into(&mut grads, *a, &nodes, |d| {
                        for (k, gi) in g.iter().enumerate() {
                            d[offset + k] += gi;
                        }
                    });
                }
                Op::Reshape(a) => {
                    add_into(&mut grads, *a, &nodes, |d| {
                        for (o, gi) in d.iter_mut().zip(g) {
                            *o += gi;
                        }
                    });
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    padding,
                } => {
                    let ish = nodes[input.0].value.shape();
                    let ksh = nodes[kernel.0].value.shape();
                    let (ci, h, w) = (ish[0], ish[1], ish[2]);
                    let (co, kh, kw) = (ksh[0], ksh[2], ksh[3]);
                    let iv = nodes[input.0].value.data();
                    let kv = nodes[kernel.0].value.data();
                    add_into(&mut grads, *bias, &nodes, |d| {
                        for oc in 0..co {
                            let mut acc = 0.0;
                            for y in 0..h {
                                for x in 0..w {
                                    acc += g[(oc * h + y) * w + x];
                                }
                            }
                            d[oc] += acc;
                        }
                    });
                    add_into(&mut grads, *kernel, &nodes, |d| {
                        for oc in 0..co {
                            for y in 0..h {
                                for x in 0..w {
                                    let go = g[(oc * h + y) * w + x];
                                    for ic in 0..ci {
                                        for ky in 0..kh {
                                            for kx in 0..kw {
                                                let Some((iy, ix)) = pad_map(
                                                    *padding, y, x, ky, kx, kh, kw, h, w,
                                                ) else {
                                                    continue;
                                                };
                                                d[((oc * ci + ic) * kh + ky) * kw + kx] +=
                                                    go * iv[(ic * h + iy) * w + ix];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    });
                    add_into(&mut grads, *input, &nodes, |d| {
                        for oc in 0..co {
                            for y in 0..h {
                                for x in 0..w {
                                    let go = g[(oc * h + y) * w + x];
                                    for ic in 0..ci {
                                        for ky in 0..kh {
                                            for kx in 0..kw {
                                                let Some((iy, ix)) = pad_map(
                                                    *padding, y, x, ky, kx, kh, kw, h, w,
                                                ) else {
                                                    continue;
                                                };
                                                d[(ic * h + iy) * w + ix] +=
                                                    go * kv[((oc * ci + ic) * kh + ky) * kw + kx];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    });
                }
                Op::Laplacian(a, n) => {
                    // The stencil matrix is symmetric, so the adjoint is the
                    // stencil itself.
                    let mut back = vec![0.0; n * n];
                    laplacian::apply_stencil(*n, g, &mut back);
                    add_into(&mut grads, *a, &nodes, |d| {
                        for (o, gi) in d.iter_mut().zip(&back) {
                            *o += gi;
                        }
                    });
                }
                Op::Aggregate {
                    patches,
                    anchors,
                    patch_side,
                } => {
                    let out_sh = nodes[i].value.shape();
                    let (h, w) = (out_sh[0], out_sh[1]);
                    let counts = crate::patch::coverage_counts(anchors, *patch_side, h, w);
                    let n = *patch_side;
                    add_into(&mut grads, *patches, &nodes, |d| {
                        for (pi, a) in anchors.iter().enumerate() {
                            for pr in 0..n {
                                for pc in 0..n {
                                    let px = (a.row + pr) * w + (a.col + pc);
                                    d[pi * n * n + pr * n + pc] += g[px] / counts[px];
                                }
                            }
                        }
                    });
                }
            }
        }
        Ok(())
    }
}

/// Applies `f` to the gradient buffer of `v`, creating it zeroed on first use.
fn add_into(grads: &mut [Option<Tensor>], v: Var, nodes: &[Node], f: impl FnOnce(&mut [f64])) {
    let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(nodes[v.0].value.shape().to_vec()));
    f(slot.data_mut());
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Maps an output position and kernel tap to the input position it reads.
#[allow(clippy::too_many_arguments)]
fn pad_map(
    padding: Padding,
    y: usize,
    x: usize,
    ky: usize,
    kx: usize,
    kh: usize,
    kw: usize,
    h: usize,
    w: usize,
) -> Option<(usize, usize)> {
    let iy = y as isize + ky as isize - (kh / 2) as isize;
    let ix = x as isize + kx as isize - (kw / 2) as isize;
    match padding {
        Padding::Zero => {
            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                None
            } else {
                Some((iy as usize, ix as usize))
            }
        }
        Padding::Reflect => Some((reflect(iy, h), reflect(ix, w))),
    }
}

fn reflect(i: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = i;
    while i < 0 || i >= len {
        if i < 0 {
            i = -i;
        }
        if i >= len {
            i = 2 * len - 2 - i;
        }
    }
    i as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(values: Vec<f64>, shape: Vec<usize>) -> (ParamSet, usize) {
        let mut ps = ParamSet::new();
        let slot = ps.add("p", Tensor::new(shape, values).unwrap()).unwrap();
        (ps, slot)
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(vec![-1.0, 0.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn matmul_identity_fixes_vector() {
        let mut tape = Tape::new();
        let eye = tape.constant(
            Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap(),
        );
        let v = tape.constant(Tensor::from_vec(vec![0.3, -1.2, 7.0]));
        let out = tape.matmul(eye, v).unwrap();
        assert_eq!(tape.value(out).data(), &[0.3, -1.2, 7.0]);
    }

    #[test]
    fn conv2d_ones_center_is_nine() {
        let mut tape = Tape::new();
        let img = tape.constant(Tensor::new(vec![1, 3, 3], vec![1.0; 9]).unwrap());
        let ker = tape.constant(Tensor::new(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap());
        let bias = tape.constant(Tensor::from_vec(vec![0.0]));
        let out = tape.conv2d(img, ker, bias, Padding::Zero).unwrap();
        // Zero padding: corners see 4 taps, edges 6, center all 9.
        assert_eq!(tape.value(out).data()[4], 9.0);
        assert_eq!(tape.value(out).data()[0], 4.0);
        assert_eq!(tape.value(out).data()[1], 6.0);
    }

    #[test]
    fn conv2d_rejects_even_kernel() {
        let mut tape = Tape::new();
        let img = tape.constant(Tensor::new(vec![1, 3, 3], vec![1.0; 9]).unwrap());
        let ker = tape.constant(Tensor::new(vec![1, 1, 2, 2], vec![1.0; 4]).unwrap());
        let bias = tape.constant(Tensor::from_vec(vec![0.0]));
        assert!(tape.conv2d(img, ker, bias, Padding::Zero).is_err());
    }

    #[test]
    fn add_shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(vec![2, 2]));
        let b = tape.constant(Tensor::zeros(vec![3]));
        let err = tape.add(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 2]") && err.contains("[3]"), "{err}");
    }

    #[test]
    fn backward_sum_of_squares() {
        let (mut ps, slot) = single_param(vec![1.0, -2.0], vec![2]);
        let mut tape = Tape::new();
        let p = tape.param(&ps, slot);
        let sq = tape.square(p);
        let tot = tape.mean(sq); // (1 + 4) / 2
        let loss = tape.value(tot).item();
        assert!((loss - 2.5).abs() < 1e-15);
        tape.backward(tot, &mut ps).unwrap();
        // d mean(p^2) / dp = 2p / len
        assert_eq!(ps.get(slot).grad().data(), &[1.0, -2.0]);
    }

    #[test]
    fn backward_relu_dead_region() {
        let (mut ps, slot) = single_param(vec![-1.0], vec![1]);
        let mut tape = Tape::new();
        let p = tape.param(&ps, slot);
        let r = tape.relu(p);
        tape.backward(r, &mut ps).unwrap();
        assert_eq!(ps.get(slot).grad().data(), &[0.0]);
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let (mut ps, slot) = single_param(vec![1.0, 2.0], vec![2]);
        let mut tape = Tape::new();
        let p = tape.param(&ps, slot);
        assert!(matches!(
            tape.backward(p, &mut ps),
            Err(Error::LossNotScalar { .. })
        ));
    }

    #[test]
    fn backward_accumulates_across_tapes() {
        let (mut ps, slot) = single_param(vec![3.0], vec![1]);
        for _ in 0..2 {
            let mut tape = Tape::new();
            let p = tape.param(&ps, slot);
            let sq = tape.square(p);
            let loss = tape.mean(sq);
            tape.backward(loss, &mut ps).unwrap();
        }
        // Each pass contributes 2p = 6.
        assert_eq!(ps.get(slot).grad().data(), &[12.0]);
    }

    #[test]
    fn param_var_reused_within_tape() {
        let (mut ps, slot) = single_param(vec![2.0], vec![1]);
        let mut tape = Tape::new();
        let p1 = tape.param(&ps, slot);
        let p2 = tape.param(&ps, slot);
        assert_eq!(p1, p2);
        let prod = tape.mul(p1, p2).unwrap(); // p^2
        let loss = tape.mean(prod);
        tape.backward(loss, &mut ps).unwrap();
        assert_eq!(ps.get(slot).grad().data(), &[4.0]);
    }

    #[test]
    fn concat_slice_round_trip() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        let b = tape.constant(Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let joined = tape.concat(&[a, b]).unwrap();
        assert_eq!(tape.value(joined).shape(), &[3, 2]);
        let back = tape.slice(joined, 1, 3).unwrap();
        assert_eq!(tape.value(back).data(), &[3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn forward_is_deterministic() {
        let run = || {
            let mut tape = Tape::new();
            let a = tape.constant(Tensor::from_vec(vec![0.1, 0.7, -0.4]));
            let b = tape.constant(Tensor::from_vec(vec![1.3, -0.2, 0.9]));
            let m = tape.mul(a, b).unwrap();
            let s = tape.square(m);
            let out = tape.mean(s);
            tape.value(out).item()
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
