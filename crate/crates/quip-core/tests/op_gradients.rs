//! Finite-difference verification of every differentiable tape operation.
//!
//! Each op is embedded in a mean-of-squares loss over random parameter
//! tensors (at most 64 elements each) and the analytic gradient is compared
//! against central differences on 100 seeds per op.

use quip_core::gradcheck;
use quip_core::patch::Anchor;
use quip_core::tensor::{Padding, ParamSet, Tape, Tensor, Var};
use quip_core::Result;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 100;
const TOL: f64 = 1e-4;

/// Uniform values in (-1, 1) nudged away from zero so ReLU/abs kinks stay
/// farther than the finite-difference step.
fn kink_safe(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let mut v: f64 = rng.random_range(-1.0..1.0);
            if v.abs() < 1e-3 {
                v += v.signum().max(0.0) * 2e-3 - 1e-3;
            }
            v
        })
        .collect()
}

/// Builds params from shapes, runs `f` into a mean-of-squares loss, and
/// returns the worst relative error across all parameters and coordinates.
fn worst_error(
    seed: u64,
    shapes: &[&[usize]],
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    for (i, shape) in shapes.iter().enumerate() {
        let len: usize = shape.iter().product();
        params
            .add(format!("p{i}"), Tensor::new(shape.to_vec(), kink_safe(&mut rng, len)).unwrap())
            .unwrap();
    }
    let loss_of = |ps: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = (0..ps.len()).map(|s| tape.param(ps, s)).collect();
        let out = f(&mut tape, &vars)?;
        let sq = tape.square(out);
        let loss = tape.mean(sq);
        Ok(tape.value(loss).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = (0..params.len()).map(|s| tape.param(&params, s)).collect();
    let out = f(&mut tape, &vars).unwrap();
    let sq = tape.square(out);
    let loss = tape.mean(sq);
    tape.backward(loss, &mut params).unwrap();

    gradcheck::check_all(&mut params, loss_of)
        .unwrap()
        .iter()
        .map(|c| c.max_rel_err)
        .fold(0.0, f64::max)
}

fn assert_op(name: &str, shapes: &[&[usize]], f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) {
    let mut worst = 0.0f64;
    let mut worst_seed = 0;
    for seed in 0..SEEDS {
        let e = worst_error(seed, shapes, &f);
        if e > worst {
            worst = e;
            worst_seed = seed;
        }
    }
    assert!(worst < TOL, "{name}: rel err {worst} at seed {worst_seed}");
}

#[test]
fn add_gradients() {
    assert_op("add", &[&[3, 4], &[3, 4]], |t, v| t.add(v[0], v[1]));
}

#[test]
fn sub_gradients() {
    assert_op("sub", &[&[12], &[12]], |t, v| t.sub(v[0], v[1]));
}

#[test]
fn mul_gradients() {
    assert_op("mul", &[&[5, 5], &[5, 5]], |t, v| t.mul(v[0], v[1]));
}

#[test]
fn scale_gradients() {
    assert_op("scale", &[&[4, 4], &[1]], |t, v| t.scale(v[0], v[1]));
}

#[test]
fn matmul_gradients() {
    assert_op("matmul", &[&[4, 5], &[5, 3]], |t, v| t.matmul(v[0], v[1]));
}

#[test]
fn matvec_gradients() {
    assert_op("matvec", &[&[6, 7], &[7]], |t, v| t.matmul(v[0], v[1]));
}

#[test]
fn relu_gradients() {
    assert_op("relu", &[&[24]], |t, v| Ok(t.relu(v[0])));
}

#[test]
fn abs_gradients() {
    assert_op("abs", &[&[24]], |t, v| Ok(t.abs(v[0])));
}

#[test]
fn square_gradients() {
    assert_op("square", &[&[17]], |t, v| Ok(t.square(v[0])));
}

#[test]
fn mean_gradients() {
    assert_op("mean", &[&[30]], |t, v| Ok(t.mean(v[0])));
}

#[test]
fn sum_rows_gradients() {
    assert_op("sum_rows", &[&[6, 8]], |t, v| t.sum_rows(v[0]));
}

#[test]
fn concat_gradients() {
    assert_op("concat", &[&[2, 5], &[3, 5], &[1, 5]], |t, v| t.concat(v));
}

#[test]
fn slice_gradients() {
    assert_op("slice", &[&[6, 4]], |t, v| t.slice(v[0], 1, 4));
}

#[test]
fn reshape_gradients() {
    assert_op("reshape", &[&[3, 8]], |t, v| t.reshape(v[0], vec![6, 4]));
}

#[test]
fn conv2d_zero_padding_gradients() {
    assert_op(
        "conv2d/zero",
        &[&[2, 4, 4], &[3, 2, 3, 3], &[3]],
        |t, v| t.conv2d(v[0], v[1], v[2], Padding::Zero),
    );
}

#[test]
fn conv2d_reflect_padding_gradients() {
    assert_op(
        "conv2d/reflect",
        &[&[2, 4, 4], &[3, 2, 3, 3], &[3]],
        |t, v| t.conv2d(v[0], v[1], v[2], Padding::Reflect),
    );
}

#[test]
fn laplacian_gradients() {
    assert_op("laplacian", &[&[16]], |t, v| t.laplacian(v[0], 4));
}

#[test]
fn aggregate_gradients() {
    let anchors = [
        Anchor::new(0, 0),
        Anchor::new(0, 2),
        Anchor::new(2, 0),
        Anchor::new(2, 2),
    ];
    assert_op("aggregate", &[&[4, 9]], move |t, v| {
        t.aggregate_patches(v[0], &anchors, 3, 5, 5)
    });
}

#[test]
fn three_layer_composition_gradients() {
    // Random small multi-op network: matvec, relu, pointwise, laplacian.
    assert_op(
        "composition",
        &[&[9, 9], &[9], &[9], &[1]],
        |t, v| {
            let h = t.matmul(v[0], v[1])?;
            let r = t.relu(h);
            let m = t.mul(r, v[2])?;
            let lap = t.laplacian(m, 3)?;
            let s = t.scale(lap, v[3])?;
            t.add(s, v[1])
        },
    );
}
