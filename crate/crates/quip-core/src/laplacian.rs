//! Discrete 5-point Laplacian on an n x n patch grid.
//!
//! Out-of-range neighbors mirror back to the edge pixel, which keeps the
//! operator symmetric with zero row sums: the constant vector spans its
//! null space and -Lap is positive semidefinite.

use crate::tensor::Tensor;

const OFFSETS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[inline]
fn mirror(i: isize, len: usize) -> usize {
    if i < 0 {
        0
    } else if i >= len as isize {
        len - 1
    } else {
        i as usize
    }
}

/// out = Lap * input, both flat n*n vectors.
pub fn apply_stencil(n: usize, input: &[f64], out: &mut [f64]) {
    debug_assert_eq!(input.len(), n * n);
    debug_assert_eq!(out.len(), n * n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = -4.0 * input[r * n + c];
            for (dr, dc) in OFFSETS {
                let rr = mirror(r as isize + dr, n);
                let cc = mirror(c as isize + dc, n);
                acc += input[rr * n + cc];
            }
            out[r * n + c] = acc;
        }
    }
}

/// Dense n^2 x n^2 matrix of the same operator.
pub fn matrix(n: usize) -> Tensor {
    let size = n * n;
    let mut data = vec![0.0; size * size];
    for r in 0..n {
        for c in 0..n {
            let row = r * n + c;
            data[row * size + row] -= 4.0;
            for (dr, dc) in OFFSETS {
                let rr = mirror(r as isize + dr, n);
                let cc = mirror(c as isize + dc, n);
                data[row * size + rr * n + cc] += 1.0;
            }
        }
    }
    Tensor::new(vec![size, size], data).expect("square matrix dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_is_symmetric_with_zero_row_sums() {
        for n in [2, 3, 5] {
            let m = matrix(n);
            let size = n * n;
            for i in 0..size {
                let mut row_sum = 0.0;
                for j in 0..size {
                    row_sum += m.at(i, j);
                    assert_eq!(m.at(i, j), m.at(j, i), "asymmetry at ({i}, {j}), n={n}");
                }
                assert_eq!(row_sum, 0.0, "row {i} sum nonzero, n={n}");
            }
        }
    }

    #[test]
    fn stencil_matches_dense_matrix() {
        let n = 4;
        let size = n * n;
        let input: Vec<f64> = (0..size).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut fast = vec![0.0; size];
        apply_stencil(n, &input, &mut fast);
        let m = matrix(n);
        for i in 0..size {
            let mut acc = 0.0;
            for j in 0..size {
                acc += m.at(i, j) * input[j];
            }
            assert!((acc - fast[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_vector_in_null_space() {
        let n = 3;
        let mut out = vec![1.0; n * n];
        apply_stencil(n, &vec![5.0; n * n], &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }
}
