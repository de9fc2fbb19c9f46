//! Cyclic Jacobi eigendecomposition for real symmetric matrices.
//!
//! Plane rotations annihilate off-diagonal entries until they vanish; the
//! accumulated rotation product holds the eigenvectors. Foolproof for
//! symmetric input, and deterministic: sweep order is fixed, eigenvalues are
//! sorted ascending, and each eigenvector's largest-magnitude entry is made
//! positive so results do not depend on rotation details.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAX_SWEEPS: usize = 64;

/// Orthonormal eigenbasis with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Column j is the eigenvector of eigenvalues[j].
    pub vectors: Tensor,
}

/// Decomposes a symmetric matrix; only the upper triangle is read.
pub fn eigen_symmetric(matrix: &Tensor) -> Result<SymmetricEigen> {
    let shape = matrix.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::BadShape {
            op: "eigen_symmetric",
            shape: shape.to_vec(),
            reason: "expects a square matrix",
        });
    }
    let n = shape[0];
    let mut a = matrix.data().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let mut converged = false;
    let mut last_off = 0.0;
    for sweep in 0..MAX_SWEEPS {
        let mut sm = 0.0;
        for ip in 0..n.saturating_sub(1) {
            for iq in ip + 1..n {
                sm += a[ip * n + iq].abs();
            }
        }
        last_off = sm;
        if sm == 0.0 {
            converged = true;
            break;
        }
        let tresh = if sweep < 3 {
            0.2 * sm / (n * n) as f64
        } else {
            0.0
        };
        for ip in 0..n - 1 {
            for iq in ip + 1..n {
                let g = 100.0 * a[ip * n + iq].abs();
                if sweep > 3
                    && d[ip].abs() + g == d[ip].abs()
                    && d[iq].abs() + g == d[iq].abs()
                {
                    a[ip * n + iq] = 0.0;
                } else if a[ip * n + iq].abs() > tresh {
                    let mut h = d[iq] - d[ip];
                    let t = if h.abs() + g == h.abs() {
                        a[ip * n + iq] / h
                    } else {
                        let theta = 0.5 * h / a[ip * n + iq];
                        let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                        if theta < 0.0 {
                            t = -t;
                        }
                        t
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    h = t * a[ip * n + iq];
                    z[ip] -= h;
                    z[iq] += h;
                    d[ip] -= h;
                    d[iq] += h;
                    a[ip * n + iq] = 0.0;
                    let rotate = |m: &mut [f64], i: usize, j: usize, k: usize, l: usize| {
                        let g = m[i * n + j];
                        let h = m[k * n + l];
                        m[i * n + j] = g - s * (h + g * tau);
                        m[k * n + l] = h + s * (g - h * tau);
                    };
                    for j in 0..ip {
                        rotate(&mut a, j, ip, j, iq);
                    }
                    for j in ip + 1..iq {
                        rotate(&mut a, ip, j, j, iq);
                    }
                    for j in iq + 1..n {
                        rotate(&mut a, ip, j, iq, j);
                    }
                    for j in 0..n {
                        rotate(&mut v, j, ip, j, iq);
                    }
                }
            }
        }
        for ip in 0..n {
            b[ip] += z[ip];
            d[ip] = b[ip];
            z[ip] = 0.0;
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence {
            sweeps: MAX_SWEEPS,
            off_diag: last_off,
        });
    }

    // Ascending eigenvalue order; ties keep original index order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues").then(i.cmp(&j)));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        eigenvalues.push(d[old_col]);
        // Deterministic sign: largest-magnitude entry (first on ties) positive.
        let mut best = 0;
        let mut best_abs = 0.0;
        for r in 0..n {
            let x = v[r * n + old_col].abs();
            if x > best_abs {
                best_abs = x;
                best = r;
            }
        }
        let flip = if v[best * n + old_col] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[r * n + new_col] = flip * v[r * n + old_col];
        }
    }

    Ok(SymmetricEigen {
        eigenvalues,
        vectors: Tensor::new(vec![n, n], vectors)?,
    })
}
