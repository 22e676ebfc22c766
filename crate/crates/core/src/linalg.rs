//! Small dense kernels: 3x3 symmetric eigen-decomposition, factor
//! reconstruction, and eigenvalues of symmetric tridiagonal matrices.

use alloc::vec::Vec;
use libm::{fabs, hypot, sqrt};

use crate::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// `L * L^T`.
pub fn outer_self(l: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| l[i][k] * l[j][k]).sum();
        }
    }
    out
}

pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max(fabs(a[i][j] - b[i][j]));
        }
    }
    worst
}

pub fn is_lower_triangular(l: &Mat3) -> bool {
    l[0][1] == 0.0 && l[0][2] == 0.0 && l[1][2] == 0.0
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn symmetric_eigen3(a: &Mat3) -> Result<([f64; 3], Mat3)> {
    let mut m = *a;
    let mut v = IDENTITY;
    for _sweep in 0..64 {
        let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
        let diag = m[0][0] * m[0][0] + m[1][1] * m[1][1] + m[2][2] * m[2][2];
        if off <= 1e-36 * diag || off == 0.0 {
            return Ok(sorted_eigen(&m, &v));
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if m[p][q] == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (fabs(theta) + sqrt(theta * theta + 1.0));
            let c = 1.0 / sqrt(t * t + 1.0);
            let s = t * c;
            // m <- J^T m J with J the (p, q) rotation
            for k in 0..3 {
                let mkp = m[k][p];
                let mkq = m[k][q];
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let mpk = m[p][k];
                let mqk = m[q][k];
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    Err(Error::NumericalFailure(
        "3x3 Jacobi eigen-solver did not converge".into(),
    ))
}

fn sorted_eigen(m: &Mat3, v: &Mat3) -> ([f64; 3], Mat3) {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = m[src][src];
        for r in 0..3 {
            vectors[r][dst] = v[r][src];
        }
    }
    (values, vectors)
}

/// Rewrites any factor `F` (with `F F^T = S`) as a lower-triangular factor
/// of the same `S`, via Householder reflections applied from the right
/// (an LQ decomposition). Diagonal entries come out nonnegative.
pub fn lower_from_factor(f: &Mat3) -> Mat3 {
    let mut a = *f;
    for row in 0..2 {
        // Zero a[row][row+1..] by reflecting columns row..3.
        let norm = sqrt((row..3).map(|k| a[row][k] * a[row][k]).sum::<f64>());
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[row][row] > 0.0 { -norm } else { norm };
        let mut u = [0.0; 3];
        u[row..].copy_from_slice(&a[row][row..]);
        u[row] -= alpha;
        let unorm2: f64 = (row..3).map(|k| u[k] * u[k]).sum();
        if unorm2 == 0.0 {
            continue;
        }
        for r in a.iter_mut() {
            let dot: f64 = (row..3).map(|k| r[k] * u[k]).sum();
            let scale = 2.0 * dot / unorm2;
            for k in row..3 {
                r[k] -= scale * u[k];
            }
        }
        for k in row + 1..3 {
            a[row][k] = 0.0;
        }
    }
    // Column sign flips keep F F^T unchanged.
    for col in 0..3 {
        if a[col][col] < 0.0 {
            for r in a.iter_mut() {
                r[col] = -r[col];
            }
        }
    }
    a
}

/// Eigenvalues of the symmetric tridiagonal matrix with zero diagonal and
/// off-diagonal `off` (length `m - 1`), by implicit QL with Wilkinson shifts.
/// Returned in ascending order.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    debug_assert_eq!(off.len() + 1, n);
    let mut d: Vec<f64> = diag.to_vec();
    let mut e: Vec<f64> = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = fabs(d[m]) + fabs(d[m + 1]);
                if fabs(e[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(Error::NumericalFailure(
                    "tridiagonal QL iteration did not converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}
