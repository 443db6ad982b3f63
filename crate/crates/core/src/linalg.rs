//! Small dense linear-algebra helpers shared by the field and homogenization code.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Jacobians everywhere in this crate use
//! the row-per-component layout `J[(i, j)] = ∂F_i/∂x_j`.

use nalgebra::DMatrix;

pub fn det(a: &DMatrix<f64>) -> f64 {
    debug_assert!(a.is_square());
    a.determinant()
}

/// Determinant of a row-major `n × n` matrix held in a scratch slice (overwritten).
///
/// Gaussian elimination with partial pivoting; no allocation.
pub fn det_in_place(n: usize, a: &mut [f64]) -> f64 {
    match n {
        1 => return a[0],
        2 => return a[0] * a[3] - a[1] * a[2],
        _ => {}
    }
    let mut d = 1.0;
    for k in 0..n {
        let mut p = k;
        for r in k + 1..n {
            if a[r * n + k].abs() > a[p * n + k].abs() {
                p = r;
            }
        }
        if a[p * n + k] == 0.0 {
            return 0.0;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            d = -d;
        }
        let pivot = a[k * n + k];
        d *= pivot;
        for r in k + 1..n {
            let f = a[r * n + k] / pivot;
            for c in k + 1..n {
                a[r * n + c] -= f * a[k * n + c];
            }
        }
    }
    d
}

/// Matrix obtained by deleting row `row` and column `col`.
pub fn minor_matrix(a: &DMatrix<f64>, row: usize, col: usize) -> DMatrix<f64> {
    a.clone().remove_row(row).remove_column(col)
}

/// Signed-minor matrix: `Cof(A)[(i, j)] = (-1)^(i+j) det(minor(A; i, j))`.
///
/// Defined for singular matrices as well; satisfies `A · Cof(A)ᵀ = det(A) · I`.
pub fn cofactor_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "cofactor matrix of a non-square matrix");
    let n = a.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |i, j| {
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * det(&minor_matrix(a, i, j))
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn mat_vec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum())
        .collect()
}

/// Finite-difference step used for user-supplied fields without exact derivatives.
pub fn fd_step(x: &[f64]) -> f64 {
    1e-5 * norm(x).max(1.0)
}

pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = fd_step(x);
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            xp[j] = x[j] + h;
            let fp = f(&xp);
            xp[j] = x[j] - h;
            let fm = f(&xp);
            xp[j] = x[j];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of `f: ℝ^n → ℝ^m` in the row-per-component layout.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut xp = x.to_vec();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let m = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(m, n, |i, j| cols[j][i])
}
