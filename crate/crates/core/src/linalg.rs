//! Dense per-node linear algebra for dimensions up to four.

use crate::grid::MAX_DIM;

pub type Mat = [[f64; MAX_DIM]; MAX_DIM];

pub const ZERO: Mat = [[0.0; MAX_DIM]; MAX_DIM];

pub fn identity(n: usize) -> Mat {
    let mut m = ZERO;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

/// Cholesky factor `L` with `A = L Lᵀ`, or `None` when `A` is not positive definite.
pub fn cholesky(a: &Mat, n: usize) -> Option<Mat> {
    let mut l = ZERO;
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d.is_nan() || d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    Some(l)
}

/// Determinant of a symmetric positive definite matrix.
pub fn cholesky_det(a: &Mat, n: usize) -> Option<f64> {
    let l = cholesky(a, n)?;
    Some((0..n).map(|i| l[i][i] * l[i][i]).product())
}

/// Inverse and `√det` of a symmetric positive definite matrix.
pub fn spd_inverse(a: &Mat, n: usize) -> Option<(Mat, f64)> {
    let l = cholesky(a, n)?;
    // L⁻¹ by forward substitution, then A⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = ZERO;
    for i in 0..n {
        linv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i][k] * linv[k][j];
            }
            linv[i][j] = s / l[i][i];
        }
    }
    let mut inv = ZERO;
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += linv[k][i] * linv[k][j];
            }
            inv[i][j] = s;
            inv[j][i] = s;
        }
    }
    let sqrt_det = (0..n).map(|i| l[i][i]).product();
    Some((inv, sqrt_det))
}

pub fn mat_mul(a: &Mat, b: &Mat, n: usize) -> Mat {
    let mut c = ZERO;
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd_matrix() {
        let mut a = ZERO;
        a[0] = [4.0, 1.0, 0.5, 0.0];
        a[1] = [1.0, 3.0, 0.2, 0.0];
        a[2] = [0.5, 0.2, 2.0, 0.0];
        let (inv, sd) = spd_inverse(&a, 3).unwrap();
        let p = mat_mul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - e).abs() < 1e-14);
            }
        }
        let det = 4.0 * (3.0 * 2.0 - 0.04) - 1.0 * (2.0 - 0.1) + 0.5 * (0.2 - 1.5);
        assert!((sd * sd - det).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = identity(2);
        a[1][1] = -1.0;
        assert!(cholesky(&a, 2).is_none());
        a[1][1] = 0.0;
        assert!(spd_inverse(&a, 2).is_none());
    }
}
