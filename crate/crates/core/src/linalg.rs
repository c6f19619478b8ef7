//! Small dense helpers for symmetric matrices of dimension 2 and 3.
//!
//! nalgebra's decompositions need dimension bounds that do not compose with
//! const generics, so the handful of routines the metric code relies on live
//! here.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

pub type Vector<const D: usize> = SVector<f64, D>;
pub type Matrix<const D: usize> = SMatrix<f64, D, D>;

/// Relative eigenvalue floor applied when projecting onto the SPD cone.
pub const SPD_EPSILON: f64 = 1e-8;

/// Number of independent entries of a symmetric `d x d` matrix.
pub const fn sym_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Upper-triangle (row-major) index pairs of a symmetric matrix.
pub fn sym_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |i| (i..d).map(move |j| (i, j)))
}

pub fn pack_sym<const D: usize>(m: &Matrix<D>, out: &mut [f64]) {
    for (n, (i, j)) in sym_pairs(D).enumerate() {
        out[n] = m[(i, j)];
    }
}

pub fn unpack_sym<const D: usize>(packed: &[f64]) -> Matrix<D> {
    let mut m = Matrix::<D>::zeros();
    for (n, (i, j)) in sym_pairs(D).enumerate() {
        m[(i, j)] = packed[n];
        m[(j, i)] = packed[n];
    }
    m
}

pub fn symmetrize<const D: usize>(m: &Matrix<D>) -> Matrix<D> {
    (m + m.transpose()) * 0.5
}

/// Lower-triangular Cholesky factor, or `None` if `m` is not positive definite.
pub fn cholesky<const D: usize>(m: &Matrix<D>) -> Option<Matrix<D>> {
    let mut l = Matrix::<D>::zeros();
    for j in 0..D {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..D {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse<const D: usize>(m: &Matrix<D>) -> Result<Matrix<D>> {
    let l = cholesky(m).ok_or(Error::NotPositiveDefinite)?;
    let mut inv = Matrix::<D>::zeros();
    for col in 0..D {
        // forward then backward substitution against e_col
        let mut y = Vector::<D>::zeros();
        for i in 0..D {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..D).rev() {
            let mut s = y[i];
            for k in i + 1..D {
                s -= l[(k, i)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(symmetrize(&inv))
}

/// Inverse of a general square matrix by Gauss-Jordan elimination with
/// partial pivoting. Returns `None` when the matrix is numerically singular.
pub fn inverse<const D: usize>(m: &Matrix<D>) -> Option<Matrix<D>> {
    let mut a = *m;
    let mut inv = Matrix::<D>::identity();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for col in 0..D {
        let mut pivot = col;
        for row in col + 1..D {
            if a[(row, col)].abs() > a[(pivot, col)].abs() {
                pivot = row;
            }
        }
        if a[(pivot, col)].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let p = a[(col, col)];
        for k in 0..D {
            a[(col, k)] /= p;
            inv[(col, k)] /= p;
        }
        for row in 0..D {
            if row != col {
                let f = a[(row, col)];
                if f != 0.0 {
                    for k in 0..D {
                        a[(row, k)] -= f * a[(col, k)];
                        inv[(row, k)] -= f * inv[(col, k)];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Determinant for the small dimensions used in this crate.
pub fn determinant<const D: usize>(m: &Matrix<D>) -> f64 {
    match D {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => {
            // LU without pivot bookkeeping beyond sign
            let mut a = *m;
            let mut det = 1.0;
            for col in 0..D {
                let mut pivot = col;
                for row in col + 1..D {
                    if a[(row, col)].abs() > a[(pivot, col)].abs() {
                        pivot = row;
                    }
                }
                if a[(pivot, col)] == 0.0 {
                    return 0.0;
                }
                if pivot != col {
                    a.swap_rows(col, pivot);
                    det = -det;
                }
                det *= a[(col, col)];
                for row in col + 1..D {
                    let f = a[(row, col)] / a[(col, col)];
                    for k in col..D {
                        a[(row, k)] -= f * a[(col, k)];
                    }
                }
            }
            det
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn symmetric_eigen<const D: usize>(m: &Matrix<D>) -> (Vector<D>, Matrix<D>) {
    let mut a = symmetrize(m);
    let mut v = Matrix::<D>::identity();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..D {
            for j in i + 1..D {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= 1e-30 * a.norm_squared().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..D {
            for q in p + 1..D {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..D {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..D {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..D {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (Vector::<D>::from_fn(|i, _| a[(i, i)]), v)
}

/// Symmetrize and clamp eigenvalues to `SPD_EPSILON * max eigenvalue`.
///
/// Matrices that are already comfortably positive definite are returned
/// (symmetrized) without an eigen-decomposition.
pub fn spd_project<const D: usize>(m: &Matrix<D>) -> Result<Matrix<D>> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let sym = symmetrize(m);
    let trace = sym.trace();
    if trace > 0.0 {
        let shifted = sym - Matrix::<D>::identity() * (SPD_EPSILON * trace);
        if cholesky(&shifted).is_some() {
            return Ok(sym);
        }
    }
    let (values, vectors) = symmetric_eigen(&sym);
    let max = values.max();
    if !(max > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let floor = SPD_EPSILON * max;
    let clamped = Matrix::<D>::from_diagonal(&values.map(|l| l.max(floor)));
    Ok(symmetrize(&(vectors * clamped * vectors.transpose())))
}

/// `v^T G v`
pub fn quadratic_form<const D: usize>(g: &Matrix<D>, v: &Vector<D>) -> f64 {
    v.dot(&(g * v))
}
