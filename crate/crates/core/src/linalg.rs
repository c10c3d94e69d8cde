//! Dense linear-algebra helpers shared by the spectral and spline modules.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const EIGEN_MAX_ITER: usize = 10_000;

/// Symmetric eigendecomposition with eigenpairs sorted by eigenvalue.
///
/// `descending` selects the order. Every eigenvector is normalized so that
/// its first component of magnitude above `1e-10` is positive.
pub fn symmetric_eigen(a: DMatrix<f64>, descending: bool) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(alloc::format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, EIGEN_MAX_ITER).ok_or(Error::EigenFailure)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (eig.eigenvalues[i], eig.eigenvalues[j]);
        if descending {
            b.total_cmp(&a)
        } else {
            a.total_cmp(&b)
        }
    });

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        fix_sign(col.as_mut_slice());
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Flips `v` so that its first non-negligible component is positive.
pub fn fix_sign(v: &mut [f64]) {
    if let Some(&lead) = v.iter().find(|x| libm::fabs(**x) > 1e-10) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Full orthogonal factor of a Householder QR of `a` (n×r, r ≤ n).
///
/// The first r columns span the column space of `a` (when `a` has full
/// column rank); the remaining n − r columns are an orthonormal completion.
pub fn householder_full_q(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let r = a.ncols().min(n);
    let mut work = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(r);

    for j in 0..r {
        let mut v: Vec<f64> = (j..n).map(|i| work[(i, j)]).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for c in j..work.ncols() {
            let dot: f64 = (j..n).map(|i| v[i - j] * work[(i, c)]).sum();
            let s = 2.0 * dot / vnorm2;
            for i in j..n {
                work[(i, c)] -= s * v[i - j];
            }
        }
        let scale = libm::sqrt(vnorm2);
        v.iter_mut().for_each(|x| *x /= scale);
        reflectors.push(v);
    }

    // Q = H_0 H_1 … H_{r-1}, accumulated backwards onto the identity.
    let mut q = DMatrix::<f64>::identity(n, n);
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        for c in 0..n {
            let dot: f64 = (j..n).map(|i| v[i - j] * q[(i, c)]).sum();
            if dot != 0.0 {
                for i in j..n {
                    q[(i, c)] -= 2.0 * dot * v[i - j];
                }
            }
        }
    }
    q
}
