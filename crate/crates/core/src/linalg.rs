use nalgebra::{DMatrix, DVector};

/// Relative pivot threshold below which a Gram matrix is treated as singular.
const PIVOT_TOL: f64 = 1e-10;

/// Inverse of a symmetric positive definite matrix, or `None` when the
/// Cholesky factorization fails or a pivot is negligible relative to the
/// largest diagonal entry.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = checked_cholesky(m)?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

pub(crate) fn spd_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    checked_cholesky(m).map(|c| c.solve(rhs))
}

fn checked_cholesky(m: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = m.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..m.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    (min_pivot > PIVOT_TOL * scale).then_some(chol)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `out = A x` for a square matrix stored column-major in `a`.
pub(crate) fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let q = x.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (col, &xc) in a.chunks_exact(q).zip(x) {
        for (o, &v) in out.iter_mut().zip(col) {
            *o += v * xc;
        }
    }
}
