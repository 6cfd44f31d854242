use nalgebra::{DMatrix, DVector};

/// Relative size below which a column counts as a linear combination of
/// the columns before it.
const COLLINEARITY_TOL: f64 = 1e-9;

/// Indices of columns that are (numerically) linear combinations of earlier
/// columns, by modified Gram–Schmidt. `reference[j]` scales the tolerance
/// for column `j`; pass the norms of the untransformed data so that
/// columns wiped out by a transformation are caught as well.
pub(crate) fn dependent_columns(x: &DMatrix<f64>, reference: &[f64]) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for j in 0..x.ncols() {
        let mut v = x.column(j).clone_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= COLLINEARITY_TOL * reference[j].max(f64::MIN_POSITIVE) {
            out.push(j);
        } else {
            basis.push(v / norm);
        }
    }
    out
}

/// Inverse of a symmetric positive-definite matrix, `None` when it is not
/// numerically positive definite.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    let chol = sym.clone().cholesky()?;
    // Cholesky succeeds on matrices that are singular up to rounding; check
    // the diagonal of the factor against the matrix scale
    let l = chol.l();
    let max_diag = sym.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_l = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min_l * min_l > 1e-13 * max_diag) {
        return None;
    }
    Some(chol.inverse())
}

/// Least squares through the normal equations; callers check rank first.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let xtx_inv = spd_inverse(&(x.transpose() * x))?;
    let beta = &xtx_inv * (x.transpose() * y);
    Some((beta, xtx_inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_dependent_columns() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 3.0, 1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 5.0, 6.0]);
        let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
        assert_eq!(dependent_columns(&x, &norms), [2]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let x2 = x.columns(0, 2).clone_owned();
        let (b, _) = ols(&x2, &y).unwrap();
        // normal equations hold
        let r = &y - &x2 * &b;
        assert!((x2.transpose() * r).norm() < 1e-12);
    }

    #[test]
    fn singular_inverse_is_none() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_inverse(&a).is_none());
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let inv = spd_inverse(&b).unwrap();
        assert!((&b * inv - DMatrix::identity(2, 2)).norm() < 1e-14);
    }
}
