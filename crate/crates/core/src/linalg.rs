//! Small dense helpers shared by the field and measure code.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(v: &DVector<f64>) -> DVector<f64> {
    v / v.norm()
}

/// `Id - x xᵀ` for a unit vector `x`.
pub fn tangent_projector(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - x[i] * x[j])
}

pub fn outer(a: &[f64], b: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
}

/// Orthonormal basis of the orthogonal complement of the unit vector `x`,
/// returned as the columns of an `n × (n-1)` matrix.
pub fn complement_basis(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    let xv = DVector::from_column_slice(x);
    // Gram-Schmidt over the coordinate axes, least aligned with x first.
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()));
    for &axis in &axes {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = DVector::from_fn(n, |i, _| if i == axis { 1.0 } else { 0.0 });
        v -= &xv * xv[axis];
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let len = v.norm();
        if len > 1e-8 {
            basis.push(v / len);
        }
    }
    DMatrix::from_columns(&basis)
}

/// Second elementary symmetric polynomial of the eigenvalues of a symmetric matrix.
pub fn sym2(a: &DMatrix<f64>) -> f64 {
    let tr = a.trace();
    let tr_sq = (a * a).trace();
    0.5 * (tr * tr - tr_sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_basis_is_orthonormal() {
        let x = [0.6, 0.0, 0.8];
        let e = complement_basis(&x);
        assert_eq!(e.ncols(), 2);
        let gram = e.transpose() * &e;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-14);
        let xv = DVector::from_column_slice(&x);
        assert!((e.transpose() * xv).norm() < 1e-14);
    }

    #[test]
    fn sym2_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 0.0]));
        assert!((sym2(&a) - 6.0).abs() < 1e-14);
    }
}
