//! Small complex linear-algebra helpers shared by the model and optimizers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{CMat, CVec, C64};

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (vals, vecs)
}

pub fn min_eig(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(hermitian_part(m)).eigenvalues.min()
}

pub fn max_eig(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(hermitian_part(m)).eigenvalues.max()
}

pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

pub fn diag(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

pub fn real_diag(v: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// `Re(aᴴ M a)`
pub fn quad_form(m: &CMat, a: &CVec) -> f64 {
    a.dotc(&(m * a)).re
}

pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Real symmetric part as a dense real matrix (for tests and diagnostics).
pub fn re_part(m: &CMat) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn to_complex(v: &DVector<f64>) -> CVec {
    v.map(|x| C64::new(x, 0.0))
}
