//! Symmetric vectorization.
//!
//! A symmetric `n × n` matrix is stored as its lower triangle in column-major
//! order, `n(n+1)/2` entries, with off-diagonal entries multiplied by `√2`.
//! With this scaling `svec(A) · svec(B) = tr(AB)`.

use nalgebra::DMatrix;
use std::f64::consts::SQRT_2;

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Recovers the side length from an svec length, if it is triangular.
pub fn side_from_len(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n * (n + 1) / 2 == len).then_some(n)
}

/// Position of entry `(i, j)` (either triangle) in the svec of an `n × n` matrix.
#[inline]
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    c * n - c * c.saturating_sub(1) / 2 + (r - c)
}

/// Inverse of [`svec_index`]: the lower-triangle `(row, col)` of coordinate `k`.
pub fn svec_coord(n: usize, k: usize) -> (usize, usize) {
    let mut c = 0;
    let mut start = 0;
    while start + (n - c) <= k {
        start += n - c;
        c += 1;
    }
    (c + (k - start), c)
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        out.push(m[(j, j)]);
        for i in j + 1..n {
            out.push(SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(n));
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] / SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Weight of a matrix entry in svec coordinates: 1 on the diagonal, √2 off it.
#[inline]
pub fn entry_weight(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        SQRT_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_and_coord_agree() {
        for n in 1..7 {
            let mut k = 0;
            for j in 0..n {
                for i in j..n {
                    assert_eq!(svec_index(n, i, j), k);
                    assert_eq!(svec_index(n, j, i), k);
                    assert_eq!(svec_coord(n, k), (i, j));
                    k += 1;
                }
            }
            assert_eq!(side_from_len(svec_len(n)), Some(n));
        }
        assert_eq!(side_from_len(4), None);
    }

    #[test]
    fn inner_product_is_preserved() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, -1.0, 1.0, 3.0, 0.5, -1.0, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.0, -2.0, 0.0, 4.0, 0.0, 4.0, 5.0]);
        let lhs: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        let rhs = (&a * &b).trace();
        assert!((lhs - rhs).abs() < 1e-12);
        assert_eq!(smat(&svec(&a), 3), a);
    }
}
