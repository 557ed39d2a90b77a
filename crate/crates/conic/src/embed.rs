use nalgebra::{Complex, DMatrix};

use crate::error::ConicError;

/// Tolerance on `‖h − hᴴ‖_max` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Real symmetric embedding `[[Re h, −Im h], [Im h, Re h]]`.
///
/// Each eigenvalue of `h` appears twice in the result, so the embedding is
/// PSD exactly when `h` is. Input asymmetry below [`HERMITIAN_TOL`] is
/// averaged away.
pub fn embed_hermitian(h: &DMatrix<Complex<f64>>) -> Result<DMatrix<f64>, ConicError> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(ConicError::Malformed(format!(
            "expected square matrix, got {}x{}",
            n,
            h.ncols()
        )));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    let scale = h.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    if !(asym <= HERMITIAN_TOL * scale) {
        return Err(ConicError::NotHermitian(asym));
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            out[(i, j)] = v.re;
            out[(n + i, n + j)] = v.re;
            out[(i, n + j)] = -v.im;
            out[(n + i, j)] = v.im;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_embeds_to_scaled_identity() {
        let h = DMatrix::from_element(1, 1, Complex::new(2.0, 0.0));
        let e = embed_hermitian(&h).unwrap();
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(1.0, 0.0),
                Complex::new(0.0, 1.0),
                Complex::new(0.0, 1.0),
                Complex::new(1.0, 0.0),
            ],
        );
        assert!(matches!(embed_hermitian(&h), Err(ConicError::NotHermitian(_))));
    }
}
