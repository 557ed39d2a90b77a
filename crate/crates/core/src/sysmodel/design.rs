use serde::{Deserialize, Serialize};

use crate::linalg::{diag, norm_sqr, real_diag, trace_re};
use crate::{CMat, CVec, C64};

/// BS transmit design: per-user precoders and the AN covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsDesign {
    pub w: Vec<CVec>,
    pub z_b: CMat,
}

impl BsDesign {
    pub fn zeros(n_tx: usize, k: usize) -> Self {
        Self {
            w: vec![CVec::zeros(n_tx); k],
            z_b: CMat::zeros(n_tx, n_tx),
        }
    }

    /// `Σ‖w_k‖² + Tr(Z_B)`
    pub fn power(&self) -> f64 {
        self.w.iter().map(norm_sqr).sum::<f64>() + trace_re(&self.z_b)
    }
}

/// IRS configuration: coefficients `φ_m` and mode selectors `α_m`
/// (1 = reflect, 0 = jam).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsDesign {
    pub phi: CVec,
    pub alpha: Vec<f64>,
}

impl IrsDesign {
    pub fn new(phi: CVec, alpha: Vec<f64>) -> Self {
        assert_eq!(phi.len(), alpha.len(), "phi and alpha lengths differ");
        Self { phi, alpha }
    }

    /// IRS switched off: `Θ = 0`.
    pub fn off(m: usize) -> Self {
        Self::new(CVec::zeros(m), vec![1.0; m])
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// `Θ = diag(φ)`
    pub fn theta_mat(&self) -> CMat {
        diag(&self.phi)
    }

    /// `A = diag(α)`
    pub fn a_mat(&self) -> CMat {
        real_diag(&self.alpha)
    }

    /// `u_m = α_m φ_m*`, so that `diag(uᴴ) = AΘ`.
    pub fn u(&self) -> CVec {
        CVec::from_iterator(
            self.len(),
            self.phi.iter().zip(&self.alpha).map(|(p, a)| p.conj() * *a),
        )
    }

    /// Diagonal of `AΘ`.
    pub fn reflect_coeffs(&self) -> CVec {
        CVec::from_iterator(
            self.len(),
            self.phi.iter().zip(&self.alpha).map(|(p, a)| p * *a),
        )
    }

    /// Diagonal of `(I − A)Θ`.
    pub fn jam_coeffs(&self) -> CVec {
        CVec::from_iterator(
            self.len(),
            self.phi.iter().zip(&self.alpha).map(|(p, a)| p * (1.0 - *a)),
        )
    }

    /// `‖Θ‖²_F`
    pub fn power(&self) -> f64 {
        norm_sqr(&self.phi)
    }

    /// Largest distance of any `α_m` from {0, 1}.
    pub fn binariness_gap(&self) -> f64 {
        self.alpha
            .iter()
            .map(|a| a.abs().min((1.0 - a).abs()))
            .fold(0.0, f64::max)
    }

    pub fn phi_conj(&self) -> CVec {
        self.phi.map(|p: C64| p.conj())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_relations() {
        let irs = IrsDesign::new(
            CVec::from_vec(vec![C64::new(0.1, 0.2), C64::new(-0.3, 0.05)]),
            vec![1.0, 0.0],
        );
        let u = irs.u();
        assert_eq!(u[0], C64::new(0.1, -0.2));
        assert_eq!(u[1], C64::new(0.0, 0.0));
        let au = irs.a_mat() * irs.theta_mat();
        assert_eq!(au, CMat::from_diagonal(&u.map(|z| z.conj())));
        assert!((irs.power() - (0.05 + 0.0925)).abs() < 1e-15);
    }
}
