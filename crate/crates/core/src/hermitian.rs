//! Complex Hermitian matrix variables and LMIs on top of the real conic
//! builder.
//!
//! An `n × n` Hermitian variable occupies `n²` real coordinates: the `n`
//! diagonal entries, then `(Re X_ij, Im X_ij)` for each `i < j`.

use std::collections::BTreeMap;

use airsec_conic::{ConicError, ProblemBuilder, SymmetricAffine};

use crate::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianVar {
    pub offset: usize,
    pub n: usize,
}

impl HermitianVar {
    pub fn add(b: &mut ProblemBuilder, name: &str, n: usize) -> Self {
        let r = b.add_variable(name, n * n);
        Self { offset: r.start, n }
    }

    pub fn diag(&self, i: usize) -> usize {
        self.offset + i
    }

    fn pair(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // pairs ordered row-major over the strict upper triangle
        let before: usize = (0..i).map(|r| self.n - r - 1).sum();
        self.offset + self.n + 2 * (before + (j - i - 1))
    }

    pub fn re(&self, i: usize, j: usize) -> usize {
        self.pair(i.min(j), i.max(j))
    }

    pub fn im(&self, i: usize, j: usize) -> usize {
        self.pair(i.min(j), i.max(j)) + 1
    }

    /// Every real coordinate with its basis matrix `E` (so `X = Σ x·E`).
    pub fn basis(&self) -> Vec<(usize, CMat)> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut e = CMat::zeros(n, n);
            e[(i, i)] = C64::new(1.0, 0.0);
            out.push((self.diag(i), e));
        }
        for i in 0..n {
            for j in i + 1..n {
                let mut e = CMat::zeros(n, n);
                e[(i, j)] = C64::new(1.0, 0.0);
                e[(j, i)] = C64::new(1.0, 0.0);
                out.push((self.re(i, j), e));
                let mut e = CMat::zeros(n, n);
                e[(i, j)] = C64::new(0.0, 1.0);
                e[(j, i)] = C64::new(0.0, -1.0);
                out.push((self.im(i, j), e));
            }
        }
        out
    }

    /// Coefficients of `Re Tr(C X)` for Hermitian `C`, times `scale`.
    pub fn trace_terms(&self, c: &CMat, scale: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            out.push((self.diag(i), scale * c[(i, i)].re));
            for j in i + 1..self.n {
                // C_ji X_ij + C_ij X_ji = 2 Re(conj(C_ij) X_ij)
                out.push((self.re(i, j), scale * 2.0 * c[(i, j)].re));
                out.push((self.im(i, j), scale * 2.0 * c[(i, j)].im));
            }
        }
        out
    }

    /// Terms of the matrix-valued map `X ↦ scale · F X Fᴴ`.
    pub fn congruence_terms(&self, f: &CMat, scale: f64) -> Vec<(usize, CMat)> {
        let fh = f.adjoint();
        self.basis()
            .into_iter()
            .map(|(v, e)| (v, f * e * &fh * C64::new(scale, 0.0)))
            .collect()
    }

    /// Real embedding of `X ⪰ 0` as a `2n` PSD block.
    pub fn psd_block(&self) -> SymmetricAffine {
        let n = self.n;
        let mut blk = SymmetricAffine::new(2 * n);
        for i in 0..n {
            blk.add_entry(self.diag(i), i, i, 1.0);
            blk.add_entry(self.diag(i), n + i, n + i, 1.0);
            for j in i + 1..n {
                blk.add_entry(self.re(i, j), j, i, 1.0);
                blk.add_entry(self.re(i, j), n + j, n + i, 1.0);
                blk.add_entry(self.im(i, j), n + i, j, 1.0);
                blk.add_entry(self.im(i, j), n + j, i, -1.0);
            }
        }
        blk
    }

    pub fn value(&self, x: &[f64]) -> CMat {
        let n = self.n;
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(x[self.diag(i)], 0.0);
            for j in i + 1..n {
                let z = C64::new(x[self.re(i, j)], x[self.im(i, j)]);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }
}

/// Hermitian-matrix-valued affine expression `C₀ + Σ x_v C_v ⪰ 0`.
#[derive(Debug, Clone)]
pub struct HermitianLmi {
    constant: CMat,
    terms: BTreeMap<usize, CMat>,
}

impl HermitianLmi {
    pub fn new(n: usize) -> Self {
        Self {
            constant: CMat::zeros(n, n),
            terms: BTreeMap::new(),
        }
    }

    pub fn add_constant(&mut self, m: &CMat) {
        self.constant += m;
    }

    pub fn add_term(&mut self, var: usize, m: &CMat) {
        let n = self.constant.nrows();
        *self.terms.entry(var).or_insert_with(|| CMat::zeros(n, n)) += m;
    }

    pub fn add_terms(&mut self, terms: impl IntoIterator<Item = (usize, CMat)>) {
        for (v, m) in terms {
            self.add_term(v, &m);
        }
    }

    pub fn to_block(&self) -> Result<SymmetricAffine, ConicError> {
        let herm = |m: &CMat| (m + m.adjoint()) * C64::new(0.5, 0.0);
        let terms: Vec<(usize, CMat)> = self.terms.iter().map(|(v, m)| (*v, herm(m))).collect();
        SymmetricAffine::from_hermitian(&herm(&self.constant), &terms)
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        let mut m = self.constant.clone();
        for (v, t) in &self.terms {
            m += t * C64::new(x[*v], 0.0);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_cover_each_entry_once() {
        let v = HermitianVar { offset: 3, n: 4 };
        let mut idx: Vec<usize> = v.basis().iter().map(|b| b.0).collect();
        idx.sort();
        assert_eq!(idx, (3..19).collect::<Vec<_>>());
    }

    #[test]
    fn trace_terms_match_direct_trace() {
        let v = HermitianVar { offset: 0, n: 3 };
        let x: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let xm = v.value(&x);
        let c = CMat::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let c = &c + c.adjoint();
        let direct = (&c * &xm).trace().re;
        let lin: f64 = v.trace_terms(&c, 1.0).iter().map(|(i, a)| a * x[*i]).sum();
        assert!((direct - lin).abs() < 1e-12);
        let from_basis = v
            .basis()
            .iter()
            .fold(CMat::zeros(3, 3), |acc, (i, e)| acc + e * C64::new(x[*i], 0.0));
        assert_eq!(from_basis, xm);
    }
}
