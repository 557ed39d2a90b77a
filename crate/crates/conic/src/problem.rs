//! Cone-program interchange form.
//!
//! ```text
//! minimize    cᵀx
//! subject to  G x + s = h,   s ∈ K = K₁ × … × K_q
//!             A x     = b
//! ```
//!
//! `x` is free; every slack coordinate belongs to exactly one cone block, in
//! the order the blocks are listed. PSD blocks use the scaled lower-triangle
//! vectorization of [`crate::svec`].

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::embed::embed_hermitian;
use crate::error::ConicError;
use crate::sparse::SparseMatrix;
use crate::svec::{svec_index, svec_len};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cone {
    /// `dim` scalar slacks, each `≥ 0`.
    NonNeg { dim: usize },
    /// A symmetric `side × side` slack matrix, `⪰ 0`.
    Psd { side: usize },
}

impl Cone {
    /// Number of slack coordinates occupied.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::NonNeg { dim } => dim,
            Cone::Psd { side } => svec_len(side),
        }
    }

    /// Barrier degree.
    pub fn degree(&self) -> usize {
        match *self {
            Cone::NonNeg { dim } => dim,
            Cone::Psd { side } => side,
        }
    }
}

/// A named contiguous range of the variable vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarHandle {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl VarHandle {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMap {
    handles: Vec<VarHandle>,
}

impl VariableMap {
    pub fn get(&self, name: &str) -> Option<&VarHandle> {
        self.handles.iter().find(|h| h.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VarHandle> {
        self.handles.iter()
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub g: SparseMatrix,
    pub h: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub variables: VariableMap,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_slacks(&self) -> usize {
        self.h.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.b.len()
    }

    /// Slack offset of every cone block.
    pub fn cone_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.cones
            .iter()
            .map(|c| {
                let o = off;
                off += c.dim();
                o
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.c.len();
        let m: usize = self.cones.iter().map(Cone::dim).sum();
        let bad = |msg: String| Err(ConicError::Malformed(msg));
        if self.g.ncols() != n || self.a.ncols() != n {
            return bad(format!(
                "column counts G={} A={} differ from |c|={n}",
                self.g.ncols(),
                self.a.ncols()
            ));
        }
        if self.g.nrows() != m || self.h.len() != m {
            return bad(format!(
                "cone dimension {m} but G has {} rows and h has {}",
                self.g.nrows(),
                self.h.len()
            ));
        }
        if self.a.nrows() != self.b.len() {
            return bad(format!("A has {} rows, b has {}", self.a.nrows(), self.b.len()));
        }
        let all_finite = self.c.iter().chain(&self.h).chain(&self.b).all(|v| v.is_finite())
            && self.g.triplets().iter().chain(&self.a.triplets()).all(|t| t.2.is_finite());
        if !all_finite {
            return bad("non-finite data".into());
        }
        for h in self.variables.iter() {
            if h.offset + h.len > n {
                return bad(format!("variable '{}' exceeds {n} columns", h.name));
            }
        }
        Ok(())
    }

    /// JSON debug dump for cross-solver comparisons.
    ///
    /// Schema: `{c, g: {nrows, ncols, col_ptr, row_idx, values}, h, a, b,
    /// cones: [{type: "non_neg", dim} | {type: "psd", side}], variables}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ConicError> {
        serde_json::from_str(s).map_err(|e| ConicError::Malformed(e.to_string()))
    }
}

/// Scalar affine expression `constant + Σ coef·x[idx]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn term(mut self, idx: usize, coef: f64) -> Self {
        self.terms.push((idx, coef));
        self
    }

    pub fn add_term(&mut self, idx: usize, coef: f64) {
        self.terms.push((idx, coef));
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    fn max_abs(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.1.abs())
            .fold(self.constant.abs(), f64::max)
    }
}

/// Symmetric-matrix-valued affine expression `C₀ + Σ x[idx]·C_idx`, stored in
/// svec coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricAffine {
    side: usize,
    constant: Vec<f64>,
    terms: BTreeMap<usize, BTreeMap<usize, f64>>,
}

impl SymmetricAffine {
    pub fn new(side: usize) -> Self {
        Self {
            side,
            constant: vec![0.0; svec_len(side)],
            terms: BTreeMap::new(),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Adds `val` to matrix entries `(i, j)` and `(j, i)` of the constant.
    pub fn add_constant_entry(&mut self, i: usize, j: usize, val: f64) {
        let k = svec_index(self.side, i, j);
        self.constant[k] += val * crate::svec::entry_weight(i, j);
    }

    pub fn add_constant(&mut self, m: &DMatrix<f64>) {
        assert_eq!(m.nrows(), self.side);
        for j in 0..self.side {
            for i in j..self.side {
                let v = if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) };
                if v != 0.0 {
                    self.add_constant_entry(i, j, v);
                }
            }
        }
    }

    /// Adds `coef·x[var]` to matrix entries `(i, j)` and `(j, i)`.
    pub fn add_entry(&mut self, var: usize, i: usize, j: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let k = svec_index(self.side, i, j);
        *self.terms.entry(var).or_default().entry(k).or_insert(0.0) +=
            coef * crate::svec::entry_weight(i, j);
    }

    /// Adds `x[var]·m` for a symmetric coefficient matrix.
    pub fn add_term(&mut self, var: usize, m: &DMatrix<f64>) {
        assert_eq!(m.nrows(), self.side);
        for j in 0..self.side {
            for i in j..self.side {
                let v = if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) };
                self.add_entry(var, i, j, v);
            }
        }
    }

    /// Real embedding of a Hermitian affine expression: returns the block whose
    /// PSD-ness is equivalent to that of `constant + Σ x[var]·term`.
    pub fn from_hermitian(
        constant: &DMatrix<Complex<f64>>,
        terms: &[(usize, DMatrix<Complex<f64>>)],
    ) -> Result<Self, ConicError> {
        let n = constant.nrows();
        let mut out = Self::new(2 * n);
        out.add_constant(&embed_hermitian(constant)?);
        for (var, t) in terms {
            if t.nrows() != n {
                return Err(ConicError::Malformed("LMI term size mismatch".into()));
            }
            out.add_term(*var, &embed_hermitian(t)?);
        }
        Ok(out)
    }

    fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .flat_map(|m| m.values())
            .chain(&self.constant)
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Evaluates the matrix at `x` in svec form.
    pub fn eval_svec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.constant.clone();
        for (&var, entries) in &self.terms {
            for (&k, &c) in entries {
                out[k] += c * x[var];
            }
        }
        out
    }
}

/// Incremental construction of a [`ConicProblem`].
///
/// Each added constraint is rescaled so its largest coefficient (or constant)
/// has magnitude one; this does not change the feasible set.
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    n: usize,
    handles: Vec<VarHandle>,
    c: Vec<f64>,
    g: Vec<(usize, usize, f64)>,
    h: Vec<f64>,
    cones: Vec<Cone>,
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    pending_nonneg: usize,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, len: usize) -> Range<usize> {
        let name = name.into();
        assert!(
            self.handles.iter().all(|h| h.name != name),
            "duplicate variable name {name}"
        );
        let offset = self.n;
        self.handles.push(VarHandle { name, offset, len });
        self.n += len;
        self.c.resize(self.n, 0.0);
        offset..self.n
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn add_objective(&mut self, idx: usize, coef: f64) {
        self.c[idx] += coef;
    }

    fn flush_nonneg(&mut self) {
        if self.pending_nonneg > 0 {
            self.cones.push(Cone::NonNeg {
                dim: self.pending_nonneg,
            });
            self.pending_nonneg = 0;
        }
    }

    /// `expr ≥ 0`. Consecutive scalar constraints share one cone block.
    pub fn add_nonneg(&mut self, expr: &AffineExpr) {
        let scale = normalizer(expr.max_abs());
        let row = self.h.len();
        // s = h - Gx = constant + Σ coef x  ⇒  h = constant, G = -coef
        self.h.push(expr.constant * scale);
        for &(i, c) in &expr.terms {
            self.g.push((row, i, -c * scale));
        }
        self.pending_nonneg += 1;
    }

    /// `expr = 0`.
    pub fn add_equality(&mut self, expr: &AffineExpr) {
        let scale = normalizer(expr.max_abs());
        let row = self.b.len();
        self.b.push(-expr.constant * scale);
        for &(i, c) in &expr.terms {
            self.a.push((row, i, c * scale));
        }
    }

    /// `block ⪰ 0`.
    pub fn add_psd(&mut self, block: &SymmetricAffine) {
        self.flush_nonneg();
        let scale = normalizer(block.max_abs());
        let row0 = self.h.len();
        self.h.extend(block.constant.iter().map(|v| v * scale));
        for (&var, entries) in &block.terms {
            for (&k, &c) in entries {
                self.g.push((row0 + k, var, -c * scale));
            }
        }
        self.cones.push(Cone::Psd { side: block.side });
    }

    pub fn build(mut self) -> ConicProblem {
        self.flush_nonneg();
        let m = self.h.len();
        ConicProblem {
            g: SparseMatrix::from_triplets(m, self.n, &self.g),
            a: SparseMatrix::from_triplets(self.b.len(), self.n, &self.a),
            c: self.c,
            h: self.h,
            b: self.b,
            cones: self.cones,
            variables: VariableMap {
                handles: self.handles,
            },
        }
    }
}

fn normalizer(max_abs: f64) -> f64 {
    if max_abs > 0.0 && max_abs.is_finite() {
        1.0 / max_abs
    } else {
        1.0
    }
}
