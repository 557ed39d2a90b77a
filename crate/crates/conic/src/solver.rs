//! Homogeneous self-dual interior-point method.
//!
//! The iteration follows the classic cone-LP scheme: the problem is embedded
//! with the homogenizing pair `(τ, κ)`, search directions come from the
//! Nesterov–Todd scaled Newton system, and each step uses a Mehrotra
//! predictor-corrector pair. Data are Ruiz-equilibrated first; all reported
//! quantities refer to the original, unscaled problem.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::problem::{Cone, ConicProblem};
use crate::sparse::SparseMatrix;
use crate::svec::{smat, svec, svec_coord, svec_len};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    /// Stopped early (stall or iteration limit); the returned point is the
    /// best iterate seen and meets `reduced_tol`.
    AlmostOptimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Bound on the relative primal, dual and gap residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Iterative-refinement passes on each Newton solve.
    pub refinement: usize,
    /// Ruiz equilibration passes.
    pub equilibration_passes: usize,
    /// Accuracy accepted from the best iterate when the solve stops early.
    #[serde(default = "default_reduced_tol")]
    pub reduced_tol: f64,
}

fn default_reduced_tol() -> f64 {
    1e-5
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100,
            step_fraction: 0.99,
            refinement: 1,
            equilibration_passes: 10,
            reduced_tol: default_reduced_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max(‖Gx + s − h‖/max(1,‖h‖), ‖Ax − b‖/max(1,‖b‖))`
    pub primal: f64,
    /// `‖Gᵀz + Aᵀy + c‖/max(1,‖c‖)`
    pub dual: f64,
    /// `max(sᵀz, |pobj − dobj|) / max(1, |pobj|)`
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub mu: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub objective_value: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// `Optimal` or `AlmostOptimal`.
    pub fn is_usable(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::AlmostOptimal)
    }

    fn failed(p: &ConicProblem, status: SolveStatus) -> Self {
        Self {
            status,
            x: vec![0.0; p.c.len()],
            s: vec![0.0; p.h.len()],
            y: vec![0.0; p.b.len()],
            z: vec![0.0; p.h.len()],
            objective_value: f64::NAN,
            dual_objective: f64::NAN,
            residuals: Residuals {
                primal: f64::INFINITY,
                dual: f64::INFINITY,
                gap: f64::INFINITY,
            },
            iterations: 0,
            trace: Vec::new(),
        }
    }
}

/// The solve contract. Model code only depends on this trait and the data
/// types above, so another backend can be substituted here.
pub trait ConicBackend: Sync {
    fn solve(&self, p: &ConicProblem, settings: &SolverSettings) -> ConicSolution;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicBackend for InteriorPoint {
    fn solve(&self, p: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
        solve_impl(p, settings)
    }
}

pub fn solve(p: &ConicProblem, tol: f64, max_iter: usize) -> ConicSolution {
    solve_with(
        p,
        &SolverSettings {
            tol,
            max_iter,
            ..SolverSettings::default()
        },
    )
}

pub fn solve_with(p: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    InteriorPoint.solve(p, settings)
}

// ---------------------------------------------------------------------------
// Small vector helpers

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

// ---------------------------------------------------------------------------
// Cone layout

#[derive(Debug, Clone, Copy)]
enum Block {
    NonNeg { off: usize, dim: usize },
    Psd { off: usize, side: usize },
}

impl Block {
    fn range(&self) -> std::ops::Range<usize> {
        match *self {
            Block::NonNeg { off, dim } => off..off + dim,
            Block::Psd { off, side } => off..off + svec_len(side),
        }
    }
}

fn layout(cones: &[Cone]) -> Vec<Block> {
    let mut off = 0;
    cones
        .iter()
        .map(|c| {
            let b = match *c {
                Cone::NonNeg { dim } => Block::NonNeg { off, dim },
                Cone::Psd { side } => Block::Psd { off, side },
            };
            off += c.dim();
            b
        })
        .collect()
}

fn identity(blocks: &[Block], m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    for b in blocks {
        match *b {
            Block::NonNeg { off, dim } => e[off..off + dim].fill(1.0),
            Block::Psd { off, side } => {
                for j in 0..side {
                    e[off + crate::svec::svec_index(side, j, j)] = 1.0;
                }
            }
        }
    }
    e
}

/// Smallest `t` such that `v + t·e` lies on the cone boundary, i.e. minus the
/// minimum "eigenvalue" of `v`.
fn max_violation(blocks: &[Block], v: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for b in blocks {
        match *b {
            Block::NonNeg { off, dim } => {
                for &x in &v[off..off + dim] {
                    worst = worst.max(-x);
                }
            }
            Block::Psd { off, side } => {
                let m = smat(&v[off..off + svec_len(side)], side);
                let ev = SymmetricEigen::new(m).eigenvalues;
                worst = worst.max(-ev.min());
            }
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Equilibration

struct Scaled {
    c: Vec<f64>,
    g: SparseMatrix,
    h: Vec<f64>,
    a: SparseMatrix,
    b: Vec<f64>,
    /// column scaling D: x_orig = D x̃ / κ_b
    d: Vec<f64>,
    /// row scaling E on the cone rows: s_orig = s̃ / (E κ_b), z_orig = E z̃ / κ_c
    e: Vec<f64>,
    /// row scaling F on the equalities: y_orig = F ỹ / κ_c
    f: Vec<f64>,
    kc: f64,
    kb: f64,
}

fn equilibrate(p: &ConicProblem, blocks: &[Block], passes: usize) -> Scaled {
    let n = p.c.len();
    let m = p.h.len();
    let q = p.b.len();
    let mut g = p.g.clone();
    let mut a = p.a.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut f = vec![1.0; q];
    let clamp = |v: f64| if v > 0.0 && v.is_finite() { v.clamp(1e-8, 1e8) } else { 1.0 };

    for _ in 0..passes {
        let mut dc = vec![1.0; n];
        for (j, dj) in dc.iter_mut().enumerate() {
            let mx = g.col_abs_max(j).max(a.col_abs_max(j));
            *dj = if mx > 0.0 { 1.0 / mx.sqrt() } else { 1.0 };
        }
        let mut gr = vec![0.0f64; m];
        for j in 0..n {
            let (rows, vals) = g.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                gr[r] = gr[r].max(v.abs());
            }
        }
        let mut ar = vec![0.0f64; q];
        for j in 0..n {
            let (rows, vals) = a.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                ar[r] = ar[r].max(v.abs());
            }
        }
        let mut er = vec![1.0; m];
        for b in blocks {
            match *b {
                Block::NonNeg { off, dim } => {
                    for i in off..off + dim {
                        if gr[i] > 0.0 {
                            er[i] = 1.0 / gr[i].sqrt();
                        }
                    }
                }
                Block::Psd { .. } => {
                    // One factor per block keeps the cone invariant.
                    let r = b.range();
                    let mx = gr[r.clone()].iter().fold(0.0f64, |x, v| x.max(*v));
                    if mx > 0.0 {
                        er[r].fill(1.0 / mx.sqrt());
                    }
                }
            }
        }
        let fr: Vec<f64> = ar
            .iter()
            .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        for j in 0..n {
            let nd = clamp(d[j] * dc[j]);
            dc[j] = nd / d[j];
            d[j] = nd;
        }
        for i in 0..m {
            let ne = clamp(e[i] * er[i]);
            er[i] = ne / e[i];
            e[i] = ne;
        }
        let mut fr = fr;
        for i in 0..q {
            let nf = clamp(f[i] * fr[i]);
            fr[i] = nf / f[i];
            f[i] = nf;
        }
        g.scale(&er, &dc);
        a.scale(&fr, &dc);
    }

    let mut c: Vec<f64> = p.c.iter().zip(&d).map(|(v, s)| v * s).collect();
    let mut h: Vec<f64> = p.h.iter().zip(&e).map(|(v, s)| v * s).collect();
    let mut b: Vec<f64> = p.b.iter().zip(&f).map(|(v, s)| v * s).collect();
    let cmax = c.iter().fold(0.0f64, |x, v| x.max(v.abs()));
    let bmax = h.iter().chain(&b).fold(0.0f64, |x, v| x.max(v.abs()));
    let kc = if cmax > 0.0 { (1.0 / cmax).clamp(1e-6, 1e6) } else { 1.0 };
    let kb = if bmax > 0.0 { (1.0 / bmax).clamp(1e-6, 1e6) } else { 1.0 };
    c.iter_mut().for_each(|v| *v *= kc);
    h.iter_mut().for_each(|v| *v *= kb);
    b.iter_mut().for_each(|v| *v *= kb);
    Scaled {
        c,
        g,
        h,
        a,
        b,
        d,
        e,
        f,
        kc,
        kb,
    }
}

// ---------------------------------------------------------------------------
// Nesterov–Todd scaling

enum BlockScaling {
    NonNeg {
        w: Vec<f64>,
    },
    Psd {
        r: DMatrix<f64>,
        /// (R Rᵀ)⁻¹
        v: DMatrix<f64>,
        /// R Rᵀ
        rrt: DMatrix<f64>,
    },
}

struct Scaling {
    blocks: Vec<(Block, BlockScaling)>,
    /// λ = W z = W⁻ᵀ s, in svec form (diagonal for PSD blocks).
    lambda: Vec<f64>,
}

impl Scaling {
    fn identity(blocks: &[Block], m: usize) -> Self {
        let bs = blocks
            .iter()
            .map(|b| {
                let sc = match *b {
                    Block::NonNeg { dim, .. } => BlockScaling::NonNeg { w: vec![1.0; dim] },
                    Block::Psd { side, .. } => BlockScaling::Psd {
                        r: DMatrix::identity(side, side),
                        v: DMatrix::identity(side, side),
                        rrt: DMatrix::identity(side, side),
                    },
                };
                (*b, sc)
            })
            .collect();
        Self {
            blocks: bs,
            lambda: identity(blocks, m),
        }
    }

    fn nt(blocks: &[Block], s: &[f64], z: &[f64]) -> Option<Self> {
        let mut lambda = vec![0.0; s.len()];
        let mut out = Vec::with_capacity(blocks.len());
        for b in blocks {
            match *b {
                Block::NonNeg { off, dim } => {
                    let mut w = Vec::with_capacity(dim);
                    for i in off..off + dim {
                        if !(s[i] > 0.0 && z[i] > 0.0) {
                            return None;
                        }
                        w.push((s[i] / z[i]).sqrt());
                        lambda[i] = (s[i] * z[i]).sqrt();
                    }
                    out.push((*b, BlockScaling::NonNeg { w }));
                }
                Block::Psd { off, side } => {
                    let len = svec_len(side);
                    let sm = smat(&s[off..off + len], side);
                    let zm = smat(&z[off..off + len], side);
                    let ls = sm.cholesky()?.l();
                    let lz = zm.cholesky()?.l();
                    let prod = lz.transpose() * &ls;
                    let svd = prod.svd(true, true);
                    let u = svd.u?;
                    let vt = svd.v_t?;
                    let sig = svd.singular_values;
                    if sig.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                        return None;
                    }
                    let inv_sqrt = DVector::from_iterator(side, sig.iter().map(|x| 1.0 / x.sqrt()));
                    // R = L_s V Λ^{-1/2};  R⁻¹ = Λ^{-1/2} Uᵀ L_zᵀ
                    let mut r = ls * vt.transpose();
                    for j in 0..side {
                        r.column_mut(j).scale_mut(inv_sqrt[j]);
                    }
                    let mut rinv = u.transpose() * lz.transpose();
                    for i in 0..side {
                        rinv.row_mut(i).scale_mut(inv_sqrt[i]);
                    }
                    let v = rinv.transpose() * &rinv;
                    let rrt = &r * r.transpose();
                    for j in 0..side {
                        lambda[off + crate::svec::svec_index(side, j, j)] = sig[j];
                    }
                    out.push((*b, BlockScaling::Psd { r, v, rrt }));
                }
            }
        }
        Some(Self {
            blocks: out,
            lambda,
        })
    }

    /// `W u`
    fn apply_w(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (b, sc) in &self.blocks {
            let rg = b.range();
            match (b, sc) {
                (_, BlockScaling::NonNeg { w }) => {
                    for (k, i) in rg.enumerate() {
                        out[i] = w[k] * u[i];
                    }
                }
                (Block::Psd { side, .. }, BlockScaling::Psd { r, .. }) => {
                    let m = smat(&u[rg.clone()], *side);
                    let res = r.transpose() * m * r;
                    out[rg].copy_from_slice(&svec(&res));
                }
                _ => unreachable!(),
            }
        }
        out
    }

    /// `Wᵀ u`
    fn apply_wt(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (b, sc) in &self.blocks {
            let rg = b.range();
            match (b, sc) {
                (_, BlockScaling::NonNeg { w }) => {
                    for (k, i) in rg.enumerate() {
                        out[i] = w[k] * u[i];
                    }
                }
                (Block::Psd { side, .. }, BlockScaling::Psd { r, .. }) => {
                    let m = smat(&u[rg.clone()], *side);
                    let res = r * m * r.transpose();
                    out[rg].copy_from_slice(&svec(&res));
                }
                _ => unreachable!(),
            }
        }
        out
    }

    /// `(WᵀW)⁻¹ u`
    fn apply_wtw_inv(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (b, sc) in &self.blocks {
            let rg = b.range();
            match (b, sc) {
                (_, BlockScaling::NonNeg { w }) => {
                    for (k, i) in rg.enumerate() {
                        out[i] = u[i] / (w[k] * w[k]);
                    }
                }
                (Block::Psd { side, .. }, BlockScaling::Psd { v, .. }) => {
                    let m = smat(&u[rg.clone()], *side);
                    let res = v * m * v;
                    out[rg].copy_from_slice(&svec(&res));
                }
                _ => unreachable!(),
            }
        }
        out
    }

    /// `WᵀW u`
    fn apply_wtw(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (b, sc) in &self.blocks {
            let rg = b.range();
            match (b, sc) {
                (_, BlockScaling::NonNeg { w }) => {
                    for (k, i) in rg.enumerate() {
                        out[i] = u[i] * w[k] * w[k];
                    }
                }
                (Block::Psd { side, .. }, BlockScaling::Psd { rrt, .. }) => {
                    let m = smat(&u[rg.clone()], *side);
                    let res = rrt * m * rrt;
                    out[rg].copy_from_slice(&svec(&res));
                }
                _ => unreachable!(),
            }
        }
        out
    }

    /// Solves `λ ∘ x = d` for `x`.
    fn lambda_solve(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; d.len()];
        for (b, _) in &self.blocks {
            match *b {
                Block::NonNeg { off, dim } => {
                    for i in off..off + dim {
                        out[i] = d[i] / self.lambda[i];
                    }
                }
                Block::Psd { off, side } => {
                    let lam = self.psd_diag(off, side);
                    for k in 0..svec_len(side) {
                        let (i, j) = svec_coord(side, k);
                        out[off + k] = 2.0 * d[off + k] / (lam[i] + lam[j]);
                    }
                }
            }
        }
        out
    }

    fn psd_diag(&self, off: usize, side: usize) -> Vec<f64> {
        (0..side)
            .map(|j| self.lambda[off + crate::svec::svec_index(side, j, j)])
            .collect()
    }

    /// Largest `α` with `λ + α d` in the cone (∞ if unbounded).
    fn max_step(&self, d: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for (b, _) in &self.blocks {
            match *b {
                Block::NonNeg { off, dim } => {
                    for i in off..off + dim {
                        if d[i] < 0.0 {
                            alpha = alpha.min(-self.lambda[i] / d[i]);
                        }
                    }
                }
                Block::Psd { off, side } => {
                    let lam = self.psd_diag(off, side);
                    let mut m = smat(&d[off..off + svec_len(side)], side);
                    for i in 0..side {
                        for j in 0..side {
                            m[(i, j)] /= (lam[i] * lam[j]).sqrt();
                        }
                    }
                    let mn = SymmetricEigen::new(m).eigenvalues.min();
                    if mn < 0.0 {
                        alpha = alpha.min(-1.0 / mn);
                    }
                }
            }
        }
        alpha
    }
}

/// Jordan product `u ∘ v`.
fn jordan(blocks: &[Block], u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for b in blocks {
        match *b {
            Block::NonNeg { off, dim } => {
                for i in off..off + dim {
                    out[i] = u[i] * v[i];
                }
            }
            Block::Psd { off, side } => {
                let len = svec_len(side);
                let um = smat(&u[off..off + len], side);
                let vm = smat(&v[off..off + len], side);
                let p = &um * &vm;
                let sym = (&p + p.transpose()) * 0.5;
                out[off..off + len].copy_from_slice(&svec(&sym));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reduced KKT system

/// Row-wise view of the constraint matrix, split by cone block.
struct Structure {
    /// For each LP row: its (col, value) entries.
    lp_rows: Vec<(usize, Vec<(usize, f64)>)>,
    /// For each PSD block: the nonzero columns with (local svec coord, value).
    psd_cols: Vec<Vec<(usize, Vec<(usize, f64)>)>>,
}

impl Structure {
    fn new(g: &SparseMatrix, blocks: &[Block]) -> Self {
        let m = g.nrows();
        let mut owner = vec![(usize::MAX, 0usize); m];
        let mut psd_index = 0;
        let mut lp_row_slot = vec![usize::MAX; m];
        let mut lp_rows = Vec::new();
        let mut n_psd = 0;
        for b in blocks {
            match *b {
                Block::NonNeg { off, dim } => {
                    for i in off..off + dim {
                        lp_row_slot[i] = lp_rows.len();
                        lp_rows.push((i, Vec::new()));
                    }
                }
                Block::Psd { off, side } => {
                    for i in off..off + svec_len(side) {
                        owner[i] = (psd_index, off);
                    }
                    psd_index += 1;
                    n_psd += 1;
                }
            }
        }
        let mut psd_cols: Vec<Vec<(usize, Vec<(usize, f64)>)>> = vec![Vec::new(); n_psd];
        for j in 0..g.ncols() {
            let (rows, vals) = g.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                if lp_row_slot[r] != usize::MAX {
                    lp_rows[lp_row_slot[r]].1.push((j, v));
                } else {
                    let (bi, off) = owner[r];
                    let cols = &mut psd_cols[bi];
                    if cols.last().map(|c| c.0) != Some(j) {
                        cols.push((j, Vec::new()));
                    }
                    cols.last_mut().unwrap().1.push((r - off, v));
                }
            }
        }
        lp_rows.retain(|r| !r.1.is_empty());
        Self { lp_rows, psd_cols }
    }

    /// `Gᵀ (WᵀW)⁻¹ G`, dense.
    fn assemble(&self, n: usize, scaling: &Scaling) -> DMatrix<f64> {
        let mut hm = DMatrix::<f64>::zeros(n, n);
        let mut lp_w = std::collections::HashMap::new();
        let mut psd_v = Vec::new();
        for (b, sc) in &scaling.blocks {
            match sc {
                BlockScaling::NonNeg { w } => {
                    if let Block::NonNeg { off, .. } = *b {
                        for (k, wk) in w.iter().enumerate() {
                            lp_w.insert(off + k, *wk);
                        }
                    }
                }
                BlockScaling::Psd { v, .. } => {
                    if let Block::Psd { side, .. } = *b {
                        psd_v.push((side, v));
                    }
                }
            }
        }
        for (row, entries) in &self.lp_rows {
            let w = lp_w[row];
            let dinv = 1.0 / (w * w);
            for (ia, &(ca, va)) in entries.iter().enumerate() {
                for &(cb, vb) in &entries[ia..] {
                    hm[(ca.min(cb), ca.max(cb))] += dinv * va * vb;
                }
            }
        }
        for (cols, &(side, v)) in self.psd_cols.iter().zip(&psd_v) {
            if cols.is_empty() {
                continue;
            }
            let len = svec_len(side);
            let coords: Vec<(usize, usize, f64)> = (0..len)
                .map(|k| {
                    let (a, b) = svec_coord(side, k);
                    (a, b, crate::svec::entry_weight(a, b))
                })
                .collect();
            let dense_cost = 2 * side * side * side;
            let ys: Vec<Vec<f64>> = cols
                .iter()
                .map(|(_, entries)| {
                    if entries.len() * len * 3 < dense_cost {
                        let mut y = vec![0.0; len];
                        for &(k, g) in entries {
                            let (r, c, _) = coords[k];
                            if r == c {
                                for (t, &(ra, cb, w)) in coords.iter().enumerate() {
                                    y[t] += g * w * v[(ra, r)] * v[(cb, r)];
                                }
                            } else {
                                let gh = g / std::f64::consts::SQRT_2;
                                for (t, &(ra, cb, w)) in coords.iter().enumerate() {
                                    y[t] += gh
                                        * w
                                        * (v[(ra, r)] * v[(cb, c)] + v[(ra, c)] * v[(cb, r)]);
                                }
                            }
                        }
                        y
                    } else {
                        let mut g = vec![0.0; len];
                        for &(k, val) in entries {
                            g[k] = val;
                        }
                        let sm = smat(&g, side);
                        svec(&(v * sm * v))
                    }
                })
                .collect();
            for (ii, (ci, ei)) in cols.iter().enumerate() {
                for (jj, (cj, _)) in cols.iter().enumerate().skip(ii) {
                    let yj = &ys[jj];
                    let val: f64 = ei.iter().map(|&(k, g)| g * yj[k]).sum();
                    hm[(*ci, *cj)] += val;
                }
            }
        }
        for j in 0..n {
            for i in j + 1..n {
                hm[(i, j)] = hm[(j, i)];
            }
        }
        hm
    }
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

struct Kkt<'a> {
    data: &'a Scaled,
    scaling: &'a Scaling,
    factor: Factor,
    refinement: usize,
}

impl<'a> Kkt<'a> {
    fn new(
        data: &'a Scaled,
        structure: &Structure,
        scaling: &'a Scaling,
        refinement: usize,
    ) -> Option<Self> {
        let n = data.c.len();
        let p = data.b.len();
        let mut hm = structure.assemble(n, scaling);
        if !hm.iter().all(|v| v.is_finite()) {
            return None;
        }
        let scale = (0..n).map(|i| hm[(i, i)].abs()).fold(1.0f64, f64::max);
        let factor = if p == 0 {
            let mut reg = 0.0;
            loop {
                let mut hr = hm.clone();
                for i in 0..n {
                    hr[(i, i)] += reg * scale;
                }
                if let Some(ch) = hr.cholesky() {
                    break Factor::Chol(ch);
                }
                reg = if reg == 0.0 { 1e-13 } else { reg * 100.0 };
                if reg > 1e-5 {
                    return None;
                }
            }
        } else {
            let delta = 1e-13 * scale;
            for i in 0..n {
                hm[(i, i)] += delta;
            }
            let mut k = DMatrix::<f64>::zeros(n + p, n + p);
            k.view_mut((0, 0), (n, n)).copy_from(&hm);
            for j in 0..n {
                let (rows, vals) = data.a.col(j);
                for (&r, &v) in rows.iter().zip(vals) {
                    k[(n + r, j)] = v;
                    k[(j, n + r)] = v;
                }
            }
            for i in 0..p {
                k[(n + i, n + i)] = -delta;
            }
            let lu = k.lu();
            if !lu.is_invertible() {
                return None;
            }
            Factor::Lu(lu)
        };
        Some(Self {
            data,
            scaling,
            factor,
            refinement,
        })
    }

    fn solve_once(&self, bx: &[f64], by: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = bx.len();
        let t = self.scaling.apply_wtw_inv(bz);
        let mut r1 = bx.to_vec();
        self.data.g.tmul_acc(1.0, &t, &mut r1);
        let (x, y) = match &self.factor {
            Factor::Chol(ch) => (ch.solve(&DVector::from_vec(r1)).data.into(), Vec::new()),
            Factor::Lu(lu) => {
                let mut rhs = r1;
                rhs.extend_from_slice(by);
                let sol: Vec<f64> = lu
                    .solve(&DVector::from_vec(rhs))
                    .map(|v| v.data.into())
                    .unwrap_or_else(|| vec![f64::NAN; n + by.len()]);
                (sol[..n].to_vec(), sol[n..].to_vec())
            }
        };
        let gx = self.data.g.mul(&x);
        let mut z = self.scaling.apply_wtw_inv(&gx);
        axpy(-1.0, &t, &mut z);
        (x, y, z)
    }

    fn solve(&self, bx: &[f64], by: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mut x, mut y, mut z) = self.solve_once(bx, by, bz);
        for _ in 0..self.refinement {
            // residual of the full system [[0 Aᵀ Gᵀ]; [A 0 0]; [G 0 −WᵀW]]
            let mut rx = bx.to_vec();
            self.data.a.tmul_acc(-1.0, &y, &mut rx);
            self.data.g.tmul_acc(-1.0, &z, &mut rx);
            let mut ry = by.to_vec();
            self.data.a.mul_acc(-1.0, &x, &mut ry);
            let mut rz = bz.to_vec();
            self.data.g.mul_acc(-1.0, &x, &mut rz);
            axpy(1.0, &self.scaling.apply_wtw(&z), &mut rz);
            let (dx, dy, dz) = self.solve_once(&rx, &ry, &rz);
            axpy(1.0, &dx, &mut x);
            axpy(1.0, &dy, &mut y);
            axpy(1.0, &dz, &mut z);
        }
        (x, y, z)
    }
}

struct Unscaled {
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

fn unscale(d: &Scaled, x: &[f64], s: &[f64], y: &[f64], z: &[f64], tau: f64) -> Unscaled {
    let pb = 1.0 / (d.kb * tau);
    let dc = 1.0 / (d.kc * tau);
    Unscaled {
        x: x.iter().zip(&d.d).map(|(v, s)| v * s * pb).collect(),
        s: s.iter().zip(&d.e).map(|(v, e)| v / e * pb).collect(),
        y: y.iter().zip(&d.f).map(|(v, f)| v * f * dc).collect(),
        z: z.iter().zip(&d.e).map(|(v, e)| v * e * dc).collect(),
    }
}

fn residuals(p: &ConicProblem, u: &Unscaled) -> (Residuals, f64, f64) {
    let mut rp = u.s.clone();
    p.g.mul_acc(1.0, &u.x, &mut rp);
    axpy(-1.0, &p.h, &mut rp);
    let mut re = p.a.mul(&u.x);
    axpy(-1.0, &p.b, &mut re);
    let mut rd = p.c.clone();
    p.g.tmul_acc(1.0, &u.z, &mut rd);
    p.a.tmul_acc(1.0, &u.y, &mut rd);
    let pobj = dot(&p.c, &u.x);
    let dobj = -dot(&p.h, &u.z) - dot(&p.b, &u.y);
    let gap = dot(&u.s, &u.z);
    let res = Residuals {
        primal: (norm(&rp) / norm(&p.h).max(1.0)).max(norm(&re) / norm(&p.b).max(1.0)),
        dual: norm(&rd) / norm(&p.c).max(1.0),
        gap: gap.abs().max((pobj - dobj).abs()) / pobj.abs().max(1.0),
    };
    (res, pobj, dobj)
}

fn solve_impl(p: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    if let Err(e) = p.validate() {
        log::warn!("rejecting malformed cone program: {e}");
        return ConicSolution::failed(p, SolveStatus::NumericalFailure);
    }
    let blocks = layout(&p.cones);
    let n = p.c.len();
    let m = p.h.len();
    let degree: usize = p.cones.iter().map(Cone::degree).sum();
    let data = equilibrate(p, &blocks, settings.equilibration_passes);
    let structure = Structure::new(&data.g, &blocks);
    let e = identity(&blocks, m);

    // Starting point from two least-squares solves with W = I.
    let id = Scaling::identity(&blocks, m);
    let Some(kkt0) = Kkt::new(&data, &structure, &id, settings.refinement) else {
        return ConicSolution::failed(p, SolveStatus::NumericalFailure);
    };
    let (mut x, _, zp) = kkt0.solve(&vec![0.0; n], &data.b, &data.h);
    let mut s: Vec<f64> = zp.iter().map(|v| -v).collect();
    let neg_c: Vec<f64> = data.c.iter().map(|v| -v).collect();
    let (_, mut y, mut z) = kkt0.solve(&neg_c, &vec![0.0; data.b.len()], &vec![0.0; m]);
    drop(kkt0);
    for v in [&mut s, &mut z] {
        let viol = max_violation(&blocks, v);
        if viol >= -1e-8 {
            axpy(1.0 + viol.max(0.0), &e, v);
        }
    }
    let mut tau: f64 = 1.0;
    let mut kappa: f64 = 1.0;

    let resx0 = norm(&p.c).max(1.0);
    let resy0 = norm(&p.b).max(1.0);
    let resz0 = norm(&p.h).max(1.0);

    let mut trace = Vec::new();
    let mut last_step = 0.0;
    let mut stalls = 0;
    let mut status = SolveStatus::MaxIterations;
    let mut iters = 0;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> = None;

    for iter in 0..=settings.max_iter {
        iters = iter;
        if !(all_finite(&x) && all_finite(&s) && all_finite(&y) && all_finite(&z))
            || !(tau.is_finite() && kappa.is_finite())
        {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let mu = (dot(&s, &z) + tau * kappa) / (degree as f64 + 1.0);
        let u = unscale(&data, &x, &s, &y, &z, tau);
        let (res, pobj, dobj) = residuals(p, &u);
        trace.push(IterationRecord {
            iter,
            primal_objective: pobj,
            dual_objective: dobj,
            residuals: res,
            mu,
            step: last_step,
        });
        log::trace!(
            "it {iter:3} pobj {pobj:+.6e} dobj {dobj:+.6e} pres {:.1e} dres {:.1e} gap {:.1e} tau {tau:.1e} kappa {kappa:.1e}",
            res.primal,
            res.dual,
            res.gap
        );
        if res.max() <= settings.tol {
            status = SolveStatus::Optimal;
            break;
        }
        if best.as_ref().is_none_or(|b| res.max() < b.0) {
            best = Some((res.max(), x.clone(), s.clone(), y.clone(), z.clone(), tau));
        }
        // Infeasibility certificates (scale-free, so τ is irrelevant).
        let raw = unscale(&data, &x, &s, &y, &z, 1.0);
        let hz_by = dot(&p.h, &raw.z) + dot(&p.b, &raw.y);
        if hz_by < 0.0 {
            let mut r = p.g.tmul(&raw.z);
            p.a.tmul_acc(1.0, &raw.y, &mut r);
            if norm(&r) / resx0 / -hz_by <= settings.tol {
                status = SolveStatus::PrimalInfeasible;
                break;
            }
        }
        let cx = dot(&p.c, &raw.x);
        if cx < 0.0 {
            let mut r = p.g.mul(&raw.x);
            axpy(1.0, &raw.s, &mut r);
            let ra = p.a.mul(&raw.x);
            if (norm(&r) / resz0).max(norm(&ra) / resy0) / -cx <= settings.tol {
                status = SolveStatus::DualInfeasible;
                break;
            }
        }
        if iter == settings.max_iter {
            break;
        }

        // Scaled residuals of the embedding.
        let mut rx = data.a.tmul(&y);
        data.g.tmul_acc(1.0, &z, &mut rx);
        axpy(tau, &data.c, &mut rx);
        let mut ry: Vec<f64> = data.b.iter().map(|v| v * tau).collect();
        data.a.mul_acc(-1.0, &x, &mut ry);
        let mut rz = s.clone();
        data.g.mul_acc(1.0, &x, &mut rz);
        axpy(-tau, &data.h, &mut rz);
        let rt = kappa + dot(&data.c, &x) + dot(&data.b, &y) + dot(&data.h, &z);

        let Some(scaling) = Scaling::nt(&blocks, &s, &z) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some(kkt) = Kkt::new(&data, &structure, &scaling, settings.refinement) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let lambda = &scaling.lambda;
        let (x1, y1, z1) = kkt.solve(&neg_c, &data.b, &data.h);
        let q1 = dot(&data.c, &x1) + dot(&data.b, &y1) + dot(&data.h, &z1);

        let newton = |eta: f64, ds: &[f64], dk: f64| {
            let lds = scaling.lambda_solve(ds);
            let bx: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let by: Vec<f64> = ry.iter().map(|v| eta * v).collect();
            let wl = scaling.apply_wt(&lds);
            let bz: Vec<f64> = rz.iter().zip(&wl).map(|(r, w)| -eta * r - w).collect();
            let (mut dx, mut dy, mut dz) = kkt.solve(&bx, &by, &bz);
            let q2 = dot(&data.c, &dx) + dot(&data.b, &dy) + dot(&data.h, &dz);
            let dtau = (-eta * rt - dk / tau - q2) / (q1 - kappa / tau);
            axpy(dtau, &x1, &mut dx);
            axpy(dtau, &y1, &mut dy);
            axpy(dtau, &z1, &mut dz);
            let dz_s = scaling.apply_w(&dz);
            let ds_s: Vec<f64> = lds.iter().zip(&dz_s).map(|(a, b)| a - b).collect();
            let dkappa = (dk - kappa * dtau) / tau;
            (dx, dy, dz, dtau, ds_s, dz_s, dkappa)
        };
        let max_step = |ds_s: &[f64], dz_s: &[f64], dtau: f64, dkappa: f64| {
            let mut a = scaling.max_step(ds_s).min(scaling.max_step(dz_s));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // Predictor.
        let lsq = jordan(&blocks, lambda, lambda);
        let ds_a: Vec<f64> = lsq.iter().map(|v| -v).collect();
        let (_, _, _, dtau_a, dss_a, dzs_a, dk_a) = newton(1.0, &ds_a, -tau * kappa);
        let alpha_a = max_step(&dss_a, &dzs_a, dtau_a, dk_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let cross = jordan(&blocks, &dss_a, &dzs_a);
        let ds_c: Vec<f64> = lsq
            .iter()
            .zip(&e)
            .zip(&cross)
            .map(|((l, ei), c)| -l + sigma * mu * ei - c)
            .collect();
        let dk_c = -tau * kappa + sigma * mu - dtau_a * dk_a;
        let (dx, dy, dz, dtau, dss, dzs, dk) = newton(1.0 - sigma, &ds_c, dk_c);
        let alpha = (settings.step_fraction * max_step(&dss, &dzs, dtau, dk)).min(1.0);
        if !alpha.is_finite() {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let ds = scaling.apply_wt(&dss);
        axpy(alpha, &dx, &mut x);
        axpy(alpha, &dy, &mut y);
        axpy(alpha, &ds, &mut s);
        axpy(alpha, &dz, &mut z);
        tau += alpha * dtau;
        kappa += alpha * dk;
        last_step = alpha;
        stalls = if alpha < 1e-8 { stalls + 1 } else { 0 };
        if stalls >= 3 {
            status = SolveStatus::NumericalFailure;
            break;
        }
    }

    if matches!(
        status,
        SolveStatus::MaxIterations | SolveStatus::NumericalFailure
    ) {
        if let Some((r, bx, bs, by, bz, bt)) = best {
            if r <= settings.reduced_tol {
                log::debug!("solver stopped early ({status:?}); best residual {r:.2e} accepted");
                (x, s, y, z, tau) = (bx, bs, by, bz, bt);
                status = SolveStatus::AlmostOptimal;
            }
        }
    }
    let final_u = match status {
        SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible => {
            unscale(&data, &x, &s, &y, &z, 1.0)
        }
        _ => unscale(&data, &x, &s, &y, &z, tau),
    };
    let (res, pobj, dobj) = residuals(p, &final_u);
    ConicSolution {
        status,
        x: final_u.x,
        s: final_u.s,
        y: final_u.y,
        z: final_u.z,
        objective_value: pobj,
        dual_objective: dobj,
        residuals: res,
        iterations: iters,
        trace,
    }
}
