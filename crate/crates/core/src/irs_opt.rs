//! IRS-side sub-problem: successive convex approximation over the
//! reflection coefficients, jamming selectors and their lifted products, for
//! fixed BS precoders.
//!
//! The rank-one lifts `Φ = ΘΘᴴ`, `U = uuᴴ` and the binary selectors are
//! handled by Schur blocks plus penalties built from first-order minorants,
//! so every convex surrogate majorizes the penalized merit and the merit
//! sequence is non-increasing.

use airsec_conic::{
    certify_solution, solve_with, AffineExpr, ConicProblem, ProblemBuilder, SolveStatus, SolverSettings,
    SymmetricAffine,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bs_opt::leakage_margin;
use crate::hermitian::{HermitianLmi, HermitianVar};
use crate::linalg::{outer, trace_re};
use crate::sysmodel::{
    check_feasibility, BsDesign, ChannelSet, IrsDesign, ModelError, SystemParams,
};
use crate::{CMat, CVec, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrsOptError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("P5 solver returned {0:?}")]
    Solver(SolveStatus),
    #[error("rounded IRS design violates the rate or leakage constraints")]
    Infeasible,
}

/// One point of the SCA sequence, in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaIterate {
    /// Diagonal of `Θ`.
    pub phi_t: CVec,
    pub u_t: CVec,
    pub alpha_t: Vec<f64>,
    /// Diagonal of the lifted `Φ`.
    pub phi_pow: Vec<f64>,
    /// Lifted `U`.
    pub u_mat: CMat,
    /// Penalized merit; equals `Tr(Φ)` when the lifts are tight and `α` is
    /// binary.
    pub objective_t: f64,
}

impl ScaIterate {
    /// Tight lift of a design (`Φ = ΘΘᴴ`, `U = uuᴴ`).
    pub fn from_design(irs: &IrsDesign) -> Self {
        let u = irs.u();
        Self {
            phi_pow: irs.phi.iter().map(|z| z.norm_sqr()).collect(),
            u_mat: outer(&u, &u),
            phi_t: irs.phi.clone(),
            u_t: u,
            alpha_t: irs.alpha.clone(),
            objective_t: irs.power(),
        }
    }

    pub fn trace_phi(&self) -> f64 {
        self.phi_pow.iter().sum()
    }

    /// `Tr(Φ) − ‖θ‖²`
    pub fn phi_gap(&self) -> f64 {
        self.trace_phi() - self.phi_t.norm_squared()
    }

    /// `Tr(U) − ‖u‖²`
    pub fn u_gap(&self) -> f64 {
        trace_re(&self.u_mat) - self.u_t.norm_squared()
    }

    /// `Σ (α_m − α_m²)`
    pub fn alpha_gap(&self) -> f64 {
        self.alpha_t.iter().map(|a| a - a * a).sum()
    }

    fn merit(&self, cfg: &ScaConfig, scale: f64) -> f64 {
        self.trace_phi()
            + cfg.rho_phi * self.phi_gap()
            + cfg.rho_u * self.u_gap()
            + cfg.rho_alpha * scale * self.alpha_gap()
    }
}

/// `c + s·x`, a minorant of `x²` for real `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealMinorant {
    pub constant: f64,
    pub slope: f64,
}

impl RealMinorant {
    pub fn eval(&self, x: f64) -> f64 {
        self.constant + self.slope * x
    }
}

/// `c + Re(gᴴx)`, a minorant of `‖x‖²` for complex `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMinorant {
    pub constant: f64,
    pub gradient: CVec,
}

impl ComplexMinorant {
    fn at(anchor: &CVec) -> Self {
        Self {
            constant: -anchor.norm_squared(),
            gradient: anchor * C64::new(2.0, 0.0),
        }
    }

    pub fn eval(&self, x: &CVec) -> f64 {
        self.constant + self.gradient.dotc(x).re
    }
}

/// First-order minorants of `α_m²`, `Tr(ΘᴴΘ)` and `Tr(uuᴴ)` at an iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorBounds {
    pub alpha: Vec<RealMinorant>,
    pub theta: ComplexMinorant,
    pub u: ComplexMinorant,
}

pub fn taylor_bounds(it: &ScaIterate) -> TaylorBounds {
    TaylorBounds {
        alpha: it
            .alpha_t
            .iter()
            .map(|&a| RealMinorant {
                constant: -a * a,
                slope: 2.0 * a,
            })
            .collect(),
        theta: ComplexMinorant::at(&it.phi_t),
        u: ComplexMinorant::at(&it.u_t),
    }
}

/// Rank-one factors of `G B Gᴴ`: `Σ_m p_m q_mᴴ` with `p_m = ϱ_m r_m`,
/// `q_m = v_m` from its SVD.
pub fn svd_split(g: &CMat, b: &CMat) -> Vec<(CVec, CVec)> {
    let c = g * b * g.adjoint();
    let m = c.nrows();
    let svd = c.svd(true, true);
    let (u, vt) = (svd.u.expect("U requested"), svd.v_t.expect("Vᴴ requested"));
    (0..m)
        .map(|i| {
            let p = u.column(i) * C64::new(svd.singular_values[i], 0.0);
            let q = vt.row(i).adjoint();
            (p, q)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaConfig {
    pub t_max: usize,
    /// Relative merit change that ends the loop.
    pub tol: f64,
    /// Penalty on `Tr(Φ) − ‖θ‖²`.
    pub rho_phi: f64,
    /// Penalty on `Tr(U) − ‖u‖²`.
    pub rho_u: f64,
    /// Penalty on `Σ(α − α²)`, in units of the run's power scale.
    pub rho_alpha: f64,
    /// Slack allowed when the rounded design is re-checked against the
    /// actual model with the BS design held fixed (SINR units and bits).
    #[serde(default = "default_validation_tol")]
    pub validation_tol: f64,
    pub solver: SolverSettings,
}

fn default_validation_tol() -> f64 {
    1e-3
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            t_max: 20,
            tol: 1e-4,
            rho_phi: 4.0,
            rho_u: 4.0,
            rho_alpha: 0.1,
            validation_tol: default_validation_tol(),
            solver: SolverSettings {
                tol: 1e-8,
                max_iter: 150,
                refinement: 3,
                reduced_tol: 1e-6,
                ..SolverSettings::default()
            },
        }
    }
}

/// Extra knobs for one surrogate solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct P5Options {
    /// Pins `α` (all-reflect baseline, frozen re-solve, mode oracle).
    pub frozen_alpha: Option<Vec<f64>>,
    /// Power unit of the lifted variables; defaults to the anchor's
    /// `Tr(Φ)` floored at `1e-6·P_I^max`.
    pub power_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    phi: usize,
    u: usize,
    alpha: usize,
    pow: usize,
    umat: HermitianVar,
    m: usize,
}

impl Layout {
    fn phi_re(&self, m: usize) -> usize {
        self.phi + 2 * m
    }
    fn phi_im(&self, m: usize) -> usize {
        self.phi + 2 * m + 1
    }
    fn u_re(&self, m: usize) -> usize {
        self.u + 2 * m
    }
    fn u_im(&self, m: usize) -> usize {
        self.u + 2 * m + 1
    }

    fn from_problem(p: &ConicProblem) -> Self {
        let get = |n: &str| p.variables.get(n).expect("P5 variable present");
        let m = get("alpha").len;
        let um = get("U");
        Self {
            phi: get("phi").offset,
            u: get("u").offset,
            alpha: get("alpha").offset,
            pow: get("phi_pow").offset,
            umat: HermitianVar {
                offset: um.offset,
                n: m,
            },
            m,
        }
    }

    fn write(&self, it: &ScaIterate, n: usize, scale: f64) -> Vec<f64> {
        let mut x = vec![0.0; n];
        let r = scale.sqrt();
        for i in 0..self.m {
            x[self.phi_re(i)] = it.phi_t[i].re / r;
            x[self.phi_im(i)] = it.phi_t[i].im / r;
            x[self.u_re(i)] = it.u_t[i].re / r;
            x[self.u_im(i)] = it.u_t[i].im / r;
            x[self.alpha + i] = it.alpha_t[i];
            x[self.pow + i] = it.phi_pow[i] / scale;
        }
        let u = &it.u_mat / C64::new(scale, 0.0);
        for i in 0..self.m {
            x[self.umat.diag(i)] = u[(i, i)].re;
            for j in i + 1..self.m {
                x[self.umat.re(i, j)] = u[(i, j)].re;
                x[self.umat.im(i, j)] = u[(i, j)].im;
            }
        }
        x
    }

    fn read(&self, x: &[f64], scale: f64) -> ScaIterate {
        let r = scale.sqrt();
        let cplx = |re: usize, im: usize| C64::new(x[re], x[im]) * r;
        let phi_t = CVec::from_fn(self.m, |i, _| cplx(self.phi_re(i), self.phi_im(i)));
        let u_t = CVec::from_fn(self.m, |i, _| cplx(self.u_re(i), self.u_im(i)));
        ScaIterate {
            phi_t,
            u_t,
            alpha_t: (0..self.m).map(|i| x[self.alpha + i].clamp(0.0, 1.0)).collect(),
            phi_pow: (0..self.m).map(|i| x[self.pow + i] * scale).collect(),
            u_mat: self.umat.value(x) * C64::new(scale, 0.0),
            objective_t: f64::NAN,
        }
    }
}

fn check_inputs(ch: &ChannelSet, bs: &BsDesign, p: &SystemParams, it: &ScaIterate) -> Result<(), ModelError> {
    ch.check_dims(p)?;
    let m = ch.n_irs();
    let ok = it.phi_t.len() == m
        && it.u_t.len() == m
        && it.alpha_t.len() == m
        && it.phi_pow.len() == m
        && it.u_mat.shape() == (m, m)
        && bs.w.len() == ch.n_users()
        && bs.z_b.shape() == (ch.n_tx(), ch.n_tx());
    if ok {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch("IRS iterate or BS design".into()))
    }
}

/// Solver coordinates of `it` in a problem from [`build_p5_with`] built with
/// power unit `scale`.
pub fn encode_iterate(prob: &ConicProblem, it: &ScaIterate, scale: f64) -> Vec<f64> {
    Layout::from_problem(prob).write(it, prob.num_vars(), scale)
}

/// Default power unit of a surrogate anchored at `it`.
pub fn p5_power_scale(p: &SystemParams, it: &ScaIterate) -> f64 {
    default_scale(p, it)
}

fn default_scale(p: &SystemParams, it: &ScaIterate) -> f64 {
    it.trace_phi().max(1e-6 * p.p_irs_max)
}

fn build(
    ch: &ChannelSet,
    bs: &BsDesign,
    p: &SystemParams,
    it: &ScaIterate,
    cfg: &ScaConfig,
    opts: &P5Options,
) -> Result<(ConicProblem, f64), IrsOptError> {
    check_inputs(ch, bs, p, it)?;
    let m = ch.n_irs();
    let k_n = ch.n_users();
    let n_e = ch.n_eve();
    let s = opts.power_scale.unwrap_or_else(|| default_scale(p, it));
    let r = s.sqrt();
    let w_mats: Vec<CMat> = bs.w.iter().map(|w| outer(w, w)).collect();

    let mut b = ProblemBuilder::new();
    let phi = b.add_variable("phi", 2 * m).start;
    let u = b.add_variable("u", 2 * m).start;
    let alpha = b.add_variable("alpha", m).start;
    let pow = b.add_variable("phi_pow", m).start;
    let umat = HermitianVar::add(&mut b, "U", m);
    let lay = Layout {
        phi,
        u,
        alpha,
        pow,
        umat,
        m,
    };

    // Penalized surrogate objective (scaled units; constants dropped).
    let phi_a = &it.phi_t / C64::new(r, 0.0);
    let u_a = &it.u_t / C64::new(r, 0.0);
    let tb = taylor_bounds(it);
    for i in 0..m {
        b.add_objective(lay.pow + i, 1.0 + cfg.rho_phi);
        b.add_objective(lay.phi_re(i), -2.0 * cfg.rho_phi * phi_a[i].re);
        b.add_objective(lay.phi_im(i), -2.0 * cfg.rho_phi * phi_a[i].im);
        b.add_objective(umat.diag(i), cfg.rho_u);
        b.add_objective(lay.u_re(i), -2.0 * cfg.rho_u * u_a[i].re);
        b.add_objective(lay.u_im(i), -2.0 * cfg.rho_u * u_a[i].im);
        // α − (α_t² + 2α_t(α − α_t))
        b.add_objective(lay.alpha + i, cfg.rho_alpha * (1.0 - tb.alpha[i].slope));
    }

    // Rate constraints.
    let sig_i = p.noise_irs;
    for k in 0..k_n {
        let g = p.gamma_min[k];
        let mut b1 = w_mats[k].clone();
        for (j, wj) in w_mats.iter().enumerate() {
            if j != k {
                b1 -= wj * C64::new(g, 0.0);
            }
        }
        b1 -= &bs.z_b * C64::new(g, 0.0);
        let hbu = &ch.h_bu[k];
        let d = CMat::from_diagonal(&ch.h_iu[k]);
        let gd = ch.g.adjoint() * &d; // Gᴴ diag(h_IU)
        let c0 = hbu.dotc(&(&b1 * hbu)).re;
        let x = gd.adjoint() * &b1 * hbu;
        let c_u = gd.adjoint() * &b1 * &gd;
        let mut e = AffineExpr::constant(c0 - g * p.noise_user[k]);
        for i in 0..m {
            e.add_term(lay.u_re(i), 2.0 * r * x[i].re);
            e.add_term(lay.u_im(i), 2.0 * r * x[i].im);
            let h2 = ch.h_iu[k][i].norm_sqr();
            e.add_term(lay.pow + i, -g * s * (1.0 + sig_i) * h2);
            e.add_term(umat.diag(i), g * s * h2);
        }
        for (v, a) in umat.trace_terms(&c_u, s) {
            e.add_term(v, a);
        }
        b.add_nonneg(&e);
    }

    // Mode selector bounds, IRS budget and Big-M coupling u = α·conj(φ).
    match &opts.frozen_alpha {
        Some(fa) => {
            for (i, a) in fa.iter().enumerate() {
                b.add_equality(&AffineExpr::constant(-a).term(lay.alpha + i, 1.0));
            }
        }
        None => {
            for i in 0..m {
                b.add_nonneg(&AffineExpr::constant(0.0).term(lay.alpha + i, 1.0));
                b.add_nonneg(&AffineExpr::constant(1.0).term(lay.alpha + i, -1.0));
            }
        }
    }
    let mut c5 = AffineExpr::constant(p.p_irs_max / s);
    for i in 0..m {
        c5.add_term(lay.pow + i, -1.0);
    }
    b.add_nonneg(&c5);
    let big = (p.p_irs_max / s).sqrt();
    for i in 0..m {
        let a = lay.alpha + i;
        // (u, conj φ) pairs: real parts (u_re, φ_re), imaginary (u_im, −φ_im)
        for (uv, pv, sign) in [(lay.u_re(i), lay.phi_re(i), 1.0), (lay.u_im(i), lay.phi_im(i), -1.0)] {
            for dir in [1.0, -1.0] {
                b.add_nonneg(
                    &AffineExpr::constant(big)
                        .term(uv, dir)
                        .term(pv, -dir * sign)
                        .term(a, -big),
                );
                b.add_nonneg(&AffineExpr::constant(0.0).term(uv, dir).term(a, big));
            }
        }
    }

    // Leakage LMIs.
    let margin = leakage_margin(ch);
    for k in 0..k_n {
        let ct = p.c_tol(k);
        let bk = &bs.z_b * C64::new(ct, 0.0) - &w_mats[k];
        let c_mat = svd_split(&ch.g, &bk)
            .iter()
            .fold(CMat::zeros(m, m), |acc, (pv, qv)| acc + pv * qv.adjoint());
        let xk = &ch.h_be * &bk * ch.g.adjoint();
        let mut lmi = HermitianLmi::new(n_e);
        lmi.add_constant(&(&ch.h_be * &bk * ch.h_be.adjoint()));
        lmi.add_constant(&(CMat::identity(n_e, n_e) * C64::new(-margin, 0.0)));
        for i in 0..m {
            let hm = ch.h_ie.column(i).into_owned();
            let hh = outer(&hm, &hm);
            lmi.add_term(lay.pow + i, &(&hh * C64::new(s * ct * (1.0 + sig_i), 0.0)));
            let xm = xk.column(i) * hm.adjoint();
            lmi.add_term(lay.u_re(i), &((&xm + xm.adjoint()) * C64::new(r, 0.0)));
            lmi.add_term(lay.u_im(i), &((&xm - xm.adjoint()) * C64::new(0.0, r)));
        }
        // H_IE (C ∘ conj(U)) H_IEᴴ − C_tol H_IE diag(U) H_IEᴴ
        for (v, e) in umat.basis() {
            let mut t = c_mat.component_mul(&e.map(|z| z.conj()));
            for i in 0..m {
                if e[(i, i)].re != 0.0 {
                    t[(i, i)] -= C64::new(ct * e[(i, i)].re, 0.0);
                }
            }
            lmi.add_term(v, &(&ch.h_ie * t * ch.h_ie.adjoint() * C64::new(s, 0.0)));
        }
        b.add_psd(&lmi.to_block().expect("Hermitian LMI terms"));
    }

    // Schur blocks: φ_pow,m ≥ |φ_m|² and U ⪰ uuᴴ.
    for i in 0..m {
        let mut blk = SymmetricAffine::new(3);
        blk.add_entry(lay.pow + i, 0, 0, 1.0);
        blk.add_entry(lay.phi_re(i), 1, 0, 1.0);
        blk.add_entry(lay.phi_im(i), 2, 0, 1.0);
        blk.add_constant_entry(1, 1, 1.0);
        blk.add_constant_entry(2, 2, 1.0);
        b.add_psd(&blk);
    }
    let mut c10 = HermitianLmi::new(m + 1);
    let mut corner = CMat::zeros(m + 1, m + 1);
    corner[(m, m)] = C64::new(1.0, 0.0);
    c10.add_constant(&corner);
    for (v, e) in umat.basis() {
        let mut t = CMat::zeros(m + 1, m + 1);
        t.view_mut((0, 0), (m, m)).copy_from(&e);
        c10.add_term(v, &t);
    }
    for i in 0..m {
        let mut t = CMat::zeros(m + 1, m + 1);
        t[(i, m)] = C64::new(1.0, 0.0);
        t[(m, i)] = C64::new(1.0, 0.0);
        c10.add_term(lay.u_re(i), &t);
        let mut t = CMat::zeros(m + 1, m + 1);
        t[(i, m)] = C64::new(0.0, 1.0);
        t[(m, i)] = C64::new(0.0, -1.0);
        c10.add_term(lay.u_im(i), &t);
    }
    b.add_psd(&c10.to_block().expect("Hermitian LMI terms"));

    Ok((b.build(), s))
}

/// Convex surrogate anchored at `iterate`, with the default penalties.
pub fn build_p5(
    ch: &ChannelSet,
    bs: &BsDesign,
    p: &SystemParams,
    iterate: &ScaIterate,
) -> Result<ConicProblem, IrsOptError> {
    build_p5_with(ch, bs, p, iterate, &ScaConfig::default(), &P5Options::default())
}

pub fn build_p5_with(
    ch: &ChannelSet,
    bs: &BsDesign,
    p: &SystemParams,
    iterate: &ScaIterate,
    cfg: &ScaConfig,
    opts: &P5Options,
) -> Result<ConicProblem, IrsOptError> {
    Ok(build(ch, bs, p, iterate, cfg, opts)?.0)
}

/// Solves one surrogate and returns the new iterate (merit unset).
pub fn solve_p5(
    ch: &ChannelSet,
    bs: &BsDesign,
    p: &SystemParams,
    iterate: &ScaIterate,
    cfg: &ScaConfig,
    opts: &P5Options,
) -> Result<(ScaIterate, airsec_conic::ConicSolution), IrsOptError> {
    solve_checked(ch, bs, p, iterate, cfg, opts).map(|(next, sol, _)| (next, sol))
}

/// [`solve_p5`] plus, for an `Optimal` solve, whether the solution passes
/// certification at ten times the solver tolerance.
fn solve_checked(
    ch: &ChannelSet,
    bs: &BsDesign,
    p: &SystemParams,
    iterate: &ScaIterate,
    cfg: &ScaConfig,
    opts: &P5Options,
) -> Result<(ScaIterate, airsec_conic::ConicSolution, Option<bool>), IrsOptError> {
    let (prob, s) = build(ch, bs, p, iterate, cfg, opts)?;
    let sol = solve_with(&prob, &cfg.solver);
    if !sol.is_usable() {
        log::debug!("P5 status {:?} after {} iterations", sol.status, sol.iterations);
        return Err(IrsOptError::Solver(sol.status));
    }
    let cert = (sol.status == SolveStatus::Optimal)
        .then(|| certify_solution(&prob, &sol, 10.0 * cfg.solver.tol).passed());
    let mut next = Layout::from_problem(&prob).read(&sol.x, s);
    if let Some(fa) = &opts.frozen_alpha {
        next.alpha_t = fa.clone();
    }
    Ok((next, sol, cert))
}

/// All-reflect start: `|φ_m|² = P_I^max/(2M)` with phases that add the
/// cascaded paths coherently to the direct path of user 1 under MRT.
pub fn initial_design(ch: &ChannelSet, p: &SystemParams) -> IrsDesign {
    let m = ch.n_irs();
    let amp = (p.p_irs_max / (2.0 * m as f64)).sqrt();
    let h1 = &ch.h_bu[0];
    let w = h1.unscale(h1.norm().max(f64::MIN_POSITIVE));
    let gw = &ch.g * w;
    // h_eqᴴw = h_BUᴴw + Σ φ_m conj(h_IU,m) (Gw)_m
    let phi = CVec::from_fn(m, |i, _| {
        let a = ch.h_iu[0][i].conj() * gw[i];
        C64::from_polar(amp, -a.arg())
    });
    IrsDesign::new(phi, vec![1.0; m])
}

/// Thresholds `α` at 0.5 (ties reflect) and rebuilds the design; `u` follows
/// as `α·conj(φ)`.
pub fn round_modes(alpha: &[f64], phi: &CVec) -> IrsDesign {
    let a = alpha.iter().map(|&x| if x >= 0.5 { 1.0 } else { 0.0 }).collect();
    IrsDesign::new(phi.clone(), a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaStatus {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaOutcome {
    pub design: IrsDesign,
    /// Starting point followed by every accepted iterate.
    pub trace: Vec<ScaIterate>,
    pub status: ScaStatus,
    /// `α` of the last iterate before rounding.
    pub pre_round_alpha: Vec<f64>,
    /// Rounding needed the extra pass with `α` pinned.
    pub frozen_resolve: bool,
    /// Certificate outcome of every `Optimal` surrogate solve.
    #[serde(default)]
    pub certificates: Vec<bool>,
}

impl ScaOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Rate, leakage and budget constraints of the actual model at `tol`.
pub fn design_is_feasible(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    tol: f64,
) -> bool {
    check_feasibility(ch, bs, irs, p, tol).is_ok_and(|r| r.feasible)
}

/// Runs the SCA loop from `init` and returns a binary, re-validated design.
pub fn sca_optimize(
    ch: &ChannelSet,
    bs: &BsDesign,
    p: &SystemParams,
    init: &ScaIterate,
    cfg: &ScaConfig,
    frozen_alpha: Option<&[f64]>,
) -> Result<ScaOutcome, IrsOptError> {
    let opts = P5Options {
        frozen_alpha: frozen_alpha.map(<[f64]>::to_vec),
        power_scale: Some(default_scale(p, init)),
    };
    let scale = opts.power_scale.unwrap_or(1.0);
    let mut first = init.clone();
    first.objective_t = first.merit(cfg, scale);
    let mut trace = vec![first];
    let mut status = ScaStatus::NotConverged;
    let mut certificates = Vec::new();
    for t in 0..cfg.t_max {
        let cur = trace.last().expect("trace starts non-empty");
        let mut next = match solve_checked(ch, bs, p, cur, cfg, &opts) {
            Ok((n, _, cert)) => {
                certificates.extend(cert);
                n
            }
            Err(e) if t == 0 => return Err(e),
            Err(e) => {
                log::debug!("SCA stopped at t = {t}: {e}");
                break;
            }
        };
        next.objective_t = next.merit(cfg, scale);
        let prev = cur.objective_t;
        if next.objective_t > prev {
            // surrogate solved only to tolerance; never accept an increase
            if next.objective_t - prev > 1e-6 * prev.abs().max(scale) {
                log::debug!("SCA merit rose at t = {t}; stopping");
                break;
            }
            next.objective_t = prev;
        }
        let change = (prev - next.objective_t).abs() / prev.abs().max(1e-12 * scale);
        trace.push(next);
        if change < cfg.tol {
            status = ScaStatus::Converged;
            break;
        }
    }
    let last = trace.last().expect("non-empty").clone();
    let pre_round_alpha = last.alpha_t.clone();
    let rounded = round_modes(&last.alpha_t, &last.phi_t);
    let mut frozen_resolve = false;
    let design = if design_is_feasible(ch, bs, &rounded, p, cfg.validation_tol) {
        rounded
    } else {
        frozen_resolve = true;
        let mut anchor = last.clone();
        anchor.alpha_t = rounded.alpha.clone();
        let pinned = P5Options {
            frozen_alpha: Some(rounded.alpha.clone()),
            power_scale: opts.power_scale,
        };
        let (fixed, _, cert) =
            solve_checked(ch, bs, p, &anchor, cfg, &pinned).map_err(|_| IrsOptError::Infeasible)?;
        certificates.extend(cert);
        let d = IrsDesign::new(fixed.phi_t, rounded.alpha);
        if !design_is_feasible(ch, bs, &d, p, cfg.validation_tol) {
            return Err(IrsOptError::Infeasible);
        }
        d
    };
    Ok(ScaOutcome {
        design,
        trace,
        status,
        pre_round_alpha,
        frozen_resolve,
        certificates,
    })
}
