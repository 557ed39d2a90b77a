//! BS-side sub-problem: SDR of the precoder/AN design for a fixed IRS.

use airsec_conic::{
    certify_solution, solve_with, CertificateReport, ConicProblem, ProblemBuilder, SolveStatus,
    SolverSettings,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hermitian::{HermitianLmi, HermitianVar};
use crate::linalg::{eigh, outer, quad_form, trace_re};
use crate::sysmodel::{
    equivalent_eve_channel, equivalent_user_channels, irs_eve_covariance, irs_user_noise,
    leakage_forms_raw, BsDesign, ChannelSet, IrsDesign, ModelError, SystemParams,
};
use crate::{CMat, CVec, C64};

/// Floor on Eve's covariance in the leakage LMI, as an equivalent AN power
/// spread over the BS antennas (watts).
pub const C2_MARGIN_POWER: f64 = 1e-9;
/// Constraint violation that triggers randomized recovery.
pub const RECOVERY_TOL: f64 = 1e-6;
pub const RANDOMIZATION_DRAWS: usize = 200;

/// Smallest eigenvalue demanded of every leakage LMI (shared with the IRS
/// sub-problem so that each sub-problem's output stays feasible for the other).
pub fn leakage_margin(ch: &ChannelSet) -> f64 {
    C2_MARGIN_POWER * ch.h_be.norm_squared() / ch.n_tx() as f64
}

pub fn p3_settings() -> SolverSettings {
    SolverSettings {
        tol: 1e-8,
        max_iter: 150,
        refinement: 3,
        reduced_tol: 1e-6,
        ..SolverSettings::default()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BsOptError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("P3 solver returned {0:?}")]
    Solver(SolveStatus),
    #[error("rank-one recovery failed (worst violation {violation:.3e})")]
    Extraction { violation: f64 },
}

impl BsOptError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, BsOptError::Solver(SolveStatus::PrimalInfeasible))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RecoveryPath {
    Eigen,
    /// Best randomized draw; `inflation` is its power over the SDP optimum
    /// minus one.
    Randomized { inflation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOne {
    pub w: CVec,
    /// `λ₂/λ₁`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsSubproblemResult {
    pub w_mats: Vec<CMat>,
    pub z_b: CMat,
    pub extracted: BsDesign,
    pub tightness: Vec<f64>,
    /// `Σ Tr(W_k) + Tr(Z_B)` in watts.
    pub objective: f64,
    pub recovery: RecoveryPath,
    pub solver_status: SolveStatus,
    pub solver_iterations: usize,
    pub certificate: CertificateReport,
}

/// Everything about P3 that depends only on the IRS configuration.
struct P3Data {
    h_eq: Vec<CVec>,
    f_eq: CMat,
    q_irs: CMat,
    /// σ_U² plus IRS-originated noise, per user.
    noise: Vec<f64>,
    margin: f64,
    unit: f64,
    /// `Z_B` is a variable; otherwise it is pinned to zero.
    bs_an: bool,
}

impl P3Data {
    fn new(ch: &ChannelSet, irs: &IrsDesign, p: &SystemParams) -> Result<Self, ModelError> {
        ch.check_dims(p)?;
        if irs.len() != ch.n_irs() {
            return Err(ModelError::DimensionMismatch(format!(
                "IRS design has {} elements, channels have {}",
                irs.len(),
                ch.n_irs()
            )));
        }
        let c5 = irs.power() - p.p_irs_max;
        if c5 > 1e-9 * p.p_irs_max.max(1e-30) {
            return Err(ModelError::InvalidParams(format!(
                "IRS power exceeds its budget by {c5:.3e} W"
            )));
        }
        let h_eq = equivalent_user_channels(ch, irs);
        let f_eq = equivalent_eve_channel(ch, irs);
        let q_irs = irs_eve_covariance(ch, irs, p.noise_irs);
        let noise: Vec<f64> = (0..ch.n_users())
            .map(|k| p.noise_user[k] + irs_user_noise(ch, irs, p.noise_irs, k))
            .collect();
        let margin = leakage_margin(ch);
        // power needed by the weakest user alone
        let unit = (0..ch.n_users())
            .map(|k| p.gamma_min[k].max(1e-3) * noise[k] / h_eq[k].norm_squared().max(1e-300))
            .fold(0.0, f64::max)
            .max(1e-12);
        Ok(Self {
            h_eq,
            f_eq,
            q_irs,
            noise,
            margin,
            unit,
            bs_an: true,
        })
    }

    fn build(&self, p: &SystemParams) -> ConicProblem {
        let n = self.f_eq.ncols();
        let k_n = self.h_eq.len();
        let n_e = self.f_eq.nrows();
        let mut b = ProblemBuilder::new();
        let w: Vec<HermitianVar> = (0..k_n)
            .map(|k| HermitianVar::add(&mut b, &format!("W_{k}"), n))
            .collect();
        let z = self.bs_an.then(|| HermitianVar::add(&mut b, "Z_B", n));
        for v in w.iter().chain(z.as_ref()) {
            for i in 0..n {
                b.add_objective(v.diag(i), 1.0);
            }
        }
        let s = self.unit;
        for k in 0..k_n {
            let hh = outer(&self.h_eq[k], &self.h_eq[k]);
            let g = p.gamma_min[k];
            let mut e = airsec_conic::AffineExpr::constant(-g * self.noise[k]);
            for (j, wj) in w.iter().enumerate() {
                let coef = if j == k { s } else { -g * s };
                for (i, a) in wj.trace_terms(&hh, coef) {
                    e.add_term(i, a);
                }
            }
            if let Some(z) = &z {
                for (i, a) in z.trace_terms(&hh, -g * s) {
                    e.add_term(i, a);
                }
            }
            b.add_nonneg(&e);
        }
        for k in 0..k_n {
            let ct = p.c_tol(k);
            let mut lmi = HermitianLmi::new(n_e);
            lmi.add_constant(&(&self.q_irs * C64::new(ct, 0.0)));
            lmi.add_constant(&(CMat::identity(n_e, n_e) * C64::new(-self.margin, 0.0)));
            if let Some(z) = &z {
                lmi.add_terms(z.congruence_terms(&self.f_eq, ct * s));
            }
            lmi.add_terms(w[k].congruence_terms(&self.f_eq, -s));
            b.add_psd(&lmi.to_block().expect("LMI terms are Hermitian by construction"));
        }
        for v in w.iter().chain(z.as_ref()) {
            b.add_psd(&v.psd_block());
        }
        b.build()
    }
}

/// P3 as a real conic program. Variables are scaled to a power unit chosen
/// from the channel strengths; [`solve_p3`] undoes the scaling.
pub fn build_p3(
    ch: &ChannelSet,
    irs: &IrsDesign,
    p: &SystemParams,
) -> Result<ConicProblem, BsOptError> {
    Ok(P3Data::new(ch, irs, p)?.build(p))
}

fn hermitian_handle(prob: &ConicProblem, name: &str) -> HermitianVar {
    let h = prob.variables.get(name).expect("P3 variable present");
    let n = (h.len as f64).sqrt().round() as usize;
    HermitianVar { offset: h.offset, n }
}

/// Principal eigenpair extraction `√λ₁ v₁`.
pub fn extract_rank_one(w_mat: &CMat) -> RankOne {
    let (vals, vecs) = eigh(w_mat);
    let n = vals.len();
    if n == 0 {
        return RankOne {
            w: CVec::zeros(0),
            gap: 0.0,
        };
    }
    let l1 = vals[n - 1].max(0.0);
    let l2 = if n > 1 { vals[n - 2].max(0.0) } else { 0.0 };
    let gap = if l1 > 0.0 { l2 / l1 } else { 0.0 };
    let w = vecs.column(n - 1) * C64::new(l1.sqrt(), 0.0);
    RankOne { w, gap }
}

/// Worst P3 constraint violation of fixed precoders (relative units: SINR
/// shortfall over γ_min, leakage excess in bits).
fn p3_violation(data: &P3Data, p: &SystemParams, w: &[CVec], z_b: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    let q = &data.f_eq * z_b * data.f_eq.adjoint() + &data.q_irs;
    for k in 0..w.len() {
        let h = &data.h_eq[k];
        let inter: f64 = w
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, x)| h.dotc(x).norm_sqr())
            .sum();
        let sinr = h.dotc(&w[k]).norm_sqr() / (inter + quad_form(z_b, h) + data.noise[k]);
        worst = worst.max((p.gamma_min[k] - sinr) / p.gamma_min[k].max(1e-12));
        let v = &data.f_eq * &w[k];
        let excess = match leakage_forms_raw(&q, &v) {
            Ok(f) => f.det - p.c_max[k],
            Err(_) if v.norm() == 0.0 => 0.0,
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(excess);
    }
    worst
}

/// Minimal powers meeting every SINR target with equality along fixed
/// directions; `None` when the targets are unreachable or a leakage cap
/// binds.
fn power_control(data: &P3Data, p: &SystemParams, dirs: &[CVec], z_b: &CMat) -> Option<Vec<CVec>> {
    let k_n = dirs.len();
    let gain = DMatrix::from_fn(k_n, k_n, |k, j| data.h_eq[k].dotc(&dirs[j]).norm_sqr());
    let mut a = DMatrix::zeros(k_n, k_n);
    let mut rhs = nalgebra::DVector::zeros(k_n);
    for k in 0..k_n {
        let g = p.gamma_min[k];
        for j in 0..k_n {
            a[(k, j)] = if j == k { gain[(k, k)] } else { -g * gain[(k, j)] };
        }
        rhs[k] = g * (quad_form(z_b, &data.h_eq[k]) + data.noise[k]);
    }
    let pw = a.lu().solve(&rhs)?;
    if pw.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return None;
    }
    let q = &data.f_eq * z_b * data.f_eq.adjoint() + &data.q_irs;
    let chol = q.clone().cholesky()?;
    let mut out = Vec::with_capacity(k_n);
    for k in 0..k_n {
        let v = &data.f_eq * &dirs[k];
        let leak = v.dotc(&chol.solve(&v)).re;
        if pw[k] * leak > p.c_tol(k) * (1.0 + 1e-9) {
            return None;
        }
        out.push(&dirs[k] * C64::new(pw[k].sqrt(), 0.0));
    }
    Some(out)
}

/// Projection onto the PSD cone (drops interior-point round-off).
fn psd_part(m: &CMat) -> CMat {
    let (vals, vecs) = eigh(m);
    let d = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|l| C64::new(l.max(0.0), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = eigh(m);
    let d = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|l| C64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

fn randomize(
    data: &P3Data,
    p: &SystemParams,
    w_mats: &[CMat],
    z_b: &CMat,
    principal: &[CVec],
    seed: u64,
) -> Option<(Vec<CVec>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5d3f_a1c7_0b2e_9e14);
    let roots: Vec<CMat> = w_mats.iter().map(psd_sqrt).collect();
    let n = z_b.nrows();
    let mut best: Option<(Vec<CVec>, f64)> = None;
    let mut consider = |dirs: Vec<CVec>| {
        if let Some(w) = power_control(data, p, &dirs, z_b) {
            let pw: f64 = w.iter().map(|x| x.norm_squared()).sum();
            if best.as_ref().is_none_or(|b| pw < b.1) {
                best = Some((w, pw));
            }
        }
    };
    consider(principal.to_vec());
    for _ in 0..RANDOMIZATION_DRAWS {
        let dirs = roots
            .iter()
            .map(|r| {
                let xi = CVec::from_fn(n, |_, _| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                });
                r * xi
            })
            .collect();
        consider(dirs);
    }
    best
}

fn recover(
    data: &P3Data,
    p: &SystemParams,
    w_mats: &[CMat],
    z_b: &CMat,
    objective: f64,
) -> Result<(Vec<CVec>, RecoveryPath), BsOptError> {
    let principal: Vec<CVec> = w_mats.iter().map(|w| extract_rank_one(w).w).collect();
    let violation = p3_violation(data, p, &principal, z_b);
    if violation <= RECOVERY_TOL {
        return Ok((principal, RecoveryPath::Eigen));
    }
    log::debug!("eigen extraction violates P3 by {violation:.3e}; randomizing");
    match randomize(data, p, w_mats, z_b, &principal, p.rng_seed) {
        Some((w, pw)) => {
            let inflation = (pw + trace_re(z_b)) / objective - 1.0;
            Ok((w, RecoveryPath::Randomized { inflation }))
        }
        None => Err(BsOptError::Extraction { violation }),
    }
}

/// Rank-one precoders from (possibly higher-rank) P3 matrices: the principal
/// eigenvectors when they satisfy every P3 constraint to [`RECOVERY_TOL`],
/// otherwise the cheapest of [`RANDOMIZATION_DRAWS`] Gaussian draws after
/// minimal-power rescaling.
pub fn recover_precoders(
    ch: &ChannelSet,
    irs: &IrsDesign,
    p: &SystemParams,
    w_mats: &[CMat],
    z_b: &CMat,
) -> Result<(BsDesign, RecoveryPath), BsOptError> {
    let data = P3Data::new(ch, irs, p)?;
    let objective = w_mats.iter().map(trace_re).sum::<f64>() + trace_re(z_b);
    let (w, path) = recover(&data, p, w_mats, z_b, objective)?;
    Ok((BsDesign { w, z_b: z_b.clone() }, path))
}

/// Solves P3 for a fixed IRS and recovers rank-one precoders.
pub fn solve_p3(
    ch: &ChannelSet,
    irs: &IrsDesign,
    p: &SystemParams,
) -> Result<BsSubproblemResult, BsOptError> {
    solve_p3_with(ch, irs, p, true)
}

/// [`solve_p3`] with BS-side AN optionally switched off (`Z_B = 0`).
pub fn solve_p3_with(
    ch: &ChannelSet,
    irs: &IrsDesign,
    p: &SystemParams,
    bs_an: bool,
) -> Result<BsSubproblemResult, BsOptError> {
    let data = P3Data {
        bs_an,
        ..P3Data::new(ch, irs, p)?
    };
    let prob = data.build(p);
    let settings = p3_settings();
    let sol = solve_with(&prob, &settings);
    if !sol.is_usable() {
        log::debug!("P3 status {:?} after {} iterations", sol.status, sol.iterations);
        return Err(BsOptError::Solver(sol.status));
    }
    let certificate = certify_solution(&prob, &sol, 10.0 * settings.tol);
    let s = C64::new(data.unit, 0.0);
    let k_n = ch.n_users();
    let w_mats: Vec<CMat> = (0..k_n)
        .map(|k| psd_part(&(hermitian_handle(&prob, &format!("W_{k}")).value(&sol.x) * s)))
        .collect();
    let z_b = if data.bs_an {
        psd_part(&(hermitian_handle(&prob, "Z_B").value(&sol.x) * s))
    } else {
        CMat::zeros(ch.n_tx(), ch.n_tx())
    };
    let objective = w_mats.iter().map(trace_re).sum::<f64>() + trace_re(&z_b);
    let tightness = w_mats.iter().map(|w| extract_rank_one(w).gap).collect();
    let (w, recovery) = recover(&data, p, &w_mats, &z_b, objective)?;
    Ok(BsSubproblemResult {
        w_mats,
        extracted: BsDesign { w, z_b: z_b.clone() },
        z_b,
        tightness,
        objective,
        recovery,
        solver_status: sol.status,
        solver_iterations: sol.iterations,
        certificate,
    })
}
