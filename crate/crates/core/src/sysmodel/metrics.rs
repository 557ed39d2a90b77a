use serde::{Deserialize, Serialize};

use super::{BsDesign, ChannelSet, IrsDesign, ModelError, SystemParams};
use crate::linalg::{eigh, hermitian_part, max_eig, min_eig, norm_sqr, outer, quad_form, trace_re};
use crate::{CMat, CVec, C64};

/// Channels seen through a fixed IRS configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveChannels {
    /// `h_eq,k = h_BU,k + Gᴴ diag(u) h_IU,k`
    pub h_eq: Vec<CVec>,
    /// `F_eq = H_BE + H_IE AΘ G`
    pub f_eq: CMat,
    /// Eavesdropper interference-plus-jamming covariance.
    pub q_mat: CMat,
    /// Interference-plus-noise `μ_k` at each user (excluding IRS terms).
    pub mu: Vec<f64>,
}

fn check_design(ch: &ChannelSet, bs: &BsDesign, irs: &IrsDesign) -> Result<(), ModelError> {
    let n = ch.n_tx();
    let ok = bs.w.len() == ch.n_users()
        && bs.w.iter().all(|w| w.len() == n)
        && bs.z_b.shape() == (n, n)
        && irs.len() == ch.n_irs()
        && irs.alpha.len() == ch.n_irs();
    if ok {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch(
            "design does not match the channel dimensions".into(),
        ))
    }
}

/// `h_eq,k` for every user.
pub fn equivalent_user_channels(ch: &ChannelSet, irs: &IrsDesign) -> Vec<CVec> {
    let u = irs.u();
    let gh = ch.g.adjoint();
    ch.h_bu
        .iter()
        .zip(&ch.h_iu)
        .map(|(hbu, hiu)| hbu + &gh * hiu.component_mul(&u))
        .collect()
}

/// `F_eq`
pub fn equivalent_eve_channel(ch: &ChannelSet, irs: &IrsDesign) -> CMat {
    let r = irs.reflect_coeffs();
    let mut hg = ch.h_ie.clone();
    for (m, c) in r.iter().enumerate() {
        hg.column_mut(m).scale_mut_c(*c);
    }
    &ch.h_be + hg * &ch.g
}

trait ScaleC {
    fn scale_mut_c(&mut self, c: C64);
}

impl<S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>> ScaleC
    for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
{
    fn scale_mut_c(&mut self, c: C64) {
        for v in self.iter_mut() {
            *v *= c;
        }
    }
}

/// IRS contribution to Eve's covariance:
/// `H_IE(I−A)ΘΘᴴ(I−A)H_IEᴴ + σ_I² H_IE ΘΘᴴ H_IEᴴ`.
pub fn irs_eve_covariance(ch: &ChannelSet, irs: &IrsDesign, noise_irs: f64) -> CMat {
    let jam = irs.jam_coeffs();
    let weights: Vec<f64> = jam
        .iter()
        .zip(irs.phi.iter())
        .map(|(j, p)| j.norm_sqr() + noise_irs * p.norm_sqr())
        .collect();
    let mut scaled = ch.h_ie.clone();
    for (m, w) in weights.iter().enumerate() {
        scaled.column_mut(m).scale_mut_c(C64::new(*w, 0.0));
    }
    hermitian_part(&(scaled * ch.h_ie.adjoint()))
}

pub fn effective_channels(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
) -> Result<EffectiveChannels, ModelError> {
    check_design(ch, bs, irs)?;
    let h_eq = equivalent_user_channels(ch, irs);
    let f_eq = equivalent_eve_channel(ch, irs);
    let q_mat = hermitian_part(&(&f_eq * &bs.z_b * f_eq.adjoint()))
        + irs_eve_covariance(ch, irs, p.noise_irs);
    let mu = h_eq
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let inter: f64 = bs
                .w
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, w)| h.dotc(w).norm_sqr())
                .sum();
            inter + quad_form(&bs.z_b, h) + p.noise_user[k]
        })
        .collect();
    Ok(EffectiveChannels {
        h_eq,
        f_eq,
        q_mat,
        mu,
    })
}

/// IRS-originated noise at user `k`: jamming `‖h_IUᴴ(I−A)Θ‖²` plus dynamic
/// noise `σ_I² ‖Θᴴ h_IU‖²`.
pub fn irs_user_noise(ch: &ChannelSet, irs: &IrsDesign, noise_irs: f64, k: usize) -> f64 {
    let h = &ch.h_iu[k];
    let jam: f64 = h
        .iter()
        .zip(irs.jam_coeffs().iter())
        .map(|(hm, j)| (hm.conj() * j).norm_sqr())
        .sum();
    let dynamic: f64 = h
        .iter()
        .zip(irs.phi.iter())
        .map(|(hm, p)| (hm.conj() * p).norm_sqr())
        .sum();
    jam + noise_irs * dynamic
}

pub fn user_sinr(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    k: usize,
) -> Result<f64, ModelError> {
    let eff = effective_channels(ch, bs, irs, p)?;
    let signal = eff.h_eq[k].dotc(&bs.w[k]).norm_sqr();
    Ok(signal / (eff.mu[k] + irs_user_noise(ch, irs, p.noise_irs, k)))
}

/// `log2(1 + γ_U,k)`
pub fn user_rate(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    k: usize,
) -> Result<f64, ModelError> {
    Ok((1.0 + user_sinr(ch, bs, irs, p, k)?).log2())
}

/// Eigenvalues at or below this fraction of the largest one make `Q` singular.
const SINGULAR_Q_RATIO: f64 = 1e-12;

fn q_is_singular(q: &CMat) -> bool {
    let (vals, _) = eigh(q);
    let hi = *vals.last().unwrap_or(&0.0);
    !(hi > 0.0) || vals[0] <= SINGULAR_Q_RATIO * hi
}

/// The four equivalent expressions of the leakage bound, each evaluated by
/// a different numerical route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageForms {
    /// `log2 det(I + Q⁻¹ F w wᴴ Fᴴ)`
    pub det: f64,
    /// `log2(1 + wᴴ Fᴴ Q⁻¹ F w)`
    pub scalar: f64,
    /// `log2(1 + Tr(Q⁻¹ F w wᴴ Fᴴ))`
    pub trace: f64,
    /// `log2(1 + λ_max(Q^{-1/2} F w wᴴ Fᴴ Q^{-1/2}))`
    pub lambda_max: f64,
}

impl LeakageForms {
    pub fn max_pairwise_gap(&self) -> f64 {
        let v = [self.det, self.scalar, self.trace, self.lambda_max];
        let mut gap = 0.0f64;
        for i in 0..4 {
            for j in i + 1..4 {
                gap = gap.max((v[i] - v[j]).abs());
            }
        }
        gap
    }
}

/// Evaluates all four leakage forms for a covariance `q` and a received
/// signal direction `v = F_eq w_k`.
pub fn leakage_forms_raw(q: &CMat, v: &CVec) -> Result<LeakageForms, ModelError> {
    if q_is_singular(q) {
        return Err(ModelError::SingularQ);
    }
    let n = q.nrows();
    let qinv = q
        .clone()
        .try_inverse()
        .ok_or(ModelError::SingularQ)?;
    let vvh = outer(v, v);
    let m = CMat::identity(n, n) + &qinv * &vvh;
    let det = m.determinant().re.log2();

    let chol = hermitian_part(q).cholesky().ok_or(ModelError::SingularQ)?;
    let x = chol.solve(v);
    let scalar = (1.0 + v.dotc(&x).re).log2();

    let trace = (1.0 + trace_re(&(&qinv * &vvh))).log2();

    let (vals, vecs) = eigh(q);
    let inv_sqrt = CVec::from_iterator(n, vals.iter().map(|l| C64::new(1.0 / l.sqrt(), 0.0)));
    let q_isqrt = &vecs * CMat::from_diagonal(&inv_sqrt) * vecs.adjoint();
    let lambda_max = (1.0 + max_eig(&(&q_isqrt * &vvh * &q_isqrt))).log2();
    Ok(LeakageForms {
        det,
        scalar,
        trace,
        lambda_max,
    })
}

pub fn leakage_forms(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    k: usize,
) -> Result<LeakageForms, ModelError> {
    let eff = effective_channels(ch, bs, irs, p)?;
    leakage_forms_raw(&eff.q_mat, &(&eff.f_eq * &bs.w[k]))
}

/// Worst-case eavesdropper capacity for user `k` (determinant form).
pub fn eve_capacity(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    k: usize,
) -> Result<f64, ModelError> {
    Ok(leakage_forms(ch, bs, irs, p, k)?.det.max(0.0))
}

/// `C_tol·Q − F_eq w_k w_kᴴ F_eqᴴ`, PSD exactly when the leakage cap holds.
pub fn leakage_lmi(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    k: usize,
) -> Result<CMat, ModelError> {
    let eff = effective_channels(ch, bs, irs, p)?;
    let v = &eff.f_eq * &bs.w[k];
    Ok(hermitian_part(&(&eff.q_mat * C64::new(p.c_tol(k), 0.0) - outer(&v, &v))))
}

pub fn secrecy_rate(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    k: usize,
) -> Result<f64, ModelError> {
    let r = user_rate(ch, bs, irs, p, k)?;
    let c = eve_capacity(ch, bs, irs, p, k)?;
    Ok((r - c).max(0.0))
}

/// `Σ‖w_k‖² + Tr(Z_B) + ‖Θ‖²_F`
pub fn total_power(bs: &BsDesign, irs: &IrsDesign) -> f64 {
    bs.power() + irs.power()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum C2Slack {
    /// `C_max − C_E`
    Value(f64),
    /// `Q` singular; the leakage LMI's smallest eigenvalue relative to its
    /// scale decides instead.
    Indeterminate { lmi_relative_min_eig: f64 },
}

impl C2Slack {
    pub fn value(&self) -> f64 {
        match *self {
            C2Slack::Value(v) => v,
            C2Slack::Indeterminate {
                lmi_relative_min_eig,
            } => lmi_relative_min_eig,
        }
    }
}

/// Per-constraint slacks; nonnegative means satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `γ_U,k − γ_k^min`
    pub c1: Vec<f64>,
    pub c2: Vec<C2Slack>,
    /// `λ_min(Z_B)`
    pub c3: f64,
    /// minus the largest distance of `α_m` from {0, 1}
    pub c4: f64,
    /// `P_I^max − ‖Θ‖²_F`
    pub c5: f64,
    pub tol: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn worst_slack(&self) -> f64 {
        self.c1
            .iter()
            .copied()
            .chain(self.c2.iter().map(C2Slack::value))
            .chain([self.c3, self.c4, self.c5])
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn check_feasibility(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    tol: f64,
) -> Result<FeasibilityReport, ModelError> {
    let eff = effective_channels(ch, bs, irs, p)?;
    let k_n = ch.n_users();
    let c1 = (0..k_n)
        .map(|k| {
            let signal = eff.h_eq[k].dotc(&bs.w[k]).norm_sqr();
            signal / (eff.mu[k] + irs_user_noise(ch, irs, p.noise_irs, k)) - p.gamma_min[k]
        })
        .collect::<Vec<_>>();
    let c2 = (0..k_n)
        .map(|k| {
            let v = &eff.f_eq * &bs.w[k];
            match leakage_forms_raw(&eff.q_mat, &v) {
                Ok(f) => C2Slack::Value(p.c_max[k] - f.det.max(0.0)),
                Err(_) => {
                    let scaled_q = &eff.q_mat * C64::new(p.c_tol(k), 0.0);
                    let vvh = outer(&v, &v);
                    let scale = (scaled_q.norm() + vvh.norm()).max(f64::MIN_POSITIVE);
                    C2Slack::Indeterminate {
                        lmi_relative_min_eig: min_eig(&(scaled_q - vvh)) / scale,
                    }
                }
            }
        })
        .collect::<Vec<_>>();
    let c3 = min_eig(&bs.z_b);
    let c4 = -irs.binariness_gap();
    let c5 = p.p_irs_max - norm_sqr(&irs.phi);
    let mut report = FeasibilityReport {
        c1,
        c2,
        c3,
        c4,
        c5,
        tol,
        feasible: false,
    };
    report.feasible = report.worst_slack() >= -tol;
    Ok(report)
}
