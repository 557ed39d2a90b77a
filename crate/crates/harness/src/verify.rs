//! Randomized oracle suites over the signal model and the SCA bounds.

use airsec_core::irs_opt::{taylor_bounds, ScaIterate};
use airsec_core::linalg::min_eig;
use airsec_core::sysmodel::{
    effective_channels, empirical_sinr, generate_channels, leakage_forms, leakage_lmi, user_sinr, BsDesign,
    ChannelSet, IrsDesign, SystemParams,
};
use airsec_core::{CMat, CVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Samples this close to `C_E = C_max` (in bits) are not judged.
pub const BOUNDARY_BAND: f64 = 1e-9;
/// Largest allowed spread between the four leakage forms, in bits.
pub const FORM_GAP_TOL: f64 = 1e-10;

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| cn(rng))
}

/// Random IRS with binary modes and per-element powers inside the budget.
pub fn random_irs(rng: &mut ChaCha8Rng, p: &SystemParams) -> IrsDesign {
    let m = p.n_irs;
    let a_max = (p.p_irs_max / m as f64).sqrt();
    let phi = CVec::from_fn(m, |_, _| {
        C64::from_polar(a_max * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU))
    });
    let alpha = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    IrsDesign::new(phi, alpha)
}

/// Random BS design: Gaussian precoders of total power around `power` and
/// a full-rank AN covariance.
pub fn random_bs(rng: &mut ChaCha8Rng, p: &SystemParams, power: f64) -> BsDesign {
    let n = p.n_tx;
    let w = (0..p.n_users)
        .map(|_| {
            let v = cvec(rng, n);
            let s = (power / (p.n_users as f64 * n as f64)).sqrt();
            v * C64::new(s, 0.0)
        })
        .collect();
    let l = CMat::from_fn(n, n, |_, _| cn(rng));
    let z_scale = power * rng.random_range(0.01..1.0) / (n * n) as f64;
    let z_b = (&l * l.adjoint()) * C64::new(z_scale, 0.0);
    BsDesign { w, z_b }
}

fn random_instance(rng: &mut ChaCha8Rng, p: &SystemParams) -> Result<(ChannelSet, BsDesign, IrsDesign), HarnessError> {
    let ch = generate_channels(p, rng.random())?;
    let power = 10f64.powf(rng.random_range(-3.0..0.0));
    let bs = random_bs(rng, p, power);
    let irs = random_irs(rng, p);
    Ok((ch, bs, irs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageLmiReport {
    pub trials: usize,
    /// Trials inside the boundary band.
    pub excluded: usize,
    pub agreements: usize,
    pub disagreements: usize,
    /// Judged trials with `C_E ≤ C_max`.
    pub inside: usize,
    pub outside: usize,
    /// Largest pairwise spread of the four leakage forms.
    pub max_form_gap: f64,
    /// `w_k = 0` gave `C_E = 0` and a PSD LMI.
    pub zero_precoder_ok: bool,
}

impl LeakageLmiReport {
    pub fn passed(&self) -> bool {
        self.disagreements == 0
            && self.agreements > 0
            && self.max_form_gap <= FORM_GAP_TOL
            && self.zero_precoder_ok
    }
}

/// Compares `C_E ≤ C_max` with PSD-ness of the leakage LMI on random desk
/// instances. Precoder scales are drawn so that `C_E` is uniform on
/// `[0, 2 C_max]`, which puts about half the trials on each side. Trial 0
/// uses `w_k = 0`.
pub fn verify_proposition1(n_trials: usize, seed: u64) -> Result<LeakageLmiReport, HarnessError> {
    verify_proposition1_with(&SystemParams::desk_defaults(), n_trials, seed)
}

pub fn verify_proposition1_with(p: &SystemParams, n_trials: usize, seed: u64) -> Result<LeakageLmiReport, HarnessError> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = LeakageLmiReport {
        trials: 0,
        excluded: 0,
        agreements: 0,
        disagreements: 0,
        inside: 0,
        outside: 0,
        max_form_gap: 0.0,
        zero_precoder_ok: n_trials == 0,
    };
    for trial in 0..n_trials {
        let (ch, mut bs, irs) = random_instance(&mut rng, p)?;
        let k = rng.random_range(0..p.n_users);
        if trial == 0 {
            bs.w[k] = CVec::zeros(p.n_tx);
        } else {
            let eff = effective_channels(&ch, &bs, &irs, p)?;
            let v = &eff.f_eq * &bs.w[k];
            let q_inv = eff.q_mat.clone().try_inverse().ok_or(HarnessError::Oracle("singular Q".into()))?;
            let x = v.dotc(&(q_inv * &v)).re;
            let target: f64 = rng.random_range(0.0..2.0 * p.c_max[k]);
            let t = ((target.exp2() - 1.0) / x).sqrt();
            bs.w[k] *= C64::new(t, 0.0);
        }
        let forms = leakage_forms(&ch, &bs, &irs, p, k)?;
        rep.trials += 1;
        rep.max_form_gap = rep.max_form_gap.max(forms.max_pairwise_gap());
        let lmi = leakage_lmi(&ch, &bs, &irs, p, k)?;
        let lmi_psd = min_eig(&lmi) >= 0.0;
        if trial == 0 {
            rep.zero_precoder_ok = forms.det.abs() <= FORM_GAP_TOL && lmi_psd;
        }
        let c_e = forms.det;
        if (c_e - p.c_max[k]).abs() <= BOUNDARY_BAND {
            rep.excluded += 1;
            continue;
        }
        let inside = c_e <= p.c_max[k];
        if inside {
            rep.inside += 1;
        } else {
            rep.outside += 1;
        }
        if inside == lmi_psd {
            rep.agreements += 1;
        } else {
            rep.disagreements += 1;
            log::warn!("trial {trial}: C_E = {c_e}, LMI PSD = {lmi_psd}");
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorantReport {
    pub pairs: usize,
    /// Largest `minorant(x) − f(x)` over all pairs; must not be positive.
    pub max_excess: f64,
    /// Largest `|minorant(a) − f(a)| / max(1, f(a))` at the anchors.
    pub max_anchor_gap: f64,
}

impl MinorantReport {
    /// Bound holds up to rounding of the function values involved.
    pub fn passed(&self, anchor_tol: f64) -> bool {
        self.max_excess <= 0.0 && self.max_anchor_gap <= anchor_tol
    }
}

/// Checks the first-order minorants of `α²`, `‖θ‖²` and `‖u‖²` on random
/// (anchor, point) pairs. Excess is the bound minus the function, less a
/// rounding allowance of a few ulps.
pub fn verify_minorants(n_pairs: usize, m: usize, seed: u64) -> MinorantReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = MinorantReport {
        pairs: 0,
        max_excess: f64::NEG_INFINITY,
        max_anchor_gap: 0.0,
    };
    let draw = |rng: &mut ChaCha8Rng| {
        let scale = 10f64.powf(rng.random_range(-6.0..1.0));
        let phi = cvec(rng, m) * C64::new(scale, 0.0);
        let u = cvec(rng, m) * C64::new(scale, 0.0);
        let alpha: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..1.5)).collect();
        (phi, u, alpha)
    };
    for _ in 0..n_pairs {
        let (phi, u, alpha) = draw(&mut rng);
        let anchor = ScaIterate {
            phi_pow: phi.iter().map(|z| z.norm_sqr()).collect(),
            u_mat: &u * u.adjoint(),
            phi_t: phi,
            u_t: u,
            alpha_t: alpha,
            objective_t: 0.0,
        };
        let b = taylor_bounds(&anchor);
        let (x_phi, x_u, x_alpha) = draw(&mut rng);
        rep.pairs += 1;
        let mut check = |f: f64, bound: f64, f_anchor: f64, bound_anchor: f64| {
            let slack = 4.0 * f64::EPSILON * (f.abs() + bound.abs());
            rep.max_excess = rep.max_excess.max(bound - f - slack);
            let gap = (bound_anchor - f_anchor).abs() / f_anchor.abs().max(1.0);
            rep.max_anchor_gap = rep.max_anchor_gap.max(gap);
        };
        check(
            x_phi.norm_squared(),
            b.theta.eval(&x_phi),
            anchor.phi_t.norm_squared(),
            b.theta.eval(&anchor.phi_t),
        );
        check(x_u.norm_squared(), b.u.eval(&x_u), anchor.u_t.norm_squared(), b.u.eval(&anchor.u_t));
        for (i, mr) in b.alpha.iter().enumerate() {
            let a = anchor.alpha_t[i];
            check(x_alpha[i] * x_alpha[i], mr.eval(x_alpha[i]), a * a, mr.eval(a));
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrCase {
    pub user: usize,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
}

impl SinrCase {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.closed_form) / self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub cases: Vec<SinrCase>,
    pub n_samples: usize,
}

impl SinrReport {
    pub fn max_abs_z(&self) -> f64 {
        self.cases.iter().map(|c| c.z_score().abs()).fold(0.0, f64::max)
    }

    pub fn passed(&self, z: f64) -> bool {
        !self.cases.is_empty() && self.max_abs_z() <= z
    }
}

/// Closed-form SINR against the sample-level simulation on random desk
/// instances, one user per instance.
pub fn verify_sinr(n_instances: usize, n_samples: usize, seed: u64) -> Result<SinrReport, HarnessError> {
    let p = SystemParams::desk_defaults();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(n_instances);
    for i in 0..n_instances {
        let (ch, bs, irs) = random_instance(&mut rng, &p)?;
        let k = i % p.n_users;
        let closed_form = user_sinr(&ch, &bs, &irs, &p, k)?;
        let e = empirical_sinr(&ch, &bs, &irs, &p, k, n_samples, rng.random())?;
        cases.push(SinrCase {
            user: k,
            closed_form,
            estimate: e.estimate,
            std_error: e.std_error,
        });
    }
    Ok(SinrReport { cases, n_samples })
}
