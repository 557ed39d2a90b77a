use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{BsDesign, ChannelSet, IrsDesign, ModelError, SystemParams};
use crate::linalg::eigh;
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSinr {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

fn cn<R: rand::Rng>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Square-root factor `L` with `L Lᴴ = Z` for a PSD (possibly singular) `Z`.
fn psd_factor(z: &CMat) -> CMat {
    let (vals, vecs) = eigh(z);
    let s = CVec::from_iterator(vals.len(), vals.iter().map(|v| C64::new(v.max(0.0).sqrt(), 0.0)));
    vecs * CMat::from_diagonal(&s)
}

/// Monte Carlo SINR at user `k` from the sample-level signal model: every
/// symbol, AN vector and noise source is drawn, the transmit and IRS
/// signals are formed explicitly, and the desired-to-rest power ratio is
/// returned with a delta-method standard error.
pub fn empirical_sinr(
    ch: &ChannelSet,
    bs: &BsDesign,
    irs: &IrsDesign,
    p: &SystemParams,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<EmpiricalSinr, ModelError> {
    if n_samples < 2 {
        return Err(ModelError::InvalidParams("need at least two samples".into()));
    }
    let n_t = ch.n_tx();
    let m = ch.n_irs();
    let n_u = ch.n_users();
    if bs.w.len() != n_u || irs.len() != m || k >= n_u {
        return Err(ModelError::DimensionMismatch("design/channel size".into()));
    }
    let l_z = psd_factor(&bs.z_b);
    let reflect = irs.reflect_coeffs();
    let jam = irs.jam_coeffs();
    let h_bu_c = ch.h_bu[k].map(|z| z.conj());
    let h_iu_c = ch.h_iu[k].map(|z| z.conj());
    let sigma_i = p.noise_irs.sqrt();
    let sigma_u = p.noise_user[k].sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym = vec![C64::new(0.0, 0.0); n_u];
    let mut x = CVec::zeros(n_t);
    let mut g_an = CVec::zeros(n_t);
    let mut y_i = CVec::zeros(m);
    let (mut s_d, mut s_r, mut s_dd, mut s_rr, mut s_dr) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n_samples {
        for s in sym.iter_mut() {
            *s = cn(&mut rng);
        }
        for g in g_an.iter_mut() {
            *g = cn(&mut rng);
        }
        // x = Σ w_j x_j + z_B
        x.copy_from(&(&l_z * &g_an));
        for (w, s) in bs.w.iter().zip(&sym) {
            x.axpy(*s, w, C64::new(1.0, 0.0));
        }
        // y_I = AΘ G x + (I−A)Θ z_I + Θ n_I
        let gx = &ch.g * &x;
        for i in 0..m {
            let z_i = cn(&mut rng);
            let n_i = cn(&mut rng) * sigma_i;
            y_i[i] = reflect[i] * gx[i] + jam[i] * z_i + irs.phi[i] * n_i;
        }
        let n_u_k = cn(&mut rng) * sigma_u;
        let y = h_bu_c.dot(&x) + h_iu_c.dot(&y_i) + n_u_k;
        // the part of y carried by the intended symbol
        let wk = &bs.w[k] * sym[k];
        let gw = &ch.g * &wk;
        let mut desired = h_bu_c.dot(&wk);
        for i in 0..m {
            desired += h_iu_c[i] * reflect[i] * gw[i];
        }
        let d = desired.norm_sqr();
        let r = (y - desired).norm_sqr();
        s_d += d;
        s_r += r;
        s_dd += d * d;
        s_rr += r * r;
        s_dr += d * r;
    }
    let n = n_samples as f64;
    let (md, mr) = (s_d / n, s_r / n);
    let var_d = (s_dd / n - md * md) * n / (n - 1.0);
    let var_r = (s_rr / n - mr * mr) * n / (n - 1.0);
    let cov = (s_dr / n - md * mr) * n / (n - 1.0);
    let est = md / mr;
    let var = (var_d / (mr * mr) + md * md * var_r / mr.powi(4) - 2.0 * md * cov / mr.powi(3)) / n;
    Ok(EmpiricalSinr {
        estimate: est,
        std_error: var.max(0.0).sqrt(),
        n_samples,
    })
}
