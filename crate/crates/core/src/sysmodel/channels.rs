use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ModelError, Point, SystemParams};
use crate::{CMat, CVec, C64};

/// Channel realization. `h_iu[k]` and `h_bu[k]` are stored un-conjugated;
/// the received scalar uses `hᴴ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// BS → IRS, M × N_T
    pub g: CMat,
    /// IRS → user k, length M
    pub h_iu: Vec<CVec>,
    /// IRS → Eve, N_E × M
    pub h_ie: CMat,
    /// BS → user k, length N_T
    pub h_bu: Vec<CVec>,
    /// BS → Eve, N_E × N_T
    pub h_be: CMat,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.g.ncols()
    }

    pub fn n_irs(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_eve(&self) -> usize {
        self.h_be.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h_bu.len()
    }

    pub fn check_dims(&self, p: &SystemParams) -> Result<(), ModelError> {
        let ok = self.g.shape() == (p.n_irs, p.n_tx)
            && self.h_ie.shape() == (p.n_eve, p.n_irs)
            && self.h_be.shape() == (p.n_eve, p.n_tx)
            && self.h_iu.len() == p.n_users
            && self.h_bu.len() == p.n_users
            && self.h_iu.iter().all(|h| h.len() == p.n_irs)
            && self.h_bu.iter().all(|h| h.len() == p.n_tx);
        if ok {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch(format!(
                "channels do not match N_T={}, M={}, N_E={}, K={}",
                p.n_tx, p.n_irs, p.n_eve, p.n_users
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Link {
    Bi = 1,
    Iu = 2,
    Ie = 3,
    Bu = 4,
    Be = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Small-scale fading sample for one matrix entry. Each entry has its own
/// stream keyed by its coordinates, so growing an array keeps the draws of
/// the elements it already had.
fn nlos_entry(seed: u64, link: Link, user: usize, row: usize, col: usize) -> C64 {
    let mut h = splitmix(seed);
    for v in [link as u64, user as u64, row as u64, col as u64] {
        h = splitmix(h ^ v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    let re: f64 = StandardNormal.sample(&mut rng);
    let im: f64 = StandardNormal.sample(&mut rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Half-wavelength ULA along the x-axis, first element at the node.
fn steering(n: usize, angle: f64) -> CVec {
    let c = angle.cos();
    CVec::from_iterator(
        n,
        (0..n).map(|i| C64::from_polar(1.0, std::f64::consts::PI * i as f64 * c)),
    )
}

struct LinkSpec<'a> {
    link: Link,
    user: usize,
    tx: &'a Point,
    rx: &'a Point,
    n_tx: usize,
    n_rx: usize,
    eta: f64,
    beta: f64,
}

fn draw_link(p: &SystemParams, seed: u64, s: LinkSpec) -> CMat {
    let d = s.tx.distance(s.rx);
    let gain = p.path_loss(d, s.eta).sqrt();
    let w_los = (s.beta / (1.0 + s.beta)).sqrt();
    let w_nlos = (1.0 / (1.0 + s.beta)).sqrt();
    let a_rx = steering(s.n_rx, s.rx.bearing(s.tx));
    let a_tx = steering(s.n_tx, s.tx.bearing(s.rx));
    DMatrix::from_fn(s.n_rx, s.n_tx, |r, c| {
        let los = a_rx[r] * a_tx[c].conj();
        let nlos = nlos_entry(seed, s.link, s.user, r, c);
        (los * w_los + nlos * w_nlos) * gain
    })
}

/// Draws a channel realization: `√L(d)·(√(β/(1+β))·H_LoS + √(1/(1+β))·H_NLoS)`
/// per link. Deterministic in `seed`.
pub fn generate_channels(p: &SystemParams, seed: u64) -> Result<ChannelSet, ModelError> {
    p.validate()?;
    let pos = &p.positions;
    let named = [("BS", &pos.bs), ("IRS", &pos.irs), ("Eve", &pos.eve)];
    for (i, (na, a)) in named.iter().enumerate() {
        for (nb, b) in &named[i + 1..] {
            if a.distance(b) == 0.0 {
                return Err(ModelError::ZeroDistance(na, nb));
            }
        }
        for u in &pos.users {
            if a.distance(u) == 0.0 {
                return Err(ModelError::ZeroDistance(na, "user"));
            }
        }
    }
    let eta = &p.pathloss_exponents;
    let beta = &p.rician_factors;
    let g = draw_link(
        p,
        seed,
        LinkSpec {
            link: Link::Bi,
            user: 0,
            tx: &pos.bs,
            rx: &pos.irs,
            n_tx: p.n_tx,
            n_rx: p.n_irs,
            eta: eta.bi,
            beta: beta.bi,
        },
    );
    let h_ie = draw_link(
        p,
        seed,
        LinkSpec {
            link: Link::Ie,
            user: 0,
            tx: &pos.irs,
            rx: &pos.eve,
            n_tx: p.n_irs,
            n_rx: p.n_eve,
            eta: eta.ie,
            beta: beta.ie,
        },
    );
    let h_be = draw_link(
        p,
        seed,
        LinkSpec {
            link: Link::Be,
            user: 0,
            tx: &pos.bs,
            rx: &pos.eve,
            n_tx: p.n_tx,
            n_rx: p.n_eve,
            eta: eta.be,
            beta: beta.be,
        },
    );
    let mut h_iu = Vec::with_capacity(p.n_users);
    let mut h_bu = Vec::with_capacity(p.n_users);
    for (k, user) in pos.users.iter().enumerate() {
        // The row channel hᴴ is drawn; the stored vector is its conjugate.
        let row = draw_link(
            p,
            seed,
            LinkSpec {
                link: Link::Iu,
                user: k,
                tx: &pos.irs,
                rx: user,
                n_tx: p.n_irs,
                n_rx: 1,
                eta: eta.iu,
                beta: beta.iu,
            },
        );
        h_iu.push(row.row(0).adjoint());
        let row = draw_link(
            p,
            seed,
            LinkSpec {
                link: Link::Bu,
                user: k,
                tx: &pos.bs,
                rx: user,
                n_tx: p.n_tx,
                n_rx: 1,
                eta: eta.bu,
                beta: beta.bu,
            },
        );
        h_bu.push(row.row(0).adjoint());
    }
    Ok(ChannelSet {
        g,
        h_iu,
        h_ie,
        h_bu,
        h_be,
    })
}
