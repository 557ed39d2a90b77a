#![allow(dead_code)]

use airsec_core::sysmodel::{generate_channels, BsDesign, ChannelSet, IrsDesign, SystemParams};
use airsec_core::{CMat, CVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng) -> C64 {
    let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    C64::new(a, b)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CVec {
    CVec::from_fn(n, |_, _| cgauss(rng) * scale)
}

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let b = CMat::from_fn(n, n, |_, _| cgauss(rng));
    &b * b.adjoint() * C64::new(scale, 0.0)
}

pub fn random_bs(rng: &mut ChaCha8Rng, n_tx: usize, k: usize) -> BsDesign {
    let w_scale = 10f64.powf(rng.random_range(-2.0..0.0));
    let z_scale = 10f64.powf(rng.random_range(-4.0..-1.0));
    BsDesign {
        w: (0..k).map(|_| random_vec(rng, n_tx, w_scale)).collect(),
        z_b: random_psd(rng, n_tx, z_scale),
    }
}

pub fn random_irs(rng: &mut ChaCha8Rng, m: usize, budget: f64) -> IrsDesign {
    let phi = random_vec(rng, m, 1.0);
    let norm = phi.norm();
    let frac: f64 = rng.random_range(0.05..1.0);
    let phi = phi * C64::new((budget * frac).sqrt() / norm, 0.0);
    let alpha = (0..m).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
    IrsDesign::new(phi, alpha)
}

pub fn desk_instance(seed: u64) -> (SystemParams, ChannelSet) {
    let p = SystemParams::desk_defaults();
    let ch = generate_channels(&p, seed).unwrap();
    (p, ch)
}
