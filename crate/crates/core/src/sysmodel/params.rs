use serde::{Deserialize, Serialize};

use super::ModelError;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Direction angle of `other − self` measured from the x-axis.
    pub fn bearing(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub bs: Point,
    pub irs: Point,
    pub users: Vec<Point>,
    pub eve: Point,
}

/// One value per link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkValues {
    /// BS → user
    pub bu: f64,
    /// BS → Eve
    pub be: f64,
    /// BS → IRS
    pub bi: f64,
    /// IRS → user
    pub iu: f64,
    /// IRS → Eve
    pub ie: f64,
}

/// Scenario constants. Powers are in watts, SINR targets linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n_tx: usize,
    pub n_eve: usize,
    pub n_irs: usize,
    pub n_users: usize,
    pub positions: Positions,
    pub pathloss_exponents: LinkValues,
    pub rician_factors: LinkValues,
    pub carrier_freq: f64,
    pub ref_distance: f64,
    /// Per-user receiver noise σ²_U,k.
    pub noise_user: Vec<f64>,
    /// IRS dynamic-noise power σ²_I.
    pub noise_irs: f64,
    /// Per-user SINR target γ_k^min.
    pub gamma_min: Vec<f64>,
    /// Per-user leakage cap C_k^max in bit/s/Hz.
    pub c_max: Vec<f64>,
    /// IRS power budget P_I^max.
    pub p_irs_max: f64,
    pub rng_seed: u64,
}

impl SystemParams {
    /// Full-size scenario: M = 60, N_T = 4, N_E = 2, K = 2.
    pub fn full_defaults() -> Self {
        let k = 2;
        Self {
            n_tx: 4,
            n_eve: 2,
            n_irs: 60,
            n_users: k,
            positions: Positions {
                bs: Point::new(0.0, 0.0),
                irs: Point::new(60.0, 20.0),
                users: vec![Point::new(100.0, 10.0), Point::new(100.0, -10.0)],
                eve: Point::new(80.0, 20.0),
            },
            pathloss_exponents: LinkValues {
                bu: 3.5,
                be: 3.5,
                bi: 2.6,
                iu: 2.6,
                ie: 2.6,
            },
            rician_factors: LinkValues {
                bu: 0.0,
                be: 0.0,
                bi: 3.0,
                iu: 3.0,
                ie: 3.0,
            },
            carrier_freq: 2.4e9,
            ref_distance: 1.0,
            noise_user: vec![dbm_to_watts(-100.0); k],
            noise_irs: dbm_to_watts(-100.0),
            gamma_min: vec![db_to_linear(4.0); k],
            c_max: vec![1.6; k],
            p_irs_max: dbm_to_watts(10.0),
            rng_seed: 0,
        }
    }

    /// Reduced scenario used for tests and sweeps: M = 12.
    pub fn desk_defaults() -> Self {
        Self {
            n_irs: 12,
            ..Self::full_defaults()
        }
    }

    pub fn with_gamma_min_db(mut self, db: f64) -> Self {
        self.gamma_min = vec![db_to_linear(db); self.n_users];
        self
    }

    /// Free-space gain at the reference distance, `(c / (4π f d₀))²`.
    pub fn ref_path_loss(&self) -> f64 {
        let x = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * self.carrier_freq * self.ref_distance);
        x * x
    }

    /// Large-scale gain `L₀ (d/d₀)^{−η}`.
    pub fn path_loss(&self, d: f64, eta: f64) -> f64 {
        self.ref_path_loss() * (d / self.ref_distance).powf(-eta)
    }

    /// Leakage tolerance `2^{C_max} − 1` of user `k`.
    pub fn c_tol(&self, k: usize) -> f64 {
        self.c_max[k].exp2() - 1.0
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidParams(m));
        if self.n_tx == 0 || self.n_eve == 0 || self.n_users == 0 {
            return bad("antenna and user counts must be positive".into());
        }
        if self.n_irs + self.n_tx < self.n_eve {
            return bad(format!(
                "M + N_T = {} is below N_E = {}",
                self.n_irs + self.n_tx,
                self.n_eve
            ));
        }
        let k = self.n_users;
        if self.positions.users.len() != k
            || self.noise_user.len() != k
            || self.gamma_min.len() != k
            || self.c_max.len() != k
        {
            return bad(format!("per-user fields must all have length K = {k}"));
        }
        let lv = |l: &LinkValues| [l.bu, l.be, l.bi, l.iu, l.ie];
        if lv(&self.rician_factors).iter().any(|b| !(*b >= 0.0)) {
            return bad("Rician factors must be nonnegative".into());
        }
        if lv(&self.pathloss_exponents).iter().any(|e| !e.is_finite()) {
            return bad("path-loss exponents must be finite".into());
        }
        if !(self.carrier_freq > 0.0 && self.ref_distance > 0.0) {
            return bad("carrier frequency and reference distance must be positive".into());
        }
        if self.noise_user.iter().any(|n| !(*n > 0.0)) || !(self.noise_irs >= 0.0) {
            return bad("noise powers must be nonnegative (user noise positive)".into());
        }
        if self.gamma_min.iter().any(|g| !(*g > 0.0)) || self.c_max.iter().any(|c| !(*c > 0.0)) {
            return bad("SINR targets and leakage caps must be positive".into());
        }
        if !(self.p_irs_max >= 0.0) {
            return bad("IRS power budget must be nonnegative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_loss_is_free_space_at_one_metre() {
        let p = SystemParams::full_defaults();
        assert_relative_eq!(linear_to_db(p.ref_path_loss()), -40.05, epsilon = 0.01);
    }

    #[test]
    fn leakage_tolerance() {
        let p = SystemParams::full_defaults();
        assert_relative_eq!(p.c_tol(0), 2.031_433_1, epsilon = 1e-6);
    }

    #[test]
    fn power_units() {
        assert_relative_eq!(dbm_to_watts(10.0), 0.01, epsilon = 1e-15);
        assert_relative_eq!(watts_to_dbm(0.01), 10.0, epsilon = 1e-12);
        assert_relative_eq!(dbm_to_watts(-100.0), 1e-13, max_relative = 1e-12);
    }

    #[test]
    fn antenna_count_invariant() {
        let mut p = SystemParams::desk_defaults();
        p.n_irs = 0;
        p.n_eve = 5;
        assert!(p.validate().is_err());
        p.n_irs = 1;
        assert!(p.validate().is_ok());
    }
}
