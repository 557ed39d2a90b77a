//! Experiment description: a user-facing TOML file with powers in dBm, and
//! the fully resolved [`ExperimentSpec`] that is written back out as JSON.

use std::path::{Path, PathBuf};

use airsec_core::driver::{AoConfig, Scheme};
use airsec_core::sysmodel::{db_to_linear, dbm_to_watts, LinkValues, Positions, SystemParams};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// The swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Common SINR target of every user, in dB.
    GammaMinDb(Vec<f64>),
    NEve(Vec<usize>),
    NIrs(Vec<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::GammaMinDb(_) => "gamma_min_db",
            SweepAxis::NEve(_) => "n_eve",
            SweepAxis::NIrs(_) => "n_irs",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::GammaMinDb(v) => v.clone(),
            SweepAxis::NEve(v) | SweepAxis::NIrs(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::GammaMinDb(v) => v.len(),
            SweepAxis::NEve(v) | SweepAxis::NIrs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `base` with the `i`-th sweep value applied.
    pub fn apply(&self, base: &SystemParams, i: usize) -> SystemParams {
        let mut p = base.clone();
        match self {
            SweepAxis::GammaMinDb(v) => p.gamma_min = vec![db_to_linear(v[i]); p.n_users],
            SweepAxis::NEve(v) => p.n_eve = v[i],
            SweepAxis::NIrs(v) => p.n_irs = v[i],
        }
        p
    }
}

/// A resolved experiment. Every default is filled in, powers are in watts,
/// and the JSON form of this struct reproduces a run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub base: SystemParams,
    pub sweep: SweepAxis,
    pub schemes: Vec<Scheme>,
    pub n_realizations: usize,
    /// Realization `r` uses channel seed `seed_base + r`.
    pub seed_base: u64,
    pub ao: AoConfig,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    /// Desk-scale sweep over `axis` with every scheme and 20 realizations.
    pub fn desk(name: &str, sweep: SweepAxis) -> Self {
        Self {
            name: name.into(),
            base: SystemParams::desk_defaults(),
            sweep,
            schemes: Scheme::ALL.to_vec(),
            n_realizations: 20,
            seed_base: 0,
            ao: AoConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn seed(&self, realization: usize) -> u64 {
        self.seed_base.wrapping_add(realization as u64)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_realizations < 1 {
            return bad("n_realizations must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required".into());
        }
        if self.sweep.is_empty() {
            return bad("the sweep needs at least one value".into());
        }
        for (i, v) in self.sweep.values().iter().enumerate() {
            if !v.is_finite() {
                return bad(format!("sweep value {v} is not finite"));
            }
            self.sweep
                .apply(&self.base, i)
                .validate()
                .map_err(|e| HarnessError::Config(format!("{} = {v}: {e}", self.sweep.name())))?;
        }
        self.ao.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a TOML experiment file or a resolved JSON spec, by extension.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let spec = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        } else {
            ExperimentFile::from_toml(&text)?.resolve()?
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A per-user quantity given once for all users or as a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    All(f64),
    Each(Vec<f64>),
}

impl PerUser {
    fn expand(&self, k: usize, name: &str) -> Result<Vec<f64>, HarnessError> {
        match self {
            PerUser::All(x) => Ok(vec![*x; k]),
            PerUser::Each(v) if v.len() == k => Ok(v.clone()),
            PerUser::Each(v) => Err(HarnessError::Config(format!(
                "{name} has {} entries for {k} users",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseScenario {
    #[default]
    Desk,
    Full,
}

/// Overrides of the base scenario. Powers in dBm, SINR targets in dB.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemOverrides {
    pub n_tx: Option<usize>,
    pub n_eve: Option<usize>,
    pub n_irs: Option<usize>,
    pub n_users: Option<usize>,
    pub positions: Option<Positions>,
    pub pathloss_exponents: Option<LinkValues>,
    pub rician_factors: Option<LinkValues>,
    pub carrier_freq: Option<f64>,
    pub ref_distance: Option<f64>,
    pub noise_user_dbm: Option<PerUser>,
    pub noise_irs_dbm: Option<f64>,
    pub gamma_min_db: Option<PerUser>,
    pub c_max: Option<PerUser>,
    pub p_irs_max_dbm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AoOverrides {
    pub tau_max: Option<usize>,
    pub ao_tol: Option<f64>,
    pub restarts: Option<usize>,
    pub all_reflect_bs_an: Option<bool>,
    pub multi_start: Option<bool>,
    pub sca_t_max: Option<usize>,
    pub sca_tol: Option<f64>,
    pub sca_validation_tol: Option<f64>,
}

/// The TOML experiment file as written by a user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub base: BaseScenario,
    #[serde(default)]
    pub system: SystemOverrides,
    pub sweep: SweepAxis,
    /// Scheme names; all three when omitted.
    pub schemes: Option<Vec<String>>,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub ao: AoOverrides,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_realizations() -> usize {
    20
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentFile {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ExperimentSpec, HarnessError> {
        let mut p = match self.base {
            BaseScenario::Desk => SystemParams::desk_defaults(),
            BaseScenario::Full => SystemParams::full_defaults(),
        };
        let s = &self.system;
        if let Some(v) = s.n_tx {
            p.n_tx = v;
        }
        if let Some(v) = s.n_eve {
            p.n_eve = v;
        }
        if let Some(v) = s.n_irs {
            p.n_irs = v;
        }
        if let Some(k) = s.n_users {
            // per-user defaults are uniform, so they stretch to any K
            p.n_users = k;
            p.noise_user = vec![p.noise_user[0]; k];
            p.gamma_min = vec![p.gamma_min[0]; k];
            p.c_max = vec![p.c_max[0]; k];
        }
        if let Some(v) = &s.positions {
            p.positions = v.clone();
        }
        if let Some(v) = s.pathloss_exponents {
            p.pathloss_exponents = v;
        }
        if let Some(v) = s.rician_factors {
            p.rician_factors = v;
        }
        if let Some(v) = s.carrier_freq {
            p.carrier_freq = v;
        }
        if let Some(v) = s.ref_distance {
            p.ref_distance = v;
        }
        let k = p.n_users;
        if let Some(v) = &s.noise_user_dbm {
            p.noise_user = v.expand(k, "noise_user_dbm")?.into_iter().map(dbm_to_watts).collect();
        }
        if let Some(v) = s.noise_irs_dbm {
            p.noise_irs = dbm_to_watts(v);
        }
        if let Some(v) = &s.gamma_min_db {
            p.gamma_min = v.expand(k, "gamma_min_db")?.into_iter().map(db_to_linear).collect();
        }
        if let Some(v) = &s.c_max {
            p.c_max = v.expand(k, "c_max")?;
        }
        if let Some(v) = s.p_irs_max_dbm {
            p.p_irs_max = dbm_to_watts(v);
        }

        let mut ao = AoConfig::default();
        let o = &self.ao;
        if let Some(v) = o.tau_max {
            ao.tau_max = v;
        }
        if let Some(v) = o.ao_tol {
            ao.ao_tol = v;
        }
        if let Some(v) = o.restarts {
            ao.restarts = v;
        }
        if let Some(v) = o.all_reflect_bs_an {
            ao.all_reflect_bs_an = v;
        }
        if let Some(v) = o.multi_start {
            ao.multi_start = v;
        }
        if let Some(v) = o.sca_t_max {
            ao.sca.t_max = v;
        }
        if let Some(v) = o.sca_tol {
            ao.sca.tol = v;
        }
        if let Some(v) = o.sca_validation_tol {
            ao.sca.validation_tol = v;
        }

        let schemes = match &self.schemes {
            None => Scheme::ALL.to_vec(),
            Some(names) => parse_schemes(names)?,
        };
        let spec = ExperimentSpec {
            name: self.name.clone(),
            base: p,
            sweep: self.sweep.clone(),
            schemes,
            n_realizations: self.n_realizations,
            seed_base: self.seed_base,
            ao,
            out_dir: self.out_dir.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses scheme names, rejecting unknown and repeated ones.
pub fn parse_schemes<S: AsRef<str>>(names: &[S]) -> Result<Vec<Scheme>, HarnessError> {
    let mut out: Vec<Scheme> = Vec::new();
    for n in names {
        let sc: Scheme = n.as_ref().trim().parse().map_err(HarnessError::Config)?;
        if out.contains(&sc) {
            return Err(HarnessError::Config(format!("scheme '{}' listed twice", sc.name())));
        }
        out.push(sc);
    }
    Ok(out)
}
