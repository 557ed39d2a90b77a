//! Exhaustive mode search for small surfaces.

use airsec_core::driver::{ao_with_modes, AoConfig};
use airsec_core::sysmodel::{ChannelSet, SystemParams};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Largest surface the oracle will enumerate.
pub const MAX_ORACLE_ELEMENTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternResult {
    pub alpha: Vec<f64>,
    /// Total power of the AO run with these modes, if it found a feasible point.
    pub power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub patterns: Vec<PatternResult>,
    /// Index into `patterns` of the cheapest feasible pattern.
    pub best: Option<usize>,
}

impl OracleResult {
    pub fn best_power(&self) -> Option<f64> {
        self.best.and_then(|i| self.patterns[i].power)
    }

    pub fn best_alpha(&self) -> Option<&[f64]> {
        self.best.map(|i| self.patterns[i].alpha.as_slice())
    }
}

/// Pattern `bits` as modes: bit `m` set means element `m` reflects.
pub fn pattern(bits: u32, m: usize) -> Vec<f64> {
    (0..m).map(|i| if bits >> i & 1 == 1 { 1.0 } else { 0.0 }).collect()
}

/// Runs the AO with every one of the `2^M` mode patterns held fixed and
/// keeps the cheapest.
pub fn exhaustive_mode_oracle(ch: &ChannelSet, p: &SystemParams, cfg: &AoConfig) -> Result<OracleResult, HarnessError> {
    let m = ch.n_irs();
    if m > MAX_ORACLE_ELEMENTS {
        return Err(HarnessError::Config(format!(
            "exhaustive search over M = {m} elements refused (limit {MAX_ORACLE_ELEMENTS})"
        )));
    }
    let mut patterns: Vec<PatternResult> = Vec::with_capacity(1 << m);
    let mut best: Option<usize> = None;
    for bits in 0..1u32 << m {
        let alpha = pattern(bits, m);
        let power = ao_with_modes(ch, p, cfg, &alpha)?.total_power();
        if let Some(pw) = power {
            if best.is_none_or(|b| pw < patterns[b].power.unwrap_or(f64::INFINITY)) {
                best = Some(patterns.len());
            }
        }
        patterns.push(PatternResult { alpha, power });
    }
    Ok(OracleResult { patterns, best })
}
