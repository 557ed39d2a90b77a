//! Monte Carlo sweeps: every scheme on shared channel draws, then
//! per-sweep-value aggregation.

use std::time::Instant;

use airsec_core::bs_opt::RecoveryPath;
use airsec_core::driver::{run_scheme, AoConfig, AoOutcome, AoStatus, Scheme, StopReason};
use airsec_core::sysmodel::{generate_channels, secrecy_rate, watts_to_dbm, ChannelSet, SystemParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spec::ExperimentSpec;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Feasible,
    Infeasible,
}

/// Worst Big-M violations over the final P5 solution of every converged
/// SCA run: `|u_m|` where `α_m < 0.5`, `|u_m − φ_m*|` where `α_m > 0.5`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BigMAudit {
    pub solutions: usize,
    pub max_jam_u: f64,
    pub max_reflect_gap: f64,
}

impl BigMAudit {
    pub fn of(outcome: &AoOutcome) -> Self {
        let mut a = BigMAudit::default();
        for step in &outcome.history.steps {
            if step.sca_status != Some(airsec_core::irs_opt::ScaStatus::Converged) {
                continue;
            }
            let Some(last) = step.sca_points.last() else { continue };
            a.solutions += 1;
            for m in 0..last.alpha_t.len() {
                if last.alpha_t[m] < 0.5 {
                    a.max_jam_u = a.max_jam_u.max(last.u_t[m].norm());
                } else if last.alpha_t[m] > 0.5 {
                    a.max_reflect_gap = a.max_reflect_gap.max((last.u_t[m] - last.phi_t[m].conj()).norm());
                }
            }
        }
        a
    }

    pub fn merge(&mut self, o: &BigMAudit) {
        self.solutions += o.solutions;
        self.max_jam_u = self.max_jam_u.max(o.max_jam_u);
        self.max_reflect_gap = self.max_reflect_gap.max(o.max_reflect_gap);
    }
}

/// One scheme on one channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRecord {
    pub scheme: Scheme,
    pub status: TrialStatus,
    pub ao_status: AoStatus,
    pub stop: StopReason,
    pub total_power_w: Option<f64>,
    pub total_power_dbm: Option<f64>,
    pub bs_power_w: Option<f64>,
    pub irs_power_w: Option<f64>,
    /// Per-user secrecy rate in bit/s/Hz.
    pub secrecy_rates: Option<Vec<f64>>,
    /// Final `α`.
    pub modes: Option<Vec<f64>>,
    /// Accepted outer iterations after the start.
    pub ao_iterations: usize,
    pub sca_iterations: usize,
    /// Total power after every accepted step.
    pub power_history: Vec<f64>,
    /// Merit trace of every SCA run.
    pub sca_traces: Vec<Vec<f64>>,
    /// Largest `λ₂/λ₁` over the P3 solves of the accepted steps.
    pub max_tightness: f64,
    /// Largest power inflation of a randomized rank-one recovery.
    pub max_recovery_inflation: Option<f64>,
    pub big_m: BigMAudit,
    pub certificates_checked: usize,
    pub certificates_failed: usize,
    pub wall_time_s: f64,
}

impl SchemeRecord {
    pub fn from_outcome(
        scheme: Scheme,
        o: &AoOutcome,
        ch: &ChannelSet,
        p: &SystemParams,
        wall_time_s: f64,
    ) -> Result<Self, HarnessError> {
        let h = &o.history;
        let (status, total, bs_pw, irs_pw, rates, modes) = match &o.design {
            Some((bs, irs)) => {
                let rates = (0..p.n_users)
                    .map(|k| secrecy_rate(ch, bs, irs, p, k))
                    .collect::<Result<Vec<_>, _>>()?;
                (
                    TrialStatus::Feasible,
                    o.total_power(),
                    Some(bs.power()),
                    Some(irs.power()),
                    Some(rates),
                    Some(irs.alpha.clone()),
                )
            }
            None => (TrialStatus::Infeasible, None, None, None, None, None),
        };
        let certs: Vec<bool> = h.steps.iter().flat_map(|s| s.certificates.iter().copied()).collect();
        Ok(SchemeRecord {
            scheme,
            status,
            ao_status: h.status,
            stop: h.stop.clone(),
            total_power_w: total,
            total_power_dbm: total.map(watts_to_dbm),
            bs_power_w: bs_pw,
            irs_power_w: irs_pw,
            secrecy_rates: rates,
            modes,
            ao_iterations: h.steps.len().saturating_sub(1),
            sca_iterations: h.steps.iter().map(|s| s.sca_iterations).sum(),
            power_history: h.total_powers(),
            sca_traces: h.steps.iter().filter(|s| !s.sca_trace.is_empty()).map(|s| s.sca_trace.clone()).collect(),
            max_tightness: h.steps.iter().flat_map(|s| s.tightness.iter().copied()).fold(0.0, f64::max),
            max_recovery_inflation: h
                .steps
                .iter()
                .filter_map(|s| match s.recovery {
                    RecoveryPath::Randomized { inflation } => Some(inflation),
                    RecoveryPath::Eigen => None,
                })
                .reduce(f64::max),
            big_m: BigMAudit::of(o),
            certificates_checked: certs.len(),
            certificates_failed: certs.iter().filter(|c| !**c).count(),
            wall_time_s,
        })
    }

    pub fn is_feasible(&self) -> bool {
        self.status == TrialStatus::Feasible
    }
}

/// All schemes on one realization at one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub realization: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeRecord>,
}

impl TrialRecord {
    pub fn scheme(&self, sc: Scheme) -> Option<&SchemeRecord> {
        self.schemes.iter().find(|r| r.scheme == sc)
    }

    pub fn all_feasible(&self) -> bool {
        self.schemes.iter().all(SchemeRecord::is_feasible)
    }

    /// The record with wall times zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for s in &mut r.schemes {
            s.wall_time_s = 0.0;
        }
        r
    }
}

/// Runs every scheme of `spec` on one realization.
pub fn run_trial(spec: &ExperimentSpec, sweep_index: usize, realization: usize) -> Result<TrialRecord, HarnessError> {
    let seed = spec.seed(realization);
    let mut p = spec.sweep.apply(&spec.base, sweep_index);
    p.rng_seed = seed;
    let ch = generate_channels(&p, seed)?;
    let schemes = spec
        .schemes
        .iter()
        .map(|&sc| {
            let cfg = AoConfig {
                scheme: sc,
                ..spec.ao.clone()
            };
            let t0 = Instant::now();
            let o = run_scheme(&ch, &p, &cfg)?;
            let wall = t0.elapsed().as_secs_f64();
            log::debug!(
                "value #{sweep_index} seed {seed} {}: {:?} {:?}",
                sc.name(),
                o.history.status,
                o.total_power()
            );
            SchemeRecord::from_outcome(sc, &o, &ch, &p, wall)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialRecord {
        sweep_index,
        sweep_value: spec.sweep.values()[sweep_index],
        realization,
        seed,
        schemes,
    })
}

/// Every sweep value × realization, in parallel on the current rayon pool.
/// Records come back ordered by sweep value, then realization.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>, HarnessError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.sweep.len())
        .flat_map(|i| (0..spec.n_realizations).map(move |r| (i, r)))
        .collect();
    log::info!("{}: {} trials on {} threads", spec.name, jobs.len(), rayon::current_num_threads());
    jobs.par_iter().map(|&(i, r)| run_trial(spec, i, r)).collect()
}

/// Mean with its standard error (zero for a single sample).
pub fn mean_and_stderr(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// One CSV row: a scheme at a sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub scheme: String,
    /// Average over realizations where every scheme is feasible.
    pub avg_power_dbm: Option<f64>,
    pub feasibility_pct: f64,
    pub n_common_feasible: usize,
    pub avg_power_w: Option<f64>,
    pub std_error_w: Option<f64>,
    pub n_feasible: usize,
    pub n_realizations: usize,
    /// Average over realizations where this scheme alone is feasible.
    pub feasible_avg_power_dbm: Option<f64>,
    pub feasible_std_error_w: Option<f64>,
}

/// Aggregates records into one row per (sweep value, scheme), in sweep
/// then scheme order.
pub fn aggregate(records: &[TrialRecord], spec: &ExperimentSpec) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (i, value) in spec.sweep.values().into_iter().enumerate() {
        let at: Vec<&TrialRecord> = records.iter().filter(|r| r.sweep_index == i).collect();
        let common: Vec<&TrialRecord> = at.iter().copied().filter(|r| r.all_feasible()).collect();
        for &sc in &spec.schemes {
            let power = |rs: &[&TrialRecord]| -> Vec<f64> {
                rs.iter().filter_map(|r| r.scheme(sc).and_then(|s| s.total_power_w)).collect()
            };
            let common_pw = power(&common);
            let own_pw = power(&at);
            let c = mean_and_stderr(&common_pw);
            let own = mean_and_stderr(&own_pw);
            let n = at.len();
            rows.push(SummaryRow {
                sweep_value: value,
                scheme: sc.name().to_string(),
                avg_power_dbm: c.map(|(m, _)| watts_to_dbm(m)),
                feasibility_pct: if n == 0 { 0.0 } else { 100.0 * own_pw.len() as f64 / n as f64 },
                n_common_feasible: common.len(),
                avg_power_w: c.map(|(m, _)| m),
                std_error_w: c.map(|(_, s)| s),
                n_feasible: own_pw.len(),
                n_realizations: n,
                feasible_avg_power_dbm: own.map(|(m, _)| watts_to_dbm(m)),
                feasible_std_error_w: own.map(|(_, s)| s),
            });
        }
    }
    rows
}

/// Mean power of `scheme` at sweep indices `a` and `b` over the
/// realizations where it is feasible at both, with their count.
pub fn paired_means(records: &[TrialRecord], scheme: Scheme, a: usize, b: usize) -> Option<(f64, f64, usize)> {
    let power = |i: usize, r: usize| {
        records
            .iter()
            .find(|t| t.sweep_index == i && t.realization == r)
            .and_then(|t| t.scheme(scheme))
            .and_then(|s| s.total_power_w)
    };
    let reals: std::collections::BTreeSet<usize> = records.iter().map(|t| t.realization).collect();
    let pairs: Vec<(f64, f64)> = reals.into_iter().filter_map(|r| Some((power(a, r)?, power(b, r)?))).collect();
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    Some((
        pairs.iter().map(|p| p.0).sum::<f64>() / n,
        pairs.iter().map(|p| p.1).sum::<f64>() / n,
        pairs.len(),
    ))
}
