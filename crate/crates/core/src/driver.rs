//! Alternating optimization over the BS and IRS sub-problems, the two
//! baseline schemes and the infeasibility policy.

use airsec_conic::SolveStatus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bs_opt::{solve_p3_with, BsOptError, BsSubproblemResult, RecoveryPath};
use crate::irs_opt::{initial_design, sca_optimize, ScaConfig, ScaIterate, ScaOutcome, ScaStatus};
use crate::sysmodel::{check_feasibility, BsDesign, ChannelSet, IrsDesign, ModelError, SystemParams};
use crate::{CVec, C64};

/// Slack accepted when a final design is re-checked against the model.
pub const FINAL_CHECK_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Proposed,
    BaselineAllReflect,
    BaselineNoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::BaselineAllReflect, Scheme::BaselineNoIrs];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::BaselineAllReflect => "all_reflect",
            Scheme::BaselineNoIrs => "no_irs",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scheme '{s}' (expected proposed, all_reflect or no_irs)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoConfig {
    pub tau_max: usize,
    /// Relative change of the total power that ends the loop.
    pub ao_tol: f64,
    /// Extra starts tried when the first P3 fails.
    pub restarts: usize,
    pub sca: ScaConfig,
    pub scheme: Scheme,
    /// The all-reflect baseline keeps BS-side AN; `false` tests the reading
    /// in which that baseline emits no AN at all.
    #[serde(default = "yes")]
    pub all_reflect_bs_an: bool,
    /// The proposed scheme runs the loop from every feasible start and
    /// keeps the cheapest result, instead of stopping at the first.
    #[serde(default = "yes")]
    pub multi_start: bool,
}

fn yes() -> bool {
    true
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            tau_max: 30,
            ao_tol: 1e-3,
            restarts: 3,
            sca: ScaConfig::default(),
            scheme: Scheme::Proposed,
            all_reflect_bs_an: true,
            multi_start: true,
        }
    }
}

impl AoConfig {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |msg: &str| Err(DriverError::Config(msg.into()));
        if self.tau_max < 1 {
            return bad("tau_max must be at least 1");
        }
        if !(self.ao_tol > 0.0 && self.sca.tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.sca.t_max < 1 {
            return bad("SCA t_max must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid AO configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AoStatus {
    Feasible,
    Infeasible,
    NotConverged,
}

/// Why the loop ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    TauMax,
    /// The IRS step failed or made things worse; the last accepted point is
    /// returned.
    Rejected { tau: usize, cause: String },
    /// No start produced a feasible first P3.
    NoFeasibleStart,
    /// Single-shot scheme.
    SingleSolve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoStep {
    pub tau: usize,
    pub total_power: f64,
    pub bs_power: f64,
    pub irs_power: f64,
    pub p3_status: SolveStatus,
    pub p3_iterations: usize,
    pub recovery: RecoveryPath,
    /// `λ₂/λ₁` of each `W_k`.
    pub tightness: Vec<f64>,
    /// SCA passes that produced this step's IRS (0 for the start).
    pub sca_iterations: usize,
    pub sca_status: Option<ScaStatus>,
    /// Merit trace of that SCA run.
    pub sca_trace: Vec<f64>,
    /// Pre-rounding `α` and the P5 solutions of the run, for audits.
    pub sca_points: Vec<ScaIterate>,
    /// Certificate outcomes of this step's `Optimal` conic solves (P3
    /// first, then the SCA surrogates).
    #[serde(default)]
    pub certificates: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoHistory {
    pub steps: Vec<AoStep>,
    pub status: AoStatus,
    pub stop: StopReason,
    /// Index of the start that produced the first feasible P3.
    pub start: Option<usize>,
    /// First-P3 failures, one entry per start tried.
    pub start_failures: Vec<String>,
    /// Final total power of every other start that was run to the end.
    #[serde(default)]
    pub alternatives: Vec<f64>,
}

impl AoHistory {
    pub fn total_powers(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.total_power).collect()
    }

    pub fn final_power(&self) -> Option<f64> {
        self.steps.last().map(|s| s.total_power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoOutcome {
    /// Present unless the run is infeasible.
    pub design: Option<(BsDesign, IrsDesign)>,
    pub history: AoHistory,
}

impl AoOutcome {
    pub fn is_feasible(&self) -> bool {
        self.design.is_some()
    }

    pub fn total_power(&self) -> Option<f64> {
        self.design.as_ref().and(self.history.final_power())
    }

    fn infeasible(failures: Vec<String>) -> Self {
        Self {
            design: None,
            history: AoHistory {
                steps: Vec::new(),
                status: AoStatus::Infeasible,
                stop: StopReason::NoFeasibleStart,
                start: None,
                start_failures: failures,
                alternatives: Vec::new(),
            },
        }
    }
}

/// Runs the scheme selected in `cfg`.
pub fn run_scheme(ch: &ChannelSet, p: &SystemParams, cfg: &AoConfig) -> Result<AoOutcome, DriverError> {
    match cfg.scheme {
        Scheme::Proposed => alternating_optimize(ch, p, cfg),
        Scheme::BaselineAllReflect => baseline_all_reflect(ch, p, cfg),
        Scheme::BaselineNoIrs => baseline_no_irs(ch, p, cfg),
    }
}

/// Joint design with free reflect/jam modes.
pub fn alternating_optimize(ch: &ChannelSet, p: &SystemParams, cfg: &AoConfig) -> Result<AoOutcome, DriverError> {
    let starts = start_designs(ch, p, cfg.restarts, true);
    run_ao(ch, p, cfg, &starts, None, true, cfg.multi_start)
}

/// Every element reflects; amplitudes and phases are still optimized.
pub fn baseline_all_reflect(ch: &ChannelSet, p: &SystemParams, cfg: &AoConfig) -> Result<AoOutcome, DriverError> {
    let starts = start_designs(ch, p, cfg.restarts, false);
    let ones = vec![1.0; ch.n_irs()];
    run_ao(ch, p, cfg, &starts, Some(&ones), cfg.all_reflect_bs_an, false)
}

/// AO with the modes pinned to `alpha` from the start (mode-pattern oracle).
pub fn ao_with_modes(
    ch: &ChannelSet,
    p: &SystemParams,
    cfg: &AoConfig,
    alpha: &[f64],
) -> Result<AoOutcome, DriverError> {
    let starts: Vec<IrsDesign> = start_designs(ch, p, cfg.restarts, false)
        .into_iter()
        .map(|d| with_modes(&d, alpha, p))
        .collect();
    run_ao(ch, p, cfg, &starts, Some(alpha), true, false)
}

/// A single P3 with the IRS switched off.
pub fn baseline_no_irs(ch: &ChannelSet, p: &SystemParams, cfg: &AoConfig) -> Result<AoOutcome, DriverError> {
    cfg.validate()?;
    ch.check_dims(p)?;
    let irs = IrsDesign::off(ch.n_irs());
    match evaluate(ch, p, &irs, true) {
        Ok((r, _)) => {
            let step = record(0, &r, &irs, None);
            Ok(AoOutcome {
                design: Some((r.extracted, irs)),
                history: AoHistory {
                    steps: vec![step],
                    status: AoStatus::Feasible,
                    stop: StopReason::SingleSolve,
                    start: Some(0),
                    start_failures: Vec::new(),
                    alternatives: Vec::new(),
                },
            })
        }
        Err(Failure::Model(e)) => Err(e.into()),
        Err(Failure::Other(msg)) => Ok(AoOutcome::infeasible(vec![msg])),
    }
}

/// Start 0 is the aligned all-reflect design; restarts redraw the phases.
/// With `jam_restarts` the restarts put every element in jamming mode at
/// the full budget, the only way to cover an eavesdropper with at least as
/// many antennas as the BS.
pub fn start_designs(ch: &ChannelSet, p: &SystemParams, restarts: usize, jam_restarts: bool) -> Vec<IrsDesign> {
    let m = ch.n_irs();
    let mut out = vec![initial_design(ch, p)];
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed ^ 0x5eed_a0a0_0000_0001);
    for _ in 0..restarts {
        let (amp, alpha) = if jam_restarts {
            ((p.p_irs_max / m as f64).sqrt(), 0.0)
        } else {
            ((p.p_irs_max / (2.0 * m as f64)).sqrt(), 1.0)
        };
        let phi = CVec::from_fn(m, |_, _| C64::from_polar(amp, rng.random::<f64>() * std::f64::consts::TAU));
        out.push(IrsDesign::new(phi, vec![alpha; m]));
    }
    out
}

fn with_modes(d: &IrsDesign, alpha: &[f64], p: &SystemParams) -> IrsDesign {
    // jamming elements start at the full per-element budget
    let m = d.len() as f64;
    let phi = CVec::from_fn(d.len(), |i, _| {
        if alpha[i] >= 0.5 {
            d.phi[i]
        } else {
            C64::from_polar((p.p_irs_max / m).sqrt(), d.phi[i].arg())
        }
    });
    IrsDesign::new(phi, alpha.to_vec())
}

enum Failure {
    Model(ModelError),
    Other(String),
}

/// P3 for a fixed IRS plus the end-to-end feasibility check.
fn evaluate(
    ch: &ChannelSet,
    p: &SystemParams,
    irs: &IrsDesign,
    bs_an: bool,
) -> Result<(BsSubproblemResult, f64), Failure> {
    let r = match solve_p3_with(ch, irs, p, bs_an) {
        Ok(r) => r,
        Err(BsOptError::Model(e)) => return Err(Failure::Model(e)),
        Err(e) => return Err(Failure::Other(e.to_string())),
    };
    let rep = check_feasibility(ch, &r.extracted, irs, p, FINAL_CHECK_TOL).map_err(Failure::Model)?;
    if !rep.feasible {
        return Err(Failure::Other(format!(
            "P3 design fails the model check (worst slack {:.3e})",
            rep.worst_slack()
        )));
    }
    let total = r.extracted.power() + irs.power();
    Ok((r, total))
}

fn record(tau: usize, r: &BsSubproblemResult, irs: &IrsDesign, sca: Option<&ScaOutcome>) -> AoStep {
    let bs_power = r.extracted.power();
    let irs_power = irs.power();
    let mut certificates: Vec<bool> =
        (r.solver_status == SolveStatus::Optimal).then_some(r.certificate.passed()).into_iter().collect();
    let (sca_iterations, sca_status, sca_trace, sca_points) = match sca {
        Some(o) => {
            certificates.extend(&o.certificates);
            (
                o.iterations(),
                Some(o.status),
                o.trace.iter().map(|t| t.objective_t).collect(),
                o.trace[1..].to_vec(),
            )
        }
        None => (0, None, Vec::new(), Vec::new()),
    };
    AoStep {
        tau,
        total_power: bs_power + irs_power,
        bs_power,
        irs_power,
        p3_status: r.solver_status,
        p3_iterations: r.solver_iterations,
        recovery: r.recovery,
        tightness: r.tightness.clone(),
        sca_iterations,
        sca_status,
        sca_trace,
        sca_points,
        certificates,
    }
}

fn run_ao(
    ch: &ChannelSet,
    p: &SystemParams,
    cfg: &AoConfig,
    starts: &[IrsDesign],
    frozen: Option<&[f64]>,
    bs_an: bool,
    explore: bool,
) -> Result<AoOutcome, DriverError> {
    cfg.validate()?;
    ch.check_dims(p)?;
    if let Some(a) = frozen {
        if a.len() != ch.n_irs() {
            return Err(ModelError::DimensionMismatch("frozen mode vector".into()).into());
        }
    }

    let mut failures = Vec::new();
    let mut best: Option<(usize, AoRun)> = None;
    let mut alternatives = Vec::new();
    for (i, irs) in starts.iter().enumerate() {
        let (r, total) = match evaluate(ch, p, irs, bs_an) {
            Ok(v) => v,
            Err(Failure::Model(e)) => return Err(e.into()),
            Err(Failure::Other(msg)) => {
                log::debug!("start {i}: {msg}");
                failures.push(msg);
                continue;
            }
        };
        let run = descend(ch, p, cfg, irs.clone(), r, total, frozen, bs_an)?;
        match &best {
            Some((_, b)) if b.total <= run.total => alternatives.push(run.total),
            _ => {
                if let Some((_, b)) = best.take() {
                    alternatives.push(b.total);
                }
                best = Some((i, run));
            }
        }
        if !explore {
            break;
        }
    }
    let Some((start, run)) = best else {
        return Ok(AoOutcome::infeasible(failures));
    };
    let status = match run.stop {
        StopReason::TauMax => AoStatus::NotConverged,
        _ => AoStatus::Feasible,
    };
    Ok(AoOutcome {
        design: Some((run.bs.extracted, run.irs)),
        history: AoHistory {
            steps: run.steps,
            status,
            stop: run.stop,
            start: Some(start),
            start_failures: failures,
            alternatives,
        },
    })
}

struct AoRun {
    steps: Vec<AoStep>,
    stop: StopReason,
    irs: IrsDesign,
    bs: BsSubproblemResult,
    total: f64,
}

/// The outer loop from one feasible start.
#[allow(clippy::too_many_arguments)]
fn descend(
    ch: &ChannelSet,
    p: &SystemParams,
    cfg: &AoConfig,
    mut irs: IrsDesign,
    mut bs_res: BsSubproblemResult,
    mut total: f64,
    frozen: Option<&[f64]>,
    bs_an: bool,
) -> Result<AoRun, DriverError> {
    let mut steps = vec![record(0, &bs_res, &irs, None)];
    let mut stop = StopReason::TauMax;
    for tau in 1..=cfg.tau_max {
        let sca = match sca_optimize(ch, &bs_res.extracted, p, &ScaIterate::from_design(&irs), &cfg.sca, frozen) {
            Ok(o) => o,
            Err(e) => {
                stop = StopReason::Rejected { tau, cause: format!("SCA: {e}") };
                break;
            }
        };
        let (r, next_total) = match evaluate(ch, p, &sca.design, bs_an) {
            Ok(v) => v,
            Err(Failure::Model(e)) => return Err(e.into()),
            Err(Failure::Other(msg)) => {
                stop = StopReason::Rejected { tau, cause: msg };
                break;
            }
        };
        if next_total > total {
            stop = StopReason::Rejected {
                tau,
                cause: format!("total power rose from {total:.6e} to {next_total:.6e}"),
            };
            break;
        }
        steps.push(record(tau, &r, &sca.design, Some(&sca)));
        let change = (total - next_total) / total;
        irs = sca.design;
        bs_res = r;
        total = next_total;
        if change < cfg.ao_tol {
            stop = StopReason::Converged;
            break;
        }
    }

    // A silent IRS is always admissible; keep it when it is no worse.
    let silent = IrsDesign::off(ch.n_irs());
    if irs.power() > 0.0 {
        if let Ok((r, t)) = evaluate(ch, p, &silent, bs_an) {
            if t <= total {
                steps.push(record(steps.len(), &r, &silent, None));
                irs = silent;
                bs_res = r;
                total = t;
            }
        }
    }
    Ok(AoRun {
        steps,
        stop,
        irs,
        bs: bs_res,
        total,
    })
}
