use std::path::PathBuf;
use std::process::ExitCode;

use airsec_core::driver::AoConfig;
use airsec_core::sysmodel::{generate_channels, watts_to_dbm, SystemParams};
use airsec_harness::spec::{parse_schemes, ExperimentSpec};
use airsec_harness::verify::verify_proposition1_with;
use airsec_harness::{emit_report, exhaustive_mode_oracle, run_sweep, verify_minorants, verify_sinr};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "airsec", version, about = "Secure downlink power minimization with a multifunctional active IRS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML, powers in dBm) or a resolved JSON config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write results.csv, records.json and
    /// resolved_config.json.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of proposed, all_reflect, no_irs.
        #[arg(long, value_delimiter = ',')]
        scheme: Option<Vec<String>>,
    },
    /// Run the randomized oracle suites; exits with status 2 on failure.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Instances for the SINR cross-check.
        #[arg(long, default_value_t = 10)]
        sinr_instances: usize,
        #[arg(long, default_value_t = 100_000)]
        sinr_samples: usize,
    },
    /// Exhaustive mode search on one channel draw (M at most 10).
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Number of IRS elements, overriding the config.
        #[arg(long)]
        n_irs: Option<usize>,
    },
}

fn load_spec(path: Option<&PathBuf>) -> Result<Option<ExperimentSpec>> {
    path.map(|p| ExperimentSpec::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn sweep(common: &Common, scheme: Option<&[String]>) -> Result<ExitCode> {
    let Some(mut spec) = load_spec(common.config.as_ref())? else {
        bail!("sweep needs --config");
    };
    if let Some(s) = common.seed {
        spec.seed_base = s;
    }
    if let Some(o) = &common.out {
        spec.out_dir = o.clone();
    }
    if let Some(names) = scheme {
        spec.schemes = parse_schemes(names)?;
    }
    spec.validate()?;
    let records = pool(common.jobs)?.install(|| run_sweep(&spec))?;
    let paths = emit_report(&records, &spec, &spec.out_dir)?;
    for row in airsec_harness::aggregate(&records, &spec) {
        println!(
            "{} = {:<6} {:<12} {:>9} dBm  feasible {:5.1}%  common {}",
            spec.sweep.name(),
            row.sweep_value,
            row.scheme,
            row.avg_power_dbm.map_or("-".into(), |d| format!("{d:.2}")),
            row.feasibility_pct,
            row.n_common_feasible
        );
    }
    println!("wrote {}", paths.csv.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(common: &Common, trials: usize, sinr_instances: usize, sinr_samples: usize) -> Result<ExitCode> {
    let seed = common.seed.unwrap_or(0);
    let p = load_spec(common.config.as_ref())?.map_or_else(SystemParams::desk_defaults, |s| s.base);
    let pool = pool(common.jobs)?;
    let (prop1, (minorants, sinr)) = pool.install(|| {
        rayon::join(
            || verify_proposition1_with(&p, trials, seed),
            || (verify_minorants(trials, p.n_irs, seed), verify_sinr(sinr_instances, sinr_samples, seed)),
        )
    });
    let (prop1, sinr) = (prop1?, sinr?);
    let checks = [
        (
            "leakage LMI equivalence",
            prop1.passed(),
            format!(
                "{}/{} agree, {} in band, form gap {:.1e}",
                prop1.agreements,
                prop1.trials - prop1.excluded,
                prop1.excluded,
                prop1.max_form_gap
            ),
        ),
        (
            "SCA minorants",
            minorants.passed(1e-12),
            format!("{} pairs, anchor gap {:.1e}", minorants.pairs, minorants.max_anchor_gap),
        ),
        (
            "SINR cross-check",
            sinr.passed(3.0),
            format!("{} instances, max |z| {:.2}", sinr.cases.len(), sinr.max_abs_z()),
        ),
    ];
    for (name, ok, detail) in &checks {
        println!("{} {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
    }
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        let body = serde_json::json!({ "leakage_lmi": prop1, "minorants": minorants, "sinr": sinr });
        std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&body)?)?;
    }
    Ok(if checks.iter().all(|c| c.1) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn oracle(common: &Common, n_irs: Option<usize>) -> Result<ExitCode> {
    let (mut p, cfg) = match load_spec(common.config.as_ref())? {
        Some(s) => (s.sweep.apply(&s.base, 0), s.ao),
        None => (
            SystemParams {
                n_irs: 4,
                ..SystemParams::desk_defaults()
            },
            AoConfig::default(),
        ),
    };
    if let Some(m) = n_irs {
        p.n_irs = m;
    }
    p.rng_seed = common.seed.unwrap_or(0);
    p.validate()?;
    let ch = generate_channels(&p, p.rng_seed)?;
    let res = pool(common.jobs)?.install(|| exhaustive_mode_oracle(&ch, &p, &cfg))?;
    for pat in &res.patterns {
        let modes: String = pat.alpha.iter().map(|&a| if a == 1.0 { 'R' } else { 'J' }).collect();
        match pat.power {
            Some(w) => println!("{modes}  {:.3} dBm", watts_to_dbm(w)),
            None => println!("{modes}  infeasible"),
        }
    }
    match res.best_power() {
        Some(w) => println!("best: {:.3} dBm", watts_to_dbm(w)),
        None => println!("no feasible pattern"),
    }
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("oracle.json"), serde_json::to_string_pretty(&res)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Sweep { common, scheme } => sweep(&common, scheme.as_deref()),
        Command::Verify {
            common,
            trials,
            sinr_instances,
            sinr_samples,
        } => verify(&common, trials, sinr_instances, sinr_samples),
        Command::Oracle { common, n_irs } => oracle(&common, n_irs),
    }
}
