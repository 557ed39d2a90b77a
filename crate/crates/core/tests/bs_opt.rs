mod common;

use airsec_conic::{Cone, SolveStatus};
use airsec_core::bs_opt::{build_p3, extract_rank_one, recover_precoders, solve_p3, BsOptError, RecoveryPath};
use airsec_core::linalg::{min_eig, outer, trace_re};
use airsec_core::sysmodel::{
    check_feasibility, eve_capacity, generate_channels, leakage_lmi, IrsDesign, SystemParams,
};
use airsec_core::{CMat, CVec, C64};
use common::{desk_instance, random_bs, random_irs, random_vec, rng};

fn aligned_irs(p: &SystemParams, alpha: f64) -> IrsDesign {
    let m = p.n_irs;
    let amp = (p.p_irs_max / (2.0 * m as f64)).sqrt();
    IrsDesign::new(CVec::from_element(m, C64::new(amp, 0.0)), vec![alpha; m])
}

#[test]
fn two_users_give_two_rate_rows_two_leakage_lmis_three_psd_blocks() {
    let (p, ch) = desk_instance(1);
    let prob = build_p3(&ch, &IrsDesign::off(p.n_irs), &p).unwrap();
    let n_t = p.n_tx;
    assert_eq!(prob.cones[0], Cone::NonNeg { dim: 2 });
    let lmis = prob.cones.iter().filter(|c| **c == Cone::Psd { side: 2 * p.n_eve }).count();
    let vars = prob.cones.iter().filter(|c| **c == Cone::Psd { side: 2 * n_t }).count();
    assert_eq!((lmis, vars, prob.cones.len()), (2, 3, 6));
    assert_eq!(prob.num_vars(), 3 * n_t * n_t);
}

#[test]
fn irs_over_budget_is_rejected() {
    let (p, ch) = desk_instance(1);
    let m = p.n_irs;
    let irs = IrsDesign::new(CVec::from_element(m, C64::new(1.0, 0.0)), vec![1.0; m]);
    assert!(matches!(build_p3(&ch, &irs, &p), Err(BsOptError::Model(_))));
}

#[test]
fn no_irs_solution_passes_the_model_feasibility_check() {
    for seed in 0..5 {
        let (p, ch) = desk_instance(seed);
        let irs = IrsDesign::off(p.n_irs);
        let r = solve_p3(&ch, &irs, &p).unwrap();
        let rep = check_feasibility(&ch, &r.extracted, &irs, &p, 1e-5).unwrap();
        assert!(rep.feasible, "seed {seed}: {rep:?}");
        assert!((r.extracted.power() - r.objective).abs() <= 1e-6 * r.objective);
    }
}

#[test]
fn relaxation_is_tight_on_desk_instances() {
    for seed in 0..10 {
        let (p, ch) = desk_instance(seed);
        for irs in [aligned_irs(&p, 1.0), aligned_irs(&p, 0.0)] {
            let r = solve_p3(&ch, &irs, &p).unwrap();
            assert_eq!(r.recovery, RecoveryPath::Eigen);
            for (k, g) in r.tightness.iter().enumerate() {
                assert!(*g <= 1e-6, "seed {seed} user {k}: λ2/λ1 = {g:e}");
            }
            for w in r.w_mats.iter().chain([&r.z_b]) {
                assert!(min_eig(w) >= -1e-8 * r.objective);
            }
            for (w, wm) in r.extracted.w.iter().zip(&r.w_mats) {
                let tr = trace_re(wm);
                assert!((w.norm_squared() - tr).abs() <= 1e-6 * tr);
            }
        }
    }
}

#[test]
fn optimum_is_monotone_in_the_rate_target() {
    for seed in 0..4 {
        let mut last = 0.0;
        for db in [0.0, 4.0, 8.0] {
            let p = SystemParams::desk_defaults().with_gamma_min_db(db);
            let ch = generate_channels(&p, seed).unwrap();
            let r = solve_p3(&ch, &IrsDesign::off(p.n_irs), &p).unwrap();
            assert!(r.objective >= last * (1.0 - 1e-7), "seed {seed} at {db} dB");
            last = r.objective;
        }
    }
}

#[test]
fn duplicate_users_split_power_evenly() {
    let p = SystemParams::desk_defaults().with_gamma_min_db(-3.0);
    let mut ch = generate_channels(&p, 3).unwrap();
    ch.h_bu[1] = ch.h_bu[0].clone();
    ch.h_iu[1] = ch.h_iu[0].clone();
    let r = solve_p3(&ch, &IrsDesign::off(p.n_irs), &p).unwrap();
    let (t1, t2) = (trace_re(&r.w_mats[0]), trace_re(&r.w_mats[1]));
    assert!((t1 - t2).abs() <= 1e-5 * r.objective, "{t1} vs {t2}");
}

#[test]
fn targets_above_the_leakage_tolerance_are_infeasible_without_jamming() {
    // N_E > N_T: Eve sees every BS direction, so SINR < C_tol without IRS help.
    let mut p = SystemParams::desk_defaults();
    p.n_eve = 5;
    let c_tol = p.c_tol(0);
    let p_hi = p.clone().with_gamma_min_db(10.0 * (1.01 * c_tol).log10());
    for seed in 0..3 {
        let ch = generate_channels(&p_hi, seed).unwrap();
        let err = solve_p3(&ch, &IrsDesign::off(p.n_irs), &p_hi).unwrap_err();
        assert!(err.is_infeasible(), "seed {seed}: {err:?}");
        assert_eq!(err, BsOptError::Solver(SolveStatus::PrimalInfeasible));
    }
    // The default 4 dB target already exceeds C_tol.
    let p_def = p.with_gamma_min_db(4.0);
    for seed in 0..3 {
        let ch = generate_channels(&p_def, seed).unwrap();
        let err = solve_p3(&ch, &IrsDesign::off(p_def.n_irs), &p_def).unwrap_err();
        assert!(err.is_infeasible(), "seed {seed}: {err:?}");
    }
}

#[test]
fn exact_rank_one_is_recovered_up_to_phase() {
    let mut r = rng(5);
    let v = random_vec(&mut r, 4, 1.0);
    let out = extract_rank_one(&outer(&v, &v));
    assert!(out.gap < 1e-14);
    let phase = out.w.dotc(&v);
    let aligned = &out.w * (phase / phase.norm());
    assert!((aligned - &v).norm() < 1e-10 * v.norm());
}

#[test]
fn near_rank_one_reports_the_gap() {
    let w = CMat::from_diagonal(&CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(1e-9, 0.0)]));
    let out = extract_rank_one(&w);
    assert!((out.gap - 1e-9).abs() < 1e-20);
    assert!((out.w[0].norm() - 1.0).abs() < 1e-12 && out.w[1].norm() == 0.0);
}

#[test]
fn randomization_recovers_a_feasible_design_from_a_rank_two_relaxation() {
    let (p, ch) = desk_instance(2);
    let irs = IrsDesign::off(p.n_irs);
    let r = solve_p3(&ch, &irs, &p).unwrap();
    // Spread a quarter of each W_k onto an orthogonal direction.
    let w_mats: Vec<CMat> = r
        .w_mats
        .iter()
        .map(|w| {
            let v = extract_rank_one(w).w;
            let mut perp = CVec::from_fn(v.len(), |i, _| C64::new(i as f64 + 1.0, 0.5));
            perp -= &v * (v.dotc(&perp) / v.norm_squared());
            perp *= C64::new(v.norm() * 0.5 / perp.norm(), 0.0);
            outer(&v, &v) * C64::new(0.75, 0.0) + outer(&perp, &perp)
        })
        .collect();
    let (bs, path) = recover_precoders(&ch, &irs, &p, &w_mats, &r.z_b).unwrap();
    assert!(matches!(path, RecoveryPath::Randomized { .. }), "{path:?}");
    let rep = check_feasibility(&ch, &bs, &irs, &p, 1e-5).unwrap();
    assert!(rep.feasible, "{rep:?}");
}

#[test]
fn leakage_lmi_agrees_with_log_det_constraint() {
    let (p, ch) = desk_instance(11);
    let mut r = rng(77);
    let (mut inside, mut outside) = (0, 0);
    for _ in 0..1000 {
        let bs = random_bs(&mut r, p.n_tx, p.n_users);
        let irs = random_irs(&mut r, p.n_irs, p.p_irs_max);
        for k in 0..p.n_users {
            let ce = eve_capacity(&ch, &bs, &irs, &p, k).unwrap();
            if (ce - p.c_max[k]).abs() < 1e-9 {
                continue;
            }
            let lmi = leakage_lmi(&ch, &bs, &irs, &p, k).unwrap();
            let psd = min_eig(&lmi) >= -1e-13 * lmi.norm();
            assert_eq!(ce <= p.c_max[k], psd, "C_E = {ce}");
            if psd {
                inside += 1;
            } else {
                outside += 1;
            }
        }
    }
    assert!(inside > 100 && outside > 100, "{inside} / {outside}");
}
