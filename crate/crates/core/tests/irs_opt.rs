mod common;

use airsec_conic::{embed_hermitian, svec::smat, Cone};
use airsec_core::bs_opt::{leakage_margin, solve_p3};
use airsec_core::irs_opt::*;
use airsec_core::linalg::outer;
use airsec_core::sysmodel::*;
use airsec_core::{CMat, CVec, C64};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn reflect_design(p: &SystemParams, m: usize, phase_step: f64) -> IrsDesign {
    let amp = (p.p_irs_max / (2.0 * m as f64)).sqrt();
    let phi = CVec::from_fn(m, |i, _| C64::from_polar(amp, phase_step * i as f64));
    IrsDesign::new(phi, vec![1.0; m])
}

fn jam_design(p: &SystemParams, m: usize) -> IrsDesign {
    let amp = (p.p_irs_max / m as f64).sqrt();
    let phi = CVec::from_fn(m, |i, _| C64::from_polar(amp, 0.9 * i as f64));
    IrsDesign::new(phi, vec![0.0; m])
}

fn slack(prob: &airsec_conic::ConicProblem, x: &[f64]) -> Vec<f64> {
    let mut s = prob.h.clone();
    prob.g.mul_acc(-1.0, x, &mut s);
    s
}

#[test]
fn svd_split_of_zero_is_zero() {
    let mut r = rng(1);
    let g = CMat::from_fn(6, 4, |_, _| cgauss(&mut r));
    let pairs = svd_split(&g, &CMat::zeros(4, 4));
    assert_eq!(pairs.len(), 6);
    assert!(pairs.iter().all(|(p, _)| p.norm() == 0.0));
}

#[test]
fn svd_split_reconstructs_random_product() {
    let mut r = rng(2);
    for _ in 0..20 {
        let g = CMat::from_fn(4, 4, |_, _| cgauss(&mut r));
        let b = random_psd(&mut r, 4, 1.0) * C64::new(2.03, 0.0) - random_psd(&mut r, 4, 1.0);
        let direct = &g * &b * g.adjoint();
        let sum = svd_split(&g, &b)
            .iter()
            .fold(CMat::zeros(4, 4), |acc, (p, q)| acc + p * q.adjoint());
        assert!((sum - &direct).norm() <= 1e-10 * direct.norm().max(1.0));
    }
}

#[test]
fn svd_split_of_rank_one_has_one_factor() {
    let mut r = rng(3);
    let g = CMat::from_fn(8, 4, |_, _| cgauss(&mut r));
    let w = random_vec(&mut r, 4, 1.0);
    let pairs = svd_split(&g, &(-outer(&w, &w)));
    let norms: Vec<f64> = pairs.iter().map(|(p, _)| p.norm()).collect();
    let top = norms.iter().cloned().fold(0.0, f64::max);
    assert!(top > 0.0);
    assert_eq!(norms.iter().filter(|&&n| n > 1e-12 * top).count(), 1);
}

#[test]
fn alpha_minorant_example() {
    let it = ScaIterate::from_design(&IrsDesign::new(CVec::zeros(1), vec![0.5]));
    let tb = taylor_bounds(&it);
    let bound = tb.alpha[0].eval(0.7);
    assert!((bound - 0.45).abs() < 1e-15);
    assert!(bound <= 0.49);
}

#[test]
fn minorants_are_tight_at_the_anchor() {
    let mut r = rng(4);
    for _ in 0..50 {
        let d = random_irs(&mut r, 6, 0.01);
        let mut it = ScaIterate::from_design(&d);
        it.alpha_t = (0..6).map(|_| r.random_range(0.0..1.0)).collect();
        let tb = taylor_bounds(&it);
        for (m, a) in it.alpha_t.iter().enumerate() {
            assert!((tb.alpha[m].eval(*a) - a * a).abs() <= 1e-12);
        }
        assert!((tb.theta.eval(&it.phi_t) - it.phi_t.norm_squared()).abs() <= 1e-12);
        assert!((tb.u.eval(&it.u_t) - it.u_t.norm_squared()).abs() <= 1e-12);
    }
}

fn cvec_strategy(n: usize) -> impl Strategy<Value = CVec> {
    proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), n)
        .prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn minorants_bound_from_below(
        a0 in 0.0f64..1.0, a1 in -2.0f64..2.0,
        th0 in cvec_strategy(5), th1 in cvec_strategy(5),
        u0 in cvec_strategy(5), u1 in cvec_strategy(5),
    ) {
        let mut it = ScaIterate::from_design(&IrsDesign::new(th0, vec![1.0; 5]));
        it.u_t = u0;
        it.alpha_t = vec![a0; 5];
        let tb = taylor_bounds(&it);
        prop_assert!(tb.alpha[0].eval(a1) <= a1 * a1 + 1e-12);
        prop_assert!(tb.theta.eval(&th1) <= th1.norm_squared() * (1.0 + 1e-12) + 1e-12);
        prop_assert!(tb.u.eval(&u1) <= u1.norm_squared() * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn round_modes_thresholds_at_half() {
    let phi = CVec::from_element(3, C64::new(0.1, -0.2));
    let d = round_modes(&[0.98, 0.01, 0.5], &phi);
    assert_eq!(d.alpha, vec![1.0, 0.0, 1.0]);
    assert_eq!(d.u()[0], phi[0].conj());
    assert_eq!(d.u()[1], C64::new(0.0, 0.0));
}

#[test]
fn leakage_block_matches_model_lmi() {
    let (p, ch) = desk_instance(0);
    let mut r = rng(5);
    let bs = random_bs(&mut r, p.n_tx, p.n_users);
    let anchor = random_irs(&mut r, p.n_irs, p.p_irs_max);
    let it = ScaIterate::from_design(&anchor);
    let prob = build_p5(&ch, &bs, &p, &it).unwrap();
    let scale = p5_power_scale(&p, &it);
    let offs = prob.cone_offsets();
    // the builder stores each block times a positive normalizer, fixed per block
    let mut factor: Vec<Option<f64>> = vec![None; p.n_users];
    for trial in 0..3 {
        // any binary-consistent point, not only the anchor
        let d = if trial == 0 { anchor.clone() } else { random_irs(&mut r, p.n_irs, p.p_irs_max) };
        let s = slack(&prob, &encode_iterate(&prob, &ScaIterate::from_design(&d), scale));
        let blocks: Vec<nalgebra::DMatrix<f64>> = prob
            .cones
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Cone::Psd { side } if *side == 2 * p.n_eve))
            .map(|(i, c)| smat(&s[offs[i]..offs[i] + c.dim()], 2 * p.n_eve))
            .collect();
        assert_eq!(blocks.len(), p.n_users);
        for (k, blk) in blocks.iter().enumerate() {
            let lmi = leakage_lmi(&ch, &bs, &d, &p, k).unwrap()
                - CMat::identity(p.n_eve, p.n_eve) * C64::new(leakage_margin(&ch), 0.0);
            let want = embed_hermitian(&lmi).unwrap();
            let f = *factor[k].get_or_insert_with(|| blk.dot(&want) / want.dot(&want));
            assert!(f > 0.0);
            let got = blk / f;
            assert!(
                (&got - &want).amax() <= 1e-8 * want.amax(),
                "k = {k}: {:e}",
                (&got - &want).amax() / want.amax()
            );
        }
    }
}

#[test]
fn rate_rows_match_model_at_binary_points() {
    let (p, ch) = desk_instance(1);
    let mut r = rng(6);
    let bs = random_bs(&mut r, p.n_tx, p.n_users);
    let anchor = random_irs(&mut r, p.n_irs, p.p_irs_max);
    let it = ScaIterate::from_design(&anchor);
    let prob = build_p5(&ch, &bs, &p, &it).unwrap();
    let scale = p5_power_scale(&p, &it);
    let mut ratios = vec![Vec::new(); p.n_users];
    for _ in 0..4 {
        let d = random_irs(&mut r, p.n_irs, p.p_irs_max);
        let s = slack(&prob, &encode_iterate(&prob, &ScaIterate::from_design(&d), scale));
        let eff = effective_channels(&ch, &bs, &d, &p).unwrap();
        for k in 0..p.n_users {
            let mu = eff.mu[k] + irs_user_noise(&ch, &d, p.noise_irs, k);
            let watts = eff.h_eq[k].dotc(&bs.w[k]).norm_sqr() - p.gamma_min[k] * mu;
            ratios[k].push(s[k] / watts);
        }
    }
    // each row is the model's SINR margin in watts times a fixed positive factor
    for rk in &ratios {
        assert!(rk[0] > 0.0);
        for v in rk {
            assert!((v / rk[0] - 1.0).abs() < 1e-7, "{rk:?}");
        }
    }
}

#[test]
fn budget_row_reads_irs_power_limit() {
    let (p, ch) = desk_instance(2);
    assert_eq!(p.p_irs_max, 0.01);
    let mut r = rng(7);
    let bs = random_bs(&mut r, p.n_tx, p.n_users);
    let it = ScaIterate::from_design(&reflect_design(&p, p.n_irs, 0.3));
    let prob = build_p5(&ch, &bs, &p, &it).unwrap();
    let scale = p5_power_scale(&p, &it);
    // a point using exactly the budget sits on the boundary of the C5 row
    let on = reflect_design(&p, p.n_irs, 0.1);
    let full = IrsDesign::new(&on.phi * C64::new(2f64.sqrt(), 0.0), on.alpha.clone());
    assert!((full.power() - 0.01).abs() < 1e-15);
    let s_full = slack(&prob, &encode_iterate(&prob, &ScaIterate::from_design(&full), scale));
    let half = IrsDesign::new(&full.phi * C64::new(0.5f64.sqrt(), 0.0), full.alpha.clone());
    let s_half = slack(&prob, &encode_iterate(&prob, &ScaIterate::from_design(&half), scale));
    let over = IrsDesign::new(&full.phi * C64::new(1.01, 0.0), full.alpha.clone());
    let s_over = slack(&prob, &encode_iterate(&prob, &ScaIterate::from_design(&over), scale));
    // the C5 row is the one that is zero at the full budget and proportional to
    // the unused power elsewhere
    let idx = (0..s_full.len())
        .find(|&i| s_full[i].abs() < 1e-12 && s_half[i] > 0.0 && (s_over[i] / s_half[i] + 0.0402).abs() < 1e-6)
        .expect("C5 row");
    assert!(s_over[idx] < 0.0);
}

#[test]
fn jamming_only_modes_force_u_to_zero() {
    let (p, ch) = desk_instance(3);
    let irs = jam_design(&p, p.n_irs);
    let r3 = solve_p3(&ch, &irs, &p);
    let bs = match r3 {
        Ok(r) => r.extracted,
        Err(_) => solve_p3(&ch, &IrsDesign::off(p.n_irs), &p).unwrap().extracted,
    };
    let it = ScaIterate::from_design(&irs);
    let opts = P5Options {
        frozen_alpha: Some(vec![0.0; p.n_irs]),
        power_scale: Some(p5_power_scale(&p, &it)),
    };
    let (next, _) = solve_p5(&ch, &bs, &p, &it, &ScaConfig::default(), &opts).unwrap();
    assert!(next.u_t.camax() <= 1e-8, "{:e}", next.u_t.camax());
}

#[test]
fn all_reflect_anchor_keeps_surrogate_feasible() {
    let (p, ch) = desk_instance(4);
    let irs = initial_design(&ch, &p);
    let bs = solve_p3(&ch, &irs, &p).unwrap().extracted;
    let it = ScaIterate::from_design(&irs);
    let opts = P5Options {
        frozen_alpha: Some(vec![1.0; p.n_irs]),
        power_scale: Some(p5_power_scale(&p, &it)),
    };
    let (next, sol) = solve_p5(&ch, &bs, &p, &it, &ScaConfig::default(), &opts).unwrap();
    assert!(sol.is_usable());
    assert!((&next.u_t - next.phi_t.map(|z| z.conj())).camax() <= 1e-8);
}

#[test]
fn initial_design_spends_half_the_budget_on_reflection() {
    let (p, ch) = desk_instance(5);
    let d = initial_design(&ch, &p);
    assert!(d.alpha.iter().all(|&a| a == 1.0));
    assert!((d.power() - p.p_irs_max / 2.0).abs() < 1e-15);
    // cascaded terms add in phase with the direct path of user 1
    let w = &ch.h_bu[0] / C64::new(ch.h_bu[0].norm(), 0.0);
    let gw = &ch.g * &w;
    for m in 0..p.n_irs {
        let term = d.phi[m] * ch.h_iu[0][m].conj() * gw[m];
        assert!(term.arg().abs() < 1e-9);
    }
}

struct Run {
    outcome: ScaOutcome,
}

fn run_sca(p: &SystemParams, ch: &ChannelSet, irs: &IrsDesign, cfg: &ScaConfig) -> Run {
    let bs = solve_p3(ch, irs, p).unwrap().extracted;
    let outcome = sca_optimize(ch, &bs, p, &ScaIterate::from_design(irs), cfg, None).unwrap();
    Run { outcome }
}

#[test]
fn merit_trace_is_monotone_and_lifts_close() {
    let mut pe = SystemParams::desk_defaults();
    pe.n_eve = 5;
    for seed in [0u64, 1] {
        let ch = generate_channels(&pe, seed).unwrap();
        let run = run_sca(&pe, &ch, &jam_design(&pe, pe.n_irs), &ScaConfig::default());
        let tr: Vec<f64> = run.outcome.trace.iter().map(|t| t.objective_t).collect();
        for w in tr.windows(2) {
            assert!(w[1] <= w[0] + 1e-6 * w[0], "{tr:?}");
        }
        assert!(tr.last().unwrap() < &tr[0]);
        for t in &run.outcome.trace[1..] {
            assert!(t.phi_gap() <= 1e-6 && t.u_gap() <= 1e-6);
            assert!(t.alpha_t.iter().all(|a| (0.0..=1.0).contains(a)));
            // Big-M semantics
            for m in 0..pe.n_irs {
                if t.alpha_t[m] < 0.5 {
                    assert!(t.u_t[m].norm() <= 1e-6);
                } else {
                    assert!((t.u_t[m] - t.phi_t[m].conj()).norm() <= 1e-4);
                }
            }
        }
        if run.outcome.status == ScaStatus::Converged {
            let binary = run
                .outcome
                .pre_round_alpha
                .iter()
                .filter(|a| a.min(1.0 - **a) <= 1e-3)
                .count();
            assert!(binary as f64 >= 0.95 * pe.n_irs as f64);
        }
    }
}

#[test]
fn single_pass_matches_one_surrogate_solve() {
    let (p, ch) = desk_instance(6);
    let irs = initial_design(&ch, &p);
    let bs = solve_p3(&ch, &irs, &p).unwrap().extracted;
    let init = ScaIterate::from_design(&irs);
    let cfg = ScaConfig {
        t_max: 1,
        validation_tol: 1.0,
        ..ScaConfig::default()
    };
    let out = sca_optimize(&ch, &bs, &p, &init, &cfg, None).unwrap();
    assert_eq!(out.iterations(), 1);
    let opts = P5Options {
        frozen_alpha: None,
        power_scale: Some(p5_power_scale(&p, &init)),
    };
    let (direct, _) = solve_p5(&ch, &bs, &p, &init, &cfg, &opts).unwrap();
    assert_eq!(out.trace[1].phi_t, direct.phi_t);
    assert_eq!(out.pre_round_alpha, direct.alpha_t);
}

#[test]
fn rounded_output_is_binary_and_within_budget() {
    let (p, ch) = desk_instance(7);
    let irs = initial_design(&ch, &p);
    let run = run_sca(&p, &ch, &irs, &ScaConfig::default());
    let d = &run.outcome.design;
    assert!(d.alpha.iter().all(|&a| a == 0.0 || a == 1.0));
    assert!(d.power() <= p.p_irs_max + 1e-8);
    let bs = solve_p3(&ch, d, &p).unwrap().extracted;
    assert!(check_feasibility(&ch, &bs, d, &p, 1e-5).unwrap().feasible);
}

#[test]
fn mismatched_iterate_is_rejected() {
    let (p, ch) = desk_instance(8);
    let mut r = rng(9);
    let bs = random_bs(&mut r, p.n_tx, p.n_users);
    let it = ScaIterate::from_design(&IrsDesign::off(p.n_irs - 1));
    assert!(matches!(build_p5(&ch, &bs, &p, &it), Err(IrsOptError::Model(_))));
}
