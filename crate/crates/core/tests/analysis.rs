use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hedzoc::algorithm::{AgentState, ScheduleMode};
use hedzoc::analysis::lyapunov::l2_hat;
use hedzoc::analysis::{admissible_eps3, constants, kappa1, kappa2, lyapunov, ConstantsInput};
use hedzoc::compressors::{params_for, CompressorKind};
use hedzoc::harness::{prepare, ExperimentConfig};

fn input(rho2: f64, spread: f64, ell: f64, kind: CompressorKind, p: usize, frac1: f64, frac2: f64) -> ConstantsInput {
    let spec = params_for(kind, p).unwrap();
    let eps1 = kappa1(rho2) * frac1;
    let mut inp = ConstantsInput::new(rho2 * spread, rho2, ell, spec.delta, spec.r, 1.0 / spec.r, eps1, 1.0, p, 6);
    inp.eps2 = kappa2(&inp).unwrap() * frac2;
    inp
}

#[test]
fn roster_is_complete_with_schedule_inputs() {
    let mut inp = input(1.0, 3.0, 2.0, CompressorKind::TopK { k: 2 }, 8, 1.5, 0.5);
    inp.eps4 = Some(0.01 * inp.eps2);
    inp.nu = Some(0.5);
    inp.theta = Some(0.75);
    inp.lbar = Some(1.0);
    inp.f_star = Some(0.3);
    inp.f_i_stars = Some(vec![0.1; 6]);
    let c = constants(&inp).unwrap();
    let roster = c.roster();
    assert!(roster.iter().all(|(_, v)| v.is_some()), "{roster:?}");
    let names: std::collections::HashSet<_> = roster.iter().map(|(k, _)| *k).collect();
    assert_eq!(names.len(), roster.len());
}

#[test]
fn eps3_interval_shrinks_with_a9() {
    let mut prev = admissible_eps3(1e-9);
    for a9 in [0.1, 1.0, 10.0, 100.0] {
        let (lo, hi) = admissible_eps3(a9);
        assert!(lo < hi && lo < prev.0 && hi < prev.1);
        assert!((a9 * lo * lo + lo.powi(3) - 0.25).abs() < 1e-10);
        assert!((a9 * hi * hi + hi.powi(3) - 0.75).abs() < 1e-10);
        prev = (lo, hi);
    }
}

#[test]
fn lyapunov_components_on_a_run() {
    let mut cfg = ExperimentConfig::with_horizon(300);
    cfg.schedule.mode = ScheduleMode::Nonconvex;
    cfg.schedule.eps1 = Some(0.5);
    cfg.schedule.eps2 = Some(0.1);
    cfg.schedule.eps3 = Some(0.5);
    cfg.output.record_lyapunov = true;
    cfg.output.log_every = 10;
    let tr = prepare(&cfg).unwrap().run(None).unwrap();
    for r in &tr.records {
        let l = r.lyapunov.unwrap();
        assert!(l.e1 >= 0.0 && l.e2 >= 0.0 && l.e4 >= -1e-12 && l.e5 >= 0.0);
        assert!((l.l1() - l.l2() - l.e4).abs() <= 1e-12 * l.l1().abs().max(1.0));
        // e1 is half the summed consensus error
        assert!((l.e1 - 0.5 * 10.0 * r.consensus_err).abs() <= 1e-9 * l.e1.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn positivity_chain(
        rho2 in 0.1f64..5.0,
        spread in 1.0f64..10.0,
        ell in 1.0f64..10.0,
        p in 1usize..100,
        which in 0usize..4,
        frac1 in 1.001f64..4.0,
        frac2 in 0.001f64..0.999,
    ) {
        let kind = match which {
            0 => CompressorKind::Identity,
            1 => CompressorKind::Quantizer { bits: 3 },
            2 => CompressorKind::TopK { k: p.div_ceil(2) },
            _ => CompressorKind::RandK { k: 1 },
        };
        let inp = input(rho2, spread, ell, kind, p, frac1, frac2);
        let c = constants(&inp).unwrap();
        prop_assert!(c.admissible(&inp));
        prop_assert!(c.a1 > 0.0 && c.a2 > 0.0 && c.a3 > 0.0);
        prop_assert!(c.d1 > 0.0 && c.d1t > 0.0 && c.d1t <= 1.0);
        prop_assert!(c.ve7 > 0.0 && c.ve7 < 0.5);
        prop_assert!(c.kappa2 <= 8.0 && c.kappa2 > 0.0);
        prop_assert!(c.kappa3_lo < c.kappa3_hi);
    }

    #[test]
    fn l2_lower_bound(seed in any::<u64>(), frac1 in 1.01f64..3.0) {
        // ℒ₂ ≥ ε₇ (‖x‖²_E + ‖w‖²_F + ‖x − y‖²) for arbitrary states
        let mut cfg = ExperimentConfig::with_horizon(10);
        cfg.problem.n = 5;
        cfg.problem.p = 4;
        cfg.graph.seed = seed;
        cfg.problem.seed = seed;
        let probe = prepare(&cfg).unwrap();
        let eps1 = frac1 * kappa1(probe.mix.spectrum.rho2);
        cfg.schedule.eps1 = Some(eps1);
        let exp = prepare(&cfg).unwrap();
        let c = exp.constants.clone().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states: Vec<AgentState> = (0..5)
            .map(|_| {
                let mut s = AgentState::new(hedzoc::estimators::sample_unit_sphere(4, &mut rng) * 3.0);
                s.v = hedzoc::estimators::sample_unit_sphere(4, &mut rng);
                s.y = hedzoc::estimators::sample_unit_sphere(4, &mut rng);
                s
            })
            .collect();
        // dual iterates always sum to zero
        let vbar = states.iter().fold(DVector::zeros(4), |a, s| a + &s.v) / 5.0;
        let states: Vec<AgentState> = states.into_iter().map(|mut s| { s.v -= &vbar; s }).collect();
        let (beta, gamma) = (exp.schedule.beta(0), exp.schedule.gamma(0));
        let l = lyapunov(&states, &exp.mix, &exp.family, beta, gamma);
        let hat = l2_hat(&states, &exp.mix, &exp.family, gamma);
        prop_assert!(l.l2() >= c.ve7 * hat * (1.0 - 1e-9), "{} < {} * {}", l.l2(), c.ve7, hat);
    }
}
