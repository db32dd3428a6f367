use nalgebra::DVector;
use proptest::prelude::*;

use hedzoc::algorithm::{drive, run, RunOptions, Simulation, Stepper, UncompressedSimulation};
use hedzoc::harness::{prepare, Experiment, ExperimentConfig};

fn experiment(compressor: &str, n: usize, p: usize, t: u64, seed: u64) -> Experiment {
    let mut cfg = ExperimentConfig::with_horizon(t);
    cfg.problem.n = n;
    cfg.problem.p = p;
    cfg.problem.seed = seed;
    cfg.graph.seed = seed;
    cfg.seed = seed;
    cfg.compressor = compressor.to_string();
    cfg.schedule.eps1 = Some(0.5);
    cfg.schedule.eps2 = Some(0.1);
    cfg.schedule.eps3 = Some(0.5);
    prepare(&cfg).unwrap()
}

#[test]
fn identity_matches_uncompressed_runner_to_rounding() {
    let exp = experiment("identity", 8, 10, 200, 3);
    let opts = RunOptions::new(200);
    let mut a = Simulation::new(&exp.family, &exp.mix, exp.spec, &exp.schedule, exp.sim_config()).unwrap();
    let ta = drive(&mut a, &exp.family, &exp.mix, &exp.schedule, opts);
    let mut b = UncompressedSimulation::new(&exp.family, &exp.mix, &exp.schedule, exp.sim_config()).unwrap();
    let tb = drive(&mut b, &exp.family, &exp.mix, &exp.schedule, opts);
    assert_eq!(ta.records.len(), tb.records.len());
    for (x, y) in ta.records.iter().zip(&tb.records) {
        assert_eq!((x.k, x.bits_cum, x.fn_evals_cum), (y.k, y.bits_cum, y.fn_evals_cum));
        for (u, v) in [(x.grad_norm_sq, y.grad_norm_sq), (x.consensus_err, y.consensus_err), (x.opt_gap, y.opt_gap)] {
            assert!((u - v).abs() <= 1e-10 * v.abs().max(1e-12), "{u} vs {v} at k = {}", x.k);
        }
    }
}

#[test]
fn parallel_rounds_match_sequential() {
    let exp = experiment("randk:3", 6, 8, 50, 9);
    let mut cfg = exp.sim_config();
    let seq = run(&exp.family, &exp.mix, exp.spec, &exp.schedule, cfg, RunOptions::new(50)).unwrap();
    cfg.parallel = true;
    let par = run(&exp.family, &exp.mix, exp.spec, &exp.schedule, cfg, RunOptions::new(50)).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn broadcast_bits() {
    let exp = experiment("topk:8", 10, 64, 5, 1);
    let tr = exp.run(None).unwrap();
    for r in &tr.records[..5] {
        assert_eq!(r.bits_cum, 5120 * (r.k + 1));
        assert_eq!(r.fn_evals_cum, 20 * (r.k + 1));
    }
    assert_eq!(tr.total_bits, 5 * 5120);
}

#[test]
fn per_edge_bits() {
    let mut cfg = ExperimentConfig::with_horizon(3);
    cfg.graph.topology = hedzoc::harness::Topology::Ring;
    cfg.problem.n = 5;
    cfg.compressor = "topk:2".into();
    cfg.bit_accounting = hedzoc::algorithm::BitAccounting::PerEdge;
    let tr = prepare(&cfg).unwrap().run(None).unwrap();
    // a 5-ring has 5 edges, i.e. 10 directed transmissions of 128 bits
    assert_eq!(tr.total_bits, 3 * 10 * 128);
}

#[test]
fn stride_and_terminal_row() {
    let mut exp = experiment("normsign", 4, 6, 1000, 2);
    exp.config.output.log_every = 100;
    let tr = exp.run(None).unwrap();
    let ks: Vec<u64> = tr.records.iter().map(|r| r.k).collect();
    assert_eq!(ks, (0..=10).map(|i| i * 100).collect::<Vec<_>>());
}

#[test]
fn divergence_is_reported() {
    let mut cfg = ExperimentConfig::with_horizon(2000);
    cfg.schedule.eps1 = Some(50.0);
    cfg.schedule.eps2 = Some(5.0);
    cfg.schedule.eps3 = Some(50.0);
    let tr = prepare(&cfg).unwrap().run(None).unwrap();
    assert!(tr.diverged.is_some());
    assert!(tr.iterations < 2000);
    assert!(tr.final_opt_gap.is_nan());
}

#[test]
fn initial_points_follow_config() {
    let mut cfg = ExperimentConfig::with_horizon(1);
    cfg.problem.x0_offset = 5.0;
    cfg.problem.x0_spread = 0.0;
    let exp = prepare(&cfg).unwrap();
    let sim = Simulation::new(&exp.family, &exp.mix, exp.spec, &exp.schedule, exp.sim_config()).unwrap();
    for s in sim.states() {
        assert_eq!(s.x, DVector::from_element(exp.family.p(), 5.0));
        assert_eq!(s.v, DVector::zeros(exp.family.p()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_invariants_hold(seed in 0u64..1000, which in 0usize..5) {
        let comp = ["identity", "quant:3", "topk:2", "randk:2", "normsign"][which];
        let exp = experiment(comp, 5, 6, 60, seed);
        let mut sim = Simulation::new(&exp.family, &exp.mix, exp.spec, &exp.schedule, exp.sim_config()).unwrap();
        let l = &exp.mix.laplacian;
        for _ in 0..60 {
            let xbar0 = sim.states().iter().fold(DVector::zeros(6), |a, s| a + &s.x) / 5.0;
            let rep = sim.step().unwrap();
            let st = sim.states();
            let scale = st.iter().map(|s| s.x.norm() + s.v.norm() + s.z.norm()).fold(1.0, f64::max);
            let vsum = st.iter().fold(DVector::zeros(6), |a, s| a + &s.v);
            prop_assert!(vsum.norm() <= 1e-10 * scale);
            for i in 0..5 {
                let ly = (0..5).fold(DVector::zeros(6), |a, j| a + &st[j].y * l[(i, j)]);
                prop_assert!((&st[i].z - ly).norm() <= 1e-10 * scale);
            }
            let xbar1 = st.iter().fold(DVector::zeros(6), |a, s| a + &s.x) / 5.0;
            let gbar = rep.grads.iter().fold(DVector::zeros(6), |a, g| a + g) / 5.0;
            prop_assert!((xbar1 - xbar0 + gbar * rep.alpha).norm() <= 1e-12 * scale);
        }
    }
}
