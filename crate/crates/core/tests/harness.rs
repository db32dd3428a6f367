use proptest::prelude::*;

use hedzoc::algorithm::ScheduleMode;
use hedzoc::harness::{
    load_config, output_path, parse_config, prepare, rate_fit, run_experiment, sweep, trace, write_sweep_csv, ExperimentConfig,
    SweepAxis, Topology,
};

fn err(text: &str) -> String {
    match parse_config(text).and_then(|c| prepare(&c)) {
        Ok(_) => panic!("accepted:\n{text}"),
        Err(e) => e.to_string(),
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config("[schedule]\nT = 50\n").unwrap();
    assert_eq!(cfg.schedule.mode, ScheduleMode::Nonconvex);
    assert_eq!(cfg.compressor, "identity");
    let exp = prepare(&cfg).unwrap();
    assert_eq!(exp.schedule.omega, 1.0 / exp.spec.r);
    let c = exp.constants.as_ref().unwrap();
    assert_eq!(exp.schedule.eps1, 2.0 * c.kappa1);
    assert!((exp.schedule.eps2 - c.kappa2 / 2.0).abs() < 1e-15 * c.kappa2);
    let e3 = exp.schedule.eps3.unwrap();
    assert!(e3 > c.kappa3_lo && e3 < c.kappa3_hi);
    assert!(!exp.warnings.is_empty());
}

#[test]
fn json_is_an_alternative_encoding() {
    let toml = parse_config("seed = 4\ncompressor = \"topk:3\"\n[problem]\nn = 5\np = 7\n[schedule]\nT = 20\n").unwrap();
    let json = parse_config(r#"{"seed": 4, "compressor": "topk:3", "problem": {"n": 5, "p": 7}, "schedule": {"T": 20}}"#).unwrap();
    assert_eq!(toml, json);
}

#[test]
fn errors_name_the_offending_key() {
    let cases = [
        ("[schedule]\nT = 10\nmode = \"pl_unknown\"\ntheta = 1.2\n", "theta"),
        ("[graph]\nprob = 1.3\n[schedule]\nT = 10\n", "graph.prob"),
        ("[schedule]\nT = 10\ntheta2 = 0.5\n", "theta2"),
        ("[problem]\nn = 4\nsize = 3\n[schedule]\nT = 10\n", "size"),
        ("[schedule]\nT = 10\nomega = 2.0\n", "omega"),
        ("[schedule]\neps1 = 1.0\n", "schedule.T"),
        ("[schedule]\nT = 0\n", "schedule.T"),
        ("compressor = \"topk:99\"\n[schedule]\nT = 10\n", "compressor"),
        ("[problem]\nrho_h = -1\n[schedule]\nT = 10\n", "problem.rho_h"),
        ("[output]\nlog_every = 0\n[schedule]\nT = 10\n", "output.log_every"),
        ("[graph]\ntopology = \"file\"\n[schedule]\nT = 10\n", "graph.edge_list"),
        ("[graph]\ntopology = \"torus\"\n[schedule]\nT = 10\n", "torus"),
        ("[schedule]\nT = 10\nmode = \"pl_known\"\neps1 = 1.0\neps2 = 0.1\nnu = 1.0\neps4 = 0.03\n", "eps4"),
        ("[problem]\nkind = \"nonconvex\"\nrho_nc = 0.1\n[schedule]\nT = 10\nmode = \"pl_known\"\neps1 = 1.0\neps2 = 0.1\n", "schedule.nu"),
        ("[schedule]\nT = 10\nkappa_mu = -1.0\n", "schedule.kappa_mu"),
    ];
    for (text, key) in cases {
        let e = err(text);
        assert!(e.contains(key), "{key} missing from: {e}");
    }
    let e = err("[schedule]\nT = 10\nmode = \"pl_unknown\"\ntheta = 1.2\n");
    assert!(e.contains("(0.5, 1)"));
}

#[test]
fn fixed_topologies_and_edge_lists() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "# nodes 4\n0 1 1\n1 2 1\n2 3 2.5\n").unwrap();
    let cfg_path = dir.path().join("c.toml");
    std::fs::write(&cfg_path, "[problem]\nn = 4\np = 3\n[graph]\ntopology = \"file\"\nedge_list = \"g.txt\"\n[schedule]\nT = 5\n").unwrap();
    let exp = prepare(&load_config(&cfg_path).unwrap()).unwrap();
    assert_eq!(exp.graph.weight(2, 3), 2.5);
    for topo in [Topology::Ring, Topology::Complete, Topology::Path, Topology::Star] {
        let mut cfg = ExperimentConfig::with_horizon(5);
        cfg.problem.n = 4;
        cfg.graph.topology = topo;
        assert_eq!(prepare(&cfg).unwrap().graph.n(), 4);
    }
    let mut cfg = ExperimentConfig::with_horizon(5);
    cfg.problem.n = 5;
    cfg.graph.topology = Topology::File;
    cfg.graph.edge_list = Some(dir.path().join("g.txt"));
    assert!(prepare(&cfg).unwrap_err().to_string().contains("graph"));
}

#[test]
fn erdos_renyi_resampling() {
    let mut cfg = ExperimentConfig::with_horizon(5);
    cfg.graph.prob = 0.15;
    cfg.graph.max_resamples = 500;
    let exp = prepare(&cfg).unwrap();
    assert!(exp.mix.spectrum.connected);
    if exp.graph_seed != cfg.graph.seed {
        assert!(exp.warnings.iter().any(|w| w.contains("resampled")));
    }
    cfg.graph.prob = 0.0;
    cfg.graph.max_resamples = 3;
    assert!(matches!(prepare(&cfg), Err(hedzoc::Error::Disconnected { .. })));
}

#[test]
fn csv_layout_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::with_horizon(1000);
    cfg.problem.n = 4;
    cfg.problem.p = 5;
    cfg.output.log_every = 100;
    let path = dir.path().join("t.csv");
    run_experiment(&prepare(&cfg).unwrap(), Some(&path)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# hedzoc trace"));
    assert_eq!(lines[1], trace::HEADER);
    let rows: Vec<&str> = lines[2..].iter().copied().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 11);
    assert!(lines.last().unwrap().starts_with("# summary") && lines.last().unwrap().ends_with("status=ok"));
    for row in &rows {
        assert_eq!(row.split(',').count(), 6);
    }

    cfg.output.record_lyapunov = true;
    run_experiment(&prepare(&cfg).unwrap(), Some(&path)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",e1,e2,e3,e4,e5"));
    assert_eq!(text.lines().nth(2).unwrap().split(',').count(), 11);
}

#[test]
fn divergence_leaves_a_partial_csv() {
    let mut cfg = ExperimentConfig::with_horizon(5000);
    cfg.schedule.eps1 = Some(50.0);
    cfg.schedule.eps2 = Some(5.0);
    cfg.schedule.eps3 = Some(50.0);
    let mut out = Vec::new();
    let tr = prepare(&cfg).unwrap().run(Some(&mut out)).unwrap();
    assert!(tr.diverged.is_some());
    let text = String::from_utf8(out).unwrap();
    assert!(text.lines().last().unwrap().contains("status=diverged"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count() as u64, 1 + tr.iterations);
}

#[test]
fn output_directory_override() {
    let mut cfg = ExperimentConfig::with_horizon(5);
    assert_eq!(output_path(&cfg, None), None);
    cfg.output.csv = Some("runs/a.csv".into());
    assert_eq!(output_path(&cfg, None).unwrap(), std::path::PathBuf::from("runs/a.csv"));
    assert_eq!(output_path(&cfg, Some("/tmp/x".as_ref())).unwrap(), std::path::PathBuf::from("/tmp/x/a.csv"));
}

#[test]
fn rho_h_sweep_has_one_row_per_level() {
    let mut cfg = ExperimentConfig::with_horizon(40);
    cfg.problem.n = 4;
    cfg.problem.p = 4;
    cfg.seed = 10;
    cfg.schedule.eps1 = Some(0.5);
    cfg.schedule.eps2 = Some(0.1);
    cfg.schedule.eps3 = Some(0.5);
    let values: Vec<String> = (1..=10).map(|i| format!("{}", i as f64 / 10.0)).collect();
    let res = sweep(&cfg, SweepAxis::RhoH, &values, 2, None).unwrap();
    assert_eq!(res.grid.len(), 10);
    assert_eq!(res.runs.len(), 20);
    for r in &res.runs {
        assert_eq!(r.seed, 10 + r.index as u64);
    }
    assert!(res.slopes.is_empty());
    let mut out = Vec::new();
    write_sweep_csv(&res, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("# grid")).count(), 10);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 21);
}

#[test]
fn horizon_sweep_orders_and_fits() {
    let mut cfg = ExperimentConfig::with_horizon(1);
    cfg.problem.n = 4;
    cfg.problem.p = 5;
    cfg.compressor = "topk:2".into();
    cfg.schedule.eps1 = Some(0.5);
    cfg.schedule.eps2 = Some(0.1);
    cfg.schedule.eps3 = Some(0.5);
    let values = vec!["200".to_string(), "800".to_string(), "3200".to_string()];
    let res = sweep(&cfg, SweepAxis::T, &values, 4, None).unwrap();
    let means: Vec<f64> = res.grid.iter().map(|g| g.mean_avg_grad_norm_sq).collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    let fit = res.slopes.iter().find(|(m, _)| *m == "avg_grad_norm_sq").unwrap().1.as_ref().unwrap();
    assert!(fit.slope < 0.0 && fit.points == 12);
}

#[test]
fn sweep_records_failed_runs_and_continues() {
    let mut cfg = ExperimentConfig::with_horizon(1);
    cfg.problem.n = 3;
    cfg.problem.p = 3;
    cfg.schedule.eps1 = Some(50.0);
    cfg.schedule.eps2 = Some(5.0);
    cfg.schedule.eps3 = Some(5.0);
    let values = vec!["1".to_string(), "5000".to_string()];
    let res = sweep(&cfg, SweepAxis::T, &values, 1, None).unwrap();
    assert_eq!(res.runs.len(), 2);
    assert!(res.runs[0].outcome.as_ref().unwrap().diverged.is_none());
    assert!(res.runs[1].outcome.as_ref().unwrap().diverged.is_some());
    assert_eq!(res.grid[1].failures, 1);
    assert!(sweep(&cfg, SweepAxis::N, &["x".to_string()], 1, None).is_err());
    assert!("depth".parse::<SweepAxis>().is_err());
}

#[test]
fn rate_fit_examples() {
    let s: Vec<_> = (1..=50).map(|k| (k as f64, (k as f64).powf(-0.5))).collect();
    assert!((rate_fit(&s, 1.0).unwrap().slope + 0.5).abs() < 1e-9);
    let s: Vec<_> = (1..=50).map(|k| (k as f64, 5.0 / k as f64)).collect();
    assert!((rate_fit(&s, 0.4).unwrap().slope + 1.0).abs() < 1e-9);
    let s: Vec<_> = (1..=200).map(|k| (k as f64, (k as f64).powf(-0.5) * (1.0 + 0.01 * (k as f64).sin()))).collect();
    let f = rate_fit(&s, 1.0).unwrap();
    assert!((-0.52..=-0.48).contains(&f.slope));
    let mut bad = s.clone();
    bad[190].1 = 0.0;
    assert!(rate_fit(&bad, 0.5).is_err());
    assert!(rate_fit(&bad, 0.01).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn csv_is_reproducible(seed in any::<u64>(), which in 0usize..4, stride in 1u64..20) {
        let mut cfg = ExperimentConfig::with_horizon(60);
        cfg.problem.n = 4;
        cfg.problem.p = 6;
        cfg.seed = seed;
        cfg.problem.seed = seed;
        cfg.graph.seed = seed;
        cfg.compressor = ["quant:2", "randk:2", "topk:3", "normsign"][which].into();
        cfg.output.log_every = stride;
        cfg.output.record_lyapunov = stride % 2 == 0;
        cfg.schedule.eps1 = Some(0.5);
        cfg.schedule.eps2 = Some(0.1);
        cfg.schedule.eps3 = Some(0.5);
        let render = || {
            let mut out = Vec::new();
            prepare(&cfg).unwrap().run(Some(&mut out)).unwrap();
            String::from_utf8(out).unwrap()
        };
        let (a, b) = (render(), render());
        prop_assert_eq!(trace::without_timestamp(&a), trace::without_timestamp(&b));
    }

    #[test]
    fn config_round_trips_through_toml(n in 2usize..20, p in 1usize..30, t in 1u64..100_000, prob in 0.0f64..=1.0) {
        let mut cfg = ExperimentConfig::with_horizon(t);
        cfg.problem.n = n;
        cfg.problem.p = p;
        cfg.graph.prob = prob;
        let text = toml::to_string(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
