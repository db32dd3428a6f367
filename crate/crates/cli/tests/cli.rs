use std::path::Path;
use std::process::{Command, Output};

fn hedzoc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hedzoc"))
        .args(args)
        .current_dir(dir)
        .env_remove("HEDZOC_OUT_DIR")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const SMALL: &str = "seed = 3\ncompressor = \"topk:2\"\n[problem]\nn = 4\np = 5\n[schedule]\nT = 300\neps1 = 0.5\neps2 = 0.1\neps3 = 0.5\n";

#[test]
fn run_writes_the_configured_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), format!("{SMALL}[output]\ncsv = \"out/t.csv\"\nlog_every = 30\n")).unwrap();
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let o = hedzoc(dir.path(), &["run", "c.toml"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/t.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 12);

    let alt = dir.path().join("alt");
    std::fs::create_dir(&alt).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hedzoc"))
        .args(["run", "c.toml"])
        .current_dir(dir.path())
        .env("HEDZOC_OUT_DIR", &alt)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(alt.join("t.csv").exists());
}

#[test]
fn run_without_csv_streams_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let o = hedzoc(dir.path(), &["run", "c.toml"]);
    assert!(o.status.success());
    let out = text(&o.stdout);
    assert!(out.lines().nth(1).unwrap().starts_with("k,"));
    assert!(out.trim_end().ends_with("status=ok"));
}

#[test]
fn divergence_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[schedule]\nT = 5000\neps1 = 50.0\neps2 = 5.0\neps3 = 50.0\n").unwrap();
    let o = hedzoc(dir.path(), &["run", "c.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("diverged"));
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[graph]\nprob = 1.3\n[schedule]\nT = 10\n").unwrap();
    let o = hedzoc(dir.path(), &["run", "c.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("graph.prob"), "{}", text(&o.stderr));
    let o = hedzoc(dir.path(), &["run", "missing.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn constants_prints_key_values() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let o = hedzoc(dir.path(), &["constants", "c.toml"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    for key in ["rho2=", "eps1=0.5", "kappa1=", "kappa3_lower=", "omega="] {
        assert!(out.lines().any(|l| l.starts_with(key)), "{key} missing:\n{out}");
    }
    for line in out.lines().filter(|l| !l.starts_with('#')) {
        assert!(line.contains('='), "{line}");
    }
}

#[test]
fn check_passes_on_a_valid_family() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let o = hedzoc(dir.path(), &["check", "c.toml", "--samples", "50", "--iterations", "50"]);
    assert!(o.status.success(), "{}{}", text(&o.stdout), text(&o.stderr));
    assert!(text(&o.stdout).contains("check passed"));
}

#[test]
fn sweep_writes_summary_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let o = hedzoc(
        dir.path(),
        &["sweep", "c.toml", "--axis", "compressor", "--values", "identity,quant:4", "--replicates", "2", "--summary", "s.csv", "--traces"],
    );
    assert!(o.status.success(), "{}", text(&o.stderr));
    let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(s.lines().filter(|l| !l.starts_with('#')).count(), 5);
    assert_eq!(s.lines().filter(|l| l.starts_with("# grid")).count(), 2);
    for i in 0..4 {
        assert!(dir.path().join(format!("run_{i:04}.csv")).exists());
    }
    let o = hedzoc(dir.path(), &["sweep", "c.toml", "--axis", "depth", "--values", "1"]);
    assert!(!o.status.success());
}
