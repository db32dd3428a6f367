use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hedzoc::harness::{self, Experiment, SweepAxis};

#[derive(Parser)]
#[command(name = "hedzoc", version, about = "Compressed distributed zeroth-order optimization simulator")]
struct Cli {
    /// Directory that overrides where CSV files are written.
    #[arg(long, global = true, env = "HEDZOC_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; the trace goes to `output.csv` or stdout.
    Run { config: PathBuf },
    /// Repeat an experiment over one axis.
    Sweep {
        config: PathBuf,
        /// n, T, compressor or rho_h.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Summary CSV path (stdout when omitted).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Also keep one trace per run.
        #[arg(long)]
        traces: bool,
    },
    /// Print the analysis constants as key=value lines.
    Constants { config: PathBuf },
    /// Check the problem assumptions and audit the algorithm invariants.
    Check {
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        iterations: u64,
    },
}

fn load(path: &Path) -> Result<Experiment> {
    let cfg = harness::load_config(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(harness::prepare(&cfg)?)
}

fn into_dir(dir: Option<&Path>, name: &Path) -> PathBuf {
    match dir {
        Some(d) => d.join(name),
        None => name.to_path_buf(),
    }
}

fn run(cli: &Cli, config: &Path) -> Result<ExitCode> {
    let exp = load(config)?;
    let path = harness::output_path(&exp.config, cli.out_dir.as_deref());
    let trace = match &path {
        Some(p) => harness::run_experiment(&exp, Some(p)).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            exp.run(Some(&mut out))?
        }
    };
    if let Some(p) = &path {
        eprintln!(
            "wrote {} ({} iterations, avg_grad_norm_sq = {:e}, final_opt_gap = {:e})",
            p.display(),
            trace.iterations,
            trace.avg_grad_norm_sq,
            trace.final_opt_gap
        );
    }
    if let Some(why) = trace.diverged {
        eprintln!("run diverged: {why}");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(cli: &Cli, config: &Path, axis: &str, values: &[String], replicates: usize, summary: Option<&Path>, traces: bool) -> Result<ExitCode> {
    let cfg = harness::load_config(config).with_context(|| format!("loading {}", config.display()))?;
    let axis: SweepAxis = axis.parse()?;
    let out_dir = cli.out_dir.as_deref();
    let trace_dir = traces.then(|| out_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")));
    let res = harness::sweep(&cfg, axis, values, replicates, trace_dir.as_deref())?;
    match summary {
        Some(p) => {
            let p = into_dir(out_dir, p);
            harness::write_sweep_csv(&res, BufWriter::new(File::create(&p)?))?;
            eprintln!("wrote {}", p.display());
        }
        None => harness::write_sweep_csv(&res, io::stdout().lock())?,
    }
    let failed = res.runs.iter().filter(|r| !matches!(&r.outcome, Ok(s) if s.diverged.is_none())).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed or diverged", res.runs.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn constants(config: &Path) -> Result<ExitCode> {
    let exp = load(config)?;
    let s = &exp.schedule;
    let mut out = io::stdout().lock();
    writeln!(out, "rho={}", exp.mix.spectrum.rho)?;
    writeln!(out, "rho2={}", exp.mix.spectrum.rho2)?;
    writeln!(out, "ell={}", exp.constants_input.ell)?;
    writeln!(out, "r={}", exp.spec.r)?;
    writeln!(out, "delta={}", exp.spec.delta)?;
    writeln!(out, "omega={}", s.omega)?;
    writeln!(out, "eps1={}", s.eps1)?;
    writeln!(out, "eps2={}", s.eps2)?;
    for (k, v) in [("eps3", s.eps3), ("eps4", s.eps4), ("theta", s.theta), ("m", s.m), ("nu", s.nu)] {
        if let Some(v) = v {
            writeln!(out, "{k}={v}")?;
        }
    }
    writeln!(out, "alpha0={}", s.alpha(0))?;
    let Some(c) = &exp.constants else {
        bail!("the constants calculator needs a connected graph with at least two agents");
    };
    for (k, v) in c.roster() {
        match v {
            Some(v) => writeln!(out, "{k}={v}")?,
            None => writeln!(out, "{k}=unavailable")?,
        }
    }
    for f in &c.flags {
        writeln!(out, "# {f}")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn check(config: &Path, samples: usize, iterations: u64) -> Result<ExitCode> {
    let exp = load(config)?;
    let rep = harness::check(&exp, samples, iterations)?;
    let mut out = io::stdout().lock();
    for c in rep.assumptions.checks() {
        writeln!(out, "{}: {} (worst ratio {:.6})", c.name, if c.passed { "ok" } else { "VIOLATED" }, c.worst_ratio)?;
        if let Some((agent, _)) = &c.witness {
            writeln!(out, "  first violation at agent {agent}")?;
        }
    }
    let a = &rep.audit;
    writeln!(out, "audit over {} iterations:", a.iterations)?;
    writeln!(out, "  dual_sum={:e}", a.dual_sum)?;
    writeln!(out, "  z_tracking={:e}", a.z_tracking)?;
    writeln!(out, "  mean_dynamics={:e}", a.mean_dynamics)?;
    if let Some(why) = &a.diverged {
        writeln!(out, "  diverged: {why}")?;
    }
    writeln!(out, "{}", if rep.passed() { "check passed" } else { "check FAILED" })?;
    Ok(if rep.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Sweep {
            config,
            axis,
            values,
            replicates,
            summary,
            traces,
        } => sweep(&cli, config, axis, values, *replicates, summary.as_deref(), *traces),
        Command::Constants { config } => constants(config),
        Command::Check {
            config,
            samples,
            iterations,
        } => check(config, *samples, *iterations),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
