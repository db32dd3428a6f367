//! One-axis sweeps with replicates.
//!
//! Run `i` (grid point `g`, replicate `r`, `i = g·R + r`) uses
//! `seed + i`, `problem.seed + i` and `graph.seed + i`.

use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::config::{prepare, ExperimentConfig};
use super::rate::{rate_fit, RateFit};
use super::run_experiment;
use super::trace::fmt_f64;
use crate::compressors::CompressorKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    N,
    T,
    Compressor,
    RhoH,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::N => "n",
            SweepAxis::T => "T",
            SweepAxis::Compressor => "compressor",
            SweepAxis::RhoH => "rho_h",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepAxis::N),
            "T" | "t" => Ok(SweepAxis::T),
            "compressor" => Ok(SweepAxis::Compressor),
            "rho_h" => Ok(SweepAxis::RhoH),
            other => Err(Error::param("sweep.axis", format!("`{other}` is not one of n, T, compressor, rho_h"))),
        }
    }
}

impl SweepAxis {
    /// Writes `value` into a copy of `base`.
    pub fn apply(&self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let bad = |what: &str| Error::param("sweep.values", format!("`{value}` is not {what}"));
        let mut cfg = base.clone();
        match self {
            SweepAxis::N => cfg.problem.n = value.trim().parse().map_err(|_| bad("an agent count"))?,
            SweepAxis::T => cfg.schedule.t = Some(value.trim().parse().map_err(|_| bad("a horizon"))?),
            SweepAxis::Compressor => {
                value.parse::<CompressorKind>()?;
                cfg.compressor = value.trim().to_string();
            }
            SweepAxis::RhoH => cfg.problem.rho_h = value.trim().parse().map_err(|_| bad("a number"))?,
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Numeric abscissa for slope fits (only `n` and `T`).
    fn abscissa(&self, value: &str) -> Option<f64> {
        match self {
            SweepAxis::N | SweepAxis::T => value.trim().parse().ok(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub iterations: u64,
    pub avg_grad_norm_sq: f64,
    pub final_opt_gap: f64,
    pub total_bits: u64,
    pub graph_seed: u64,
    pub diverged: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    pub index: usize,
    pub value: String,
    pub replicate: usize,
    pub seed: u64,
    /// `Err` holds the message of a run that could not start.
    pub outcome: std::result::Result<RunSummary, String>,
}

impl SweepRun {
    fn usable(&self) -> Option<&RunSummary> {
        self.outcome.as_ref().ok().filter(|s| s.diverged.is_none())
    }
}

/// Ensemble means over the usable replicates of one grid value.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSummary {
    pub value: String,
    pub runs: usize,
    pub failures: usize,
    pub mean_avg_grad_norm_sq: f64,
    pub mean_final_opt_gap: f64,
    pub mean_total_bits: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub replicates: usize,
    pub base_seed: u64,
    pub runs: Vec<SweepRun>,
    pub grid: Vec<GridSummary>,
    /// `(metric, fit)` for numeric axes; `Err` explains a missing fit.
    pub slopes: Vec<(&'static str, std::result::Result<RateFit, String>)>,
}

/// Runs every `(value, replicate)` pair, in parallel, and summarizes.
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    replicates: usize,
    trace_dir: Option<&Path>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::param("sweep.values", "no values given"));
    }
    if replicates == 0 {
        return Err(Error::param("sweep.replicates", "need at least one replicate"));
    }
    let configs = values.iter().map(|v| axis.apply(base, v)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..values.len())
        .flat_map(|g| (0..replicates).map(move |r| (g * replicates + r, g, r)))
        .collect();
    let runs: Vec<SweepRun> = jobs
        .into_par_iter()
        .map(|(i, g, r)| {
            let mut cfg = configs[g].clone();
            let off = i as u64;
            cfg.seed = base.seed.wrapping_add(off);
            cfg.problem.seed = base.problem.seed.wrapping_add(off);
            cfg.graph.seed = base.graph.seed.wrapping_add(off);
            let outcome = prepare(&cfg).and_then(|exp| {
                let path = trace_dir.map(|d| d.join(format!("run_{i:04}.csv")));
                let trace = run_experiment(&exp, path.as_deref())?;
                Ok(RunSummary {
                    iterations: trace.iterations,
                    avg_grad_norm_sq: trace.avg_grad_norm_sq,
                    final_opt_gap: trace.final_opt_gap,
                    total_bits: trace.total_bits,
                    graph_seed: exp.graph_seed,
                    diverged: trace.diverged,
                })
            });
            if let Err(e) = &outcome {
                log::warn!("sweep run {i} ({axis} = {}) failed: {e}", values[g]);
            }
            SweepRun {
                index: i,
                value: values[g].clone(),
                replicate: r,
                seed: cfg.seed,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect();

    let grid = values
        .iter()
        .map(|v| {
            let mine: Vec<&SweepRun> = runs.iter().filter(|r| &r.value == v).collect();
            let ok: Vec<&RunSummary> = mine.iter().filter_map(|r| r.usable()).collect();
            let mean = |f: &dyn Fn(&RunSummary) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|s| f(s)).sum::<f64>() / ok.len() as f64
                }
            };
            GridSummary {
                value: v.clone(),
                runs: mine.len(),
                failures: mine.len() - ok.len(),
                mean_avg_grad_norm_sq: mean(&|s| s.avg_grad_norm_sq),
                mean_final_opt_gap: mean(&|s| s.final_opt_gap),
                mean_total_bits: mean(&|s| s.total_bits as f64),
            }
        })
        .collect();

    let mut slopes = Vec::new();
    if matches!(axis, SweepAxis::N | SweepAxis::T) {
        type Metric = (&'static str, fn(&RunSummary) -> f64);
        let metrics: [Metric; 2] =
            [("avg_grad_norm_sq", |s| s.avg_grad_norm_sq), ("final_opt_gap", |s| s.final_opt_gap)];
        for (name, get) in metrics {
            let mut pts: Vec<(f64, f64)> = runs
                .iter()
                .filter_map(|r| Some((axis.abscissa(&r.value)?, get(r.usable()?))))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            slopes.push((name, rate_fit(&pts, 1.0).map_err(|e| e.to_string())));
        }
    }
    Ok(SweepResult {
        axis,
        replicates,
        base_seed: base.seed,
        runs,
        grid,
        slopes,
    })
}

/// Per-run table followed by grid means and slopes as comment lines.
pub fn write_sweep_csv<W: Write>(res: &SweepResult, mut out: W) -> io::Result<()> {
    writeln!(out, "# hedzoc sweep axis={} replicates={} base_seed={}", res.axis, res.replicates, res.base_seed)?;
    writeln!(out, "run,axis,value,replicate,seed,graph_seed,iterations,avg_grad_norm_sq,final_opt_gap,total_bits,status")?;
    for r in &res.runs {
        match &r.outcome {
            Ok(s) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.index,
                res.axis,
                r.value,
                r.replicate,
                r.seed,
                s.graph_seed,
                s.iterations,
                fmt_f64(s.avg_grad_norm_sq),
                fmt_f64(s.final_opt_gap),
                s.total_bits,
                if s.diverged.is_some() { "diverged" } else { "ok" }
            )?,
            Err(_) => writeln!(out, "{},{},{},{},{},,,,,,failed", r.index, res.axis, r.value, r.replicate, r.seed)?,
        }
    }
    for g in &res.grid {
        writeln!(
            out,
            "# grid value={} runs={} failures={} mean_avg_grad_norm_sq={} mean_final_opt_gap={} mean_total_bits={}",
            g.value,
            g.runs,
            g.failures,
            fmt_f64(g.mean_avg_grad_norm_sq),
            fmt_f64(g.mean_final_opt_gap),
            fmt_f64(g.mean_total_bits)
        )?;
    }
    for (metric, fit) in &res.slopes {
        match fit {
            Ok(f) => writeln!(
                out,
                "# slope metric={metric} axis={} slope={} ci95=[{},{}] points={}",
                res.axis,
                fmt_f64(f.slope),
                fmt_f64(f.ci.0),
                fmt_f64(f.ci.1),
                f.points
            )?,
            Err(e) => writeln!(out, "# slope metric={metric} axis={} unavailable: {e}", res.axis)?,
        }
    }
    out.flush()
}
