//! Orchestration: configs in, CSV traces and sweep summaries out.

mod config;
pub mod rate;
mod sweep;
pub mod trace;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::algorithm::{drive_with, mean_x, RunTrace, Simulation, Stepper};
use crate::error::{Error, Result};
use crate::problems::{assumption_check, AssumptionReport};
use crate::rng;

pub use config::{
    load_config, parse_config, prepare, prepare_with_family, Experiment, ExperimentConfig, GraphSection, OutputSection,
    ProblemSection, ScheduleSection, Topology, DEFAULT_KAPPA_MU, DEFAULT_THETA,
};
pub use rate::{rate_fit, RateFit};
pub use sweep::{sweep, write_sweep_csv, GridSummary, RunSummary, SweepAxis, SweepResult, SweepRun};
pub use trace::TraceWriter;

/// Where a run's CSV goes: `output.csv`, moved into `out_dir` when given.
pub fn output_path(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Option<PathBuf> {
    let csv = cfg.output.csv.as_ref()?;
    Some(match out_dir {
        Some(dir) => dir.join(csv.file_name().unwrap_or(csv.as_os_str())),
        None => match &cfg.base_dir {
            Some(base) if csv.is_relative() => base.join(csv),
            _ => csv.clone(),
        },
    })
}

impl Experiment {
    /// Runs the algorithm, streaming rows into `out` when given.
    pub fn run(&self, out: Option<&mut dyn Write>) -> Result<RunTrace> {
        let mut sim = Simulation::new(&self.family, &self.mix, self.spec, &self.schedule, self.sim_config())?;
        let opts = self.run_options();
        let Some(out) = out else {
            return Ok(drive_with(&mut sim, &self.family, &self.mix, &self.schedule, opts, |_| {}));
        };
        let mut writer = TraceWriter::new(out, opts.record_lyapunov)?;
        let mut failure = None;
        let trace = drive_with(&mut sim, &self.family, &self.mix, &self.schedule, opts, |rec| {
            if failure.is_none() {
                failure = writer.record(rec).err();
            }
        });
        if let Some(e) = failure {
            return Err(e.into());
        }
        writer.finish(&trace, &self.summary_fields())?;
        Ok(trace)
    }

    fn summary_fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.config.seed.to_string()),
            ("problem_seed", self.config.problem.seed.to_string()),
            ("graph_seed", self.graph_seed.to_string()),
            ("compressor", self.spec.kind.to_string()),
        ]
    }
}

/// Runs a prepared experiment, writing its trace to `path` when given.
pub fn run_experiment(exp: &Experiment, path: Option<&Path>) -> Result<RunTrace> {
    match path {
        None => exp.run(None),
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            exp.run(Some(&mut out))
        }
    }
}

/// Largest scale-relative violations of the algorithm's exact invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub iterations: u64,
    /// `‖Σ v_i‖`.
    pub dual_sum: f64,
    /// `max_i ‖z_i − Σ_j L_ij y_j‖`.
    pub z_tracking: f64,
    /// `‖x̄_{k+1} − x̄_k + α_k ḡ_k‖`.
    pub mean_dynamics: f64,
    pub diverged: Option<String>,
}

pub const AUDIT_TOL: f64 = 1e-9;

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.diverged.is_none() && self.dual_sum <= AUDIT_TOL && self.z_tracking <= AUDIT_TOL && self.mean_dynamics <= AUDIT_TOL
    }
}

/// Replays the first `iterations` rounds and measures the invariants after each.
pub fn audit(exp: &Experiment, iterations: u64) -> Result<AuditReport> {
    let mut sim = Simulation::new(&exp.family, &exp.mix, exp.spec, &exp.schedule, exp.sim_config())?;
    let lap = &exp.mix.laplacian;
    let n = exp.family.n();
    let mut rep = AuditReport {
        iterations: 0,
        dual_sum: 0.0,
        z_tracking: 0.0,
        mean_dynamics: 0.0,
        diverged: None,
    };
    for _ in 0..iterations.min(exp.schedule.horizon) {
        let before = mean_x(sim.states());
        let step = match sim.step() {
            Ok(s) => s,
            Err(e) => {
                rep.diverged = Some(e.to_string());
                break;
            }
        };
        let states = sim.states();
        let scale = 1.0 + states.iter().map(|s| s.x.norm().max(s.v.norm()).max(s.y.norm()).max(s.z.norm())).fold(0.0, f64::max);
        let vsum = states.iter().fold(DVector::zeros(exp.family.p()), |acc, s| acc + &s.v);
        rep.dual_sum = rep.dual_sum.max(vsum.norm() / scale);
        for i in 0..n {
            let mut ly = states[i].z.clone();
            for j in 0..n {
                if lap[(i, j)] != 0.0 {
                    ly.axpy(-lap[(i, j)], &states[j].y, 1.0);
                }
            }
            rep.z_tracking = rep.z_tracking.max(ly.norm() / scale);
        }
        let g_bar = step.grads.iter().fold(DVector::zeros(exp.family.p()), |acc, g| acc + g) / n as f64;
        let gscale = 1.0 + step.alpha * g_bar.norm();
        let resid = mean_x(states) - before + g_bar * step.alpha;
        rep.mean_dynamics = rep.mean_dynamics.max(resid.norm() / scale.max(gscale));
        rep.iterations += 1;
    }
    Ok(rep)
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub assumptions: AssumptionReport,
    pub audit: AuditReport,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.assumptions.passed() && self.audit.passed()
    }
}

/// Assumption checks on the family plus an invariant audit of a short run.
pub fn check(exp: &Experiment, samples: usize, audit_iterations: u64) -> Result<CheckReport> {
    if samples == 0 {
        return Err(Error::param("check.samples", "need at least one sample"));
    }
    let mut r = rng::seeded(exp.config.seed ^ 0x636865636b);
    Ok(CheckReport {
        assumptions: assumption_check(&exp.family, samples, None, &mut r),
        audit: audit(exp, audit_iterations)?,
    })
}
