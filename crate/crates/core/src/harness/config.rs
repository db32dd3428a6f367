//! Experiment configuration: TOML (or JSON) text to a ready-to-run
//! [`Experiment`].
//!
//! ```toml
//! seed = 1
//! compressor = "topk:4"
//!
//! [problem]
//! kind = "quadratic"
//! n = 10
//! p = 20
//!
//! [graph]
//! topology = "erdos_renyi"
//! prob = 0.4
//!
//! [schedule]
//! T = 2000
//!
//! [output]
//! csv = "trace.csv"
//! log_every = 10
//! ```
//!
//! Every unknown key is rejected. Missing tuning parameters are filled from
//! the constants calculator.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithm::{make_schedule, BitAccounting, InitParams, RunOptions, Schedule, ScheduleMode, ScheduleParams, SimConfig};
use crate::analysis::{constants, Constants, ConstantsInput};
use crate::compressors::{params_for, CompressorKind, CompressorSpec};
use crate::error::{Error, Result};
use crate::graph::{laplacian_spectrum, f_matrix, Graph, MixingMatrices};
use crate::problems::{make_family, FamilyParams, HessianMode, ProblemFamily, ProblemKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed of the algorithm's random streams.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_compressor")]
    pub compressor: String,
    #[serde(default)]
    pub bit_accounting: BitAccounting,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory that relative input paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_compressor() -> String {
    "identity".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    pub n: usize,
    pub p: usize,
    pub rho_h: f64,
    pub spectrum_range: [f64; 2],
    pub noise_sigma: f64,
    pub noise_eta: f64,
    pub rho_nc: f64,
    pub hessians: HessianMode,
    pub seed: u64,
    pub x0_offset: f64,
    pub x0_spread: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let f = FamilyParams::default();
        let init = InitParams::default();
        ProblemSection {
            kind: f.kind,
            n: f.n,
            p: f.p,
            rho_h: f.rho_h,
            spectrum_range: f.spectrum_range,
            noise_sigma: f.noise_sigma,
            noise_eta: f.noise_eta,
            rho_nc: f.rho_nc,
            hessians: f.hessians,
            seed: f.seed,
            x0_offset: init.offset,
            x0_spread: init.spread,
        }
    }
}

impl ProblemSection {
    pub fn family_params(&self) -> FamilyParams {
        FamilyParams {
            kind: self.kind,
            n: self.n,
            p: self.p,
            rho_h: self.rho_h,
            spectrum_range: self.spectrum_range,
            noise_sigma: self.noise_sigma,
            noise_eta: self.noise_eta,
            rho_nc: self.rho_nc,
            hessians: self.hessians,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    ErdosRenyi,
    Ring,
    Complete,
    Path,
    Star,
    /// Edge list read from `graph.edge_list`.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub topology: Topology,
    pub prob: f64,
    pub seed: u64,
    /// Extra Erdős–Rényi draws (seed + 1, seed + 2, …) when a sample is disconnected.
    pub max_resamples: u32,
    pub lambda_extra: Option<f64>,
    pub edge_list: Option<PathBuf>,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            topology: Topology::ErdosRenyi,
            prob: 0.4,
            seed: 0,
            max_resamples: 100,
            lambda_extra: None,
            edge_list: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub mode: ScheduleMode,
    #[serde(rename = "T")]
    pub t: Option<u64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
    pub eps4: Option<f64>,
    pub theta: Option<f64>,
    pub m: Option<f64>,
    pub kappa_mu: Option<f64>,
    pub nu: Option<f64>,
    pub omega: Option<f64>,
    pub eta2: Option<f64>,
    pub kappa_m_hat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub record_lyapunov: bool,
    pub log_every: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            csv: None,
            record_lyapunov: false,
            log_every: 1,
        }
    }
}

pub const DEFAULT_KAPPA_MU: f64 = 0.1;
pub const DEFAULT_THETA: f64 = 0.75;

/// Parses TOML, or JSON when the text starts with `{`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a config file; relative paths inside it resolve against its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    Ok(cfg)
}

fn finite_positive(key: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::param(key, format!("{x} must be a positive number"))),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    /// A config with every section at its default and horizon `t`.
    pub fn with_horizon(t: u64) -> Self {
        ExperimentConfig {
            seed: 0,
            compressor: default_compressor(),
            bit_accounting: BitAccounting::default(),
            problem: ProblemSection::default(),
            graph: GraphSection::default(),
            schedule: ScheduleSection {
                t: Some(t),
                ..ScheduleSection::default()
            },
            output: OutputSection::default(),
            base_dir: None,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.schedule.t.unwrap_or(0)
    }

    pub fn compressor_kind(&self) -> Result<CompressorKind> {
        self.compressor.parse()
    }

    /// Range checks that need nothing but the config itself.
    pub fn validate(&self) -> Result<()> {
        self.problem.family_params().validate()?;
        if !self.problem.x0_offset.is_finite() {
            return Err(Error::param("problem.x0_offset", "must be finite"));
        }
        if !(self.problem.x0_spread >= 0.0 && self.problem.x0_spread.is_finite()) {
            return Err(Error::param("problem.x0_spread", "must be a nonnegative number"));
        }
        let kind = self.compressor_kind()?;
        params_for(kind, self.problem.p)?;

        let g = &self.graph;
        if !(0.0..=1.0).contains(&g.prob) {
            return Err(Error::param("graph.prob", format!("{} is outside [0, 1]", g.prob)));
        }
        if g.topology == Topology::File && g.edge_list.is_none() {
            return Err(Error::param("graph.edge_list", "required when topology = \"file\""));
        }
        if g.topology == Topology::ErdosRenyi && self.problem.n < 2 {
            return Err(Error::param("graph.topology", "erdos_renyi needs at least two agents"));
        }
        if g.topology == Topology::Ring && self.problem.n < 3 {
            return Err(Error::param("graph.topology", "ring needs at least three agents"));
        }
        finite_positive("graph.lambda_extra", g.lambda_extra)?;

        let s = &self.schedule;
        match s.t {
            None => return Err(Error::param("schedule.T", "the horizon is required")),
            Some(0) => return Err(Error::param("schedule.T", "must be at least 1")),
            Some(_) => {}
        }
        for (key, v) in [
            ("schedule.eps1", s.eps1),
            ("schedule.eps2", s.eps2),
            ("schedule.eps3", s.eps3),
            ("schedule.eps4", s.eps4),
            ("schedule.m", s.m),
            ("schedule.kappa_mu", s.kappa_mu),
            ("schedule.nu", s.nu),
            ("schedule.omega", s.omega),
            ("schedule.kappa_m_hat", s.kappa_m_hat),
        ] {
            finite_positive(key, v)?;
        }
        if let Some(e) = s.eta2 {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::param("schedule.eta2", format!("{e} must be a nonnegative number")));
            }
        }
        if let Some(th) = s.theta {
            if !(th > 0.5 && th < 1.0) {
                return Err(Error::param("schedule.theta", format!("{th} is outside the open interval (0.5, 1)")));
            }
        }
        if self.output.log_every == 0 {
            return Err(Error::param("output.log_every", "stride must be at least 1"));
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// A validated config with everything built: family, graph, schedule.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub family: ProblemFamily,
    pub graph: Graph,
    /// Seed of the graph that was finally used (after resampling).
    pub graph_seed: u64,
    pub mix: MixingMatrices,
    pub spec: CompressorSpec,
    pub schedule: Schedule,
    /// Inputs and roster of the constants calculator, with the resolved tuning.
    pub constants_input: ConstantsInput,
    pub constants: Option<Constants>,
    pub warnings: Vec<String>,
}

fn build_graph(cfg: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<(Graph, u64, MixingMatrices)> {
    let g = &cfg.graph;
    let n = cfg.problem.n;
    let fixed = |graph: Graph| -> Result<(Graph, u64, MixingMatrices)> {
        if graph.n() != n {
            return Err(Error::param(
                "graph.edge_list",
                format!("graph has {} nodes but problem.n = {n}", graph.n()),
            ));
        }
        let mix = f_matrix(&laplacian_spectrum(&graph)?, g.lambda_extra)?;
        Ok((graph, g.seed, mix))
    };
    match g.topology {
        Topology::Ring => fixed(Graph::ring(n)),
        Topology::Complete => fixed(Graph::complete(n)),
        Topology::Path => fixed(Graph::path(n)),
        Topology::Star => fixed(Graph::star(n - 1)),
        Topology::File => {
            let path = cfg.resolve(g.edge_list.as_deref().expect("validated"));
            let text = std::fs::read_to_string(&path)?;
            fixed(Graph::parse_edge_list(&text)?)
        }
        Topology::ErdosRenyi => {
            let mut last = 0.0;
            for attempt in 0..=u64::from(g.max_resamples) {
                let seed = g.seed.wrapping_add(attempt);
                let graph = Graph::erdos_renyi(n, g.prob, seed)?;
                let ls = laplacian_spectrum(&graph)?;
                if ls.spectrum.connected {
                    if attempt > 0 {
                        let msg = format!("Erdos-Renyi graph resampled {attempt} time(s); using graph seed {seed}");
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                    let mix = f_matrix(&ls, g.lambda_extra)?;
                    return Ok((graph, seed, mix));
                }
                last = ls.spectrum.lambda2();
                log::info!("Erdos-Renyi sample with seed {seed} is disconnected (lambda_2 = {last:e})");
            }
            Err(Error::Disconnected { lambda2: last })
        }
    }
}

fn warn(warnings: &mut Vec<String>, msg: String) {
    log::warn!("{msg}");
    warnings.push(msg);
}

/// Builds family, graph and schedule, filling unset tuning parameters.
///
/// Defaults: `ε₁ = 2κ₁`, `ε₂ = κ₂(ε₁)/2`, `ε₃` the midpoint of
/// `(κ̲₃, κ̄₃)`, `ν` from the family, `ε₄ = νε₂/5`, `m = ⌈κ_m⌉`,
/// `θ = 0.75`, `κ_μ = 0.1`, `ω = 1/r`.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    prepare_with_family(cfg, make_family(&cfg.problem.family_params())?)
}

/// [`prepare`] with a prebuilt family (which must match `cfg.problem`'s `n`, `p`).
pub fn prepare_with_family(cfg: &ExperimentConfig, family: ProblemFamily) -> Result<Experiment> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let (n, p) = (cfg.problem.n, cfg.problem.p);
    if family.n() != n || family.p() != p {
        return Err(Error::param("problem", "family shape does not match problem.n / problem.p"));
    }
    let spec = params_for(cfg.compressor_kind()?, p)?;
    let (graph, graph_seed, mix) = build_graph(cfg, &mut warnings)?;
    let s = &cfg.schedule;
    let horizon = cfg.horizon();
    let mode = s.mode;
    let omega = s.omega.unwrap_or(1.0 / spec.r);
    let kappa_mu = s.kappa_mu.unwrap_or(DEFAULT_KAPPA_MU);
    let nu = s.nu.or(family.nu());
    let theta = match mode {
        ScheduleMode::PlUnknown => Some(s.theta.unwrap_or(DEFAULT_THETA)),
        _ => s.theta,
    };

    let mut inp = ConstantsInput::new(
        mix.spectrum.rho,
        mix.spectrum.rho2,
        family.ell(),
        spec.delta,
        spec.r,
        omega,
        s.eps1.unwrap_or(1.0),
        s.eps2.unwrap_or(1.0),
        p,
        n,
    );
    inp.eta1 = family.eta1();
    inp.eta2 = s.eta2.unwrap_or(0.0);
    inp.sigma1 = family.sigma1();
    inp.kappa_mu = kappa_mu;
    inp.kappa_m_hat = s.kappa_m_hat.unwrap_or(1.0);
    inp.theta = theta;
    inp.nu = nu;
    inp.f_star = Some(family.f_star());
    inp.f_i_stars = Some(family.f_i_stars());

    // defaults need the calculator; a single agent (ρ₂ = 0) has no thresholds
    let derivable = n >= 2 && mix.spectrum.rho2 > 0.0;
    let need = |key: &str, v: Option<f64>| -> Result<f64> {
        v.ok_or_else(|| Error::param(key, "no default is available for this topology; set it explicitly"))
    };
    let eps1 = match s.eps1 {
        Some(v) => v,
        None if derivable => 2.0 * crate::analysis::kappa1(mix.spectrum.rho2),
        None => need("schedule.eps1", None)?,
    };
    inp.eps1 = eps1;
    let eps2 = match s.eps2 {
        Some(v) => v,
        None if derivable => crate::analysis::kappa2(&inp)? / 2.0,
        None => need("schedule.eps2", None)?,
    };
    inp.eps2 = eps2;
    let eps4 = match (mode, s.eps4) {
        (_, Some(v)) => Some(v),
        (ScheduleMode::PlKnown, None) => Some(need("schedule.nu", nu)? * eps2 / 5.0),
        _ => None,
    };
    inp.eps4 = eps4;

    let consts = if derivable {
        match constants(&inp) {
            Ok(c) => Some(c),
            Err(e) => {
                warn(&mut warnings, format!("constants calculator unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    let eps3 = match (mode, s.eps3) {
        (_, Some(v)) => Some(v),
        (ScheduleMode::Nonconvex, None) => {
            let c = consts.as_ref().ok_or_else(|| Error::param("schedule.eps3", "no default available; set it explicitly"))?;
            Some(0.5 * (c.kappa3_lo + c.kappa3_hi))
        }
        _ => None,
    };
    let m = match (mode, s.m) {
        (_, Some(v)) => Some(v),
        (ScheduleMode::PlKnown, None) => {
            let km = consts.as_ref().and_then(|c| c.kappa_m);
            Some(need("schedule.m", km)?.ceil())
        }
        _ => None,
    };

    let schedule = make_schedule(
        mode,
        n,
        p,
        horizon,
        ScheduleParams {
            eps1,
            eps2,
            eps3,
            eps4,
            theta,
            m,
            kappa_mu,
            nu,
            omega: s.omega,
        },
        spec.r,
    )?;

    if let Some(c) = &consts {
        audit_tuning(&schedule, c, &inp, &mut warnings);
    }
    Ok(Experiment {
        config: cfg.clone(),
        family,
        graph,
        graph_seed,
        mix,
        spec,
        schedule,
        constants_input: inp,
        constants: consts,
        warnings,
    })
}

/// Warns (never fails) when the tuning leaves the region the analysis covers.
fn audit_tuning(s: &Schedule, c: &Constants, inp: &ConstantsInput, warnings: &mut Vec<String>) {
    if !c.admissible(inp) {
        warn(
            warnings,
            format!(
                "eps1 = {} and eps2 = {} are outside the analysed region (need eps1 > {} and 0 < eps2 < {})",
                s.eps1, s.eps2, c.kappa1, c.kappa2
            ),
        );
    }
    let t = s.horizon as f64;
    let (n, p) = (s.n as f64, s.p as f64);
    match s.mode {
        ScheduleMode::Nonconvex => {
            let e3 = s.eps3.unwrap_or(f64::NAN);
            if !(e3 >= c.kappa3_lo && e3 <= c.kappa3_hi) {
                warn(
                    warnings,
                    format!("eps3 = {e3} is outside [{}, {}]", c.kappa3_lo, c.kappa3_hi),
                );
            }
            let t_min = (n * e3 * e3 * c.kappa0t * c.kappa0t / (p * s.eps2 * s.eps2)).max(n.powi(3) * c.kappa_tt / p);
            if t < t_min {
                warn(warnings, format!("T = {} is below the horizon the rate bound needs ({t_min:.3e})", s.horizon));
            }
        }
        ScheduleMode::PlUnknown => {
            if let Some(kt) = c.kappa_t {
                if t < kt {
                    warn(warnings, format!("T = {} is below kappa_T = {kt:.3e}", s.horizon));
                }
            }
        }
        ScheduleMode::PlKnown => {
            if let (Some(m), Some(km)) = (s.m, c.kappa_m) {
                if m < km {
                    warn(warnings, format!("m = {m} is below kappa_m = {km:.3e}"));
                }
            }
        }
    }
}

impl Experiment {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.config.seed,
            init: InitParams {
                offset: self.config.problem.x0_offset,
                spread: self.config.problem.x0_spread,
            },
            bits: self.config.bit_accounting,
            parallel: false,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            iterations: self.schedule.horizon,
            record_lyapunov: self.config.output.record_lyapunov,
            log_every: self.config.output.log_every,
        }
    }
}
