//! The compressed primal-dual zeroth-order round and the run loop.
//!
//! One round for agent `i`:
//!
//! ```text
//! q_i   = C(x_i − y_i)
//! g_i   = p (F_i(x_i + μζ_i, ξ_i) − F_i(x_i, ξ_i)) / μ · ζ_i
//! s_i   = z_i + Σ_j L_ij q_j                  (with the entering z_i)
//! y_i  += ω q_i
//! z_i  += ω Σ_j L_ij q_j
//! x_i  -= αβ s_i + α(γ v_i + g_i)
//! v_i  += αγ s_i
//! ```
//!
//! Agents only see their own state and the `q_j` of their neighbours, which
//! [`NeighborView`] enforces.

mod reference;
pub mod schedule;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::lyapunov::{lyapunov, LyapunovSnapshot};
use crate::compressors::CompressorSpec;
use crate::error::{Error, Result};
use crate::estimators::{sample_unit_sphere, two_point, StochasticOracle};
use crate::graph::MixingMatrices;
use crate::problems::ProblemFamily;
use crate::rng::{agent_stream, Purpose, StreamRng};

pub use reference::UncompressedSimulation;
pub use schedule::{make_schedule, Schedule, ScheduleMode, ScheduleParams};

/// Iterates with `‖x_i‖` above this are treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

impl AgentState {
    /// `v = y = z = 0`.
    pub fn new(x: DVector<f64>) -> Self {
        let p = x.len();
        AgentState {
            x,
            v: DVector::zeros(p),
            y: DVector::zeros(p),
            z: DVector::zeros(p),
        }
    }
}

/// What agent `i` receives in a round: its own `q_i` and its neighbours'.
pub struct NeighborView<'a> {
    pub own: &'a DVector<f64>,
    pub neighbors: Vec<(f64, &'a DVector<f64>)>,
}

impl NeighborView<'_> {
    /// `Σ_j L_ij q_j = Σ_{j ∈ N_i} w_ij (q_i − q_j)`.
    pub fn laplacian_apply(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.own.len());
        for &(w, qj) in &self.neighbors {
            for ((o, a), b) in out.iter_mut().zip(self.own.iter()).zip(qj.iter()) {
                *o += w * (a - b);
            }
        }
        out
    }
}

/// Starting points `x_i = offset·𝟙 + spread·N(0, I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitParams {
    pub offset: f64,
    pub spread: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        InitParams {
            offset: 0.0,
            spread: 1.0,
        }
    }
}

/// How transmitted bits are charged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BitAccounting {
    /// One compressed vector per agent per round.
    #[default]
    Broadcast,
    /// One compressed vector per directed edge per round.
    PerEdge,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SimConfig {
    pub seed: u64,
    pub init: InitParams,
    pub bits: BitAccounting,
    /// Process agents with rayon inside each round.
    pub parallel: bool,
}

pub(crate) struct AgentRngs {
    pub xi: StreamRng,
    pub zeta: StreamRng,
    pub dither: StreamRng,
}

impl AgentRngs {
    pub fn new(seed: u64, agent: usize) -> Self {
        AgentRngs {
            xi: agent_stream(seed, agent, Purpose::Xi),
            zeta: agent_stream(seed, agent, Purpose::Zeta),
            dither: agent_stream(seed, agent, Purpose::Dither),
        }
    }
}

pub(crate) fn initial_points(n: usize, p: usize, seed: u64, init: InitParams) -> Vec<DVector<f64>> {
    (0..n)
        .map(|i| {
            let mut rng = agent_stream(seed, i, Purpose::Init);
            DVector::from_iterator(
                p,
                (0..p).map(|_| init.offset + init.spread * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
            )
        })
        .collect()
}

/// Weighted neighbour lists read off the Laplacian.
pub(crate) fn neighbor_lists(laplacian: &DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    let n = laplacian.nrows();
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i && laplacian[(i, j)] != 0.0).map(|j| (j, -laplacian[(i, j)])).collect())
        .collect()
}

pub(crate) fn bits_per_round(spec: &CompressorSpec, mode: BitAccounting, n: usize, edges: usize) -> u64 {
    match mode {
        BitAccounting::Broadcast => n as u64 * spec.bits_per_vector,
        BitAccounting::PerEdge => 2 * edges as u64 * spec.bits_per_vector,
    }
}

/// What one round cost and produced.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub k: u64,
    pub alpha: f64,
    pub bits: u64,
    pub evals: u64,
    /// The zeroth-order estimates `g_i` used in the round.
    pub grads: Vec<DVector<f64>>,
}

/// Something that advances agent states one round at a time.
pub trait Stepper {
    fn k(&self) -> u64;
    fn states(&self) -> &[AgentState];
    fn step(&mut self) -> Result<StepReport>;
}

/// The compressed algorithm on a fixed problem, topology and schedule.
pub struct Simulation<'a> {
    fam: &'a ProblemFamily,
    spec: CompressorSpec,
    sched: &'a Schedule,
    neighbors: Vec<Vec<(usize, f64)>>,
    states: Vec<AgentState>,
    rngs: Vec<AgentRngs>,
    k: u64,
    bits_per_round: u64,
    parallel: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(
        fam: &'a ProblemFamily,
        mix: &MixingMatrices,
        spec: CompressorSpec,
        sched: &'a Schedule,
        cfg: SimConfig,
    ) -> Result<Self> {
        let xs = initial_points(fam.n(), fam.p(), cfg.seed, cfg.init);
        Self::with_initial(fam, mix, spec, sched, cfg, xs)
    }

    /// Like [`Simulation::new`] with explicit starting points.
    pub fn with_initial(
        fam: &'a ProblemFamily,
        mix: &MixingMatrices,
        spec: CompressorSpec,
        sched: &'a Schedule,
        cfg: SimConfig,
        xs: Vec<DVector<f64>>,
    ) -> Result<Self> {
        check_shapes(fam, mix, &spec, sched, &xs)?;
        let neighbors = neighbor_lists(&mix.laplacian);
        let edges = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
        Ok(Simulation {
            fam,
            spec,
            sched,
            bits_per_round: bits_per_round(&spec, cfg.bits, fam.n(), edges),
            neighbors,
            states: xs.into_iter().map(AgentState::new).collect(),
            rngs: (0..fam.n()).map(|i| AgentRngs::new(cfg.seed, i)).collect(),
            k: 0,
            parallel: cfg.parallel,
        })
    }

    pub fn states_mut(&mut self) -> &mut [AgentState] {
        &mut self.states
    }
}

pub(crate) fn check_shapes(
    fam: &ProblemFamily,
    mix: &MixingMatrices,
    spec: &CompressorSpec,
    sched: &Schedule,
    xs: &[DVector<f64>],
) -> Result<()> {
    let (n, p) = (fam.n(), fam.p());
    if mix.n() != n {
        return Err(Error::param("graph", format!("graph has {} nodes but the problem has {n} agents", mix.n())));
    }
    if spec.p != p {
        return Err(Error::param("compressor", format!("built for p = {} but the problem has p = {p}", spec.p)));
    }
    if sched.n != n || sched.p != p {
        return Err(Error::param("schedule", "schedule was built for a different (n, p)"));
    }
    if sched.omega > 1.0 / spec.r * (1.0 + 1e-12) {
        return Err(Error::param("schedule.omega", format!("{} exceeds 1/r = {}", sched.omega, 1.0 / spec.r)));
    }
    if xs.len() != n || xs.iter().any(|x| x.len() != p) {
        return Err(Error::param("x0", "initial points do not match (n, p)"));
    }
    Ok(())
}

pub(crate) fn check_divergence(k: u64, states: &[AgentState]) -> Result<()> {
    for (i, s) in states.iter().enumerate() {
        let norm = s.x.norm();
        let finite = [&s.x, &s.v, &s.y, &s.z].iter().all(|v| v.iter().all(|t| t.is_finite()));
        if !finite || norm > DIVERGENCE_NORM {
            return Err(Error::Numerical(format!(
                "diverged at iteration {k}: agent {i} has |x| = {norm:e}"
            )));
        }
    }
    Ok(())
}

/// Compression and gradient estimation for one agent.
fn local_phase(
    agent: &crate::problems::Agent,
    spec: &CompressorSpec,
    state: &AgentState,
    rngs: &mut AgentRngs,
    mu: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let q = spec.compress(&(&state.x - &state.y), &mut rngs.dither);
    let xi = agent.sample_xi(&mut rngs.xi);
    let zeta = sample_unit_sphere(state.x.len(), &mut rngs.zeta);
    let g = two_point(agent, &state.x, mu, &zeta, &xi)?.grad;
    Ok((q, g))
}

#[derive(Clone, Copy)]
struct Coeffs {
    alpha: f64,
    beta: f64,
    gamma: f64,
    omega: f64,
}

/// Auxiliary, primal and dual updates of one agent from its local view.
fn agent_update(state: &mut AgentState, view: &NeighborView<'_>, g: &DVector<f64>, c: Coeffs) {
    let lq = view.laplacian_apply();
    let s = &state.z + &lq;
    state.y.axpy(c.omega, view.own, 1.0);
    state.z.axpy(c.omega, &lq, 1.0);
    let ab = c.alpha * c.beta;
    let ag = c.alpha * c.gamma;
    for j in 0..state.x.len() {
        state.x[j] = state.x[j] - ab * s[j] - c.alpha * (c.gamma * state.v[j] + g[j]);
        state.v[j] += ag * s[j];
    }
}

impl Stepper for Simulation<'_> {
    fn k(&self) -> u64 {
        self.k
    }

    fn states(&self) -> &[AgentState] {
        &self.states
    }

    fn step(&mut self) -> Result<StepReport> {
        let k = self.k;
        let n = self.fam.n();
        let mu = self.sched.mu(0, k);
        let (fam, spec) = (self.fam, &self.spec);
        let local = |(i, (st, rng)): (usize, (&AgentState, &mut AgentRngs))| local_phase(fam.agent(i), spec, st, rng, mu);
        let phase1: Vec<(DVector<f64>, DVector<f64>)> = if self.parallel {
            self.states.par_iter().zip(self.rngs.par_iter_mut()).enumerate().map(local).collect::<Result<_>>()?
        } else {
            self.states.iter().zip(self.rngs.iter_mut()).enumerate().map(local).collect::<Result<_>>()?
        };
        let (qs, grads): (Vec<_>, Vec<_>) = phase1.into_iter().unzip();

        let c = Coeffs {
            alpha: self.sched.alpha(k),
            beta: self.sched.beta(k),
            gamma: self.sched.gamma(k),
            omega: self.sched.omega,
        };
        let neighbors = &self.neighbors;
        let update = |(i, st): (usize, &mut AgentState)| {
            let view = NeighborView {
                own: &qs[i],
                neighbors: neighbors[i].iter().map(|&(j, w)| (w, &qs[j])).collect(),
            };
            agent_update(st, &view, &grads[i], c);
        };
        if self.parallel {
            self.states.par_iter_mut().enumerate().for_each(update);
        } else {
            self.states.iter_mut().enumerate().for_each(update);
        }
        self.k += 1;
        check_divergence(self.k, &self.states)?;
        Ok(StepReport {
            k,
            alpha: c.alpha,
            bits: self.bits_per_round,
            evals: 2 * n as u64,
            grads,
        })
    }
}

/// Network averages at one iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub x_bar: DVector<f64>,
    pub grad_norm_sq: f64,
    pub consensus_err: f64,
    pub opt_gap: f64,
}

pub fn mean_x(states: &[AgentState]) -> DVector<f64> {
    let p = states[0].x.len();
    states.iter().fold(DVector::zeros(p), |acc, s| acc + &s.x) / states.len() as f64
}

pub fn metrics(fam: &ProblemFamily, states: &[AgentState]) -> Metrics {
    let x_bar = mean_x(states);
    let n = states.len() as f64;
    Metrics {
        grad_norm_sq: fam.grad(&x_bar).norm_squared(),
        consensus_err: states.iter().map(|s| (&s.x - &x_bar).norm_squared()).sum::<f64>() / n,
        opt_gap: fam.f(&x_bar) - fam.f_star(),
        x_bar,
    }
}

/// One row of a run trace, describing iterate `x_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub k: u64,
    pub grad_norm_sq: f64,
    pub consensus_err: f64,
    pub opt_gap: f64,
    /// Bits sent up to and including round `k` (round `k` produces `x_{k+1}`).
    pub bits_cum: u64,
    pub fn_evals_cum: u64,
    pub lyapunov: Option<LyapunovSnapshot>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub records: Vec<Record>,
    /// Rounds actually completed.
    pub iterations: u64,
    /// `(1/T) Σ_{k<T} ‖∇f(x̄_k)‖²` over completed rounds.
    pub avg_grad_norm_sq: f64,
    pub final_opt_gap: f64,
    pub total_bits: u64,
    /// Set when the run was aborted.
    pub diverged: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub iterations: u64,
    pub record_lyapunov: bool,
    /// Record every `log_every`-th iterate (plus the last one).
    pub log_every: u64,
}

impl RunOptions {
    pub fn new(iterations: u64) -> Self {
        RunOptions {
            iterations,
            record_lyapunov: false,
            log_every: 1,
        }
    }
}

/// Runs the compressed algorithm from its default starting points.
pub fn run(
    fam: &ProblemFamily,
    mix: &MixingMatrices,
    spec: CompressorSpec,
    sched: &Schedule,
    cfg: SimConfig,
    opts: RunOptions,
) -> Result<RunTrace> {
    let mut sim = Simulation::new(fam, mix, spec, sched, cfg)?;
    Ok(drive(&mut sim, fam, mix, sched, opts))
}

/// Advances any [`Stepper`] and collects the trace.
pub fn drive<S: Stepper>(sim: &mut S, fam: &ProblemFamily, mix: &MixingMatrices, sched: &Schedule, opts: RunOptions) -> RunTrace {
    drive_with(sim, fam, mix, sched, opts, |_| {})
}

/// [`drive`], handing every record to `sink` as soon as it exists.
pub fn drive_with<S, F>(
    sim: &mut S,
    fam: &ProblemFamily,
    mix: &MixingMatrices,
    sched: &Schedule,
    opts: RunOptions,
    mut sink: F,
) -> RunTrace
where
    S: Stepper,
    F: FnMut(&Record),
{
    let stride = opts.log_every.max(1);
    let mut records = Vec::new();
    let mut bits_cum = 0u64;
    let mut evals_cum = 0u64;
    let mut grad_sum = 0.0;
    let mut diverged = None;
    let mut done = 0u64;
    let snapshot = |states: &[AgentState], k: u64| {
        opts.record_lyapunov.then(|| lyapunov(states, mix, fam, sched.beta(k), sched.gamma(k)))
    };
    for k in 0..opts.iterations {
        let logged = k % stride == 0;
        let m = metrics(fam, sim.states());
        grad_sum += m.grad_norm_sq;
        let lyap = if logged { snapshot(sim.states(), k) } else { None };
        match sim.step() {
            Ok(rep) => {
                bits_cum += rep.bits;
                evals_cum += rep.evals;
                done += 1;
            }
            Err(e) => {
                diverged = Some(e.to_string());
                break;
            }
        }
        if logged {
            let rec = Record {
                k,
                grad_norm_sq: m.grad_norm_sq,
                consensus_err: m.consensus_err,
                opt_gap: m.opt_gap,
                bits_cum,
                fn_evals_cum: evals_cum,
                lyapunov: lyap,
            };
            sink(&rec);
            records.push(rec);
        }
    }
    let final_opt_gap;
    if diverged.is_none() {
        let k = opts.iterations;
        let m = metrics(fam, sim.states());
        final_opt_gap = m.opt_gap;
        let rec = Record {
            k,
            grad_norm_sq: m.grad_norm_sq,
            consensus_err: m.consensus_err,
            opt_gap: m.opt_gap,
            bits_cum,
            fn_evals_cum: evals_cum,
            lyapunov: snapshot(sim.states(), k),
        };
        sink(&rec);
        records.push(rec);
    } else {
        final_opt_gap = f64::NAN;
    }
    RunTrace {
        records,
        iterations: done,
        avg_grad_norm_sq: if done > 0 { grad_sum / done as f64 } else { f64::NAN },
        final_opt_gap,
        total_bits: bits_cum,
        diverged,
    }
}
