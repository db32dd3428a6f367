//! Uncompressed primal-dual zeroth-order method, coded directly:
//!
//! ```text
//! x_i ← x_i − α(β Σ_j L_ij x_j + γ v_i + g_i)
//! v_i ← v_i + αγ Σ_j L_ij x_j
//! ```
//!
//! Used as an oracle for the compressed algorithm with the identity
//! compressor and `ω = 1`. It consumes the same `ξ` and `ζ` streams.

use nalgebra::DVector;

use super::{check_divergence, initial_points, neighbor_lists, AgentRngs, AgentState, SimConfig, StepReport, Stepper};
use crate::error::{Error, Result};
use crate::estimators::{sample_unit_sphere, two_point, StochasticOracle};
use crate::graph::MixingMatrices;
use crate::problems::ProblemFamily;

use super::Schedule;

pub struct UncompressedSimulation<'a> {
    fam: &'a ProblemFamily,
    sched: &'a Schedule,
    neighbors: Vec<Vec<(usize, f64)>>,
    states: Vec<AgentState>,
    rngs: Vec<AgentRngs>,
    k: u64,
    bits_per_vector: u64,
}

impl<'a> UncompressedSimulation<'a> {
    pub fn new(fam: &'a ProblemFamily, mix: &MixingMatrices, sched: &'a Schedule, cfg: SimConfig) -> Result<Self> {
        if mix.n() != fam.n() || sched.n != fam.n() || sched.p != fam.p() {
            return Err(Error::param("graph", "problem, graph and schedule sizes disagree"));
        }
        let xs = initial_points(fam.n(), fam.p(), cfg.seed, cfg.init);
        Ok(UncompressedSimulation {
            fam,
            sched,
            neighbors: neighbor_lists(&mix.laplacian),
            states: xs
                .into_iter()
                .map(|x| {
                    // no compression: the reference always equals x
                    let mut s = AgentState::new(x.clone());
                    s.y = x;
                    s
                })
                .collect(),
            rngs: (0..fam.n()).map(|i| AgentRngs::new(cfg.seed, i)).collect(),
            k: 0,
            bits_per_vector: 64 * fam.p() as u64,
        })
    }
}

impl Stepper for UncompressedSimulation<'_> {
    fn k(&self) -> u64 {
        self.k
    }

    fn states(&self) -> &[AgentState] {
        &self.states
    }

    fn step(&mut self) -> Result<StepReport> {
        let k = self.k;
        let (alpha, beta, gamma) = (self.sched.alpha(k), self.sched.beta(k), self.sched.gamma(k));
        let mu = self.sched.mu(0, k);
        let p = self.fam.p();
        let mut grads = Vec::with_capacity(self.states.len());
        for (i, st) in self.states.iter().enumerate() {
            let agent = self.fam.agent(i);
            let rngs = &mut self.rngs[i];
            let xi = agent.sample_xi(&mut rngs.xi);
            let zeta = sample_unit_sphere(p, &mut rngs.zeta);
            grads.push(two_point(agent, &st.x, mu, &zeta, &xi)?.grad);
        }
        let lx: Vec<DVector<f64>> = (0..self.states.len())
            .map(|i| {
                let mut acc = DVector::zeros(p);
                for &(j, w) in &self.neighbors[i] {
                    acc += (&self.states[i].x - &self.states[j].x) * w;
                }
                acc
            })
            .collect();
        for (i, st) in self.states.iter_mut().enumerate() {
            let dx = &lx[i] * beta + &st.v * gamma + &grads[i];
            st.x -= dx * alpha;
            st.v += &lx[i] * (alpha * gamma);
            st.y = st.x.clone();
            st.z = lx[i].clone();
        }
        self.k += 1;
        check_divergence(self.k, &self.states)?;
        Ok(StepReport {
            k,
            alpha,
            bits: self.states.len() as u64 * self.bits_per_vector,
            evals: 2 * self.states.len() as u64,
            grads,
        })
    }
}
