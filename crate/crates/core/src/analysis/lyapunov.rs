//! Lyapunov components of the primal-dual iteration.
//!
//! With `w = v + g⁰/γ` and `g⁰_i = ∇f_i(x̄)`:
//!
//! ```text
//! e1 = ½‖x‖²_E             e2 = ½ (β+γ)/γ ‖w‖²_F      e3 = xᵀ E F w
//! e4 = Σ f_i(x̄) − n f*     e5 = ‖x − y‖²
//! ```

use nalgebra::DVector;

use crate::algorithm::{mean_x, AgentState};
use crate::graph::MixingMatrices;
use crate::problems::ProblemFamily;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovSnapshot {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e5: f64,
}

impl LyapunovSnapshot {
    pub fn l1(&self) -> f64 {
        self.e1 + self.e2 + self.e3 + self.e4 + self.e5
    }

    pub fn l2(&self) -> f64 {
        self.e1 + self.e2 + self.e3 + self.e5
    }
}

/// `Σ_ij M_ij a_iᵀ b_j` for an `n×n` weight matrix.
fn weighted_inner(m: &nalgebra::DMatrix<f64>, a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = m[(i, j)];
            if w != 0.0 {
                total += w * a[i].dot(&b[j]);
            }
        }
    }
    total
}

/// `w_i = v_i + ∇f_i(x̄)/γ`.
pub fn dual_offset(states: &[AgentState], fam: &ProblemFamily, gamma: f64) -> Vec<DVector<f64>> {
    let x_bar = mean_x(states);
    states
        .iter()
        .enumerate()
        .map(|(i, s)| &s.v + fam.agent(i).grad(&x_bar) / gamma)
        .collect()
}

pub fn lyapunov(states: &[AgentState], mix: &MixingMatrices, fam: &ProblemFamily, beta: f64, gamma: f64) -> LyapunovSnapshot {
    let n = states.len() as f64;
    let x_bar = mean_x(states);
    let w = dual_offset(states, fam, gamma);
    let xs: Vec<DVector<f64>> = states.iter().map(|s| s.x.clone()).collect();
    let e1 = 0.5 * states.iter().map(|s| (&s.x - &x_bar).norm_squared()).sum::<f64>();
    let e2 = 0.5 * (beta + gamma) / gamma * mix.f_norm_sq(&w);
    let ef = &mix.centering * &mix.f;
    let e3 = weighted_inner(&ef, &xs, &w);
    let e4 = n * (fam.f(&x_bar) - fam.f_star());
    let e5 = states.iter().map(|s| (&s.x - &s.y).norm_squared()).sum::<f64>();
    LyapunovSnapshot { e1, e2, e3, e4, e5 }
}

/// `‖x‖²_E + ‖w‖²_F + ‖x − y‖²`, the quantity `L2` is compared against.
pub fn l2_hat(states: &[AgentState], mix: &MixingMatrices, fam: &ProblemFamily, gamma: f64) -> f64 {
    let x_bar = mean_x(states);
    let w = dual_offset(states, fam, gamma);
    states.iter().map(|s| (&s.x - &x_bar).norm_squared()).sum::<f64>()
        + mix.f_norm_sq(&w)
        + states.iter().map(|s| (&s.x - &s.y).norm_squared()).sum::<f64>()
}
