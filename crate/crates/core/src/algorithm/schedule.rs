//! Iteration-indexed parameters `α_k, β_k, γ_k, μ_k` and the mixing weight `ω`.
//!
//! In every mode `β_k = ε₁γ_k` and `α_kγ_k = ε₂`; only the stepsize differs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Constant `α = ε₃√n/√(pT)`.
    #[default]
    Nonconvex,
    /// Constant `α = (T + 1)^{−θ}`, no knowledge of the P–L constant.
    PlUnknown,
    /// Decaying `α_k = ε₂/(ε₄(k + m))`.
    PlKnown,
}

/// User-facing knobs; mode-specific ones are optional.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ScheduleParams {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: Option<f64>,
    pub eps4: Option<f64>,
    pub theta: Option<f64>,
    pub m: Option<f64>,
    pub kappa_mu: f64,
    pub nu: Option<f64>,
    pub omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub n: usize,
    pub p: usize,
    /// Horizon used by the constant-stepsize modes.
    pub horizon: u64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: Option<f64>,
    pub eps4: Option<f64>,
    pub theta: Option<f64>,
    pub m: Option<f64>,
    pub kappa_mu: f64,
    pub nu: Option<f64>,
    pub omega: f64,
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(key, format!("{v} must be a positive number")))
    }
}

fn required(key: &str, v: Option<f64>) -> Result<f64> {
    positive(key, v.ok_or_else(|| Error::param(key, "required by the selected schedule mode"))?)
}

/// Validates the parameters and fixes `ω` (default `1/r`).
pub fn make_schedule(mode: ScheduleMode, n: usize, p: usize, horizon: u64, params: ScheduleParams, r: f64) -> Result<Schedule> {
    if n == 0 || p == 0 {
        return Err(Error::param("schedule", "n and p must be positive"));
    }
    if horizon == 0 {
        return Err(Error::param("schedule.T", "horizon must be at least 1"));
    }
    let eps1 = positive("schedule.eps1", params.eps1)?;
    let eps2 = positive("schedule.eps2", params.eps2)?;
    let kappa_mu = positive("schedule.kappa_mu", params.kappa_mu)?;
    let r = positive("compressor.r", r)?;
    let omega = match params.omega {
        None => 1.0 / r,
        Some(w) => {
            positive("schedule.omega", w)?;
            if w > (1.0 / r) * (1.0 + 1e-12) {
                return Err(Error::param("schedule.omega", format!("{w} exceeds 1/r = {}", 1.0 / r)));
            }
            w
        }
    };
    let mut sched = Schedule {
        mode,
        n,
        p,
        horizon,
        eps1,
        eps2,
        eps3: params.eps3,
        eps4: params.eps4,
        theta: params.theta,
        m: params.m,
        kappa_mu,
        nu: params.nu,
        omega,
    };
    match mode {
        ScheduleMode::Nonconvex => {
            required("schedule.eps3", params.eps3)?;
        }
        ScheduleMode::PlUnknown => {
            let theta = params.theta.ok_or_else(|| Error::param("schedule.theta", "required in pl_unknown mode"))?;
            if !(theta > 0.5 && theta < 1.0) {
                return Err(Error::param("schedule.theta", format!("{theta} is outside the open interval (0.5, 1)")));
            }
        }
        ScheduleMode::PlKnown => {
            let nu = required("schedule.nu", params.nu)?;
            let eps4 = required("schedule.eps4", params.eps4)?;
            let m = required("schedule.m", params.m)?;
            if eps4 >= nu * eps2 / 4.0 {
                return Err(Error::param(
                    "schedule.eps4",
                    format!("{eps4} must be below nu*eps2/4 = {}", nu * eps2 / 4.0),
                ));
            }
            sched.m = Some(m);
        }
    }
    Ok(sched)
}

impl Schedule {
    pub fn alpha(&self, k: u64) -> f64 {
        match self.mode {
            ScheduleMode::Nonconvex => {
                self.eps3.unwrap_or(f64::NAN) * (self.n as f64).sqrt() / ((self.p as f64) * self.horizon as f64).sqrt()
            }
            ScheduleMode::PlUnknown => (self.horizon as f64 + 1.0).powf(-self.theta.unwrap_or(f64::NAN)),
            ScheduleMode::PlKnown => {
                self.eps2 / (self.eps4.unwrap_or(f64::NAN) * (k as f64 + self.m.unwrap_or(f64::NAN)))
            }
        }
    }

    pub fn gamma(&self, k: u64) -> f64 {
        self.eps2 / self.alpha(k)
    }

    pub fn beta(&self, k: u64) -> f64 {
        self.eps1 * self.gamma(k)
    }

    /// Exploration radius `κ_μ √(pα_k)/√(n + p)`, the same for every agent.
    pub fn mu(&self, _agent: usize, k: u64) -> f64 {
        self.kappa_mu * (self.p as f64 * self.alpha(k)).sqrt() / ((self.n + self.p) as f64).sqrt()
    }

    /// `ϑ = νε₂/(2ε₄)` in the known-constant mode.
    pub fn vartheta(&self) -> Option<f64> {
        match self.mode {
            ScheduleMode::PlKnown => Some(self.nu? * self.eps2 / (2.0 * self.eps4?)),
            _ => None,
        }
    }
}
