//! Synthetic heterogeneous objective families.
//!
//! Agent `i` owns
//! `f_i(x) = ½(x − c_i)ᵀA_i(x − c_i) + d_i + ρ_nc Σ_j sin²(x_j − c_ij)`
//! and observes it through `F_i(x, ξ) = d_i + (1 + η u)(f_i(x) − d_i) + ξᵀx`
//! with `ξ ~ N(0, σ²/p I)` and `u ~ U[−√3, √3]`. The gradient noise then has
//! variance exactly `η²‖∇f_i(x)‖² + σ²`.
//!
//! The heterogeneity level `ρ_h ∈ [0, 1]` shrinks the centers (and offsets)
//! toward their mean: `c_i = ū + ρ_h (u_i − ū)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::StochasticOracle;
use crate::rng::seeded;
use crate::stats::MeanSe;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[default]
    Quadratic,
    Nonconvex,
}

/// Whether agents draw their own Hessians or share one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    #[default]
    Independent,
    Shared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub kind: ProblemKind,
    pub n: usize,
    pub p: usize,
    pub rho_h: f64,
    pub spectrum_range: [f64; 2],
    pub noise_sigma: f64,
    /// Multiplicative noise level `η`; 0 gives the purely additive model.
    #[serde(default)]
    pub noise_eta: f64,
    #[serde(default)]
    pub rho_nc: f64,
    #[serde(default)]
    pub hessians: HessianMode,
    pub seed: u64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            kind: ProblemKind::Quadratic,
            n: 10,
            p: 20,
            rho_h: 1.0,
            spectrum_range: [0.5, 2.0],
            noise_sigma: 0.1,
            noise_eta: 0.0,
            rho_nc: 0.0,
            hessians: HessianMode::Independent,
            seed: 0,
        }
    }
}

impl FamilyParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("problem.n", "need at least one agent"));
        }
        if self.p == 0 {
            return Err(Error::param("problem.p", "dimension must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.rho_h) {
            return Err(Error::param("problem.rho_h", format!("{} is outside [0, 1]", self.rho_h)));
        }
        let [lo, hi] = self.spectrum_range;
        let lo_ok = match self.kind {
            ProblemKind::Quadratic => lo > 0.0,
            ProblemKind::Nonconvex => lo >= 0.0,
        };
        if !(lo_ok && hi >= lo && hi.is_finite()) {
            return Err(Error::param(
                "problem.spectrum_range",
                format!("[{lo}, {hi}] is not a valid range (quadratic families need lo > 0)"),
            ));
        }
        for (key, v) in [
            ("problem.noise_sigma", self.noise_sigma),
            ("problem.noise_eta", self.noise_eta),
            ("problem.rho_nc", self.rho_nc),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(key, format!("{v} must be a nonnegative number")));
            }
        }
        if self.kind == ProblemKind::Quadratic && self.rho_nc != 0.0 {
            return Err(Error::param("problem.rho_nc", "only nonconvex families carry a ripple"));
        }
        Ok(())
    }
}

/// One agent's local cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub d: f64,
    pub rho_nc: f64,
    pub noise_sigma: f64,
    pub noise_eta: f64,
    /// Smoothness of `f_i`: `ρ(A_i) + 2ρ_nc`.
    pub ell: f64,
}

/// A draw of the data randomness for one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentSample {
    pub xi: Option<DVector<f64>>,
    pub u: f64,
}

impl Agent {
    pub fn new(a: DMatrix<f64>, c: DVector<f64>, d: f64, rho_nc: f64, noise_sigma: f64, noise_eta: f64) -> Result<Self> {
        let p = c.len();
        if a.nrows() != p || a.ncols() != p {
            return Err(Error::param("agent.a", format!("expected a {p}x{p} matrix")));
        }
        if a.iter().chain(c.iter()).any(|v| !v.is_finite()) || !d.is_finite() {
            return Err(Error::param("agent", "non-finite entries"));
        }
        for i in 0..p {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * a[(i, j)].abs().max(1.0) {
                    return Err(Error::param("agent.a", "matrix is not symmetric"));
                }
            }
        }
        let eig = SymmetricEigen::new(a.clone()).eigenvalues;
        let lo = eig.min();
        let hi = eig.max();
        if lo < -1e-10 * hi.abs().max(1.0) {
            return Err(Error::param("agent.a", format!("matrix has negative eigenvalue {lo}")));
        }
        Ok(Agent {
            a,
            c,
            d,
            rho_nc,
            noise_sigma,
            noise_eta,
            ell: hi.max(0.0) + 2.0 * rho_nc,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn f(&self, x: &DVector<f64>) -> f64 {
        let r = x - &self.c;
        let mut v = 0.5 * r.dot(&(&self.a * &r)) + self.d;
        if self.rho_nc != 0.0 {
            v += self.rho_nc * r.iter().map(|t| t.sin().powi(2)).sum::<f64>();
        }
        v
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = x - &self.c;
        let mut g = &self.a * &r;
        if self.rho_nc != 0.0 {
            for (gj, rj) in g.iter_mut().zip(r.iter()) {
                *gj += self.rho_nc * (2.0 * rj).sin();
            }
        }
        g
    }

    /// `f_i* = d_i`, attained at `c_i`.
    pub fn f_star(&self) -> f64 {
        self.d
    }

    /// Smoothness of every realization `F_i(·, ξ)`.
    pub fn sample_smoothness(&self) -> f64 {
        (1.0 + SQRT3 * self.noise_eta) * self.ell
    }
}

impl StochasticOracle for Agent {
    type Sample = AgentSample;

    fn dim(&self) -> usize {
        self.c.len()
    }

    fn sample_xi<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentSample {
        let p = self.dim();
        let xi = (self.noise_sigma > 0.0).then(|| {
            let s = self.noise_sigma / (p as f64).sqrt();
            DVector::from_iterator(p, (0..p).map(|_| s * rng.sample::<f64, _>(StandardNormal)))
        });
        let u = if self.noise_eta > 0.0 {
            rng.random_range(-SQRT3..=SQRT3)
        } else {
            0.0
        };
        AgentSample { xi, u }
    }

    fn value(&self, x: &DVector<f64>, s: &AgentSample) -> f64 {
        let f = self.f(x);
        let mut v = if s.u != 0.0 {
            self.d + (1.0 + self.noise_eta * s.u) * (f - self.d)
        } else {
            f
        };
        if let Some(xi) = &s.xi {
            v += xi.dot(x);
        }
        v
    }

    fn true_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.grad(x))
    }

    fn sample_gradient(&self, x: &DVector<f64>, s: &AgentSample) -> Option<DVector<f64>> {
        let mut g = self.grad(x) * (1.0 + self.noise_eta * s.u);
        if let Some(xi) = &s.xi {
            g += xi;
        }
        Some(g)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.sample_smoothness())
    }
}

/// Global minimizer, minimum and P–L constant of the average cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub x_star: DVector<f64>,
    pub f_star: f64,
    /// `λ_min(Ā)` for quadratic families; unknown for nonconvex ones.
    pub nu: Option<f64>,
    /// False when `f*` comes from multi-start local search.
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct ProblemFamily {
    pub params: FamilyParams,
    pub agents: Vec<Agent>,
    a_bar: DMatrix<f64>,
    b_bar: DVector<f64>,
    const_bar: f64,
    reference: Reference,
}

/// Samples a family; deterministic in `params.seed`.
pub fn make_family(params: &FamilyParams) -> Result<ProblemFamily> {
    params.validate()?;
    let FamilyParams { n, p, rho_h, .. } = *params;
    let [lo, hi] = params.spectrum_range;
    let mut rng = seeded(params.seed);
    let hess_count = match params.hessians {
        HessianMode::Independent => n,
        HessianMode::Shared => 1,
    };
    let hessians: Vec<DMatrix<f64>> = (0..hess_count).map(|_| random_spd(p, lo, hi, &mut rng)).collect();
    let raw_centers: Vec<DVector<f64>> = (0..n)
        .map(|_| DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal))))
        .collect();
    let raw_offsets: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();

    let u_bar = raw_centers.iter().fold(DVector::zeros(p), |acc, u| acc + u) / n as f64;
    let d_bar = raw_offsets.iter().sum::<f64>() / n as f64;
    let agents = (0..n)
        .map(|i| {
            let c = &u_bar + (&raw_centers[i] - &u_bar) * rho_h;
            let d = d_bar + rho_h * (raw_offsets[i] - d_bar);
            Agent::new(
                hessians[i % hess_count].clone(),
                c,
                d.max(0.0),
                params.rho_nc,
                params.noise_sigma,
                params.noise_eta,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ProblemFamily::from_agents(params.clone(), agents)
}

/// `Q diag(λ) Qᵀ` with Haar-distributed `Q` and `λ ~ U[lo, hi]`.
fn random_spd<R: Rng + ?Sized>(p: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let lambdas: Vec<f64> = if hi > lo {
        let dist = Uniform::new_inclusive(lo, hi).expect("validated range");
        (0..p).map(|_| dist.sample(rng)).collect()
    } else {
        vec![lo; p]
    };
    let scaled = DMatrix::from_fn(p, p, |i, j| q[(i, j)] * lambdas[j]);
    let a = &scaled * q.transpose();
    // symmetrize away rounding
    (&a + a.transpose()) * 0.5
}

impl ProblemFamily {
    /// Builds a family from explicit agents and computes its global reference.
    pub fn from_agents(params: FamilyParams, agents: Vec<Agent>) -> Result<Self> {
        let n = agents.len();
        if n == 0 {
            return Err(Error::param("problem.n", "need at least one agent"));
        }
        let p = agents[0].dim();
        if agents.iter().any(|a| a.dim() != p) {
            return Err(Error::param("problem.p", "agents disagree on the dimension"));
        }
        let nf = n as f64;
        let mut a_bar = DMatrix::zeros(p, p);
        let mut b_bar = DVector::zeros(p);
        let mut const_bar = 0.0;
        for ag in &agents {
            a_bar += &ag.a;
            let ac = &ag.a * &ag.c;
            const_bar += 0.5 * ag.c.dot(&ac) + ag.d;
            b_bar += ac;
        }
        a_bar /= nf;
        b_bar /= nf;
        const_bar /= nf;
        let mut fam = ProblemFamily {
            params: FamilyParams { n, p, ..params },
            agents,
            a_bar,
            b_bar,
            const_bar,
            reference: Reference {
                x_star: DVector::zeros(p),
                f_star: 0.0,
                nu: None,
                exact: false,
            },
        };
        fam.reference = global_reference(&fam)?;
        Ok(fam)
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn p(&self) -> usize {
        self.params.p
    }

    pub fn agent(&self, i: usize) -> &Agent {
        &self.agents[i]
    }

    fn has_ripple(&self) -> bool {
        self.agents.iter().any(|a| a.rho_nc != 0.0)
    }

    /// `f(x) = (1/n) Σ f_i(x)`.
    pub fn f(&self, x: &DVector<f64>) -> f64 {
        let quad = 0.5 * x.dot(&(&self.a_bar * x)) - self.b_bar.dot(x) + self.const_bar;
        if !self.has_ripple() {
            return quad;
        }
        let ripple: f64 = self
            .agents
            .iter()
            .map(|ag| ag.rho_nc * x.iter().zip(ag.c.iter()).map(|(xj, cj)| (xj - cj).sin().powi(2)).sum::<f64>())
            .sum();
        quad + ripple / self.n() as f64
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = &self.a_bar * x - &self.b_bar;
        if self.has_ripple() {
            let nf = self.n() as f64;
            for ag in &self.agents {
                for j in 0..x.len() {
                    g[j] += ag.rho_nc * (2.0 * (x[j] - ag.c[j])).sin() / nf;
                }
            }
        }
        g
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn f_star(&self) -> f64 {
        self.reference.f_star
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.reference.x_star
    }

    pub fn nu(&self) -> Option<f64> {
        self.reference.nu
    }

    pub fn f_i_stars(&self) -> Vec<f64> {
        self.agents.iter().map(Agent::f_star).collect()
    }

    /// `ℓ`: the largest per-sample smoothness over agents.
    pub fn ell(&self) -> f64 {
        self.agents.iter().map(Agent::sample_smoothness).fold(0.0, f64::max)
    }

    pub fn sigma1(&self) -> f64 {
        self.params.noise_sigma
    }

    pub fn eta1(&self) -> f64 {
        self.params.noise_eta
    }

    pub fn a_bar(&self) -> &DMatrix<f64> {
        &self.a_bar
    }

    /// Mean of the centers.
    pub fn center_mean(&self) -> DVector<f64> {
        self.agents.iter().fold(DVector::zeros(self.p()), |acc, a| acc + &a.c) / self.n() as f64
    }

    /// `max_i ‖∇f_i(x*) − ∇f(x*)‖`.
    pub fn dispersion(&self) -> f64 {
        let xs = self.x_star();
        let g = self.grad(xs);
        self.agents.iter().map(|a| (a.grad(xs) - &g).norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = FamilyFile {
            params: self.params.clone(),
            agents: self
                .agents
                .iter()
                .map(|a| AgentFile {
                    a: a.a.transpose().as_slice().to_vec(),
                    c: a.c.as_slice().to_vec(),
                    d: a.d,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FamilyFile = serde_json::from_str(text)?;
        file.params.validate()?;
        let p = file.params.p;
        if file.agents.len() != file.params.n {
            return Err(Error::param("agents", format!("expected {} agents, found {}", file.params.n, file.agents.len())));
        }
        let agents = file
            .agents
            .into_iter()
            .map(|af| {
                if af.c.len() != p || af.a.len() != p * p {
                    return Err(Error::param("agents", format!("agent shapes do not match p = {p}")));
                }
                Agent::new(
                    DMatrix::from_row_slice(p, p, &af.a),
                    DVector::from_vec(af.c),
                    af.d,
                    file.params.rho_nc,
                    file.params.noise_sigma,
                    file.params.noise_eta,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        ProblemFamily::from_agents(file.params, agents)
    }
}

/// On-disk family layout: parameters plus, per agent, the Hessian in
/// row-major order, the center and the offset.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    params: FamilyParams,
    agents: Vec<AgentFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentFile {
    a: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

/// Closed form for quadratic families; multi-start descent otherwise.
pub fn global_reference(fam: &ProblemFamily) -> Result<Reference> {
    let quad_min = fam.a_bar.clone().cholesky().map(|ch| ch.solve(&fam.b_bar));
    if !fam.has_ripple() {
        let x_star = quad_min.ok_or_else(|| Error::Numerical("average Hessian is singular; no closed-form minimizer".into()))?;
        let nu = SymmetricEigen::new(fam.a_bar.clone()).eigenvalues.min();
        return Ok(Reference {
            f_star: fam.f(&x_star),
            x_star,
            nu: Some(nu),
            exact: true,
        });
    }
    let p = fam.p();
    let mut starts: Vec<DVector<f64>> = Vec::new();
    if let Some(x) = quad_min {
        starts.push(x);
    }
    starts.push(fam.center_mean());
    starts.extend(fam.agents.iter().map(|a| a.c.clone()));
    let mut rng = seeded(fam.params.seed ^ 0x5eed_f00d);
    let spread = fam
        .agents
        .iter()
        .map(|a| (&a.c - fam.center_mean()).norm())
        .fold(0.0, f64::max)
        .max(1.0);
    let centre = fam.center_mean();
    while starts.len() < 64 {
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        starts.push(&centre + z * (spread / (p as f64).sqrt()));
    }
    let lip = SymmetricEigen::new(fam.a_bar.clone()).eigenvalues.max()
        + 2.0 * fam.agents.iter().map(|a| a.rho_nc).sum::<f64>() / fam.n() as f64;
    let step = 1.0 / lip.max(1e-12);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mut x in starts {
        for _ in 0..20_000 {
            let g = fam.grad(&x);
            if g.norm_squared() < 1e-24 {
                break;
            }
            x.axpy(-step, &g, 1.0);
        }
        let v = fam.f(&x);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, x));
        }
    }
    let (f_star, x_star) = best.expect("at least one start");
    Ok(Reference {
        x_star,
        f_star,
        nu: None,
        exact: false,
    })
}

/// Outcome of one inequality family in [`assumption_check`].
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed `lhs / rhs`.
    pub worst_ratio: f64,
    /// Agent and point of the first violation.
    pub witness: Option<(usize, DVector<f64>)>,
}

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub smoothness: CheckResult,
    pub reverse_pl: CheckResult,
    pub variance: CheckResult,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.smoothness.passed && self.reverse_pl.passed && self.variance.passed
    }

    pub fn checks(&self) -> [&CheckResult; 3] {
        [&self.smoothness, &self.reverse_pl, &self.variance]
    }
}

struct Tracker {
    result: CheckResult,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Tracker {
            result: CheckResult {
                name,
                passed: true,
                worst_ratio: 0.0,
                witness: None,
            },
        }
    }

    fn record(&mut self, agent: usize, x: &DVector<f64>, lhs: f64, rhs: f64, slack: f64) {
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > slack { f64::INFINITY } else { 0.0 };
        self.result.worst_ratio = self.result.worst_ratio.max(ratio);
        if lhs > rhs + slack && self.result.passed {
            self.result.passed = false;
            self.result.witness = Some((agent, x.clone()));
        }
    }
}

/// Checks per-sample smoothness, the reverse P–L inequality and the noise
/// variance bound on random points. `ell_override` replaces the family's
/// smoothness constant (to test the checker itself).
pub fn assumption_check<R: Rng + ?Sized>(
    fam: &ProblemFamily,
    samples: usize,
    ell_override: Option<f64>,
    rng: &mut R,
) -> AssumptionReport {
    let p = fam.p();
    let centre = fam.center_mean();
    let mut smooth = Tracker::new("smoothness");
    let mut rpl = Tracker::new("reverse_pl");
    let mut var = Tracker::new("variance");
    let draw = |rng: &mut R| -> DVector<f64> {
        &centre + DVector::from_iterator(p, (0..p).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)))
    };
    for (i, ag) in fam.agents.iter().enumerate() {
        let ell = ell_override.unwrap_or(ag.sample_smoothness());
        let ell_f = ell_override.unwrap_or(ag.ell);
        // a pair along the top Hessian eigenvector pins the worst direction
        let eig = SymmetricEigen::new(ag.a.clone());
        let top = eig.eigenvalues.imax();
        let v_top = eig.eigenvectors.column(top).clone_owned();
        for s in 0..samples.max(1) {
            let x = draw(rng);
            let y = if s == 0 { &x + &v_top * 0.01 } else { draw(rng) };
            let xi = ag.sample_xi(rng);
            let gx = ag.sample_gradient(&x, &xi).expect("analytic");
            let gy = ag.sample_gradient(&y, &xi).expect("analytic");
            let lhs = (gx - gy).norm();
            let rhs = ell * (&x - &y).norm();
            smooth.record(i, &x, lhs, rhs, 1e-9 * rhs.max(1e-300));

            let g = ag.grad(&x);
            let lhs = 0.5 * g.norm_squared();
            let rhs = ell_f * (ag.f(&x) - ag.f_star());
            rpl.record(i, &x, lhs, rhs, 1e-9 * rhs.abs().max(1e-12));
        }
        let points = samples.clamp(1, 5);
        for _ in 0..points {
            let x = draw(rng);
            let g = ag.grad(&x);
            let errs: Vec<f64> = (0..400)
                .map(|_| {
                    let xi = ag.sample_xi(rng);
                    (ag.sample_gradient(&x, &xi).expect("analytic") - &g).norm_squared()
                })
                .collect();
            let est = MeanSe::from_samples(&errs);
            let bound = fam.eta1().powi(2) * g.norm_squared() + fam.sigma1().powi(2);
            var.record(i, &x, est.mean, bound, 4.0 * est.se + 1e-12 * bound.max(1.0));
        }
    }
    AssumptionReport {
        smoothness: smooth.result,
        reverse_pl: rpl.result,
        variance: var.result,
    }
}
