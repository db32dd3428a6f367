//! The constants that appear in the convergence analysis.
//!
//! Names follow the analysis: `eps*` are tuning parameters, `ve*` the
//! varepsilon family, `a*`/`b6`/`c*`/`d*` the coefficient families and
//! `kappa*` the admissibility thresholds. A trailing `t` marks the tilde
//! variants and `_prime` the primed ones. Formulas are evaluated as written;
//! `ci` abbreviates `1 + 1/c₁`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantsInput {
    /// `ρ(L)`.
    pub rho: f64,
    /// `ρ₂(L)`.
    pub rho2: f64,
    pub ell: f64,
    pub eta1: f64,
    /// Never defined by the analysis; treated as an input, default 0.
    pub eta2: f64,
    pub sigma1: f64,
    pub delta: f64,
    pub r: f64,
    pub omega: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub p: usize,
    pub n: usize,
    pub kappa_mu: f64,
    /// Arbitrary positive offset in `κ_m`; default 1.
    pub kappa_m_hat: f64,
    pub eps4: Option<f64>,
    pub theta: Option<f64>,
    pub nu: Option<f64>,
    pub f_star: Option<f64>,
    pub f_i_stars: Option<Vec<f64>>,
    /// Bound on the averaged optimality gap; only used by `ve15`.
    pub lbar: Option<f64>,
}

impl ConstantsInput {
    /// Required fields with the optional ones left empty.
    #[allow(clippy::too_many_arguments)]
    pub fn new(rho: f64, rho2: f64, ell: f64, delta: f64, r: f64, omega: f64, eps1: f64, eps2: f64, p: usize, n: usize) -> Self {
        ConstantsInput {
            rho,
            rho2,
            ell,
            eta1: 0.0,
            eta2: 0.0,
            sigma1: 0.0,
            delta,
            r,
            omega,
            eps1,
            eps2,
            p,
            n,
            kappa_mu: 0.1,
            kappa_m_hat: 1.0,
            eps4: None,
            theta: None,
            nu: None,
            f_star: None,
            f_i_stars: None,
            lbar: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = |key: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(key, format!("{v} must be positive")))
            }
        };
        let nonneg = |key: &str, v: f64| -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(key, format!("{v} must be nonnegative")))
            }
        };
        pos("rho", self.rho)?;
        pos("rho2", self.rho2)?;
        if self.rho2 > self.rho * (1.0 + 1e-12) {
            return Err(Error::param("rho2", format!("{} exceeds rho = {}", self.rho2, self.rho)));
        }
        pos("ell", self.ell)?;
        pos("delta", self.delta)?;
        if self.delta > 1.0 {
            return Err(Error::param("delta", format!("{} exceeds 1", self.delta)));
        }
        pos("r", self.r)?;
        pos("omega", self.omega)?;
        pos("eps1", self.eps1)?;
        pos("eps2", self.eps2)?;
        pos("kappa_mu", self.kappa_mu)?;
        pos("kappa_m_hat", self.kappa_m_hat)?;
        nonneg("eta1", self.eta1)?;
        nonneg("eta2", self.eta2)?;
        nonneg("sigma1", self.sigma1)?;
        if self.p == 0 || self.n == 0 {
            return Err(Error::param("p", "p and n must be positive"));
        }
        if let Some(e4) = self.eps4 {
            pos("eps4", e4)?;
        }
        if let Some(nu) = self.nu {
            pos("nu", nu)?;
        }
        if let Some(t) = self.theta {
            pos("theta", t)?;
        }
        Ok(())
    }
}

/// Every constant, in one place. Entries that need an optional input are
/// `None` when it is missing.
#[derive(Clone, Debug, PartialEq)]
pub struct Constants {
    pub delta0: f64,
    pub c1: f64,
    pub c2: f64,
    pub ci: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub ve0: f64,
    pub ve1: f64,
    pub ve2: f64,
    pub ve3: f64,
    pub ve4: f64,
    pub ve5: f64,
    pub ve6: f64,
    pub ve7: f64,
    pub ve8: f64,
    pub ve9: f64,
    pub ve10: f64,
    pub ve11: Option<f64>,
    pub ve12: f64,
    pub ve13: f64,
    pub ve14: f64,
    pub ve15: Option<f64>,
    pub ve9t: f64,
    pub ve12t: f64,
    pub b6: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: Option<f64>,
    pub a5: f64,
    pub a5_prime: f64,
    pub a6: f64,
    pub a7: f64,
    pub a8: Option<f64>,
    pub a9: f64,
    pub a10: Option<f64>,
    pub a11: f64,
    pub a12: Option<f64>,
    pub a4t: f64,
    pub a5t: f64,
    pub a5t_prime: f64,
    pub a8t: f64,
    pub a10t: f64,
    pub a12t: f64,
    pub d1: f64,
    pub d1t: f64,
    pub sigma2_check_sq: f64,
    pub kappa0: f64,
    pub kappa0t: f64,
    pub kappa3_lo: f64,
    pub kappa3_hi: f64,
    pub kappa_tt: f64,
    pub kappa_t: Option<f64>,
    pub kappa_m: Option<f64>,
    /// Inputs that were missing and replaced by a default.
    pub flags: Vec<String>,
}

/// `max{13/(2ρ₂), ρ₂}`.
pub fn kappa1(rho2: f64) -> f64 {
    (13.0 / (2.0 * rho2)).max(rho2)
}

/// Positive root of `a₉ε² + ε³ = target`, by bisection.
pub fn cubic_root(a9: f64, target: f64) -> f64 {
    let g = |e: f64| a9 * e * e + e * e * e - target;
    let mut lo = 0.0;
    let mut hi = target.cbrt().max(1e-300);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `(κ̲₃, κ̄₃)`: roots of `a₉ε² + ε³ = 1/4` and `= 3/4`.
pub fn admissible_eps3(a9: f64) -> (f64, f64) {
    (cubic_root(a9, 0.25), cubic_root(a9, 0.75))
}

/// `κ₂(ε₁)`; ignores `inp.eps2`.
pub fn kappa2(inp: &ConstantsInput) -> Result<f64> {
    inp.validate()?;
    let d = Dep::new(inp);
    Ok(d.kappa2())
}

/// Quantities that depend only on `(graph, compressor, ε₁)`.
struct Dep {
    rho: f64,
    rho2: f64,
    ell: f64,
    e1: f64,
    delta0: f64,
    c1: f64,
    c2: f64,
    ci: f64,
    ve3: f64,
    ve4: f64,
    ve13: f64,
    ve14: f64,
}

impl Dep {
    fn new(inp: &ConstantsInput) -> Self {
        let (rho, rho2, ell, e1) = (inp.rho, inp.rho2, inp.ell, inp.eps1);
        let delta0 = crate::compressors::delta0(inp.r, inp.delta);
        let c1 = inp.delta * inp.omega * inp.r / 2.0;
        let c2 = c1 + 2.0 * c1 * c1;
        let ci = 1.0 + 1.0 / c1;
        Dep {
            rho,
            rho2,
            ell,
            e1,
            delta0,
            c1,
            c2,
            ci,
            ve3: (2.0 * rho2 * e1 - 13.0) / 4.0,
            ve4: (3.0 + 4.0 * ci) * rho * rho * e1 * e1 - rho2 * e1 + rho + 2.0 * e1 * e1 + 2.0 * e1 + 4.0,
            ve13: 0.5 * rho * delta0 * e1 + 2.0 * delta0 + rho * delta0,
            ve14: (3.0 * rho * rho + 4.0 * ci * rho * rho + 2.0) * delta0 * e1 * e1
                + (2.0 - rho2) * delta0 * e1
                + (3.0 + rho * ell * ell) * delta0,
        }
    }

    fn kappa2(&self) -> f64 {
        let root = if self.ve14 > 0.0 {
            ((self.ve13 * self.ve13 + 4.0 * self.ve14 * self.c2).sqrt() - self.ve13) / (2.0 * self.ve14)
        } else if self.ve13 > 0.0 {
            self.c2 / self.ve13
        } else {
            // no compression error: the term imposes nothing
            f64::INFINITY
        };
        (self.ve3 / self.ve4)
            .min((1.0 / self.rho) / (20.0 + 32.0 * self.ci))
            .min(root)
            .min(8.0)
    }
}

/// Evaluates the full roster.
pub fn constants(inp: &ConstantsInput) -> Result<Constants> {
    inp.validate()?;
    let d = Dep::new(inp);
    let Dep {
        rho,
        rho2,
        ell,
        e1,
        delta0,
        c1,
        c2,
        ci,
        ve3,
        ve4,
        ve13,
        ve14,
    } = d;
    let e2 = inp.eps2;
    let p = inp.p as f64;
    let n = inp.n as f64;
    let eta1s = 1.0 + inp.eta1 * inp.eta1;
    let eta2s = 1.0 + inp.eta2 * inp.eta2;
    let s1 = inp.sigma1 * inp.sigma1;
    let l2 = ell * ell;
    let l4 = l2 * l2;
    let ir2 = 1.0 / rho2;
    let ir22 = ir2 * ir2;
    let mut flags = Vec::new();
    if inp.eta2 == 0.0 {
        flags.push("eta2 defaulted to 0".to_string());
    }

    let sigma2_check_sq = match (inp.f_star, &inp.f_i_stars) {
        (Some(fs), Some(fis)) if !fis.is_empty() => {
            2.0 * ell * fs - 2.0 * ell / fis.len() as f64 * fis.iter().sum::<f64>()
        }
        _ => {
            flags.push("sigma2_check_sq defaulted to 0 (f* or f_i* missing)".to_string());
            0.0
        }
    };
    let sc = sigma2_check_sq;

    let kappa1 = kappa1(rho2);
    let kappa2 = d.kappa2();

    let ve1 = (1.0 + e1) * ir2;
    let ve2 = 0.5 * rho * e1 * e2
        + (2.0 + rho) * e2
        + (3.0 * rho * rho + 4.0 * ci * rho * rho + 2.0) * e1 * e1 * e2 * e2
        + (2.0 - rho2) * e1 * e2 * e2
        + (3.0 + rho) * e2 * e2;
    let ve5 = 3.0 * e1 * e1 * e2 * e2 * rho * rho + (e1 * e2 * e2 + e2 * e2) * rho - 0.5 * e1 * e2 * rho2
        + e1 * e1 * e2 * e2
        + 2.0 * e1 * e2 * e2
        + e2 * e2
        + e1 * e2
        + 0.5;
    let ve6 = ((1.0 + e1 * rho2) / 2.0).max((1.0 + e1) / 2.0 + 1.0 / (2.0 * e1 * rho2 * rho2));
    let ve7 = (e1 * rho2 - 1.0) / (2.0 * e1 * rho2);
    let ve8 = (1.0 + e1) * ir2 + ir22;
    let ve9 = 4.0 * (ir22 + 4.0 * (e1 + 1.0).powi(2) * ir2) * l4 * e2
        + (1.0 + 2.0 * l2) * e2 / (2.0 * p * eta1s)
        + (5.0 / (p * eta1s) + 16.0) * l2 * e2 * e2
        + 4.0 * (2.0 * ir22 + 2.0 * (e1 + 1.0) * ir2 + 2.0 * ve8 + 2.0 * ve1 + 3.0) * l4 * e2 * e2;
    let ve10 = rho * e1 * e2 + 3.0 * rho * e2 * e2 + e1 + e2 + 1.0;
    let ve11 = inp.eps4.map(|e4| 3.0 * e4 / (2.0 * e2 * e2) * (ve8 + ve1));
    let ve12 = 10.0
        + 16.0 * ci
        + ell
        + ((4.0 * (e1 + 1.0).powi(2) + 2.0 * e1 * e2 + 2.0 * e2) * ir2 + ir22) / e2 * l2
        + (3.0 + 2.0 * ir22 + 2.0 * ve8 + 2.0 * ve1) * l2;
    let ve9t = 4.0 * (ir22 + 2.0 * (e1 + 1.0).powi(2) * ir2) * l4 * e2
        + 4.0 * (2.0 * ir22 + (e1 + 1.0) * ir2 + 2.0) * l4 * e2 * e2;
    let ve12t = 6.0
        + 16.0 * ci
        + ell
        + ir22 / e2 * l2
        + (2.0 * ir22 + (2.0 * (e1 + 1.0).powi(2) + 2.0 * e1 * e2 + e2) / e2 * ir2 + 2.0) * l2;
    let b6 = e1 * e1 * e2 * e2 + 2.0 * e1 * e2 * e2 + e2 * e2 + e1 * e2
        + (e1 * e2 * e2 + e2 * e2 + 0.5 * e1 * e2 + e2) * rho
        + 3.0 * e1 * e1 * e2 * e2 * rho * rho;

    let a1 = 0.5 * (ve3 * e2 - ve4 * e2 * e2);
    let a2 = e2 / 16.0 - (1.25 + 2.0 * ci) * rho * e2 * e2;
    let a3 = 0.5 * c2 - 0.5 * delta0 * ve2;
    let a4 = ve11.map(|v11| 2.0 * ve12 * s1 + v11 * sc / p + 4.0 * eta1s * ve12 * sc);
    let a5 = l2 * (((29.0 + 16.0 / c1) * e2 + 3.5) / p + 0.25);
    let a6 = 2.0 * ir2 / e2;
    let a7 = 2.0 * (s1 + 2.0 * eta1s * sc) * ell;
    let a8 = ve11.map(|v11| 2.0 * ell * (v11 / p + 4.0 * eta1s * ve12));
    let a9 = 8.0 * eta1s * l2;
    let a10 = a8.map(|a8| 2.0 * l2 * a8 / a1);
    let a11 = a7 + l2 * inp.kappa_mu * inp.kappa_mu;
    let a12 = a4.map(|a4| 2.0 * l2 * (a4 + a5 * inp.kappa_mu * inp.kappa_mu) / a1);
    let a4t = 2.0 * (s1 + 2.0 * eta1s * sc) * ve12t;
    let a5t = l2 * (((24.0 + 16.0 / c1) * e2 + 2.5) / p + 0.25);
    let a8t = 8.0 * eta1s * ell * ve12t;
    let a10t = 2.0 * l2 * a8t / a1;
    let a12t = 2.0 * l2 * (a4t + a5t * inp.kappa_mu * inp.kappa_mu) / a1;

    let ve0 = (1.0 + 2.5 * l2)
        .max((8.0 + 16.0 * ci + 4.0 * p * eta1s * eta2s * (6.0 + 16.0 * ci + ell) + 2.0 * a6).sqrt() * ell)
        .max(8.0 * ir2)
        .max(4.0 * p * eta1s * e2 * ell);
    let a5_prime = a5 + l2 * 2.0 * a6 * e2 / (ve0 * p);
    let a5t_prime = a5t + l2 * 2.0 * a6 * e2 / (ve0 * p);

    let d1 = a1.min(a2).min(a3) / ve6;
    let d1t = a1.min(2.0 * a2).min(2.0 * a3) / ve6;

    let kappa0 = ve0
        .max(2.0 * ve5 / a1)
        .max(ve10 / (2.0 * a2))
        .max(if delta0 == 0.0 { 0.0 } else { delta0 * b6 / a3 })
        .max(p * e2 * ve12);
    let kappa0t = ve0.max((p * eta1s * ve9t / a1).cbrt()).max(p * e2 * ve12t);
    let (kappa3_lo, kappa3_hi) = admissible_eps3(a9);
    let kappa_tt = (1.0 / (a1 * a1)).max(a10t * a10t).max(a12t * a12t);
    let kappa_t = inp.theta.map(|th| {
        (kappa0t / e2)
            .powf(1.0 / th)
            .max((1.0 / a1).powf(1.0 / th))
            .max((4.0 * a9 * p / n).powf(1.0 / (2.0 * th - 1.0)))
            .max((4.0 * a10t * p).powf(1.0 / (3.0 * th - 1.0)))
            .max((a12t * p).powf(1.0 / (3.0 * th - 1.0)))
    });
    let kappa_m = match (inp.eps4, inp.nu, a10, a12) {
        (Some(e4), Some(nu), Some(a10), Some(a12)) => Some(
            (kappa0 / e4)
                .max(e2 / (a1 * e4))
                .max(4.0 * a9 * e2 * e2 / (e4 * e4) * p / n + 1.0)
                .max((2.0 * a10 * e2.powi(3) * p / e4.powi(3)).sqrt() + 1.0)
                .max((a12 * e2.powi(3) * p / (2.0 * e4.powi(3))).sqrt() + 1.0)
                .max(e2 / (2.0 * nu * e4) + inp.kappa_m_hat),
        ),
        _ => None,
    };
    let ve15 = match (inp.eps4, inp.nu, inp.lbar) {
        (Some(e4), Some(nu), Some(lbar)) => {
            Some(4.0 * e2 * e2 * (a9 * lbar + a7 + l2 * inp.kappa_mu * inp.kappa_mu) / (e4 * e4 * (nu * e2 / (2.0 * e4) - 1.0)))
        }
        _ => None,
    };

    Ok(Constants {
        delta0,
        c1,
        c2,
        ci,
        kappa1,
        kappa2,
        ve0,
        ve1,
        ve2,
        ve3,
        ve4,
        ve5,
        ve6,
        ve7,
        ve8,
        ve9,
        ve10,
        ve11,
        ve12,
        ve13,
        ve14,
        ve15,
        ve9t,
        ve12t,
        b6,
        a1,
        a2,
        a3,
        a4,
        a5,
        a5_prime,
        a6,
        a7,
        a8,
        a9,
        a10,
        a11,
        a12,
        a4t,
        a5t,
        a5t_prime,
        a8t,
        a10t,
        a12t,
        d1,
        d1t,
        sigma2_check_sq,
        kappa0,
        kappa0t,
        kappa3_lo,
        kappa3_hi,
        kappa_tt,
        kappa_t,
        kappa_m,
        flags,
    })
}

impl Constants {
    /// `(name, value)` pairs in a fixed order; missing entries are `None`.
    pub fn roster(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("delta0", Some(self.delta0)),
            ("c1", Some(self.c1)),
            ("c2", Some(self.c2)),
            ("kappa1", Some(self.kappa1)),
            ("kappa2", Some(self.kappa2)),
            ("kappa0", Some(self.kappa0)),
            ("kappa0_tilde", Some(self.kappa0t)),
            ("kappa3_lower", Some(self.kappa3_lo)),
            ("kappa3_upper", Some(self.kappa3_hi)),
            ("kappa_T_tilde", Some(self.kappa_tt)),
            ("kappa_T", self.kappa_t),
            ("kappa_m", self.kappa_m),
            ("varepsilon0", Some(self.ve0)),
            ("varepsilon1", Some(self.ve1)),
            ("varepsilon2", Some(self.ve2)),
            ("varepsilon3", Some(self.ve3)),
            ("varepsilon4", Some(self.ve4)),
            ("varepsilon5", Some(self.ve5)),
            ("varepsilon6", Some(self.ve6)),
            ("varepsilon7", Some(self.ve7)),
            ("varepsilon8", Some(self.ve8)),
            ("varepsilon9", Some(self.ve9)),
            ("varepsilon10", Some(self.ve10)),
            ("varepsilon11", self.ve11),
            ("varepsilon12", Some(self.ve12)),
            ("varepsilon13", Some(self.ve13)),
            ("varepsilon14", Some(self.ve14)),
            ("varepsilon15", self.ve15),
            ("varepsilon9_tilde", Some(self.ve9t)),
            ("varepsilon12_tilde", Some(self.ve12t)),
            ("b6", Some(self.b6)),
            ("a1", Some(self.a1)),
            ("a2", Some(self.a2)),
            ("a3", Some(self.a3)),
            ("a4", self.a4),
            ("a5", Some(self.a5)),
            ("a5_prime", Some(self.a5_prime)),
            ("a6", Some(self.a6)),
            ("a7", Some(self.a7)),
            ("a8", self.a8),
            ("a9", Some(self.a9)),
            ("a10", self.a10),
            ("a11", Some(self.a11)),
            ("a12", self.a12),
            ("a4_tilde", Some(self.a4t)),
            ("a5_tilde", Some(self.a5t)),
            ("a5_tilde_prime", Some(self.a5t_prime)),
            ("a8_tilde", Some(self.a8t)),
            ("a10_tilde", Some(self.a10t)),
            ("a12_tilde", Some(self.a12t)),
            ("d1", Some(self.d1)),
            ("d1_tilde", Some(self.d1t)),
            ("sigma2_check_sq", Some(self.sigma2_check_sq)),
        ]
    }

    /// `ε₁ > κ₁` and `0 < ε₂ < κ₂`.
    pub fn admissible(&self, inp: &ConstantsInput) -> bool {
        inp.eps1 > self.kappa1 && inp.eps2 > 0.0 && inp.eps2 < self.kappa2
    }
}
