//! Zeroth-order gradient estimators.
//!
//! All estimators evaluate the stochastic cost `F(·, ξ)` at a shared base
//! point once and reuse it across directions, so the call counts are
//! two-point `2`, coordinate-wise `p + 1`, Gaussian `m + 1`.

use std::cell::Cell;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::stats::MeanSe;

/// A stochastic cost `F(x, ξ)` whose expectation over `ξ` is `f(x)`.
pub trait StochasticOracle {
    type Sample;

    fn dim(&self) -> usize;

    fn sample_xi<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Sample;

    fn value(&self, x: &DVector<f64>, xi: &Self::Sample) -> f64;

    /// `∇f(x)`, when known analytically.
    fn true_gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// `∇ₓF(x, ξ)`, when known analytically.
    fn sample_gradient(&self, _x: &DVector<f64>, _xi: &Self::Sample) -> Option<DVector<f64>> {
        None
    }

    /// Smoothness constant of `F(·, ξ)`.
    fn smoothness(&self) -> Option<f64> {
        None
    }
}

impl<O: StochasticOracle + ?Sized> StochasticOracle for &O {
    type Sample = O::Sample;
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_xi<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Sample {
        (**self).sample_xi(rng)
    }
    fn value(&self, x: &DVector<f64>, xi: &Self::Sample) -> f64 {
        (**self).value(x, xi)
    }
    fn true_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).true_gradient(x)
    }
    fn sample_gradient(&self, x: &DVector<f64>, xi: &Self::Sample) -> Option<DVector<f64>> {
        (**self).sample_gradient(x, xi)
    }
    fn smoothness(&self) -> Option<f64> {
        (**self).smoothness()
    }
}

/// Deterministic oracle built from closures; handy for fixtures.
pub struct FnOracle<F, G = fn(&DVector<f64>) -> DVector<f64>> {
    pub dim: usize,
    pub f: F,
    pub grad: Option<G>,
    pub ell: Option<f64>,
}

impl<F> FnOracle<F>
where
    F: Fn(&DVector<f64>) -> f64,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOracle {
            dim,
            f,
            grad: None,
            ell: None,
        }
    }
}

impl<F, G> FnOracle<F, G>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    pub fn with_gradient(dim: usize, f: F, grad: G, ell: f64) -> Self {
        FnOracle {
            dim,
            f,
            grad: Some(grad),
            ell: Some(ell),
        }
    }
}

impl<F, G> StochasticOracle for FnOracle<F, G>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    type Sample = ();
    fn dim(&self) -> usize {
        self.dim
    }
    fn sample_xi<R: Rng + ?Sized>(&self, _rng: &mut R) {}
    fn value(&self, x: &DVector<f64>, _xi: &()) -> f64 {
        (self.f)(x)
    }
    fn true_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.grad.as_ref().map(|g| g(x))
    }
    fn sample_gradient(&self, x: &DVector<f64>, _xi: &()) -> Option<DVector<f64>> {
        self.true_gradient(x)
    }
    fn smoothness(&self) -> Option<f64> {
        self.ell
    }
}

/// Wraps an oracle and counts `value` calls.
pub struct CountingOracle<O> {
    inner: O,
    calls: Cell<u64>,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn reset(&self) {
        self.calls.set(0);
    }
}

impl<O: StochasticOracle> StochasticOracle for CountingOracle<O> {
    type Sample = O::Sample;
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample_xi<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Sample {
        self.inner.sample_xi(rng)
    }
    fn value(&self, x: &DVector<f64>, xi: &Self::Sample) -> f64 {
        self.calls.set(self.calls.get() + 1);
        self.inner.value(x, xi)
    }
    fn true_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.inner.true_gradient(x)
    }
    fn sample_gradient(&self, x: &DVector<f64>, xi: &Self::Sample) -> Option<DVector<f64>> {
        self.inner.sample_gradient(x, xi)
    }
    fn smoothness(&self) -> Option<f64> {
        self.inner.smoothness()
    }
}

/// A gradient estimate and the number of oracle evaluations it cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub grad: DVector<f64>,
    pub evals: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EstimatorMode {
    TwoPoint,
    CoordinateWise,
    GaussianMulti { m: usize, normalize: bool },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub mu: f64,
    pub mode: EstimatorMode,
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::param("mu", format!("{} must be positive", self.mu)));
        }
        if let EstimatorMode::GaussianMulti { m: 0, .. } = self.mode {
            return Err(Error::param("m_k", "at least one direction is required"));
        }
        Ok(())
    }

    /// Runs the configured estimator; directions are drawn from `rng`.
    pub fn estimate<O, R>(&self, oracle: &O, x: &DVector<f64>, xi: &O::Sample, rng: &mut R) -> Result<Estimate>
    where
        O: StochasticOracle,
        R: Rng + ?Sized,
    {
        self.validate()?;
        match self.mode {
            EstimatorMode::TwoPoint => {
                let zeta = sample_unit_sphere(oracle.dim(), rng);
                two_point(oracle, x, self.mu, &zeta, xi)
            }
            EstimatorMode::CoordinateWise => coordinate_wise(oracle, x, self.mu, xi),
            EstimatorMode::GaussianMulti { m, normalize } => gaussian_multi(oracle, x, self.mu, m, xi, rng, normalize),
        }
    }
}

/// Uniform direction on the unit sphere of `ℝᵖ` (normalized Gaussian).
pub fn sample_unit_sphere<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = g.norm();
        if norm > 0.0 && norm.is_finite() {
            return g / norm;
        }
    }
}

fn checked(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("oracle returned {v} at {what}")))
    }
}

/// `p · (F(x + μζ, ξ) − F(x, ξ)) / μ · ζ`.
pub fn two_point<O: StochasticOracle>(
    oracle: &O,
    x: &DVector<f64>,
    mu: f64,
    zeta: &DVector<f64>,
    xi: &O::Sample,
) -> Result<Estimate> {
    let p = x.len() as f64;
    let shifted = x + zeta * mu;
    let up = checked(oracle.value(&shifted, xi), "x + mu zeta")?;
    let base = checked(oracle.value(x, xi), "x")?;
    Ok(Estimate {
        grad: zeta * (p * (up - base) / mu),
        evals: 2,
    })
}

/// Forward differences along every coordinate axis.
pub fn coordinate_wise<O: StochasticOracle>(oracle: &O, x: &DVector<f64>, mu: f64, xi: &O::Sample) -> Result<Estimate> {
    let base = checked(oracle.value(x, xi), "x")?;
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        probe[j] = x[j] + mu;
        let up = checked(oracle.value(&probe, xi), "x + mu e_j")?;
        probe[j] = x[j];
        grad[j] = (up - base) / mu;
    }
    Ok(Estimate {
        grad,
        evals: x.len() as u64 + 1,
    })
}

/// Gaussian-direction estimator with `m` directions drawn from `rng`.
///
/// With `normalize` the sum is divided by `m`; without it the per-direction
/// terms are summed as written.
pub fn gaussian_multi<O, R>(
    oracle: &O,
    x: &DVector<f64>,
    mu: f64,
    m: usize,
    xi: &O::Sample,
    rng: &mut R,
    normalize: bool,
) -> Result<Estimate>
where
    O: StochasticOracle,
    R: Rng + ?Sized,
{
    let p = x.len();
    let dirs: Vec<DVector<f64>> = (0..m)
        .map(|_| DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal))))
        .collect();
    gaussian_multi_with_directions(oracle, x, mu, &dirs, xi, normalize)
}

/// [`gaussian_multi`] over caller-supplied directions.
pub fn gaussian_multi_with_directions<O: StochasticOracle>(
    oracle: &O,
    x: &DVector<f64>,
    mu: f64,
    dirs: &[DVector<f64>],
    xi: &O::Sample,
    normalize: bool,
) -> Result<Estimate> {
    if dirs.is_empty() {
        return Err(Error::param("m_k", "at least one direction is required"));
    }
    let base = checked(oracle.value(x, xi), "x")?;
    let mut grad = DVector::zeros(x.len());
    for d in dirs {
        let up = checked(oracle.value(&(x + d * mu), xi), "x + mu zeta_j")?;
        grad.axpy((up - base) / mu, d, 1.0);
    }
    if normalize {
        grad /= dirs.len() as f64;
    }
    Ok(Estimate {
        grad,
        evals: dirs.len() as u64 + 1,
    })
}

/// Empirical second moment of the two-point estimate against its bound.
#[derive(Clone, Copy, Debug)]
pub struct VarianceProbe {
    /// `E_ζ‖g‖²` at a fixed `ξ`.
    pub second_moment: MeanSe,
    /// `2p‖∇ₓF(x, ξ)‖² + ½p²μ²ℓ²`.
    pub bound: f64,
}

/// Draws one `ξ`, then averages `‖g‖²` over `trials` sphere directions.
pub fn variance_probe<O, R>(oracle: &O, x: &DVector<f64>, mu: f64, trials: usize, rng: &mut R) -> Result<VarianceProbe>
where
    O: StochasticOracle,
    R: Rng + ?Sized,
{
    let xi = oracle.sample_xi(rng);
    let grad = oracle
        .sample_gradient(x, &xi)
        .ok_or_else(|| Error::param("oracle", "variance probe needs an analytic sample gradient"))?;
    let ell = oracle
        .smoothness()
        .ok_or_else(|| Error::param("oracle", "variance probe needs a smoothness constant"))?;
    let p = x.len() as f64;
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials.max(1) {
        let zeta = sample_unit_sphere(x.len(), rng);
        samples.push(two_point(oracle, x, mu, &zeta, &xi)?.grad.norm_squared());
    }
    Ok(VarianceProbe {
        second_moment: MeanSe::from_samples(&samples),
        bound: 2.0 * p * grad.norm_squared() + 0.5 * p * p * mu * mu * ell * ell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn half_sq(x: &DVector<f64>) -> f64 {
        0.5 * x.norm_squared()
    }

    #[test]
    fn two_point_on_half_norm() {
        let o = CountingOracle::new(FnOracle::new(2, half_sq));
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let zeta = DVector::from_vec(vec![0.0, 1.0]);
        let e = two_point(&o, &x, 0.1, &zeta, &()).unwrap();
        assert!((e.grad[0]).abs() < 1e-15);
        assert!((e.grad[1] - 0.1).abs() < 1e-12);
        assert_eq!((e.evals, o.calls()), (2, 2));
    }

    #[test]
    fn coordinate_wise_on_half_norm() {
        let o = CountingOracle::new(FnOracle::new(2, half_sq));
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let e = coordinate_wise(&o, &x, 0.1, &()).unwrap();
        assert!((e.grad[0] - 1.05).abs() < 1e-12);
        assert!((e.grad[1] - 0.05).abs() < 1e-12);
        assert_eq!((e.evals, o.calls()), (3, 3));
    }

    #[test]
    fn gaussian_single_direction() {
        let o = FnOracle::new(2, half_sq);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let d = [DVector::from_vec(vec![1.0, 0.0])];
        for normalize in [false, true] {
            let e = gaussian_multi_with_directions(&o, &x, 0.1, &d, &(), normalize).unwrap();
            assert!((e.grad[0] - 1.05).abs() < 1e-12 && e.grad[1] == 0.0);
        }
    }

    #[test]
    fn gaussian_normalization_factor() {
        let o = CountingOracle::new(FnOracle::new(3, |x: &DVector<f64>| x.iter().map(|v| v.sin()).sum()));
        let x = DVector::from_vec(vec![0.3, -0.2, 1.0]);
        let raw = gaussian_multi(&o, &x, 0.01, 4, &(), &mut seeded(9), false).unwrap();
        let avg = gaussian_multi(&o, &x, 0.01, 4, &(), &mut seeded(9), true).unwrap();
        assert_eq!(raw.evals, 5);
        assert_eq!(o.calls(), 10);
        for (r, a) in raw.grad.iter().zip(avg.grad.iter()) {
            assert!((r - 4.0 * a).abs() <= 1e-14 * r.abs().max(1.0));
        }
    }

    #[test]
    fn non_finite_values_are_errors() {
        let o = FnOracle::new(1, |x: &DVector<f64>| if x[0] > 0.5 { f64::NAN } else { 0.0 });
        let x = DVector::from_vec(vec![0.0]);
        let zeta = DVector::from_vec(vec![1.0]);
        assert!(two_point(&o, &x, 1.0, &zeta, &()).is_err());
        assert!(EstimatorConfig { mu: 0.0, mode: EstimatorMode::TwoPoint }.validate().is_err());
    }
}
