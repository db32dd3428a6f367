//! Small Monte-Carlo summaries shared by the diagnostics.

use statrs::statistics::Statistics;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

impl MeanSe {
    pub fn from_samples(xs: &[f64]) -> Self {
        let samples = xs.len();
        let mean = xs.mean();
        let se = if samples > 1 {
            xs.std_dev() / (samples as f64).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se, samples }
    }

    /// `mean ≤ bound + k·se`.
    pub fn below(&self, bound: f64, k: f64) -> bool {
        self.mean <= bound + k * self.se
    }

    /// `|mean − target| ≤ k·se`, with a tiny absolute floor for zero-variance cases.
    pub fn near(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * target.abs().max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let s = MeanSe::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((s.se - sd / 2.0).abs() < 1e-12);
        assert!(s.near(2.5, 0.0));
    }
}
