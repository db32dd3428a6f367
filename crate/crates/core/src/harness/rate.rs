//! Empirical rates: least squares on log-log data.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// 95% confidence interval of the slope.
    pub ci: (f64, f64),
    pub points: usize,
}

/// Fits `log y = a + b log x` on the last `window` fraction of `series`.
pub fn rate_fit(series: &[(f64, f64)], window: f64) -> Result<RateFit> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::param("rate_fit.window", format!("{window} is outside (0, 1]")));
    }
    let take = ((series.len() as f64 * window).ceil() as usize).min(series.len());
    let tail = &series[series.len() - take..];
    if tail.len() < MIN_POINTS {
        return Err(Error::param(
            "rate_fit.series",
            format!("{} points in the window, need at least {MIN_POINTS}", tail.len()),
        ));
    }
    let mut xs = Vec::with_capacity(tail.len());
    let mut ys = Vec::with_capacity(tail.len());
    for &(x, y) in tail {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::param("rate_fit.series", format!("point ({x}, {y}) is not positive")));
        }
        xs.push(x.ln());
        ys.push(y.ln());
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::param("rate_fit.series", "all abscissae coincide"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = m - 2.0;
    let slope_se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        slope,
        intercept,
        slope_se,
        ci: (slope - t * slope_se, slope + t * slope_se),
        points: tail.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let s: Vec<_> = (1..=100).map(|k| (k as f64, (k as f64).powf(-0.5))).collect();
        let f = rate_fit(&s, 1.0).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-9);
        let s: Vec<_> = (1..=100).map(|k| (k as f64, 5.0 / k as f64)).collect();
        let f = rate_fit(&s, 0.5).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-9);
        assert_eq!(f.points, 50);
    }

    #[test]
    fn perturbed_power_law() {
        let s: Vec<_> = (1..=1000)
            .map(|k| {
                let k = k as f64;
                (k, k.powf(-0.5) * (1.0 + 0.01 * k.sin()))
            })
            .collect();
        let f = rate_fit(&s, 1.0).unwrap();
        assert!(f.slope >= -0.52 && f.slope <= -0.48, "{}", f.slope);
        assert!(f.ci.0 <= f.slope && f.slope <= f.ci.1);
    }

    #[test]
    fn rejects_bad_input() {
        let s: Vec<_> = (1..=20).map(|k| (k as f64, 1.0 - k as f64 / 10.0)).collect();
        assert!(rate_fit(&s, 1.0).is_err());
        let s: Vec<_> = (1..=9).map(|k| (k as f64, 1.0)).collect();
        assert!(rate_fit(&s, 1.0).is_err());
    }
}
