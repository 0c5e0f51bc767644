use serde::{Deserialize, Serialize};

use super::stats::student_t_quantile;
use crate::{Error, Result};

/// Least-squares line through (log10 v, log10 c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_ci_95: (f64, f64),
    pub n: usize,
    /// Input points dropped for a non-positive coordinate.
    pub excluded: usize,
}

impl RegressionFit {
    /// Corrections predicted by the implied power law.
    pub fn predict(&self, views: f64) -> f64 {
        libm::pow(10.0, self.intercept) * libm::pow(views, self.slope)
    }
}

pub fn loglog_regression(points: &[(f64, f64)]) -> Result<RegressionFit> {
    let usable: alloc::vec::Vec<(f64, f64)> = points
        .iter()
        .filter(|(v, c)| *v > 0.0 && *c > 0.0)
        .map(|&(v, c)| (libm::log10(v), libm::log10(c)))
        .collect();
    let n = usable.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    let nf = n as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &usable {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= f64::EPSILON * nf * (1.0 + mean_x * mean_x) {
        return Err(Error::ZeroVariance);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = usable
        .iter()
        .map(|&(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let se = libm::sqrt(sse / (nf - 2.0) / sxx);
    let half = student_t_quantile(0.975, nf - 2.0) * se;
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        slope_ci_95: (slope - half, slope + half),
        n,
        excluded: points.len() - n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1e3, 5e3, 2e4, 1e5, 7e5, 3e6]
            .iter()
            .map(|&v| (v, 58.94 * libm::pow(v, 1.0574)))
            .collect();
        let fit = loglog_regression(&pts).unwrap();
        assert!((fit.slope - 1.0574).abs() < 1e-9);
        assert!((fit.intercept - 1.7704).abs() < 1e-4);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.slope_ci_95.1 - fit.slope_ci_95.0 < 1e-6);
        assert_eq!(fit.n, 6);
    }

    #[test]
    fn hand_computed_fit() {
        // log10 points (0,0), (1,1), (2,3): slope 1.5, intercept -1/6,
        // sse 1/6, syy 14/3, se = sqrt(1/6 / 2) = 0.288675...
        let fit = loglog_regression(&[(1.0, 1.0), (10.0, 10.0), (100.0, 1000.0)]).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept + 1.0 / 6.0).abs() < 1e-12);
        assert!((fit.r_squared - (1.0 - (1.0 / 6.0) / (14.0 / 3.0))).abs() < 1e-12);
        let half = 12.706204736174705 * libm::sqrt(1.0 / 12.0);
        assert!((fit.slope_ci_95.1 - 1.5 - half).abs() < 1e-6);
    }

    #[test]
    fn drops_non_positive() {
        let pts = [(10.0, 5.0), (0.0, 3.0), (100.0, 0.0), (1000.0, 50.0), (1e4, 80.0)];
        let fit = loglog_regression(&pts).unwrap();
        assert_eq!((fit.n, fit.excluded), (3, 2));
        assert!(matches!(loglog_regression(&pts[..4]), Err(Error::TooFewPoints(2))));
    }

    #[test]
    fn constant_views_rejected() {
        let pts = [(100.0, 1.0), (100.0, 5.0), (100.0, 9.0)];
        assert!(matches!(loglog_regression(&pts), Err(Error::ZeroVariance)));
    }

    proptest! {
        #[test]
        fn slope_ignores_view_scale(
            pts in prop::collection::vec((1.0f64..1e6, 1.0f64..1e5), 3..30),
            k in 0.01f64..100.0,
        ) {
            let Ok(a) = loglog_regression(&pts) else { return Ok(()); };
            let scaled: Vec<_> = pts.iter().map(|&(v, c)| (v * k, c)).collect();
            let b = loglog_regression(&scaled).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-6 * (1.0 + a.slope.abs()));
            prop_assert!((b.intercept - (a.intercept - a.slope * libm::log10(k))).abs() < 1e-6 * (1.0 + a.intercept.abs()));
        }
    }
}
