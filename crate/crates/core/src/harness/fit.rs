//! Log-linear decay fits and the sign test used for trend-only metrics.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// `−slope` of `log d_n` against `n`.
    pub rate: f64,
    /// Intercept of the same regression, i.e. `log c` in `c e^{−λn}`.
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of `log d` on `n` over the given points.
pub fn fit_points(points: &[(usize, f64)]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some((n, d)) = points.iter().find(|(_, d)| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::Fit(format!("distance at period {n} is {d}; the log fit needs positive values")));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|(_, d)| d.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(DecayFit {
        rate: -slope,
        intercept,
        r2,
        points: points.len(),
    })
}

/// Fits `d_n ≈ c e^{−λn}` on `n ≥ burn_in`.
pub fn fit_decay(d: &[f64], burn_in: usize) -> Result<DecayFit> {
    let pts: Vec<(usize, f64)> = d.iter().copied().enumerate().skip(burn_in).collect();
    fit_points(&pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendTest {
    /// Consecutive pairs compared after burn-in.
    pub steps: usize,
    /// Pairs with `d_{n+1} ≤ d_n`.
    pub nonincreasing: usize,
    /// Required count for a pass.
    pub required: usize,
    /// One-sided binomial tail `P(X ≥ nonincreasing)` for a fair coin.
    pub p_value: f64,
    pub pass: bool,
}

/// Counts nonincreasing steps after burn-in; passes when at least
/// `fraction` of them are.
pub fn trend_test(d: &[f64], burn_in: usize, fraction: f64) -> TrendTest {
    let tail = &d[burn_in.min(d.len())..];
    let steps = tail.len().saturating_sub(1);
    let nonincreasing = tail.windows(2).filter(|w| w[1] <= w[0]).count();
    let required = (fraction * steps as f64).ceil() as usize;
    let p_value = (nonincreasing..=steps).map(|k| binomial(steps, k)).sum::<f64>() / 2f64.powi(steps as i32);
    TrendTest {
        steps,
        nonincreasing,
        required,
        p_value,
        pass: steps > 0 && nonincreasing >= required,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::NoisePolicy;

    #[test]
    fn exact_exponentials() {
        let d: Vec<f64> = (0..10).map(|n| (-2.0 * n as f64).exp()).collect();
        let f = fit_decay(&d, 0).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let d: Vec<f64> = (0..10).map(|n| 5.0 * (-0.7 * n as f64).exp()).collect();
        let f = fit_decay(&d, 2).unwrap();
        assert!((f.rate - 0.7).abs() < 1e-12);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-12);
        assert_eq!(f.points, 8);
    }

    #[test]
    fn bounded_noise_keeps_the_rate_close() {
        for seed in 0..20 {
            let noise = NoisePolicy::new(seed);
            let d: Vec<f64> = (0..12)
                .map(|n| {
                    let eta = 2.0 * noise.uniform(0, n, 0) - 1.0;
                    (-(n as f64)).exp() * (1.0 + 0.05 * eta)
                })
                .collect();
            let f = fit_decay(&d, 2).unwrap();
            assert!((0.9..=1.1).contains(&f.rate), "seed {seed}: {}", f.rate);
        }
    }

    #[test]
    fn rejects_short_or_zero_sequences() {
        assert!(fit_decay(&[1.0, 0.5, 0.25], 1).is_err());
        assert!(fit_decay(&[1.0, 0.0, 0.25, 0.1], 0).is_err());
    }

    #[test]
    fn sign_test_counts() {
        let t = trend_test(&[9.0, 5.0, 4.0, 3.0, 3.0, 3.5, 2.0], 1, 0.8);
        assert_eq!((t.steps, t.nonincreasing, t.required), (5, 4, 4));
        assert!(t.pass);
        assert!((t.p_value - 6.0 / 32.0).abs() < 1e-15);
    }
}
