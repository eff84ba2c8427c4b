use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A scalar function of time that repeats with the scenario period.
///
/// Tables hold `len` samples at `t = i * period / len` and are linearly
/// interpolated with wrap-around, so a table is a closed loop over one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    Constant(f64),
    /// `mean + amplitude * sin(2π·harmonic·t/period + phase)`
    Sinusoid {
        mean: f64,
        amplitude: f64,
        #[serde(default = "one")]
        harmonic: u32,
        #[serde(default)]
        phase: f64,
    },
    Table(Vec<f64>),
}

fn one() -> u32 {
    1
}

impl TimeProfile {
    pub fn sinusoid(mean: f64, amplitude: f64) -> Self {
        TimeProfile::Sinusoid {
            mean,
            amplitude,
            harmonic: 1,
            phase: 0.0,
        }
    }

    pub fn eval(&self, t: f64, period: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::Sinusoid {
                mean,
                amplitude,
                harmonic,
                phase,
            } => {
                let s = t.rem_euclid(period) / period;
                mean + amplitude * (2.0 * PI * f64::from(*harmonic) * s + phase).sin()
            }
            TimeProfile::Table(values) => {
                let n = values.len();
                if n == 1 {
                    return values[0];
                }
                let pos = t.rem_euclid(period) / period * n as f64;
                let i = (pos.floor() as usize).min(n - 1);
                let w = pos - i as f64;
                let a = values[i];
                let b = values[(i + 1) % n];
                a + w * (b - a)
            }
        }
    }

    /// Integral over one full period.
    pub fn period_integral(&self, period: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => c * period,
            TimeProfile::Sinusoid {
                mean,
                harmonic,
                ..
            } => {
                if *harmonic == 0 {
                    self.eval(0.0, period) * period
                } else {
                    mean * period
                }
            }
            // periodic piecewise-linear: trapezoid on the samples is exact
            TimeProfile::Table(values) => values.iter().sum::<f64>() * period / values.len() as f64,
        }
    }

    /// Supremum over one period (exact for constants, sinusoids and tables).
    pub fn period_sup(&self, period: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::Sinusoid {
                mean,
                amplitude,
                harmonic,
                phase,
            } => {
                if *harmonic == 0 {
                    mean + amplitude * phase.sin()
                } else {
                    mean + amplitude.abs()
                }
            }
            TimeProfile::Table(values) => {
                let _ = period;
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Supremum over the window `[s, t]` sampled on a fine grid.
    pub fn window_sup(&self, s: f64, t: f64, period: f64) -> f64 {
        if t - s >= period {
            return self.period_sup(period);
        }
        let n = 2048;
        (0..=n)
            .map(|i| self.eval(s + (t - s) * i as f64 / n as f64, period))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64, period: f64, samples: usize) -> TimeProfile {
        match self {
            TimeProfile::Constant(c) => TimeProfile::Constant(f(*c)),
            _ => TimeProfile::Table(
                (0..samples)
                    .map(|i| f(self.eval(period * i as f64 / samples as f64, period)))
                    .collect(),
            ),
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), String> {
        match self {
            TimeProfile::Constant(c) if !c.is_finite() => Err(format!("{name}: non-finite constant")),
            TimeProfile::Sinusoid {
                mean,
                amplitude,
                phase,
                ..
            } if !(mean.is_finite() && amplitude.is_finite() && phase.is_finite()) => {
                Err(format!("{name}: non-finite sinusoid parameter"))
            }
            TimeProfile::Table(v) if v.is_empty() => Err(format!("{name}: empty table")),
            TimeProfile::Table(v) if v.iter().any(|x| !x.is_finite()) => {
                Err(format!("{name}: non-finite table entry"))
            }
            _ => Ok(()),
        }
    }
}

/// Samples `f` on `n` equally spaced nodes of `[0, period]` (both ends
/// included) and integrates with the trapezoid rule.
pub fn trapezoid(f: impl Fn(f64) -> f64, period: f64, n: usize) -> f64 {
    let h = period / n as f64;
    let mut acc = 0.5 * (f(0.0) + f(period));
    for i in 1..n {
        acc += f(h * i as f64);
    }
    acc * h
}
