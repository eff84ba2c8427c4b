use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Nonnegative coercive weight `V` used by the Lyapunov-weighted costs and
/// the non-dissipative rate constants.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LyapunovFn {
    Constant { value: f64 },
    /// `scale · |x|²`
    Quadratic { scale: f64 },
    /// `exp(|x|^p)`
    ExpPower { p: f64 },
    /// `exp((1 + |x|²)^{p/2})`, a C^∞ weight with the growth of `ExpPower`.
    SmoothExpPower { p: f64 },
    #[serde(skip)]
    Custom { value: ValueFn, gradient: GradFn },
}

impl fmt::Debug for LyapunovFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LyapunovFn::Constant { value } => write!(f, "Constant({value})"),
            LyapunovFn::Quadratic { scale } => write!(f, "Quadratic({scale})"),
            LyapunovFn::ExpPower { p } => write!(f, "ExpPower({p})"),
            LyapunovFn::SmoothExpPower { p } => write!(f, "SmoothExpPower({p})"),
            LyapunovFn::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl PartialEq for LyapunovFn {
    fn eq(&self, other: &Self) -> bool {
        use LyapunovFn::*;
        match (self, other) {
            (Constant { value: a }, Constant { value: b }) => a == b,
            (Quadratic { scale: a }, Quadratic { scale: b }) => a == b,
            (ExpPower { p: a }, ExpPower { p: b }) => a == b,
            (SmoothExpPower { p: a }, SmoothExpPower { p: b }) => a == b,
            (Custom { value: a, .. }, Custom { value: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl LyapunovFn {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            LyapunovFn::Custom { value, .. } => value(x),
            _ => self.radial(norm(x)).expect("built-in weights are radial"),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LyapunovFn::Constant { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            LyapunovFn::Quadratic { scale } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = 2.0 * scale * v;
                }
            }
            LyapunovFn::ExpPower { p } => {
                let r = norm(x);
                if r == 0.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    return;
                }
                // d/dr e^{r^p} = p r^{p-1} e^{r^p}
                let radial = p * r.powf(p - 1.0) * r.powf(*p).exp();
                for (o, v) in out.iter_mut().zip(x) {
                    *o = radial * v / r;
                }
            }
            LyapunovFn::SmoothExpPower { p } => {
                let s = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
                let radial_over_r = p * s.powf(p / 2.0 - 1.0) * s.powf(p / 2.0).exp();
                for (o, v) in out.iter_mut().zip(x) {
                    *o = radial_over_r * v;
                }
            }
            LyapunovFn::Custom { gradient, .. } => gradient(x, out),
        }
    }

    /// Radial profile `v(r)` with `V(x) = v(|x|)`, when the weight is radial.
    pub fn radial(&self, r: f64) -> Option<f64> {
        match self {
            LyapunovFn::Constant { value } => Some(*value),
            LyapunovFn::Quadratic { scale } => Some(scale * r * r),
            LyapunovFn::ExpPower { p } => Some(r.powf(*p).exp()),
            LyapunovFn::SmoothExpPower { p } => Some((1.0 + r * r).powf(p / 2.0).exp()),
            LyapunovFn::Custom { .. } => None,
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, LyapunovFn::Custom { .. })
    }
}
