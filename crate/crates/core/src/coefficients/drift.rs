use super::profile::TimeProfile;
use super::view::MeasureView;
use std::fmt;
use std::sync::Arc;

/// Measure-dependent drift `b_t(x, μ)`.
///
/// `summarize` runs once per step against the frozen pre-step ensemble and
/// may cache any statistic (means, `μ(V)`); `eval` then runs once per
/// particle and must only read `view` and `summary`.
pub trait Drift: Send + Sync + fmt::Debug {
    fn summarize(&self, _t: f64, _view: &MeasureView<'_>) -> Vec<f64> {
        Vec::new()
    }

    fn eval(&self, t: f64, x: &[f64], view: &MeasureView<'_>, summary: &[f64], out: &mut [f64]);
}

/// `b_t(x) = −a(t) x`.
#[derive(Debug, Clone)]
pub struct LinearDrift {
    pub rate: TimeProfile,
    pub period: f64,
}

impl Drift for LinearDrift {
    fn summarize(&self, t: f64, _: &MeasureView<'_>) -> Vec<f64> {
        vec![self.rate.eval(t, self.period)]
    }

    fn eval(&self, _t: f64, x: &[f64], _: &MeasureView<'_>, summary: &[f64], out: &mut [f64]) {
        let a = summary[0];
        for (o, v) in out.iter_mut().zip(x) {
            *o = -a * v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Confinement {
    /// `V(x) = |x|²/2`
    Quadratic,
    /// `V(x) = |x|⁴/4 − δ|x|²/2`
    DoubleWell { depth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction {
    None,
    /// `W(x, y) = |x − y|²/2`, evaluated through the ensemble mean.
    Quadratic,
    /// Same potential, evaluated as an explicit pairwise average. Honors the
    /// interaction subsample; used to cross-check the mean shortcut.
    QuadraticPairwise,
}

/// Granular-media drift `−c_V(t)∇V(x) − c_W(t) μ(∇⁽¹⁾W(x, ·))`.
#[derive(Debug, Clone)]
pub struct GranularDrift {
    pub period: f64,
    pub confinement: Confinement,
    pub confinement_scale: TimeProfile,
    pub interaction: Interaction,
    pub interaction_scale: TimeProfile,
}

impl Drift for GranularDrift {
    /// `[c_V(t), c_W(t)]`, followed by the ensemble mean for the mean shortcut.
    fn summarize(&self, t: f64, view: &MeasureView<'_>) -> Vec<f64> {
        let mut s = vec![self.confinement_scale.eval(t, self.period), self.interaction_scale.eval(t, self.period)];
        if self.interaction == Interaction::Quadratic {
            s.extend(view.mean());
        }
        s
    }

    fn eval(&self, _t: f64, x: &[f64], view: &MeasureView<'_>, summary: &[f64], out: &mut [f64]) {
        let (cv, cw, mean) = (summary[0], summary[1], &summary[2..]);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let radial = match self.confinement {
            Confinement::Quadratic => 1.0,
            Confinement::DoubleWell { depth } => r2 - depth,
        };
        for (o, v) in out.iter_mut().zip(x) {
            *o = -cv * radial * v;
        }
        match self.interaction {
            Interaction::None => {}
            Interaction::Quadratic => {
                for ((o, v), m) in out.iter_mut().zip(x).zip(mean) {
                    *o -= cw * (v - m);
                }
            }
            Interaction::QuadraticPairwise => {
                let mut acc = vec![0.0; x.len()];
                view.pairwise_mean(
                    x,
                    |a, b, k| k.iter_mut().zip(a.iter().zip(b)).for_each(|(k, (a, b))| *k = a - b),
                    &mut acc,
                );
                for (o, g) in out.iter_mut().zip(&acc) {
                    *o -= cw * g;
                }
            }
        }
    }
}

/// Drift with a Lyapunov-normalized interaction:
/// `α_t b₀(x) + μ(∇⁽¹⁾W_t(x, ·)) / (1 + μ(V))` where
/// `b₀(x) = −|x|^{p−1}x` outside the unit ball (a C¹ cubic inside),
/// `W_t(x, y) = (εα_t/2)√(1 + |x − y|²)` and `V(x) = exp((1 + |x|²)^{p/2})`.
#[derive(Debug, Clone)]
pub struct NormalizedInteractionDrift {
    pub period: f64,
    pub alpha: TimeProfile,
    pub p: f64,
    pub epsilon: f64,
}

impl NormalizedInteractionDrift {
    /// The confining part `b₀`.
    pub fn b0(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let scale = if r >= 1.0 {
            r.powf(self.p - 1.0)
        } else {
            let c2 = (self.p - 1.0) / 2.0;
            let c0 = (3.0 - self.p) / 2.0;
            c0 + c2 * r2
        };
        for (o, v) in out.iter_mut().zip(x) {
            *o = -scale * v;
        }
    }

    /// `sup |∇b₀|`, attained at the origin for `p ≤ 1`.
    pub fn b0_lipschitz(&self) -> f64 {
        ((3.0 - self.p) / 2.0).max(self.p).max(1.0)
    }
}

impl Drift for NormalizedInteractionDrift {
    /// `[μ(V), α(t)]`; `μ(V)` is skipped without interaction.
    fn summarize(&self, t: f64, view: &MeasureView<'_>) -> Vec<f64> {
        let p = self.p;
        let a = self.alpha.eval(t, self.period);
        if self.epsilon == 0.0 {
            return vec![0.0, a];
        }
        vec![view.mean_of(|y| (1.0 + y.iter().map(|v| v * v).sum::<f64>()).powf(p / 2.0).exp()), a]
    }

    fn eval(&self, _t: f64, x: &[f64], view: &MeasureView<'_>, summary: &[f64], out: &mut [f64]) {
        let a = summary[1];
        self.b0(x, out);
        out.iter_mut().for_each(|o| *o *= a);
        if self.epsilon == 0.0 {
            return;
        }
        let mu_v = summary[0];
        let mut acc = vec![0.0; x.len()];
        view.pairwise_mean(
            x,
            |u, w, k| {
                let d2: f64 = u.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
                let s = 1.0 / (1.0 + d2).sqrt();
                k.iter_mut().zip(u.iter().zip(w)).for_each(|(k, (a, b))| *k = (a - b) * s);
            },
            &mut acc,
        );
        let scale = 0.5 * self.epsilon * a / (1.0 + mu_v);
        for (o, g) in out.iter_mut().zip(&acc) {
            *o += scale * g;
        }
    }
}

type PointFn = Arc<dyn Fn(f64, &[f64], &MeasureView<'_>, &mut [f64]) + Send + Sync>;

/// Drift from a user closure. The caller is responsible for periodicity.
#[derive(Clone)]
pub struct FnDrift(pub PointFn);

impl FnDrift {
    pub fn new(f: impl Fn(f64, &[f64], &MeasureView<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        FnDrift(Arc::new(f))
    }
}

impl fmt::Debug for FnDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnDrift")
    }
}

impl Drift for FnDrift {
    fn eval(&self, t: f64, x: &[f64], view: &MeasureView<'_>, _: &[f64], out: &mut [f64]) {
        (self.0)(t, x, view, out)
    }
}
