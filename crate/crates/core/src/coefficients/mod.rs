//! Time-periodic coefficients, the ensemble view drifts evaluate against, and
//! the built-in scenario catalog.

pub mod drift;
pub mod lyapunov;
pub mod profile;
pub mod scenario;
pub mod view;

pub use drift::{Confinement, Drift, FnDrift, GranularDrift, Interaction, LinearDrift, NormalizedInteractionDrift};
pub use lyapunov::LyapunovFn;
pub use profile::{trapezoid, TimeProfile};
pub use scenario::{builtin_scenarios, scenario_by_name, Family, InitialLaw, OracleTag, Scenario, ScenarioSpec};
pub use view::MeasureView;

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type SigmaFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// Diffusion coefficient `σ_t(x)`, a `d × m` matrix.
#[derive(Clone)]
pub enum Diffusion {
    /// `σ_t = √v(t) · I_d`
    Isotropic { variance: TimeProfile },
    General { noise_dim: usize, sigma: SigmaFn },
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Isotropic { variance } => write!(f, "Isotropic({variance:?})"),
            Diffusion::General { noise_dim, .. } => write!(f, "General(m={noise_dim})"),
        }
    }
}

/// Analytic constants a scenario states about itself. Every field is
/// optional; the rates module only reads what a given formula needs.
///
/// Profiles follow the scenario period. `lambda` is the ellipticity lower
/// bound of `σσ*`, `sigma_norm` is `A_t = ‖σ_t‖∞` and `interaction_norm` is
/// `‖∇⁽¹⁾∇⁽²⁾W_t‖∞`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_norm: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_norm: Option<TimeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovFn>,
}

impl DeclaredConstants {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &DeclaredConstants) {
        macro_rules! take {
            ($($f:ident),*) => {$( if other.$f.is_some() { self.$f = other.$f.clone(); } )*};
        }
        take!(k0, k1, k2, kappa1, kappa2, theta, gamma, alpha, lambda, sigma_norm, interaction_norm);
        take!(theta1, theta2, radius, d0, l, beta, p, lyapunov);
    }

    pub fn require<'a>(&'a self, field: Option<&'a TimeProfile>, name: &str) -> Result<&'a TimeProfile> {
        let _ = self;
        field.ok_or_else(|| Error::Config(format!("scenario does not declare constant `{name}`")))
    }
}

/// A `t₀`-periodic drift/diffusion pair with its declared constants.
#[derive(Debug, Clone)]
pub struct PeriodicCoefficients {
    pub period: f64,
    pub dim: usize,
    pub drift: Arc<dyn Drift>,
    pub diffusion: Diffusion,
    pub constants: DeclaredConstants,
}

impl PeriodicCoefficients {
    pub fn new(period: f64, dim: usize, drift: Arc<dyn Drift>, diffusion: Diffusion) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        Ok(PeriodicCoefficients {
            period,
            dim,
            drift,
            diffusion,
            constants: DeclaredConstants::default(),
        })
    }

    pub fn with_constants(mut self, constants: DeclaredConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn noise_dim(&self) -> usize {
        match &self.diffusion {
            Diffusion::Isotropic { .. } => self.dim,
            Diffusion::General { noise_dim, .. } => *noise_dim,
        }
    }

    /// `√v(t)` when the diffusion is a multiple of the identity.
    pub fn isotropic_scale(&self, t: f64) -> Option<f64> {
        match &self.diffusion {
            Diffusion::Isotropic { variance } => Some(variance.eval(t, self.period).max(0.0).sqrt()),
            Diffusion::General { .. } => None,
        }
    }

    fn check_point(&self, t: f64, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::ScenarioDefinition {
                t,
                x: x.to_vec(),
                message: format!("expected a {}-dimensional point", self.dim),
            });
        }
        Ok(())
    }

    /// Drift at `(t, x)` against the ensemble `view`.
    ///
    /// This recomputes the per-step summary, so the engine calls the drift
    /// directly instead; use this for one-off evaluations.
    pub fn eval_drift(&self, t: f64, x: &[f64], view: &MeasureView<'_>) -> Result<Vec<f64>> {
        self.check_point(t, x)?;
        let summary = self.drift.summarize(t, view);
        let mut out = vec![0.0; self.dim];
        self.drift.eval(t, x, view, &summary, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::ScenarioDefinition {
                t,
                x: x.to_vec(),
                message: format!("drift is not finite: {out:?}"),
            });
        }
        Ok(out)
    }

    pub fn eval_sigma(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(t, x)?;
        let m = match &self.diffusion {
            Diffusion::Isotropic { variance } => {
                let v = variance.eval(t, self.period);
                if v < 0.0 {
                    return Err(Error::ScenarioDefinition {
                        t,
                        x: x.to_vec(),
                        message: format!("negative diffusion variance {v}"),
                    });
                }
                DMatrix::identity(self.dim, self.dim) * v.sqrt()
            }
            Diffusion::General { noise_dim, sigma } => {
                let m = sigma(t, x);
                if m.nrows() != self.dim || m.ncols() != *noise_dim {
                    return Err(Error::ScenarioDefinition {
                        t,
                        x: x.to_vec(),
                        message: format!(
                            "diffusion has shape {}x{}, expected {}x{}",
                            m.nrows(),
                            m.ncols(),
                            self.dim,
                            noise_dim
                        ),
                    });
                }
                m
            }
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::ScenarioDefinition {
                t,
                x: x.to_vec(),
                message: "diffusion matrix is not finite".into(),
            });
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou() -> PeriodicCoefficients {
        scenario_by_name("ou-periodic").unwrap().coefficients
    }

    #[test]
    fn ou_drift_at_origin_phase() {
        let c = ou();
        let ens = [2.0, 0.0];
        let view = MeasureView::new(&ens, 2);
        assert_eq!(c.eval_drift(0.0, &[2.0, 0.0], &view).unwrap(), vec![-2.0, 0.0]);
    }

    #[test]
    fn granular_drift_at_mean_is_minus_mean() {
        let c = scenario_by_name("granular-periodic").unwrap().coefficients;
        let ens = [1.0, 2.0, 3.0, -2.0];
        let view = MeasureView::new(&ens, 2);
        // a(0) = 1 for the built-in confinement profile
        let b = c.eval_drift(0.0, &[2.0, 0.0], &view).unwrap();
        assert!((b[0] + 2.0).abs() < 1e-15 && b[1].abs() < 1e-15);
    }

    #[test]
    fn normalized_drift_without_coupling_is_scaled_b0() {
        let d = NormalizedInteractionDrift {
            period: 1.0,
            alpha: TimeProfile::Constant(2.0),
            p: 1.0,
            epsilon: 0.0,
        };
        let c = PeriodicCoefficients::new(
            1.0,
            2,
            Arc::new(d),
            Diffusion::Isotropic {
                variance: TimeProfile::Constant(2.0),
            },
        )
        .unwrap();
        let ens = [3.0, 0.0];
        let view = MeasureView::new(&ens, 2);
        assert_eq!(c.eval_drift(0.0, &[3.0, 0.0], &view).unwrap(), vec![-6.0, 0.0]);
    }

    #[test]
    fn sigma_examples() {
        let g = scenario_by_name("granular-periodic").unwrap().coefficients;
        let s = g.eval_sigma(0.37, &[5.0, -1.0]).unwrap();
        assert_eq!(s, DMatrix::identity(2, 2) * 2f64.sqrt());
        let c = PeriodicCoefficients::new(
            1.0,
            3,
            Arc::new(FnDrift::new(|_, _, _, o| o.fill(0.0))),
            Diffusion::Isotropic {
                variance: TimeProfile::Constant(4.0),
            },
        )
        .unwrap();
        assert_eq!(c.eval_sigma(0.0, &[0.0; 3]).unwrap(), DMatrix::identity(3, 3) * 2.0);
    }

    #[test]
    fn non_finite_drift_is_reported_with_location() {
        let c = PeriodicCoefficients::new(
            1.0,
            1,
            Arc::new(FnDrift::new(|_, x, _, o| o[0] = 1.0 / x[0])),
            Diffusion::Isotropic {
                variance: TimeProfile::Constant(1.0),
            },
        )
        .unwrap();
        let ens = [0.0];
        let err = c.eval_drift(0.5, &[0.0], &MeasureView::new(&ens, 1)).unwrap_err();
        match err {
            Error::ScenarioDefinition { t, x, .. } => {
                assert_eq!(t, 0.5);
                assert_eq!(x, vec![0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn builtins_are_periodic() {
        for scn in builtin_scenarios() {
            let c = &scn.coefficients;
            let d = c.dim;
            let ens: Vec<f64> = (0..5 * d).map(|i| (i as f64 * 0.37).sin()).collect();
            let view = MeasureView::new(&ens, d);
            let x: Vec<f64> = (0..d).map(|i| 0.3 + 0.2 * i as f64).collect();
            for k in 0..64 {
                let t = k as f64 / 64.0 * c.period;
                for shift in [1.0, 3.0] {
                    let b0 = c.eval_drift(t, &x, &view).unwrap();
                    let b1 = c.eval_drift(t + shift * c.period, &x, &view).unwrap();
                    for (u, v) in b0.iter().zip(&b1) {
                        assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()), "{} t={t}", scn.name);
                    }
                    let s0 = c.eval_sigma(t, &x).unwrap();
                    let s1 = c.eval_sigma(t + shift * c.period, &x).unwrap();
                    assert!((s0 - s1).abs().max() <= 1e-12, "{}", scn.name);
                }
            }
        }
    }
}
