//! Experiment orchestration: predict, simulate, measure, fit, judge.

pub mod config;
pub mod fit;
pub mod report;

pub use config::{load_config, CostConfig, Coupling, ExperimentConfig, Metric, ScenarioRef};
pub use fit::{fit_decay, fit_points, trend_test, DecayFit, TrendTest};
pub use report::{emit_report, ErgodicityReport, Experiment, Prediction, TolerancePolicy, Verdict};

use crate::coefficients::{DeclaredConstants, Scenario};
use crate::engine::{self, Ensemble, NoisePolicy, SimConfig};
use crate::error::{Error, Result};
use crate::rates::{self, RateInputs, TabulatedCostFunction};
use crate::transport::{self, CostSpec, EXACT_LIMIT};
use rayon::prelude::*;
use report::{Environment, FixedPointSummary};
use serde_json::json;
use std::sync::Arc;

/// Noise-key offsets of the auxiliary chains.
const FIXED_POINT_STREAM: u64 = 0x4650;
const REFERENCE_STREAM: u64 = 0x5245_4631;
const FLOOR_STREAM: u64 = 0x5245_4632;

/// Builds the cost function for a metric, filling absent parameters from
/// the scenario's declared constants.
pub fn resolve_psi(
    cost: Option<&CostConfig>,
    metric: Metric,
    c: &DeclaredConstants,
) -> Result<Option<Arc<TabulatedCostFunction>>> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::Config(format!("cost parameter `{name}` is neither configured nor declared")))
    };
    let default = match metric {
        Metric::Wpsi => CostConfig::Example31 {
            theta1: None,
            theta2: None,
            radius: None,
            tol: 1e-14,
        },
        Metric::Wpsiv | Metric::Ratio => CostConfig::Eigen { d0: None, l: None },
        _ => return Ok(None),
    };
    let psi = match cost.unwrap_or(&default) {
        CostConfig::Example31 {
            theta1,
            theta2,
            radius,
            tol,
        } => rates::build_psi_example31(
            need(theta1.or(c.theta1), "theta1")?,
            need(theta2.or(c.theta2), "theta2")?,
            need(radius.or(c.radius), "radius")?,
            *tol,
        )?,
        CostConfig::Eigen { d0, l } => rates::build_psi_eigen(need(d0.or(c.d0), "d0")?, need(l.or(c.l), "l")?)?,
    };
    Ok(Some(Arc::new(psi)))
}

/// Predicted rate for the metric, in the units of `d_n`.
pub fn predict(
    metric: Metric,
    scn: &Scenario,
    psi: Option<&TabulatedCostFunction>,
    beta: Option<f64>,
) -> Result<Prediction> {
    let co = &scn.coefficients;
    let t0 = co.period;
    let c = &co.constants;
    let w2 = || -> Result<f64> {
        Ok(rates::rate_w2(c.require(c.k1.as_ref(), "k1")?, c.require(c.k2.as_ref(), "k2")?, t0))
    };
    let psi_of = || psi.ok_or_else(|| Error::Config("this metric needs a cost function".into()));
    Ok(match metric {
        Metric::W2 => Prediction {
            lambda: w2()?,
            formula: "-∫(K1 + K2) over one period, for W2 squared".into(),
            diagnostics: json!({}),
        },
        Metric::W1 => {
            let l = w2()?;
            Prediction {
                lambda: l / 2.0,
                formula: "half the squared-W2 rate, since W1 ≤ W2".into(),
                diagnostics: json!({ "w2_squared_rate": l }),
            }
        }
        Metric::Entropy => Prediction {
            lambda: w2()?,
            formula: "relative entropy shares the squared-W2 rate".into(),
            diagnostics: json!({}),
        },
        Metric::Wpsi => {
            let psi = psi_of()?;
            let g = rates::granular_psi_rates(
                c.require(c.alpha.as_ref(), "alpha")?,
                c.require(c.interaction_norm.as_ref(), "interaction_norm")?,
                psi,
                t0,
            );
            Prediction {
                lambda: g.composed_rate,
                formula: "∫(κ - θ c2(ψ)) with κ = 2α/c2, θ = 2‖∇∇W‖/c1".into(),
                diagnostics: json!({
                    "c1": psi.c1,
                    "c2": psi.c2,
                    "c_psi": psi.c_psi,
                    "monotone_c": psi.monotone_c,
                    "closed_form_display_rate": g.display_rate,
                    "closed_form_mismatch": g.mismatch,
                }),
            }
        }
        Metric::Wpsiv | Metric::Ratio => {
            let psi = psi_of()?;
            let mut constants = c.clone();
            if beta.is_some() {
                constants.beta = beta;
            }
            let inputs = RateInputs::new(t0, co.dim, constants);
            let r = rates::rate_wpsiv(&inputs, psi, t0)?;
            Prediction {
                lambda: r.lambda,
                formula: "∫(min{κ_lβ, u_l - 2K0β - α_lβ} - θ)".into(),
                diagnostics: json!({
                    "kappa_branch_integral": r.kappa_branch_integral,
                    "local_branch_integral": r.local_branch_integral,
                    "theta_integral": r.theta_integral,
                    "k1_integral": r.k1_integral,
                    "d1": r.d1,
                    "c_psi": r.c_psi,
                    "boundary_hit": r.boundary_hit,
                }),
            }
        }
    })
}

/// Distance `d_n` between two ensembles for the metric.
pub fn distance(
    metric: Metric,
    a: &Ensemble,
    b: &Ensemble,
    psi: Option<&Arc<TabulatedCostFunction>>,
    c: &DeclaredConstants,
    beta: Option<f64>,
    k: usize,
    noise: &NoisePolicy,
) -> Result<f64> {
    let psi = || psi.cloned().ok_or_else(|| Error::Config("this metric needs a cost function".into()));
    let weight = || -> Result<(crate::coefficients::LyapunovFn, f64)> {
        let v = c.lyapunov.clone().ok_or_else(|| Error::Config("no Lyapunov weight declared".into()))?;
        let beta = beta.or(c.beta).ok_or_else(|| Error::Config("no β declared".into()))?;
        Ok((v, beta))
    };
    match metric {
        Metric::W2 => Ok(transport::w2_auto(a, b, noise)?.powi(2)),
        Metric::W1 if a.dim > 1 && a.len() > EXACT_LIMIT => {
            transport::ot_sliced(a, b, 1, transport::AUTO_PROJECTIONS, noise)
        }
        Metric::W1 => Ok(transport::ot_exact(a, b, &CostSpec::Power(1))?.distance),
        Metric::Wpsi => Ok(transport::ot_exact(a, b, &CostSpec::Psi(psi()?))?.distance),
        Metric::Wpsiv => {
            let (v, beta) = weight()?;
            Ok(transport::ot_exact(a, b, &CostSpec::WeightedPsi { psi: psi()?, v, beta })?.distance)
        }
        Metric::Ratio => {
            let (v, beta) = weight()?;
            let p = psi()?;
            transport::ratio_quasidistance(a, b, &p, &v, beta)
        }
        Metric::Entropy => transport::relative_entropy_knn(a, b, k),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs one experiment end to end without touching the filesystem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let scn = cfg.build_scenario()?;
    let co = &scn.coefficients;
    let t0 = co.period;
    let steps = cfg.steps_per_period(t0);
    let tol = TolerancePolicy::default();
    let mut notes = Vec::new();
    let sim = SimConfig {
        steps_per_period: steps,
        periods: cfg.periods,
        n: cfg.n,
        subsample: cfg.subsample,
        seed: cfg.seed,
        workers: cfg.workers,
        start: cfg.phase,
    };
    let environment = Environment {
        seed: cfg.seed,
        n: cfg.n,
        dt: cfg.dt,
        steps_per_period: steps,
        periods: cfg.periods,
        workers: cfg.workers,
        version: env!("CARGO_PKG_VERSION").into(),
    };

    let psi = resolve_psi(cfg.cost.as_ref(), cfg.metric, &co.constants)?;
    let (predicted, prediction_error) = match predict(cfg.metric, &scn, psi.as_deref(), cfg.beta) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let entropy_constants = (cfg.metric == Metric::Entropy)
        .then(|| {
            let inputs = RateInputs::new(t0, co.dim, co.constants.clone());
            rates::entropy_decay_constant(&inputs, cfg.entropy_window.unwrap_or(t0), t0)
        })
        .and_then(|r| r.map_err(|e| notes.push(format!("entropy constant unavailable: {e}"))).ok());

    let base = NoisePolicy::new(cfg.seed);
    let fp_cfg = SimConfig {
        periods: cfg.fixed_point_max_periods,
        ..sim.clone()
    };
    let fixed = engine::periodic_fixed_point_with(&scn, &fp_cfg, cfg.eps_fix, cfg.m_consec, &base.derive(FIXED_POINT_STREAM));
    let (fp, fixed_point) = match fixed {
        Ok(fp) => {
            let summary = FixedPointSummary {
                converged: true,
                periods: fp.periods,
                trace: fp.trace.clone(),
            };
            (fp, summary)
        }
        Err(Error::NonConvergence { periods, trace }) => {
            notes.push(format!("fixed point not reached within {periods} periods"));
            let report = ErgodicityReport {
                scenario: scn.name.clone(),
                metric: cfg.metric.name().into(),
                coupling: coupling_name(cfg.coupling).into(),
                predicted,
                prediction_error,
                distances: Vec::new(),
                fitted_periods: Vec::new(),
                fit: None,
                fit_error: None,
                noise_floor: None,
                trend: None,
                entropy_constants,
                verdict: Verdict::Inconclusive,
                tolerance: tol,
                fixed_point: FixedPointSummary {
                    converged: false,
                    periods,
                    trace,
                },
                environment,
                notes,
                config: cfg.clone(),
            };
            return Ok(Experiment {
                report,
                test: Vec::new(),
                reference: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };

    let test_noise = base;
    let ref_noise = match cfg.coupling {
        Coupling::Synchronous => base,
        Coupling::Independent => base.derive(REFERENCE_STREAM),
    };
    let law = cfg.test_initial.as_ref().unwrap_or(&scn.initial);
    let init = engine::sample_law(law, &scn.domain, co.dim, cfg.n, &test_noise, cfg.phase)?;
    let test = engine::simulate_from(init, &scn, &sim, &test_noise)?;
    let reference = engine::simulate_from(fp.ensemble.clone(), &scn, &sim, &ref_noise)?;

    let c = &co.constants;
    let dist = |a: &Ensemble, b: &Ensemble| distance(cfg.metric, a, b, psi.as_ref(), c, cfg.beta, cfg.k, &base);
    let distances: Vec<f64> = pool(cfg.workers)?.install(|| {
        test.par_iter().zip(&reference).map(|(a, b)| dist(a, b)).collect::<Result<Vec<f64>>>()
    })?;

    let noise_floor = match cfg.coupling {
        Coupling::Synchronous => None,
        Coupling::Independent => {
            let copy = engine::simulate_from(fp.ensemble.clone(), &scn, &sim, &base.derive(FLOOR_STREAM))?;
            let last = cfg.periods;
            Some(dist(&reference[last], &copy[last])?)
        }
    };

    let fitted_periods: Vec<usize> = (cfg.burn_in..distances.len())
        .filter(|&n| noise_floor.is_none_or(|f| distances[n] > tol.floor_multiple * f))
        .collect();
    if let Some(f) = noise_floor {
        let dropped = distances.len().saturating_sub(cfg.burn_in) - fitted_periods.len();
        if dropped > 0 {
            notes.push(format!("{dropped} period(s) below {} × the sampling floor {f:.3e} left out of the fit", tol.floor_multiple));
        }
    }
    let pts: Vec<(usize, f64)> = fitted_periods.iter().map(|&n| (n, distances[n])).collect();
    let (fit, fit_error) = match fit_points(&pts) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let trend = cfg.metric.trend_only().then(|| trend_test(&distances, cfg.burn_in, tol.trend_fraction));

    let tail = &distances[cfg.burn_in.min(distances.len())..];
    let verdict = if !tail.is_empty() && tail.iter().all(|d| d.abs() <= tol.degenerate_threshold) {
        Verdict::PassDegenerate
    } else if let Some(t) = &trend {
        if t.pass {
            Verdict::TrendPass
        } else {
            Verdict::TrendFail
        }
    } else {
        match (&predicted, &fit) {
            (None, _) => Verdict::Inconclusive,
            (Some(p), _) if p.lambda <= 0.0 => Verdict::NoContractionPredicted,
            (Some(_), None) => Verdict::Inconclusive,
            (Some(p), Some(f)) => {
                if f.rate >= tol.rate_fraction * p.lambda && f.r2 >= tol.min_r2 {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
        }
    };

    let report = ErgodicityReport {
        scenario: scn.name.clone(),
        metric: cfg.metric.name().into(),
        coupling: coupling_name(cfg.coupling).into(),
        predicted,
        prediction_error,
        distances,
        fitted_periods,
        fit,
        fit_error,
        noise_floor,
        trend,
        entropy_constants,
        verdict,
        tolerance: tol,
        fixed_point,
        environment,
        notes,
        config: cfg.clone(),
    };
    Ok(Experiment {
        report,
        test,
        reference,
    })
}

fn coupling_name(c: Coupling) -> &'static str {
    match c {
        Coupling::Independent => "independent",
        Coupling::Synchronous => "synchronous",
    }
}
