//! Experiment configuration: a JSON document validated key by key.

use crate::coefficients::{scenario::builtin_spec, InitialLaw, Scenario, ScenarioSpec};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;

/// Distance used for the per-period sequence `d_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `W₂²`
    W2,
    W1,
    Wpsi,
    Wpsiv,
    Entropy,
    Ratio,
}

impl Metric {
    pub const ALL: [(&'static str, Metric); 6] = [
        ("w2", Metric::W2),
        ("w1", Metric::W1),
        ("wpsi", Metric::Wpsi),
        ("wpsiv", Metric::Wpsiv),
        ("entropy", Metric::Entropy),
        ("ratio", Metric::Ratio),
    ];

    pub fn parse(s: &str) -> Result<Metric> {
        Self::ALL.iter().find(|(n, _)| *n == s).map(|(_, m)| *m).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown metric `{s}`; valid metrics: {}", valid.join(", ")))
        })
    }

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, m)| *m == self).map(|(n, _)| *n).expect("listed")
    }

    /// Metrics judged by their trend rather than a fitted rate.
    pub fn trend_only(self) -> bool {
        matches!(self, Metric::Entropy | Metric::Ratio)
    }
}

/// How the reference chain's noise relates to the test chain's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Fresh noise for the reference copy.
    Independent,
    /// Particle `i` of both chains receives the same increments.
    Synchronous,
}

/// Parameters of the cost function `ψ`; missing values are taken from the
/// scenario's declared constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostConfig {
    Example31 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta2: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Eigen {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l: Option<f64>,
    },
}

fn default_tol() -> f64 {
    1e-14
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Named(String),
    Inline(Box<ScenarioSpec>),
}

impl ScenarioRef {
    pub fn spec(&self) -> Result<ScenarioSpec> {
        match self {
            ScenarioRef::Named(n) => builtin_spec(n),
            ScenarioRef::Inline(s) => Ok((**s).clone()),
        }
    }
}

/// A fully resolved experiment; every field has a value after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioRef,
    /// Overrides the scenario dimension when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub n: usize,
    pub dt: f64,
    pub periods: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    pub metric: Metric,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostConfig>,
    /// Overrides the declared `β` for weighted metrics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Neighbour index of the entropy estimator.
    pub k: usize,
    pub eps_fix: f64,
    pub m_consec: usize,
    pub fixed_point_max_periods: usize,
    pub coupling: Coupling,
    /// Phase `s ∈ [0, t₀)` at which snapshots are compared.
    pub phase: f64,
    /// Law of the test chain; the scenario's initial law when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_initial: Option<InitialLaw>,
    /// Window `ε` for the entropy constant; defaults to one period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

pub const DEFAULT_N: usize = 4096;
pub const DEFAULT_STEPS: u64 = 1000;
pub const DEFAULT_PERIODS: usize = 12;
pub const DEFAULT_BURN_IN: usize = 2;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_EPS_FIX: f64 = 0.25;
pub const DEFAULT_M_CONSEC: usize = 2;
pub const DEFAULT_FIXED_POINT_CAP: usize = 50;
/// Pairwise `n × n` tables make the ratio metric quadratic in memory.
pub const RATIO_LIMIT: usize = 2048;

const KEYS: [&str; 21] = [
    "scenario",
    "dim",
    "n",
    "dt",
    "periods",
    "burn_in",
    "seed",
    "workers",
    "subsample",
    "metric",
    "cost",
    "beta",
    "k",
    "eps_fix",
    "m_consec",
    "fixed_point_max_periods",
    "coupling",
    "phase",
    "test_initial",
    "entropy_window",
    "output_dir",
];

impl ExperimentConfig {
    /// Defaults for a named scenario.
    pub fn for_scenario(name: &str) -> Result<Self> {
        let mut m = Map::new();
        m.insert("scenario".into(), Value::String(name.into()));
        Self::from_value(&Value::Object(m), "")
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let spec = self.scenario.spec()?;
        match self.dim {
            Some(d) if d != spec.dim => spec.with_dim(d),
            _ => Ok(spec),
        }
    }

    pub fn build_scenario(&self) -> Result<Scenario> {
        self.scenario_spec()?.build()
    }

    pub fn steps_per_period(&self, period: f64) -> u64 {
        (period / self.dt).round().max(1.0) as u64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Parses and validates a JSON document, filling defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_value(&v, text)
    }

    fn from_value(v: &Value, text: &str) -> Result<Self> {
        let Some(obj) = v.as_object() else {
            return Err(Error::Schema(vec!["<root>: expected a JSON object".into()]));
        };
        let mut bad: Vec<String> = Vec::new();
        let at = |key: &str| line_of(text, key).map(|l| format!(" (line {l})")).unwrap_or_default();
        for k in obj.keys() {
            if !KEYS.contains(&k.as_str()) {
                bad.push(format!("{k}{}: unknown key", at(k)));
            }
        }
        let field = |key: &str| obj.get(key).filter(|v| !v.is_null());

        let scenario = match field("scenario") {
            None => {
                bad.push("scenario: required".into());
                None
            }
            Some(Value::String(s)) => Some(ScenarioRef::Named(s.clone())),
            Some(o @ Value::Object(_)) => match serde_json::from_value::<ScenarioSpec>(o.clone()) {
                Ok(s) => Some(ScenarioRef::Inline(Box::new(s))),
                Err(e) => {
                    bad.push(format!("scenario{}: {e}", at("scenario")));
                    None
                }
            },
            Some(_) => {
                bad.push(format!("scenario{}: expected a name or an inline definition", at("scenario")));
                None
            }
        };
        let spec = scenario.as_ref().and_then(|s| match s.spec() {
            Ok(s) => Some(s),
            Err(e) => {
                bad.push(format!("scenario{}: {e}", at("scenario")));
                None
            }
        });

        let uint = |key: &str, default: Option<u64>, min: u64, bad: &mut Vec<String>| -> Option<u64> {
            match obj.get(key).filter(|v| !v.is_null()) {
                None => default,
                Some(v) => match v.as_u64() {
                    Some(x) if x >= min => Some(x),
                    _ => {
                        bad.push(format!("{key}{}: expected an integer ≥ {min}", at(key)));
                        default
                    }
                },
            }
        };
        let dim = uint("dim", None, 1, &mut bad).map(|x| x as usize);
        let n = uint("n", Some(DEFAULT_N as u64), 2, &mut bad).unwrap_or(0) as usize;
        let periods = uint("periods", Some(DEFAULT_PERIODS as u64), 1, &mut bad).unwrap_or(0) as usize;
        let burn_in = uint("burn_in", Some(DEFAULT_BURN_IN as u64), 0, &mut bad).unwrap_or(0) as usize;
        let seed = uint("seed", Some(0), 0, &mut bad).unwrap_or(0);
        let workers = uint("workers", Some(1), 1, &mut bad).unwrap_or(1) as usize;
        let subsample = uint("subsample", None, 1, &mut bad).map(|x| x as usize);
        let k = uint("k", Some(DEFAULT_K as u64), 1, &mut bad).unwrap_or(1) as usize;
        let m_consec = uint("m_consec", Some(DEFAULT_M_CONSEC as u64), 1, &mut bad).unwrap_or(1) as usize;
        let fp_cap = uint("fixed_point_max_periods", Some(DEFAULT_FIXED_POINT_CAP as u64), 1, &mut bad)
            .unwrap_or(1) as usize;

        let real = |key: &str, bad: &mut Vec<String>| -> Option<f64> {
            match obj.get(key).filter(|v| !v.is_null()) {
                None => None,
                Some(v) => match v.as_f64() {
                    Some(x) if x.is_finite() => Some(x),
                    _ => {
                        bad.push(format!("{key}{}: expected a finite number", at(key)));
                        None
                    }
                },
            }
        };
        let period = spec.as_ref().map_or(1.0, |s| s.period);
        let dt = match real("dt", &mut bad) {
            Some(dt) if dt > 0.0 && dt <= period => {
                let steps = (period / dt).round();
                if ((steps * dt) - period).abs() > 1e-9 * period {
                    bad.push(format!("dt{}: must divide the period {period}", at("dt")));
                }
                dt
            }
            Some(_) => {
                bad.push(format!("dt{}: must lie in (0, period]", at("dt")));
                period / DEFAULT_STEPS as f64
            }
            None => period / DEFAULT_STEPS as f64,
        };
        let positive = |key: &str, x: Option<f64>, bad: &mut Vec<String>| {
            if let Some(v) = x {
                if !(v > 0.0) {
                    bad.push(format!("{key}{}: must be positive", at(key)));
                }
            }
            x
        };
        let eps_fix = positive("eps_fix", real("eps_fix", &mut bad), &mut bad).unwrap_or(DEFAULT_EPS_FIX);
        let beta = positive("beta", real("beta", &mut bad), &mut bad);
        let entropy_window = positive("entropy_window", real("entropy_window", &mut bad), &mut bad);
        let phase = real("phase", &mut bad).unwrap_or(0.0);
        if !(0.0..period).contains(&phase) {
            bad.push(format!("phase{}: must lie in [0, {period})", at("phase")));
        }

        let metric = match field("metric") {
            None => Metric::W2,
            Some(Value::String(s)) => Metric::parse(s).unwrap_or_else(|e| {
                bad.push(format!("metric{}: {}", at("metric"), e.to_string().trim_start_matches("configuration error: ")));
                Metric::W2
            }),
            Some(_) => {
                bad.push(format!("metric{}: expected a string", at("metric")));
                Metric::W2
            }
        };
        let coupling = match field("coupling") {
            None => Coupling::Independent,
            Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|_| {
                bad.push(format!("coupling{}: expected \"independent\" or \"synchronous\"", at("coupling")));
                Coupling::Independent
            }),
        };
        let cost = field("cost").and_then(|v| match serde_json::from_value::<CostConfig>(v.clone()) {
            Ok(c) => Some(c),
            Err(e) => {
                bad.push(format!("cost{}: {e}", at("cost")));
                None
            }
        });
        let test_initial = field("test_initial").and_then(|v| match serde_json::from_value(v.clone()) {
            Ok(c) => Some(c),
            Err(e) => {
                bad.push(format!("test_initial{}: {e}", at("test_initial")));
                None
            }
        });
        let output_dir = match field("output_dir") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                bad.push(format!("output_dir{}: expected a string", at("output_dir")));
                None
            }
        };

        if metric == Metric::Ratio && n > RATIO_LIMIT {
            bad.push(format!("n{}: the ratio metric supports at most {RATIO_LIMIT} particles", at("n")));
        }
        if let Some(s) = &spec {
            let check = || -> Result<()> {
                let s = match dim {
                    Some(d) if d != s.dim => s.with_dim(d)?,
                    _ => s.clone(),
                };
                let scn = s.build()?;
                let c = &scn.coefficients.constants;
                let need_psi = matches!(metric, Metric::Wpsi | Metric::Wpsiv | Metric::Ratio);
                if need_psi && cost.is_none() {
                    let ok = match metric {
                        Metric::Wpsi => c.theta1.is_some() && c.theta2.is_some() && c.radius.is_some(),
                        _ => c.d0.is_some() && c.l.is_some(),
                    };
                    if !ok {
                        return Err(Error::Config(format!(
                            "metric `{}` needs a cost function and scenario `{}` declares no parameters for one",
                            metric.name(),
                            s.name
                        )));
                    }
                }
                if matches!(metric, Metric::Wpsiv | Metric::Ratio) {
                    if c.lyapunov.is_none() {
                        return Err(Error::Config(format!(
                            "metric `{}` needs a Lyapunov weight, which scenario `{}` does not declare",
                            metric.name(),
                            s.name
                        )));
                    }
                    if beta.is_none() && c.beta.is_none() {
                        return Err(Error::Config(format!("metric `{}` needs β", metric.name())));
                    }
                }
                if let Some(law) = &test_initial {
                    let dim_ok = match law {
                        InitialLaw::Point { at } => at.len() == s.dim,
                        InitialLaw::Gaussian { mean, .. } => mean.len() == s.dim,
                        InitialLaw::UniformInDomain => true,
                    };
                    if !dim_ok {
                        return Err(Error::Config(format!("test_initial: expected {} coordinates", s.dim)));
                    }
                }
                Ok(())
            };
            if let Err(e) = check() {
                bad.push(format!("{e}"));
            }
        }

        if !bad.is_empty() {
            return Err(Error::Schema(bad));
        }
        Ok(ExperimentConfig {
            scenario: scenario.expect("checked above"),
            dim,
            n,
            dt,
            periods,
            burn_in,
            seed,
            workers,
            subsample,
            metric,
            cost,
            beta,
            k,
            eps_fix,
            m_consec,
            fixed_point_max_periods: fp_cap,
            coupling,
            phase,
            test_initial,
            entropy_window,
            output_dir,
        })
    }
}

/// 1-based line of the first occurrence of `"key"` in the source text.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let pat = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&pat)).map(|i| i + 1)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::parse(&text)
}
