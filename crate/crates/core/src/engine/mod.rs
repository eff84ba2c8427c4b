//! Projected Euler–Maruyama propagation of the mean-field particle system.

pub mod io;
pub mod noise;

pub use noise::NoisePolicy;

use crate::coefficients::{Diffusion, InitialLaw, MeasureView, PeriodicCoefficients, Scenario};
use crate::error::{Error, Result};
use crate::geometry::ConvexDomain;
use crate::transport;
use noise::stream;
use rayon::prelude::*;

/// An `N`-particle empirical measure at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub time: f64,
    pub dim: usize,
    /// Row-major `N × d`.
    pub positions: Vec<f64>,
    /// Cumulative projection displacement per particle.
    pub reflection: Vec<f64>,
}

impl Ensemble {
    pub fn new(positions: Vec<f64>, dim: usize, time: f64) -> Result<Self> {
        if dim == 0 || positions.is_empty() || positions.len() % dim != 0 {
            return Err(Error::Config(format!(
                "an ensemble needs at least one particle and a whole number of {dim}-dimensional rows"
            )));
        }
        if let Some(i) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("particle {} has a non-finite coordinate", i / dim)));
        }
        let n = positions.len() / dim;
        Ok(Ensemble {
            time,
            dim,
            positions,
            reflection: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    pub fn view(&self) -> MeasureView<'_> {
        MeasureView::new(&self.positions, self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        self.view().mean()
    }

    /// Sample covariance (divided by `N`), row-major `d × d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let m = self.mean();
        let mut c = vec![0.0; d * d];
        for p in self.points() {
            for i in 0..d {
                for j in 0..d {
                    c[i * d + j] += (p[i] - m[i]) * (p[j] - m[j]);
                }
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    pub fn check_in(&self, dom: &ConvexDomain) -> Result<()> {
        match self.points().position(|p| !dom.contains(p)) {
            Some(i) => Err(Error::Domain(format!("particle {i} lies outside the domain"))),
            None => Ok(()),
        }
    }
}

/// Time discretization and ensemble size for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub steps_per_period: u64,
    pub periods: usize,
    pub n: usize,
    /// Pairwise interactions average over this many uniformly drawn particles
    /// (with replacement) instead of all `N`. Trades accuracy for speed.
    pub subsample: Option<usize>,
    pub seed: u64,
    pub workers: usize,
    /// Phase `s` at which the run starts; snapshots are at `s + n t₀`.
    pub start: f64,
}

impl SimConfig {
    pub fn new(steps_per_period: u64, periods: usize, n: usize, seed: u64) -> Self {
        SimConfig {
            steps_per_period,
            periods,
            n,
            subsample: None,
            seed,
            workers: 1,
            start: 0.0,
        }
    }

    pub fn dt(&self, period: f64) -> f64 {
        period / self.steps_per_period as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period == 0 {
            return Err(Error::Config("steps per period must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("particle count must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("worker count must be positive".into()));
        }
        if self.subsample == Some(0) {
            return Err(Error::Config("interaction subsample must be positive".into()));
        }
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(Error::Config("start phase must be a finite nonnegative time".into()));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }
}

/// Per-step knobs that are not part of the mathematical step.
#[derive(Debug, Clone, Default)]
pub struct StepOptions<'a> {
    pub subsample: Option<usize>,
    pub label: &'a str,
}

/// One projected Euler–Maruyama step with the pre-step measure frozen.
///
/// Particle `i` uses the Gaussian increment keyed by `(i, k)`.
/// Particles per parallel task in [`step`].
const STEP_CHUNK: usize = 256;

pub fn step(
    ens: &mut Ensemble,
    coeffs: &PeriodicCoefficients,
    dom: &ConvexDomain,
    dt: f64,
    noise: &NoisePolicy,
    k: u64,
    opts: &StepOptions<'_>,
) -> Result<()> {
    let d = ens.dim;
    if d != coeffs.dim {
        return Err(Error::Config(format!(
            "ensemble is {d}-dimensional but the coefficients are {}-dimensional",
            coeffs.dim
        )));
    }
    let n = ens.len();
    let t = ens.time;
    let indices: Option<Vec<usize>> = opts.subsample.filter(|&m| m < n).map(|m| {
        (0..m)
            .map(|j| {
                let u = noise.uniform(stream::SUBSAMPLE, j as u32, k);
                (((1.0 - u) * n as f64) as usize).min(n - 1)
            })
            .collect()
    });
    let old = std::mem::take(&mut ens.positions);
    let mut view = MeasureView::new(&old, d);
    if let Some(idx) = &indices {
        view = view.with_subsample(idx);
    }
    let summary = coeffs.drift.summarize(t, &view);
    let iso = coeffs.isotropic_scale(t);
    let m = coeffs.noise_dim();
    let sqdt = dt.sqrt();
    let whole = dom.is_whole_space();
    let mut new = vec![0.0; old.len()];
    // chunks keep scheduling and error bookkeeping off the per-particle path;
    // each reports its first failure so the overall error is deterministic
    let outcome: Vec<Option<Error>> = new
        .par_chunks_mut(d * STEP_CHUNK)
        .zip(ens.reflection.par_chunks_mut(STEP_CHUNK))
        .enumerate()
        .map(|(c, (outs, refls))| {
            let (mut b, mut xi) = (vec![0.0; d], vec![0.0; m]);
            for (j, (out, refl)) in outs.chunks_mut(d).zip(refls.iter_mut()).enumerate() {
                let i = c * STEP_CHUNK + j;
                let x = &old[i * d..(i + 1) * d];
                coeffs.drift.eval(t, x, &view, &summary, &mut b);
                noise.normals(stream::DYNAMICS, i as u32, k, &mut xi);
                match (&coeffs.diffusion, iso) {
                    (_, Some(s)) => {
                        for c in 0..d {
                            out[c] = x[c] + b[c] * dt + s * sqdt * xi[c];
                        }
                    }
                    (Diffusion::General { sigma, .. }, None) => {
                        let sg = sigma(t, x);
                        for c in 0..d {
                            let mut acc = 0.0;
                            for j in 0..m {
                                acc += sg[(c, j)] * xi[j];
                            }
                            out[c] = x[c] + b[c] * dt + sqdt * acc;
                        }
                    }
                    (Diffusion::Isotropic { .. }, None) => unreachable!(),
                }
                if out.iter().any(|v| !v.is_finite()) {
                    return Some(Error::BlowUp {
                        scenario: opts.label.to_string(),
                        particle: i,
                        step: k,
                    });
                }
                if !whole {
                    match dom.project(out) {
                        Ok((p, disp)) => {
                            out.copy_from_slice(&p);
                            *refl += disp;
                        }
                        Err(e) => return Some(e),
                    }
                }
            }
            None
        })
        .collect();
    ens.positions = new;
    if let Some(e) = outcome.into_iter().flatten().next() {
        return Err(e);
    }
    ens.time = t + dt;
    Ok(())
}

/// Draws the initial ensemble of a scenario.
pub fn sample_initial(scn: &Scenario, n: usize, noise: &NoisePolicy, start: f64) -> Result<Ensemble> {
    sample_law(&scn.initial, &scn.domain, scn.coefficients.dim, n, noise, start)
}

pub fn sample_law(
    law: &InitialLaw,
    dom: &ConvexDomain,
    d: usize,
    n: usize,
    noise: &NoisePolicy,
    start: f64,
) -> Result<Ensemble> {
    let mut pos = Vec::with_capacity(n * d);
    let mut xi = vec![0.0; d];
    let mut u = vec![0.0; d];
    for i in 0..n {
        let id = i as u32;
        match law {
            InitialLaw::Point { at } => pos.extend_from_slice(at),
            InitialLaw::Gaussian { mean, std } => {
                noise.derive(1).normals(stream::INITIAL, id, 0, &mut xi);
                let x: Vec<f64> = mean.iter().zip(&xi).map(|(m, z)| m + std * z).collect();
                let (p, _) = dom.project(&x)?;
                pos.extend_from_slice(&p);
            }
            InitialLaw::UniformInDomain => match dom {
                ConvexDomain::Ball { center, radius } => {
                    noise.derive(2).normals(stream::INITIAL, id, 0, &mut xi);
                    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let rad = radius * noise.derive(3).uniform(stream::INITIAL, id, 0).powf(1.0 / d as f64);
                    let x: Vec<f64> = center.iter().zip(&xi).map(|(c, z)| c + rad * z / r).collect();
                    pos.extend_from_slice(&dom.project(&x)?.0);
                }
                ConvexDomain::Box { lower, upper } => {
                    noise.derive(4).uniforms(stream::INITIAL, id, 0, &mut u);
                    for c in 0..d {
                        pos.push(lower[c] + (1.0 - u[c]) * (upper[c] - lower[c]));
                    }
                }
                _ => return Err(Error::Config("uniform initial law needs a ball or box domain".into())),
            },
        }
    }
    let ens = Ensemble::new(pos, d, start)?;
    ens.check_in(dom)?;
    Ok(ens)
}

fn advance_period(
    ens: &mut Ensemble,
    scn: &Scenario,
    cfg: &SimConfig,
    noise: &NoisePolicy,
    period_index: usize,
) -> Result<()> {
    let t0 = scn.coefficients.period;
    let dt = cfg.dt(t0);
    let base = cfg.start + period_index as f64 * t0;
    let opts = StepOptions {
        subsample: cfg.subsample,
        label: &scn.name,
    };
    for j in 0..cfg.steps_per_period {
        ens.time = base + j as f64 * dt;
        let k = period_index as u64 * cfg.steps_per_period + j;
        step(ens, &scn.coefficients, &scn.domain, dt, noise, k, &opts)?;
    }
    ens.time = base + t0;
    Ok(())
}

/// Evolves `init` over `cfg.periods` periods, returning the snapshots at
/// `start + n t₀` for `n = 0..=periods`.
pub fn simulate_from(init: Ensemble, scn: &Scenario, cfg: &SimConfig, noise: &NoisePolicy) -> Result<Vec<Ensemble>> {
    cfg.validate()?;
    let pool = cfg.pool()?;
    let mut ens = init;
    ens.time = cfg.start;
    let mut out = vec![ens.clone()];
    pool.install(|| -> Result<()> {
        for p in 0..cfg.periods {
            advance_period(&mut ens, scn, cfg, noise, p)?;
            out.push(ens.clone());
        }
        Ok(())
    })?;
    Ok(out)
}

/// Samples the scenario's initial law and simulates it.
pub fn simulate(scn: &Scenario, cfg: &SimConfig) -> Result<Vec<Ensemble>> {
    let noise = NoisePolicy::new(cfg.seed);
    let init = sample_initial(scn, cfg.n, &noise, cfg.start)?;
    simulate_from(init, scn, cfg, &noise)
}

/// Evolves two ensembles with identical noise keys: particle `i` of both
/// chains receives the same Gaussian increment at every step.
pub fn coupled_simulate(
    a: Ensemble,
    b: Ensemble,
    scn: &Scenario,
    cfg: &SimConfig,
) -> Result<Vec<(Ensemble, Ensemble)>> {
    if a.len() != b.len() || a.dim != b.dim {
        return Err(Error::Config(format!(
            "coupled ensembles differ in shape: {}x{} vs {}x{}",
            a.len(),
            a.dim,
            b.len(),
            b.dim
        )));
    }
    cfg.validate()?;
    let noise = NoisePolicy::new(cfg.seed);
    let pool = cfg.pool()?;
    let (mut a, mut b) = (a, b);
    a.time = cfg.start;
    b.time = cfg.start;
    let mut out = vec![(a.clone(), b.clone())];
    pool.install(|| -> Result<()> {
        for p in 0..cfg.periods {
            advance_period(&mut a, scn, cfg, &noise, p)?;
            advance_period(&mut b, scn, cfg, &noise, p)?;
            out.push((a.clone(), b.clone()));
        }
        Ok(())
    })?;
    Ok(out)
}

/// Result of the periodic fixed-point iteration.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub ensemble: Ensemble,
    pub periods: usize,
    /// `W₂` between successive period snapshots.
    pub trace: Vec<f64>,
}

/// Iterates the one-period map from the Dirac mass at the projected origin
/// until successive snapshots are within `eps_fix` in `W₂` for `m_consec`
/// consecutive periods. `cfg.periods` is the iteration cap.
pub fn periodic_fixed_point(scn: &Scenario, cfg: &SimConfig, eps_fix: f64, m_consec: usize) -> Result<FixedPoint> {
    periodic_fixed_point_with(scn, cfg, eps_fix, m_consec, &NoisePolicy::new(cfg.seed))
}

pub fn periodic_fixed_point_with(
    scn: &Scenario,
    cfg: &SimConfig,
    eps_fix: f64,
    m_consec: usize,
    noise: &NoisePolicy,
) -> Result<FixedPoint> {
    if !(eps_fix > 0.0) {
        return Err(Error::Config("fixed-point tolerance must be positive".into()));
    }
    cfg.validate()?;
    let d = scn.coefficients.dim;
    let (origin, _) = scn.domain.project(&vec![0.0; d])?;
    let mut ens = Ensemble::new(origin.repeat(cfg.n), d, cfg.start)?;
    let pool = cfg.pool()?;
    let mut trace = Vec::new();
    let mut run = 0usize;
    let m_consec = m_consec.max(1);
    let mut prev = ens.clone();
    let done = pool.install(|| -> Result<Option<usize>> {
        for p in 0..cfg.periods {
            advance_period(&mut ens, scn, cfg, noise, p)?;
            let w = transport::w2_auto(&prev, &ens, noise)?;
            trace.push(w);
            run = if w < eps_fix { run + 1 } else { 0 };
            if run >= m_consec {
                return Ok(Some(p + 1));
            }
            prev = ens.clone();
        }
        Ok(None)
    })?;
    match done {
        Some(periods) => {
            // report the snapshot at phase `start` with time reset to it
            ens.time = cfg.start;
            Ok(FixedPoint {
                ensemble: ens,
                periods,
                trace,
            })
        }
        None => Err(Error::NonConvergence {
            periods: cfg.periods,
            trace,
        }),
    }
}

/// Continues an ensemble at phase `cfg.start` to phase `cfg.start + s`
/// (`0 ≤ s < t₀`), giving the invariant measure at another phase.
pub fn evolve_to_phase(ens: &Ensemble, scn: &Scenario, cfg: &SimConfig, s: f64, noise: &NoisePolicy) -> Result<Ensemble> {
    let t0 = scn.coefficients.period;
    if !(0.0..t0).contains(&s) {
        return Err(Error::Config(format!("phase {s} outside [0, {t0})")));
    }
    let dt = cfg.dt(t0);
    let steps = (s / dt).round() as u64;
    let mut e = ens.clone();
    let opts = StepOptions {
        subsample: cfg.subsample,
        label: &scn.name,
    };
    cfg.pool()?.install(|| -> Result<()> {
        for j in 0..steps {
            e.time = cfg.start + j as f64 * dt;
            step(&mut e, &scn.coefficients, &scn.domain, dt, noise, j, &opts)?;
        }
        Ok(())
    })?;
    e.time = cfg.start + steps as f64 * dt;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{scenario_by_name, Diffusion, FnDrift, TimeProfile};
    use std::sync::Arc;

    fn coeffs(dim: usize, drift: f64, var: f64) -> PeriodicCoefficients {
        PeriodicCoefficients::new(
            1.0,
            dim,
            Arc::new(FnDrift::new(move |_, _, _, o| o.fill(drift))),
            Diffusion::Isotropic {
                variance: TimeProfile::Constant(var),
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_coefficients_leave_positions() {
        let c = coeffs(2, 0.0, 0.0);
        let mut e = Ensemble::new(vec![1.0, 2.0, 3.0, 4.0], 2, 0.0).unwrap();
        step(&mut e, &c, &ConvexDomain::WholeSpace, 0.1, &NoisePolicy::new(1), 0, &Default::default()).unwrap();
        assert_eq!(e.positions, vec![1.0, 2.0, 3.0, 4.0]);
        assert!((e.time - 0.1).abs() < 1e-15);
    }

    #[test]
    fn euler_arithmetic_for_linear_drift() {
        let scn = scenario_by_name("ou-periodic").unwrap().spec.with_dim(1).unwrap().build().unwrap();
        let mut e = Ensemble::new(vec![1.0], 1, 0.0).unwrap();
        step(&mut e, &scn.coefficients, &scn.domain, 0.1, &NoisePolicy::silent(), 0, &Default::default()).unwrap();
        assert!((e.positions[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn halfspace_reflection_magnitude() {
        let c = coeffs(1, -10.0, 0.0);
        let dom = ConvexDomain::polytope(vec![(vec![-1.0], 0.0)]).unwrap();
        let mut e = Ensemble::new(vec![0.05], 1, 0.0).unwrap();
        step(&mut e, &c, &dom, 0.1, &NoisePolicy::silent(), 0, &Default::default()).unwrap();
        assert_eq!(e.positions[0], 0.0);
        assert!((e.reflection[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn blow_up_is_reported() {
        let c = coeffs(1, f64::INFINITY, 0.0);
        let mut e = Ensemble::new(vec![0.0, 1.0], 1, 0.0).unwrap();
        let err = step(&mut e, &c, &ConvexDomain::WholeSpace, 0.1, &NoisePolicy::silent(), 7, &StepOptions {
            subsample: None,
            label: "bad",
        })
        .unwrap_err();
        match err {
            Error::BlowUp { scenario, particle, step } => {
                assert_eq!((scenario.as_str(), particle, step), ("bad", 0, 7));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_periods_returns_initial() {
        let scn = scenario_by_name("granular-periodic").unwrap();
        let cfg = SimConfig::new(10, 0, 16, 3);
        let s = simulate(&scn, &cfg).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0], sample_initial(&scn, 16, &NoisePolicy::new(3), 0.0).unwrap());
    }

    #[test]
    fn ball_confinement_holds_at_every_snapshot() {
        let scn = scenario_by_name("granular-periodic-ball").unwrap();
        let cfg = SimConfig::new(50, 3, 200, 5);
        for snap in simulate(&scn, &cfg).unwrap() {
            snap.check_in(&scn.domain).unwrap();
        }
    }

    #[test]
    fn identical_initial_ensembles_stay_identical() {
        let scn = scenario_by_name("granular-periodic").unwrap();
        let cfg = SimConfig::new(50, 2, 64, 9);
        let a = sample_initial(&scn, 64, &NoisePolicy::new(1), 0.0).unwrap();
        for (x, y) in coupled_simulate(a.clone(), a, &scn, &cfg).unwrap() {
            assert_eq!(x.positions, y.positions);
        }
    }

    #[test]
    fn noiseless_coupling_contracts_by_exact_linear_factor() {
        // oracle: the discrete recursion Δ ← (1 − a(t_j)Δt) Δ, multiplied out
        let scn = scenario_by_name("ou-periodic").unwrap().spec.with_dim(1).unwrap();
        let mut spec = scn.clone();
        if let crate::coefficients::Family::Ou { variance, .. } = &mut spec.family {
            *variance = TimeProfile::Constant(0.0);
        }
        let scn = spec.build().unwrap();
        let steps = 400;
        let cfg = SimConfig::new(steps, 2, 1, 0);
        let a = Ensemble::new(vec![1.0], 1, 0.0).unwrap();
        let b = Ensemble::new(vec![3.0], 1, 0.0).unwrap();
        let pairs = coupled_simulate(a, b, &scn, &cfg).unwrap();
        let dt = 1.0 / steps as f64;
        let mut factor = 1.0;
        for j in 0..steps {
            factor *= 1.0 - (1.0 + 0.5 * (std::f64::consts::TAU * j as f64 * dt).sin()) * dt;
        }
        for (n, (x, y)) in pairs.iter().enumerate() {
            let gap = y.positions[0] - x.positions[0];
            let want = 2.0 * factor.powi(n as i32);
            assert!((gap - want).abs() < 1e-12, "n={n}: {gap} vs {want}");
            assert!(gap <= 2.0 * (-(n as f64)).exp() * (1.0 + 1e-2));
        }
    }

    #[test]
    fn decoupled_granular_matches_ou_coupling() {
        let mut g = scenario_by_name("granular-periodic").unwrap().spec;
        if let crate::coefficients::Family::Granular { interaction, .. } = &mut g.family {
            *interaction = TimeProfile::Constant(0.0);
        }
        let g = g.build().unwrap();
        let o = scenario_by_name("ou-periodic").unwrap();
        let cfg = SimConfig::new(100, 2, 32, 4);
        let a = sample_initial(&g, 32, &NoisePolicy::new(2), 0.0).unwrap();
        let mut b = a.clone();
        b.positions.iter_mut().for_each(|v| *v += 1.0);
        let pg = coupled_simulate(a.clone(), b.clone(), &g, &cfg).unwrap();
        let po = coupled_simulate(a, b, &o, &cfg).unwrap();
        for ((ga, gb), (oa, ob)) in pg.iter().zip(&po) {
            assert_eq!(ga.positions, oa.positions);
            assert_eq!(gb.positions, ob.positions);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let scn = scenario_by_name("granular-periodic-box").unwrap();
        let mut cfg = SimConfig::new(40, 2, 300, 11);
        cfg.subsample = Some(50);
        let one = simulate(&scn, &cfg).unwrap();
        for w in [2, 8] {
            cfg.workers = w;
            assert_eq!(simulate(&scn, &cfg).unwrap(), one);
        }
    }

    #[test]
    fn frozen_point_mass_converges_in_one_period() {
        let c = coeffs(2, 0.0, 0.0);
        let scn = Scenario {
            name: "frozen".into(),
            coefficients: c,
            domain: ConvexDomain::WholeSpace,
            initial: InitialLaw::Point { at: vec![0.0, 0.0] },
            oracle: crate::coefficients::OracleTag::None,
            spec: scenario_by_name("ou-periodic").unwrap().spec,
        };
        let cfg = SimConfig::new(10, 5, 8, 0);
        let fp = periodic_fixed_point(&scn, &cfg, 1e-12, 1).unwrap();
        assert_eq!(fp.periods, 1);
    }

    #[test]
    fn non_convergence_reports_trace() {
        let scn = scenario_by_name("ou-periodic").unwrap();
        let cfg = SimConfig::new(10, 3, 8, 0);
        match periodic_fixed_point(&scn, &cfg, 1e-300, 1) {
            Err(Error::NonConvergence { periods, trace }) => {
                assert_eq!(periods, 3);
                assert_eq!(trace.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relabeling_in_one_dimension_preserves_statistics() {
        // noise attached by rank: sort the initial ensemble, so any
        // relabeling of the input produces the same run
        let scn = scenario_by_name("granular-periodic").unwrap().spec.with_dim(1).unwrap().build().unwrap();
        let cfg = SimConfig::new(50, 2, 64, 3);
        let base = sample_initial(&scn, 64, &NoisePolicy::new(8), 0.0).unwrap();
        let mut shuffled = base.positions.clone();
        shuffled.reverse();
        shuffled.rotate_left(17);
        let run = |mut p: Vec<f64>| {
            p.sort_by(f64::total_cmp);
            let e = Ensemble::new(p, 1, 0.0).unwrap();
            let last = simulate_from(e, &scn, &cfg, &NoisePolicy::new(3)).unwrap().pop().unwrap();
            let mut s = last.positions.clone();
            s.sort_by(f64::total_cmp);
            (last.mean(), last.covariance(), s)
        };
        assert_eq!(run(base.positions.clone()), run(shuffled));
    }
}
