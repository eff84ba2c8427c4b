//! Closed-form rates and the numerically bounded constants `κ_{l,β}`,
//! `α_{l,β}`.

use super::TabulatedCostFunction;
use crate::coefficients::{trapezoid, DeclaredConstants, LyapunovFn, TimeProfile};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

/// Quadrature nodes per period for composite integrands.
pub const PERIOD_NODES: usize = 4096;
/// Time samples per period for the pointwise minimum in [`rate_wpsiv`].
pub const WPSIV_SAMPLES: usize = 128;

/// `λ = −∫₀^{t₀} (K₁ + K₂)`; positive values predict the per-period
/// contraction factor `e^{−λ}` of `W₂²`.
pub fn rate_w2(k1: &TimeProfile, k2: &TimeProfile, t0: f64) -> f64 {
    -trapezoid(|t| k1.eval(t, t0) + k2.eval(t, t0), t0, PERIOD_NODES)
}

/// `κ/(1 − e^{−κ})`, continuous through `κ = 0`.
fn kappa_ratio(k: f64) -> f64 {
    if k.abs() < 1e-8 {
        1.0 + k / 2.0 + k * k / 12.0
    } else {
        k / -(-k).exp_m1()
    }
}

/// `φ = λ̄ (κ̄₁/(1 − e^{−κ̄₁}) + (w κ̄₂²/2) e^{2wκ̄₁ + 2κ̄₂})` for a window of
/// length `w`.
pub fn entropy_constant_phi(lambda: f64, kappa1: f64, kappa2: f64, window: f64) -> f64 {
    lambda * (kappa_ratio(kappa1) + 0.5 * window * kappa2 * kappa2 * (2.0 * window * kappa1 + 2.0 * kappa2).exp())
}

/// `λ = ∫₀^{t₀} (κ_s − θ_s ‖ψ′‖∞) ds`.
pub fn rate_wpsi(kappa: &TimeProfile, theta: &TimeProfile, psi: &TabulatedCostFunction, t0: f64) -> f64 {
    trapezoid(|t| kappa.eval(t, t0) - theta.eval(t, t0) * psi.c2, t0, PERIOD_NODES)
}

/// The granular-media instantiation with `σ_t = √α_t I`.
#[derive(Debug, Clone, Serialize)]
pub struct GranularPsiRates {
    /// `κ_t = 2α_t / c₂(ψ)`
    pub kappa: TimeProfile,
    /// `θ_t = 2‖∇⁽¹⁾∇⁽²⁾W_t‖∞ / c₁(ψ)`
    pub theta: TimeProfile,
    /// `∫(κ − θ c₂)`, the composition through [`rate_wpsi`].
    pub composed_rate: f64,
    /// `2∫(α/c₂ − ‖∇∇W‖/c₁)`, the closed form quoted with the example.
    pub display_rate: f64,
    /// The two differ by more than `1e−9` relative.
    pub mismatch: bool,
}

pub fn granular_psi_rates(
    alpha: &TimeProfile,
    interaction_norm: &TimeProfile,
    psi: &TabulatedCostFunction,
    t0: f64,
) -> GranularPsiRates {
    let samples = PERIOD_NODES;
    let kappa = alpha.map(|a| 2.0 * a / psi.c2, t0, samples);
    let theta = interaction_norm.map(|w| 2.0 * w / psi.c1, t0, samples);
    let composed_rate = rate_wpsi(&kappa, &theta, psi, t0);
    let display_rate = 2.0 * trapezoid(|t| alpha.eval(t, t0) / psi.c2 - interaction_norm.eval(t, t0) / psi.c1, t0, samples);
    GranularPsiRates {
        kappa,
        theta,
        composed_rate,
        display_rate,
        mismatch: (composed_rate - display_rate).abs() > 1e-9 * (1.0 + display_rate.abs()),
    }
}

/// Result of a bounded numerical infimum or supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    /// Optimiser in the reduced coordinates of the search.
    pub at: [f64; 3],
    /// The optimiser sits on the outer edge of the search box, so a larger
    /// box may change the value.
    pub boundary_hit: bool,
}

/// Grid search over a box followed by repeated local zooms.
fn search(
    lower: &[f64],
    upper: &[f64],
    nodes: usize,
    maximise: bool,
    f: &dyn Fn(&[f64]) -> Option<f64>,
) -> Option<(f64, Vec<f64>)> {
    let k = lower.len();
    let better = |a: f64, b: f64| if maximise { a > b } else { a < b };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    for _level in 0..40 {
        let mut idx = vec![0usize; k];
        let mut p = vec![0.0; k];
        loop {
            for c in 0..k {
                p[c] = lo[c] + (hi[c] - lo[c]) * idx[c] as f64 / (nodes - 1) as f64;
            }
            if let Some(v) = f(&p) {
                if v.is_finite() && best.as_ref().is_none_or(|(b, _)| better(v, *b)) {
                    best = Some((v, p.clone()));
                }
            }
            let mut c = 0;
            while c < k {
                idx[c] += 1;
                if idx[c] < nodes {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
            if c == k {
                break;
            }
        }
        let (_, at) = best.as_ref()?;
        let mut shrunk = false;
        for c in 0..k {
            let cell = (hi[c] - lo[c]) / (nodes - 1) as f64;
            if cell > 1e-10 * (1.0 + upper[c] - lower[c]) {
                shrunk = true;
            }
            lo[c] = (at[c] - 2.0 * cell).max(lower[c]);
            hi[c] = (at[c] + 2.0 * cell).min(upper[c]);
        }
        if !shrunk {
            break;
        }
    }
    best
}

fn near_edge(at: &[f64], upper: &[f64], which: &[usize]) -> bool {
    which.iter().any(|&c| at[c] >= upper[c] * (1.0 - 1e-6))
}

/// `κ_{l,β} = inf_{|x−y|>l} (K₁V(x) + K₁V(y) − 2K₀)/(β⁻¹ + V(x) + V(y))`.
///
/// For a radial `V` the objective is a monotone function of
/// `S = V(x) + V(y)` alone, so the infimum is taken at the smallest or the
/// largest attainable `S`. Both are found by a two-scalar search over radii
/// `(|x|, |y|) ∈ [0, B]²` with `|x| + |y| ≥ l`. A non-radial `V` is searched
/// directly, in one dimension only.
pub fn kappa_l_beta(k0: f64, k1: f64, v: &LyapunovFn, l: f64, beta: f64, bound: f64, dim: usize) -> Result<Extremum> {
    check_common(l, beta, bound)?;
    let objective = |s: f64| (k1 * s - 2.0 * k0) / (1.0 / beta + s);
    if v.is_radial() {
        let sum = |p: &[f64]| -> Option<f64> {
            if p[0] + p[1] < l {
                return None;
            }
            Some(v.radial(p[0])? + v.radial(p[1])?)
        };
        let (lo, hi) = ([0.0, 0.0], [bound, bound]);
        let (smin, at_min) = search(&lo, &hi, 201, false, &sum).ok_or_else(|| infeasible(l, bound))?;
        let (smax, at_max) = search(&lo, &hi, 201, true, &sum).ok_or_else(|| infeasible(l, bound))?;
        let (fa, fb) = (objective(smin), objective(smax));
        Ok(if fa <= fb {
            Extremum {
                value: fa,
                at: [at_min[0], at_min[1], 0.0],
                boundary_hit: near_edge(&at_min, &hi, &[0, 1]),
            }
        } else {
            Extremum {
                value: fb,
                at: [at_max[0], at_max[1], 0.0],
                boundary_hit: near_edge(&at_max, &hi, &[0, 1]),
            }
        })
    } else {
        if dim != 1 {
            return Err(Error::Config("non-radial weights are searched in one dimension only".into()));
        }
        let f = |p: &[f64]| -> Option<f64> {
            if (p[0] - p[1]).abs() < l {
                return None;
            }
            Some(objective(v.value(&p[..1]) + v.value(&p[1..2])))
        };
        let (val, at) = search(&[-bound, -bound], &[bound, bound], 201, false, &f).ok_or_else(|| infeasible(l, bound))?;
        Ok(Extremum {
            value: val,
            at: [at[0], at[1], 0.0],
            boundary_hit: at.iter().any(|c| c.abs() >= bound * (1.0 - 1e-6)),
        })
    }
}

fn infeasible(l: f64, bound: f64) -> Error {
    Error::Config(format!("search box of radius {bound} admits no pair at distance {l}"))
}

fn check_common(l: f64, beta: f64, bound: f64) -> Result<()> {
    if !(l > 0.0 && beta > 0.0 && bound > 0.0) {
        return Err(Error::Config(format!(
            "need l, β and the search radius positive, got {l}, {beta}, {bound}"
        )));
    }
    Ok(())
}

/// Deviation part `σ̂(x)` of the diffusion, used by [`alpha_l_beta`].
pub type SigmaHat<'a> = &'a dyn Fn(&[f64]) -> DMatrix<f64>;

/// `α_{l,β} = c_ψ sup_{0<|x−y|<l} { α|∇V(x) − ∇V(y)| + |(σ̂(x) − σ̂(y))[σ̂*∇V(x) + σ̂*∇V(y)]| }
///            / (|x−y|(β⁻¹ + V(x) + V(y)))`.
///
/// The search runs over pair centres within `B` of the origin. For radial `V`
/// without `σ̂` in higher dimension it uses rotation invariance to reduce to
/// three parameters.
#[allow(clippy::too_many_arguments)]
pub fn alpha_l_beta(
    alpha: f64,
    v: &LyapunovFn,
    sigma_hat: Option<SigmaHat<'_>>,
    c_psi: f64,
    l: f64,
    beta: f64,
    bound: f64,
    dim: usize,
) -> Result<Extremum> {
    check_common(l, beta, bound)?;
    let quotient = |x: &[f64], y: &[f64]| -> Option<f64> {
        let d = x.len();
        let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm = |z: &[f64]| z.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(r > 0.0 && r < l) || norm(x) > bound || norm(y) > bound {
            return None;
        }
        let (mut gx, mut gy) = (vec![0.0; d], vec![0.0; d]);
        v.gradient(x, &mut gx);
        v.gradient(y, &mut gy);
        let diff = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let mut num = alpha * diff;
        if let Some(sh) = sigma_hat {
            let (sx, sy) = (sh(x), sh(y));
            let w = sx.transpose() * nalgebra::DVector::from_column_slice(&gx)
                + sy.transpose() * nalgebra::DVector::from_column_slice(&gy);
            num += ((sx - sy) * w).norm();
        }
        let den = r * (1.0 / beta + v.value(x) + v.value(y));
        Some(c_psi * num / den)
    };
    // Pairs are written as x = c + (h/2)e, y = c − (h/2)e with h ∈ (0, l), so
    // the diagonal limit h → 0 sits on an edge of the search box. The centre
    // is scaled by its largest value keeping both points within radius B,
    // which makes the feasible set exactly the box.
    if dim == 1 {
        let f = |p: &[f64]| {
            let c = p[0] * (bound - 0.5 * p[1]);
            quotient(&[c + 0.5 * p[1]], &[c - 0.5 * p[1]])
        };
        let (val, at) = search(&[-1.0, 0.0], &[1.0, l.min(2.0 * bound)], 241, true, &f).unwrap_or((0.0, vec![0.0, 0.0]));
        return Ok(Extremum {
            value: val,
            at: [at[0] * (bound - 0.5 * at[1]), at[1], 0.0],
            boundary_hit: at[0].abs() >= 1.0 - 1e-6,
        });
    }
    if !v.is_radial() || sigma_hat.is_some() {
        return Err(Error::Config(
            "α_{l,β} in dimension above one needs a radial weight and no diffusion deviation".into(),
        ));
    }
    // rotation invariance fixes e = e₁; the centre is ρ(cos φ, sin φ)
    let rho_max = |phi: f64, h: f64| {
        let c = phi.cos().abs();
        0.5 * (-h * c + (h * h * c * c - h * h + 4.0 * bound * bound).max(0.0).sqrt())
    };
    let f = |p: &[f64]| {
        let (phi, h) = (p[1], p[2]);
        let rho = p[0] * rho_max(phi, h);
        let (cx, cy) = (rho * phi.cos(), rho * phi.sin());
        quotient(&[cx + 0.5 * h, cy], &[cx - 0.5 * h, cy])
    };
    let hi = [1.0, std::f64::consts::PI, l.min(2.0 * bound)];
    let (val, at) = search(&[0.0, 0.0, 0.0], &hi, 41, true, &f).unwrap_or((0.0, vec![0.0; 3]));
    Ok(Extremum {
        value: val,
        at: [at[0] * rho_max(at[1], at[2]), at[1], at[2]],
        boundary_hit: at[0] >= 1.0 - 1e-6,
    })
}

/// Everything the rate formulas read from a scenario.
#[derive(Debug, Clone)]
pub struct RateInputs {
    pub period: f64,
    pub dim: usize,
    pub constants: DeclaredConstants,
    /// Overrides `D₁α_t` as the local rate `u_l`.
    pub u_l: Option<TimeProfile>,
    /// Radius of the box searched for `κ_{l,β}` and `α_{l,β}`.
    pub search_bound: f64,
    /// Log-Sobolev constant of the initial law (0 for a point mass).
    pub initial_log_sobolev: f64,
}

impl RateInputs {
    pub fn new(period: f64, dim: usize, constants: DeclaredConstants) -> Self {
        let l = constants.l.unwrap_or(1.0);
        RateInputs {
            period,
            dim,
            constants,
            u_l: None,
            search_bound: 4.0 * l.max(1.0),
            initial_log_sobolev: 0.0,
        }
    }

    fn profile(&self, field: &Option<TimeProfile>, name: &str) -> Result<TimeProfile> {
        self.constants.require(field.as_ref(), name).cloned()
    }

    fn scalar(&self, field: Option<f64>, name: &str) -> Result<f64> {
        field.ok_or_else(|| Error::Config(format!("scenario does not declare constant `{name}`")))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WpsivSample {
    pub t: f64,
    pub kappa_lb: f64,
    pub u_l: f64,
    pub k0: f64,
    pub alpha_lb: f64,
    /// `u_l − 2K₀β − α_{l,β}`
    pub local: f64,
    /// `min(κ_{l,β}, local)`
    pub lambda_lb: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WpsivRate {
    /// `∫ (λ_{l,β} − θ)`
    pub lambda: f64,
    pub kappa_branch_integral: f64,
    pub local_branch_integral: f64,
    pub theta_integral: f64,
    /// `∫K₁`, which must be positive for the invariant-measure statement.
    pub k1_integral: f64,
    pub d1: f64,
    pub c_psi: f64,
    pub boundary_hit: bool,
    pub samples: Vec<WpsivSample>,
}

/// `λ = ∫₀^{t₀} (min{κ_{l,β}, u_l − 2K₀β − α_{l,β}} − θ)`, sampled at
/// [`WPSIV_SAMPLES`] phases with the periodic trapezoid rule.
pub fn rate_wpsiv(inputs: &RateInputs, psi: &TabulatedCostFunction, t0: f64) -> Result<WpsivRate> {
    let c = &inputs.constants;
    let k0 = inputs.profile(&c.k0, "k0")?;
    let k1 = inputs.profile(&c.k1, "k1")?;
    let theta = inputs.profile(&c.theta, "theta")?;
    let beta = inputs.scalar(c.beta, "beta")?;
    let l = inputs.scalar(c.l, "l")?;
    let v = c
        .lyapunov
        .clone()
        .ok_or_else(|| Error::Config("scenario does not declare a Lyapunov weight".into()))?;
    let d1 = psi.param("d1").unwrap_or(f64::NAN);
    let u_l = match (&inputs.u_l, &c.alpha) {
        (Some(u), _) => u.clone(),
        (None, Some(a)) if d1.is_finite() => a.map(|x| d1 * x, t0, PERIOD_NODES),
        _ => {
            return Err(Error::Config(
                "the local rate needs u_l, or an eigen ψ together with the diffusion scale α".into(),
            ))
        }
    };
    let alpha = inputs.profile(&c.alpha, "alpha")?;
    // with no diffusion deviation α_{l,β}(t) is linear in α_t
    let unit = alpha_l_beta(1.0, &v, None, psi.c_psi, l, beta, inputs.search_bound, inputs.dim)?;
    let mut boundary_hit = unit.boundary_hit;
    let mut samples = Vec::with_capacity(WPSIV_SAMPLES);
    let mut cache: Vec<((f64, f64), f64)> = Vec::new();
    for k in 0..WPSIV_SAMPLES {
        let t = t0 * k as f64 / WPSIV_SAMPLES as f64;
        let (a0, a1) = (k0.eval(t, t0), k1.eval(t, t0));
        let kappa_lb = match cache.iter().find(|(key, _)| *key == (a0, a1)) {
            Some((_, val)) => *val,
            None => {
                let e = kappa_l_beta(a0, a1, &v, l, beta, inputs.search_bound, inputs.dim)?;
                boundary_hit |= e.boundary_hit;
                cache.push(((a0, a1), e.value));
                e.value
            }
        };
        let alpha_lb = alpha.eval(t, t0) * unit.value;
        let u = u_l.eval(t, t0);
        let local = u - 2.0 * a0 * beta - alpha_lb;
        samples.push(WpsivSample {
            t,
            kappa_lb,
            u_l: u,
            k0: a0,
            alpha_lb,
            local,
            lambda_lb: kappa_lb.min(local),
            theta: theta.eval(t, t0),
        });
    }
    let h = t0 / WPSIV_SAMPLES as f64;
    let sum = |f: &dyn Fn(&WpsivSample) -> f64| samples.iter().map(f).sum::<f64>() * h;
    Ok(WpsivRate {
        lambda: sum(&|s| s.lambda_lb - s.theta),
        kappa_branch_integral: sum(&|s| s.kappa_lb),
        local_branch_integral: sum(&|s| s.local),
        theta_integral: sum(&|s| s.theta),
        k1_integral: k1.period_integral(t0),
        d1,
        c_psi: psi.c_psi,
        boundary_hit,
        samples,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyConstants {
    /// `c(0, t₀) = c A² λ(0,t₀)² e^{−2∫γ} + 4A² ∫₀^{t₀} e^{−2∫_τ^{t₀} γ} dτ`
    pub c_sr: f64,
    /// `φ` over the window `[t₀ − ε, t₀]`.
    pub phi: f64,
    /// `c(0, t₀)·φ`, the prefactor reported with the entropy bound.
    pub combined: f64,
}

/// Constants of the one-period entropy bound, with `A_{t₀}` the
/// diffusion norm at the period end and window `ε` for `φ`.
pub fn entropy_decay_constant(inputs: &RateInputs, window: f64, t0: f64) -> Result<EntropyConstants> {
    if !(window > 0.0 && window <= t0) {
        return Err(Error::Config(format!("entropy window must lie in (0, {t0}], got {window}")));
    }
    let c = &inputs.constants;
    let gamma = inputs.profile(&c.gamma, "gamma")?;
    let a = inputs.profile(&c.sigma_norm, "sigma_norm")?;
    let lambda = inputs.profile(&c.lambda, "lambda")?;
    let kappa1 = inputs.profile(&c.kappa1, "kappa1")?;
    let kappa2 = inputs.profile(&c.kappa2, "kappa2")?;
    let c_sr = log_sobolev_constant(&gamma, &a, &lambda, inputs.initial_log_sobolev, 0.0, t0, t0);
    let phi = entropy_constant_phi(
        lambda.window_sup(t0 - window, t0, t0),
        kappa1.window_sup(t0 - window, t0, t0),
        kappa2.window_sup(t0 - window, t0, t0),
        window,
    );
    Ok(EntropyConstants {
        c_sr,
        phi,
        combined: c_sr * phi,
    })
}

/// `c(s, r)` for given profiles; `c0` is the log-Sobolev constant at `s`.
pub fn log_sobolev_constant(
    gamma: &TimeProfile,
    a: &TimeProfile,
    lambda: &TimeProfile,
    c0: f64,
    s: f64,
    r: f64,
    t0: f64,
) -> f64 {
    let n = PERIOD_NODES;
    let ar = a.eval(r, t0);
    // G(τ) = ∫_τ^r γ on a uniform grid, accumulated from the right
    let h = (r - s) / n as f64;
    let mut g_tail = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let (u, w) = (s + i as f64 * h, s + (i + 1) as f64 * h);
        g_tail[i] = g_tail[i + 1] + 0.5 * h * (gamma.eval(u, t0) + gamma.eval(w, t0));
    }
    let integral = (0..n)
        .map(|i| 0.5 * h * ((-2.0 * g_tail[i]).exp() + (-2.0 * g_tail[i + 1]).exp()))
        .sum::<f64>();
    let lam = lambda.window_sup(s, r, t0);
    c0 * ar * ar * lam * lam * (-2.0 * g_tail[0]).exp() + 4.0 * ar * ar * integral
}
