//! Constructive cost functions.

use super::tabulated::{PsiTag, TabulatedCostFunction};
use crate::error::{Error, Result};

const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Ten-point Gauss–Legendre rule on `[a, b]`.
pub(crate) fn gauss10(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for k in 0..5 {
        s += GL_W[k] * (f(m - h * GL_X[k]) + f(m + h * GL_X[k]));
    }
    s * h
}

/// The piecewise-linear rate `γ(r) = θ₁(r ∧ R) − θ₂(r − R)⁺` and its
/// primitive.
#[derive(Debug, Clone, Copy)]
struct Gamma {
    theta1: f64,
    theta2: f64,
    radius: f64,
}

impl Gamma {
    fn rate(&self, r: f64) -> f64 {
        self.theta1 * r.min(self.radius) - self.theta2 * (r - self.radius).max(0.0)
    }

    fn primitive(&self, r: f64) -> f64 {
        let (a, b, big_r) = (self.theta1, self.theta2, self.radius);
        if r <= big_r {
            0.5 * a * r * r
        } else {
            let u = r - big_r;
            0.5 * a * big_r * big_r + a * big_r * u - 0.5 * b * u * u
        }
    }
}

/// Tabulates
/// `ψ(r) = ∫₀^r e^{−Γ(s)} ∫_s^∞ t e^{Γ(t)} dt ds`, `Γ = ∫₀ γ`, where the
/// inner improper integral is cut where the integrand falls below
/// `tol` times the accumulated tail.
pub fn build_psi_example31(theta1: f64, theta2: f64, radius: f64, tol: f64) -> Result<TabulatedCostFunction> {
    for (name, v) in [("θ₁", theta1), ("θ₂", theta2), ("R", radius), ("tol", tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Cost(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let g = Gamma {
        theta1,
        theta2,
        radius,
    };
    // past the peak of Γ the tail decays like a Gaussian; go well beyond it
    let peak = radius + theta1 * radius / theta2;
    let r_max = (3.0 * peak).max(60.0);
    let h = 0.01f64.min(radius / 4.0);
    let mut grid: Vec<f64> = Vec::new();
    let mut r = 0.0;
    while r < r_max {
        grid.push(r);
        r += h;
    }
    grid.push(r_max);
    // put R on the grid so no panel straddles the kink of γ
    grid.retain(|&x| (x - radius).abs() > 0.1 * h);
    let pos = grid.partition_point(|&x| x < radius);
    grid.insert(pos, radius);
    let m = grid.len();

    // tail K(r_max) = ∫_{r_max}^∞ t e^{Γ(t) − Γ(r_max)} dt
    let gm = g.primitive(r_max);
    let mut tail = 0.0;
    let mut t = r_max;
    let mut steps = 0u64;
    loop {
        tail += gauss10(t, t + h, |s| s * (g.primitive(s) - gm).exp());
        t += h;
        steps += 1;
        if t * (g.primitive(t) - gm).exp() < tol * tail {
            break;
        }
        if steps > 100_000_000 {
            return Err(Error::Quadrature("truncation point search did not terminate".into()));
        }
    }

    // K(r_i) = ∫_{r_i}^∞ t e^{Γ(t) − Γ(r_i)} dt = ψ′(r_i), swept from the right
    let mut d1 = vec![0.0; m];
    d1[m - 1] = tail;
    for i in (0..m - 1).rev() {
        let (a, b) = (grid[i], grid[i + 1]);
        let ga = g.primitive(a);
        let panel = gauss10(a, b, |s| s * (g.primitive(s) - ga).exp());
        d1[i] = panel + (g.primitive(b) - ga).exp() * d1[i + 1];
    }
    let d2: Vec<f64> = grid.iter().zip(&d1).map(|(&r, &k)| -g.rate(r) * k - r).collect();
    let mut values = vec![0.0; m];
    for i in 1..m {
        let (a, b) = (grid[i - 1], grid[i]);
        let kb = d1[i];
        let slope = |s: f64| {
            let gs = g.primitive(s);
            gauss10(s, b, |u| u * (g.primitive(u) - gs).exp()) + (g.primitive(b) - gs).exp() * kb
        };
        values[i] = values[i - 1] + gauss10(a, b, slope);
    }
    TabulatedCostFunction::from_table(
        grid,
        values,
        d1,
        d2,
        PsiTag::Example31,
        vec![
            ("theta1".into(), theta1),
            ("theta2".into(), theta2),
            ("radius".into(), radius),
            ("tol".into(), tol),
        ],
        None,
    )
}

/// The rate `γ(r)` used by [`build_psi_example31`], for residual checks.
pub fn example31_gamma(theta1: f64, theta2: f64, radius: f64, r: f64) -> f64 {
    Gamma {
        theta1,
        theta2,
        radius,
    }
    .rate(r)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo * fhi < 0.0) {
        return Err(Error::Eigen(format!(
            "no sign change on [{lo}, {hi}]: f(lo) = {flo}, f(hi) = {fhi}"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Shape of the first mixed eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenRegime {
    /// `ψ = e^{−D₀r/4} sin(ωr)/ω`
    Oscillatory { omega: f64 },
    /// `ψ = r e^{−D₀r/4}`
    Critical,
    /// `ψ = e^{−D₀r/4} sinh(κr)/κ`
    Monotone { kappa: f64 },
}

/// First eigenpair of `2ψ″ + D₀ψ′ = −D₁ψ` on `[0, l]` with `ψ(0) = 0` and
/// `ψ′(l) = 0`, normalised by `ψ′(0) = 1`.
pub fn mixed_eigenvalue(d0: f64, l: f64) -> Result<(f64, EigenRegime)> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Eigen(format!("interval length must be positive, got {l}")));
    }
    if !(d0 >= 0.0 && d0.is_finite()) {
        return Err(Error::Eigen(format!("drift constant must be nonnegative, got {d0}")));
    }
    let c = d0 * l / 4.0;
    if d0 == 0.0 {
        let omega = std::f64::consts::FRAC_PI_2 / l;
        return Ok((2.0 * omega * omega, EigenRegime::Oscillatory { omega }));
    }
    if (c - 1.0).abs() < 1e-14 {
        return Ok((d0 * d0 / 8.0, EigenRegime::Critical));
    }
    if c < 1.0 {
        // cos(ωl) − (D₀l/4)·sinc(ωl) = 0 on (0, π/(2l))
        let f = |w: f64| {
            let x = w * l;
            x.cos() - c * if x == 0.0 { 1.0 } else { x.sin() / x }
        };
        let omega = bisect(0.0, std::f64::consts::FRAC_PI_2 / l, f)?;
        Ok((2.0 * omega * omega + d0 * d0 / 8.0, EigenRegime::Oscillatory { omega }))
    } else {
        // cosh(κl) − (D₀l/4)·sinhc(κl) = 0 on (0, D₀/4)
        let f = |k: f64| {
            let x = k * l;
            x.cosh() - c * if x == 0.0 { 1.0 } else { x.sinh() / x }
        };
        let kappa = bisect(0.0, d0 / 4.0, f)?;
        Ok(((d0 * d0 - 16.0 * kappa * kappa) / 8.0, EigenRegime::Monotone { kappa }))
    }
}

/// Tabulates the first mixed eigenfunction on `[0, l]`, flat beyond `l`.
pub fn build_psi_eigen(d0: f64, l: f64) -> Result<TabulatedCostFunction> {
    let (d1_eig, regime) = mixed_eigenvalue(d0, l)?;
    let nodes = 2001;
    let q = d0 / 4.0;
    let grid: Vec<f64> = (0..nodes).map(|i| l * i as f64 / (nodes - 1) as f64).collect();
    let mut values = Vec::with_capacity(nodes);
    let mut slopes = Vec::with_capacity(nodes);
    for &r in &grid {
        let e = (-q * r).exp();
        let (v, s) = match regime {
            EigenRegime::Oscillatory { omega } => {
                let (sn, cs) = (omega * r).sin_cos();
                (e * sn / omega, e * (cs - q * sn / omega))
            }
            EigenRegime::Critical => (e * r, e * (1.0 - q * r)),
            EigenRegime::Monotone { kappa } => {
                let (sh, ch) = ((kappa * r).sinh(), (kappa * r).cosh());
                (e * sh / kappa, e * (ch - q * sh / kappa))
            }
        };
        values.push(v);
        slopes.push(s);
    }
    // the boundary condition holds to root precision; make it exact
    slopes[nodes - 1] = 0.0;
    slopes.iter_mut().for_each(|s| *s = s.max(0.0));
    let d2: Vec<f64> = values.iter().zip(&slopes).map(|(&v, &s)| -(d0 * s + d1_eig * v) / 2.0).collect();
    let mut params = vec![("d0".into(), d0), ("l".into(), l), ("d1".into(), d1_eig)];
    match regime {
        EigenRegime::Oscillatory { omega } => params.push(("omega".into(), omega)),
        EigenRegime::Monotone { kappa } => params.push(("kappa".into(), kappa)),
        EigenRegime::Critical => {}
    }
    TabulatedCostFunction::from_table(grid, values, slopes, d2, PsiTag::Eigen, params, Some(l))
}
