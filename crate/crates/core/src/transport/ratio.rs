//! The ratio quasi-distance
//! `Ŵ(A, B) = inf_π Σ ψ(|x−y|)w(x,y) / Σ ψ′(|x−y|)w(x,y)`,
//! `w = 1 + βV(x) + βV(y)`, over permutation couplings.
//!
//! A ratio of linear functionals is quasi-concave on the coupling polytope,
//! so the infimum sits at a vertex and Dinkelbach's parametric iteration over
//! assignments is exact.

use super::{assignment, dist, lyapunov_weights};
use crate::coefficients::LyapunovFn;
use crate::engine::Ensemble;
use crate::error::{Error, Result};
use crate::rates::TabulatedCostFunction;

/// Stop once the parametric optimum is within this of zero.
pub const DINKELBACH_TOL: f64 = 1e-10;
const MAX_ROUNDS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct RatioResult {
    pub value: f64,
    pub assignment: Vec<usize>,
    pub rounds: usize,
}

pub fn ratio_quasidistance(
    a: &Ensemble,
    b: &Ensemble,
    psi: &TabulatedCostFunction,
    v: &LyapunovFn,
    beta: f64,
) -> Result<f64> {
    Ok(ratio_quasidistance_detailed(a, b, psi, v, beta)?.value)
}

pub fn ratio_quasidistance_detailed(
    a: &Ensemble,
    b: &Ensemble,
    psi: &TabulatedCostFunction,
    v: &LyapunovFn,
    beta: f64,
) -> Result<RatioResult> {
    if a.len() != b.len() || a.dim != b.dim {
        return Err(Error::Transport(format!(
            "ratio quasi-distance needs equal shapes, got {}×{} and {}×{}",
            a.len(),
            a.dim,
            b.len(),
            b.dim
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Cost(format!("weight β must be nonnegative, got {beta}")));
    }
    let n = a.len();
    let wa = lyapunov_weights(a, v, beta, "the first ensemble")?;
    let wb = lyapunov_weights(b, v, beta, "the second ensemble")?;
    let mut num = vec![0.0; n * n];
    let mut den = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let r = dist(a.point(i), b.point(j));
            let d1 = psi.deriv(r);
            if !(d1 > 0.0) {
                return Err(Error::Cost(format!(
                    "ψ′({r}) = {d1} is not positive; the ratio needs ψ′ > 0 on every pair distance"
                )));
            }
            let w = 1.0 + wa[i] + wb[j];
            num[i * n + j] = psi.eval(r) * w;
            den[i * n + j] = d1 * w;
        }
    }
    let totals = |p: &[usize]| -> (f64, f64) {
        (0..n).fold((0.0, 0.0), |(s, t), i| (s + num[i * n + p[i]], t + den[i * n + p[i]]))
    };

    // start from the ψ-optimal coupling
    let mut perm = assignment::solve(n, |i, j| num[i * n + j])?.row_to_col;
    let (s, t) = totals(&perm);
    let mut q = s / t;
    for round in 1..=MAX_ROUNDS {
        let next = assignment::solve(n, |i, j| num[i * n + j] - q * den[i * n + j])?.row_to_col;
        let (s, t) = totals(&next);
        let f = (s - q * t) / n as f64;
        if f >= -DINKELBACH_TOL {
            return Ok(RatioResult {
                value: q,
                assignment: perm,
                rounds: round,
            });
        }
        perm = next;
        q = s / t;
    }
    Err(Error::Transport(format!("Dinkelbach iteration did not settle in {MAX_ROUNDS} rounds")))
}
