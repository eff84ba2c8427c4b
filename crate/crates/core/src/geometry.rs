//! Closed convex domains: membership, metric projection and inward normals.
//!
//! The reflecting dynamics are discretized by projecting every Euler step
//! back onto the closed domain, so `project` is the only geometric
//! primitive the engine needs. `inward_normal` is exposed for diagnostics
//! and for checking the convexity inequality `⟨x − y, n(x)⟩ ≤ 0`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Boundary distance under which a point counts as "on" the boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

const DYKSTRA_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexDomain {
    WholeSpace,
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Intersection of half-spaces `⟨a_k, x⟩ ≤ c_k` with unit normals `a_k`.
    Polytope { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl ConvexDomain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = ConvexDomain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn cuboid(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = ConvexDomain::Box { lower, upper };
        d.validate()?;
        Ok(d)
    }

    /// Builds a polytope, normalizing each `(a, c)` so that `|a| = 1`.
    pub fn polytope(constraints: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut normals = Vec::with_capacity(constraints.len());
        let mut offsets = Vec::with_capacity(constraints.len());
        for (a, c) in constraints {
            let n = dot(&a, &a).sqrt();
            if !(n > 0.0 && n.is_finite() && c.is_finite()) {
                return Err(Error::Geometry("degenerate half-space".into()));
            }
            normals.push(a.iter().map(|v| v / n).collect());
            offsets.push(c / n);
        }
        let d = ConvexDomain::Polytope { normals, offsets };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexDomain::WholeSpace => Ok(()),
            ConvexDomain::Ball { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Geometry(format!("ball radius must be positive, got {radius}")));
                }
                if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Geometry("ball center must be finite and non-empty".into()));
                }
                Ok(())
            }
            ConvexDomain::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::Geometry("box bounds must have equal, non-zero length".into()));
                }
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if !(l < u) || !l.is_finite() || !u.is_finite() {
                        return Err(Error::Geometry(format!("box requires lower < upper in coordinate {i}")));
                    }
                }
                Ok(())
            }
            ConvexDomain::Polytope { normals, offsets } => {
                if normals.is_empty() || normals.len() != offsets.len() {
                    return Err(Error::Geometry("polytope needs matching normals and offsets".into()));
                }
                let d = normals[0].len();
                for a in normals {
                    if a.len() != d || (dot(a, a).sqrt() - 1.0).abs() > 1e-12 {
                        return Err(Error::Geometry("polytope normals must be unit vectors of equal dimension".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Ambient dimension, or `None` for the whole space.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConvexDomain::WholeSpace => None,
            ConvexDomain::Ball { center, .. } => Some(center.len()),
            ConvexDomain::Box { lower, .. } => Some(lower.len()),
            ConvexDomain::Polytope { normals, .. } => Some(normals[0].len()),
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, ConvexDomain::WholeSpace)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) if d != x.len() => Err(Error::Geometry(format!(
                "dimension mismatch: domain is {d}-dimensional, point has {} coordinates",
                x.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Membership in the closed domain, with exact comparisons.
    pub fn contains(&self, x: &[f64]) -> bool {
        if self.check_dim(x).is_err() {
            return false;
        }
        match self {
            ConvexDomain::WholeSpace => true,
            ConvexDomain::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                r2 <= radius * radius
            }
            ConvexDomain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l <= v && v <= u),
            ConvexDomain::Polytope { normals, offsets } => {
                normals.iter().zip(offsets).all(|(a, c)| dot(a, x) <= *c)
            }
        }
    }

    /// Nearest point of the closed domain and the displacement `|x − Π(x)|`.
    pub fn project(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_dim(x)?;
        if self.contains(x) {
            return Ok((x.to_vec(), 0.0));
        }
        let p = match self {
            ConvexDomain::WholeSpace => unreachable!("whole space contains every point"),
            ConvexDomain::Ball { center, radius } => {
                let r = dist(x, center);
                let mut scale = radius / r;
                let mut p: Vec<f64> = x.iter().zip(center).map(|(v, c)| c + scale * (v - c)).collect();
                // rounding can leave the radial image a hair outside
                while !self.contains(&p) {
                    scale *= 1.0 - f64::EPSILON;
                    p = x.iter().zip(center).map(|(v, c)| c + scale * (v - c)).collect();
                }
                p
            }
            ConvexDomain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            ConvexDomain::Polytope { normals, offsets } => dykstra(x, normals, offsets)?,
        };
        let disp = dist(x, &p);
        Ok((p, disp))
    }

    /// Inward unit normal at a boundary point.
    ///
    /// At corners of boxes and polytopes this returns the normalized sum of the
    /// inward normals of the active constraints.
    pub fn inward_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let not_boundary = || Error::Domain(format!("point {x:?} is not within {BOUNDARY_TOL} of the boundary"));
        match self {
            ConvexDomain::WholeSpace => Err(Error::Domain("the whole space has no boundary".into())),
            ConvexDomain::Ball { center, radius } => {
                let r = dist(x, center);
                if (r - radius).abs() > BOUNDARY_TOL {
                    return Err(not_boundary());
                }
                Ok(x.iter().zip(center).map(|(v, c)| -(v - c) / r).collect())
            }
            ConvexDomain::Box { lower, upper } => {
                let mut n = vec![0.0; x.len()];
                for i in 0..x.len() {
                    if x[i] < lower[i] - BOUNDARY_TOL || x[i] > upper[i] + BOUNDARY_TOL {
                        return Err(not_boundary());
                    }
                    if (x[i] - lower[i]).abs() <= BOUNDARY_TOL {
                        n[i] += 1.0;
                    }
                    if (x[i] - upper[i]).abs() <= BOUNDARY_TOL {
                        n[i] -= 1.0;
                    }
                }
                normalize(n).ok_or_else(not_boundary)
            }
            ConvexDomain::Polytope { normals, offsets } => {
                let mut n = vec![0.0; x.len()];
                let mut active = false;
                for (a, c) in normals.iter().zip(offsets) {
                    let g = dot(a, x) - c;
                    if g > BOUNDARY_TOL {
                        return Err(not_boundary());
                    }
                    if g.abs() <= BOUNDARY_TOL {
                        active = true;
                        n.iter_mut().zip(a).for_each(|(ni, ai)| *ni -= ai);
                    }
                }
                if !active {
                    return Err(not_boundary());
                }
                normalize(n).ok_or_else(|| Error::Domain("active normals cancel at this point".into()))
            }
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    if n == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

fn project_halfspace(x: &mut [f64], a: &[f64], c: f64) {
    let g = dot(a, x) - c;
    if g > 0.0 {
        x.iter_mut().zip(a).for_each(|(xi, ai)| *xi -= g * ai);
    }
}

/// Dykstra's cyclic projection onto an intersection of half-spaces.
fn dykstra(x0: &[f64], normals: &[Vec<f64>], offsets: &[f64]) -> Result<Vec<f64>> {
    let m = normals.len();
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut incr = vec![vec![0.0; d]; m];
    let scale = 1.0 + x0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut converged = false;
    for _ in 0..DYKSTRA_MAX_ITER {
        let prev = x.clone();
        for k in 0..m {
            let mut y: Vec<f64> = x.iter().zip(&incr[k]).map(|(a, b)| a + b).collect();
            let before = y.clone();
            project_halfspace(&mut y, &normals[k], offsets[k]);
            incr[k] = before.iter().zip(&y).map(|(a, b)| a - b).collect();
            x = y;
        }
        let change = dist(&x, &prev);
        let violation = normals
            .iter()
            .zip(offsets)
            .map(|(a, c)| dot(a, &x) - c)
            .fold(0.0f64, f64::max);
        if change <= 1e-15 * scale && violation <= 1e-13 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Geometry(format!(
            "Dykstra projection did not converge within {DYKSTRA_MAX_ITER} sweeps"
        )));
    }
    // final feasibility repair against residual rounding
    for _ in 0..64 {
        let mut clean = true;
        for (a, c) in normals.iter().zip(offsets) {
            let g = dot(a, &x) - c;
            if g > 0.0 {
                clean = false;
                let step = g + 4.0 * f64::EPSILON * (1.0 + c.abs());
                x.iter_mut().zip(a).for_each(|(xi, ai)| *xi -= step * ai);
            }
        }
        if clean {
            return Ok(x);
        }
    }
    Err(Error::Geometry("projection left the polytope after repair".into()))
}
