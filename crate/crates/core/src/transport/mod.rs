//! Distances between equal-weight empirical measures.

pub mod assignment;
pub mod knn;
pub mod ratio;
pub mod sliced;

pub use knn::relative_entropy_knn;
pub use ratio::{ratio_quasidistance, RatioResult};
pub use sliced::ot_sliced;

use crate::coefficients::LyapunovFn;
use crate::engine::{Ensemble, NoisePolicy};
use crate::error::{Error, Result};
use crate::rates::TabulatedCostFunction;
use std::path::Path;
use std::sync::Arc;

/// Largest ensemble solved exactly by [`w2_auto`] in dimension above one.
pub const EXACT_LIMIT: usize = 4096;
/// Projections used by [`w2_auto`] beyond [`EXACT_LIMIT`].
pub const AUTO_PROJECTIONS: usize = 256;

#[derive(Debug, Clone)]
pub enum CostSpec {
    /// `|x − y|^p` with `p ∈ {1, 2}`.
    Power(u8),
    Psi(Arc<TabulatedCostFunction>),
    /// `ψ(|x − y|)·(1 + βV(x) + βV(y))`.
    WeightedPsi {
        psi: Arc<TabulatedCostFunction>,
        v: LyapunovFn,
        beta: f64,
    },
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            CostSpec::Power(1 | 2) => Ok(()),
            CostSpec::Power(p) => Err(Error::Cost(format!("power cost needs p in {{1, 2}}, got {p}"))),
            CostSpec::Psi(_) => Ok(()),
            CostSpec::WeightedPsi { beta, .. } if *beta > 0.0 && beta.is_finite() => Ok(()),
            CostSpec::WeightedPsi { beta, .. } => Err(Error::Cost(format!("weight β must be positive, got {beta}"))),
        }
    }
}

/// Per-particle values `βV(x_i)`, failing on the first particle whose weight
/// is not finite.
pub fn lyapunov_weights(e: &Ensemble, v: &LyapunovFn, beta: f64, which: &str) -> Result<Vec<f64>> {
    e.points()
        .enumerate()
        .map(|(i, x)| {
            let w = beta * v.value(x);
            if w.is_finite() {
                Ok(w)
            } else {
                Err(Error::Cost(format!("Lyapunov weight overflows at particle {i} of {which}")))
            }
        })
        .collect()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    dist2(x, y).sqrt()
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// A ready-to-evaluate pair cost between two fixed ensembles.
pub(crate) struct PairCost<'a> {
    a: &'a Ensemble,
    b: &'a Ensemble,
    kind: Kind<'a>,
}

enum Kind<'a> {
    P1,
    P2,
    Psi(&'a TabulatedCostFunction),
    Weighted(&'a TabulatedCostFunction, Vec<f64>, Vec<f64>),
}

impl<'a> PairCost<'a> {
    pub(crate) fn new(a: &'a Ensemble, b: &'a Ensemble, cost: &'a CostSpec) -> Result<Self> {
        cost.validate()?;
        if a.dim != b.dim {
            return Err(Error::Transport(format!("dimension mismatch: {} vs {}", a.dim, b.dim)));
        }
        let kind = match cost {
            CostSpec::Power(1) => Kind::P1,
            CostSpec::Power(_) => Kind::P2,
            CostSpec::Psi(psi) => Kind::Psi(psi),
            CostSpec::WeightedPsi { psi, v, beta } => Kind::Weighted(
                psi,
                lyapunov_weights(a, v, *beta, "the first ensemble")?,
                lyapunov_weights(b, v, *beta, "the second ensemble")?,
            ),
        };
        Ok(PairCost { a, b, kind })
    }

    #[inline]
    pub(crate) fn eval(&self, i: usize, j: usize) -> f64 {
        let (x, y) = (self.a.point(i), self.b.point(j));
        match &self.kind {
            Kind::P1 => dist(x, y),
            Kind::P2 => dist2(x, y),
            Kind::Psi(psi) => psi.eval(dist(x, y)),
            Kind::Weighted(psi, wa, wb) => psi.eval(dist(x, y)) * (1.0 + wa[i] + wb[j]),
        }
    }

    fn is_power(&self) -> bool {
        matches!(self.kind, Kind::P1 | Kind::P2)
    }

    fn is_p2(&self) -> bool {
        matches!(self.kind, Kind::P2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlanResult {
    pub distance: f64,
    /// `assignment[i]` is the index in `B` coupled with particle `i` of `A`.
    pub assignment: Vec<usize>,
    pub iterations: u64,
    pub optimal: bool,
}

fn sorted_order(e: &Ensemble) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..e.len()).collect();
    idx.sort_by(|&i, &j| e.positions[i].total_cmp(&e.positions[j]).then(i.cmp(&j)));
    idx
}

/// Below this size the dense solver is used directly.
const DENSE_LIMIT: usize = 256;
/// Nearest-neighbour candidates per row for the certified sparse solve.
const CANDIDATES: usize = 12;

fn centred(e: &Ensemble) -> Vec<f64> {
    let m = e.mean();
    e.points().flat_map(|x| x.iter().zip(&m).map(|(a, b)| a - b)).collect()
}

/// Centred coordinates mapped by the inverse Cholesky factor of the
/// ensemble covariance, or merely centred when that is singular.
fn whitened(e: &Ensemble) -> Vec<f64> {
    let d = e.dim;
    let mut c = centred(e);
    let cov = nalgebra::DMatrix::from_row_slice(d, d, &e.covariance());
    if let Some(ch) = cov.cholesky() {
        let l = ch.l();
        for row in c.chunks_exact_mut(d) {
            let mut z = nalgebra::DVector::from_column_slice(row);
            if l.solve_lower_triangular_mut(&mut z) {
                row.copy_from_slice(z.as_slice());
            }
        }
    }
    c
}

/// Candidate columns for each row: nearest neighbours after whitening both
/// clouds, plus the matching of ranks along the first coordinate so that a
/// perfect matching always exists.
fn candidate_lists(a: &Ensemble, b: &Ensemble) -> Vec<Vec<usize>> {
    let d = a.dim;
    let (ca, cb) = (whitened(a), whitened(b));
    let tree = knn::KdTree::new(&cb, d);
    let mut lists: Vec<Vec<usize>> = ca.chunks_exact(d).map(|q| tree.nearest(q, CANDIDATES)).collect();
    let order = |p: &[f64]| {
        let mut idx: Vec<usize> = (0..p.len() / d).collect();
        idx.sort_by(|&i, &j| p[i * d].total_cmp(&p[j * d]).then(i.cmp(&j)));
        idx
    };
    let (oa, ob) = (order(&ca), order(&cb));
    for (i, j) in oa.into_iter().zip(ob) {
        lists[i].push(j);
    }
    lists
}

/// Exact optimal transport between equal-size ensembles.
///
/// For `p = 2` the distance is `(min mean |x − y|²)^{1/2}`; otherwise it is
/// the minimal mean matched cost. One-dimensional power costs use the
/// monotone (sorted) coupling, which is optimal for convex costs.
pub fn ot_exact(a: &Ensemble, b: &Ensemble, cost: &CostSpec) -> Result<TransportPlanResult> {
    if a.len() != b.len() {
        return Err(Error::Transport(format!(
            "exact transport needs equal sizes, got {} and {} (resample first)",
            a.len(),
            b.len()
        )));
    }
    let pc = PairCost::new(a, b, cost)?;
    let n = a.len();
    let (assignment, iterations) = if a.dim == 1 && pc.is_power() {
        let (sa, sb) = (sorted_order(a), sorted_order(b));
        let mut asg = vec![0; n];
        for k in 0..n {
            asg[sa[k]] = sb[k];
        }
        (asg, 0)
    } else if n <= DENSE_LIMIT {
        let s = assignment::solve(n, |i, j| pc.eval(i, j))?;
        (s.row_to_col, s.sweeps)
    } else if pc.is_p2() {
        // translation only adds a constant to |x − y|², so solve the centred
        // problem, which keeps the reduced costs small
        let (ca, cb) = (centred(a), centred(b));
        let d = a.dim;
        let s = assignment::solve_certified(
            n,
            |i, j| dist2(&ca[i * d..(i + 1) * d], &cb[j * d..(j + 1) * d]),
            candidate_lists(a, b),
        )?;
        (s.row_to_col, s.sweeps)
    } else {
        let s = assignment::solve_certified(n, |i, j| pc.eval(i, j), candidate_lists(a, b))?;
        (s.row_to_col, s.sweeps)
    };
    let total: f64 = (0..n).map(|i| pc.eval(i, assignment[i])).sum();
    let mean = total / n as f64;
    Ok(TransportPlanResult {
        distance: if pc.is_p2() { mean.sqrt() } else { mean },
        assignment,
        iterations,
        optimal: true,
    })
}

/// `W₂`, exact in one dimension or up to [`EXACT_LIMIT`] particles and sliced
/// beyond that.
pub fn w2_auto(a: &Ensemble, b: &Ensemble, noise: &NoisePolicy) -> Result<f64> {
    w2_with_limit(a, b, noise, EXACT_LIMIT)
}

pub fn w2_with_limit(a: &Ensemble, b: &Ensemble, noise: &NoisePolicy, exact_limit: usize) -> Result<f64> {
    if a.dim == 1 || a.len().max(b.len()) <= exact_limit {
        Ok(ot_exact(a, b, &CostSpec::Power(2))?.distance)
    } else {
        ot_sliced(a, b, 2, AUTO_PROJECTIONS, noise)
    }
}

/// Writes the full cost matrix as CSV (`i,j,cost`), for inspecting small
/// instances.
pub fn write_cost_matrix(path: &Path, a: &Ensemble, b: &Ensemble, cost: &CostSpec) -> Result<()> {
    let pc = PairCost::new(a, b, cost)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "cost"])?;
    for i in 0..a.len() {
        for j in 0..b.len() {
            w.write_record([i.to_string(), j.to_string(), pc.eval(i, j).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ens(p: &[f64], d: usize) -> Ensemble {
        Ensemble::new(p.to_vec(), d, 0.0).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let a = ens(&[0.3, -1.0, 2.0, 5.0, 1.0, 1.0], 2);
        for c in [CostSpec::Power(1), CostSpec::Power(2), CostSpec::Psi(Arc::new(TabulatedCostFunction::linear()))] {
            assert_eq!(ot_exact(&a, &a, &c).unwrap().distance, 0.0);
        }
    }

    #[test]
    fn one_dimensional_monotone_example() {
        let r = ot_exact(&ens(&[2.0, 0.0], 1), &ens(&[1.0, 3.0], 1), &CostSpec::Power(2)).unwrap();
        assert!((r.distance - 1.0).abs() < 1e-15);
        assert_eq!(r.assignment, vec![1, 0]);
    }

    #[test]
    fn truncated_cost_between_diracs() {
        let psi = TabulatedCostFunction::from_table(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            crate::rates::PsiTag::Custom,
            vec![],
            Some(1.0),
        )
        .unwrap();
        // the Hermite piece on [0, 1] is not r∧1 exactly, but both ends are
        let r = ot_exact(&ens(&[0.0, 0.0], 2), &ens(&[3.0, 4.0], 2), &CostSpec::Psi(Arc::new(psi))).unwrap();
        assert_eq!(r.distance, 1.0);
    }

    #[test]
    fn weighted_cost_between_diracs() {
        let c = CostSpec::WeightedPsi {
            psi: Arc::new(TabulatedCostFunction::linear()),
            v: LyapunovFn::Quadratic { scale: 1.0 },
            beta: 1.0,
        };
        let r = ot_exact(&ens(&[0.0], 1), &ens(&[1.0], 1), &c).unwrap();
        assert!((r.distance - 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(ot_exact(&ens(&[0.0], 1), &ens(&[0.0, 1.0], 1), &CostSpec::Power(2)).is_err());
        assert!(ot_exact(&ens(&[0.0], 1), &ens(&[1.0], 1), &CostSpec::Power(3)).is_err());
        let c = CostSpec::WeightedPsi {
            psi: Arc::new(TabulatedCostFunction::linear()),
            v: LyapunovFn::ExpPower { p: 2.0 },
            beta: 1.0,
        };
        let e = ot_exact(&ens(&[0.0, 40.0], 1), &ens(&[1.0, 2.0], 1), &c).unwrap_err();
        assert!(e.to_string().contains("particle 1"), "{e}");
    }

    #[test]
    fn cost_matrix_dump() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_cost_matrix(&p, &ens(&[0.0, 1.0], 1), &ens(&[2.0, 4.0], 1), &CostSpec::Power(2)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "i,j,cost\n0,0,4\n0,1,16\n1,0,1\n1,1,9\n");
    }
}
