//! k-nearest-neighbour estimate of relative entropy `H(law(A) | law(B))`.
//!
//! Uses the estimator
//! `Ĥ = (d/n) Σ_i log(ν_k(i)/ρ_k(i)) + log(m/(n − 1))`, where `ρ_k(i)` is the
//! distance from `A_i` to its k-th neighbour in `A \ {A_i}` and `ν_k(i)` the
//! distance to its k-th neighbour in `B`. It is consistent but biased at
//! finite sample size, so callers treat it as a diagnostic.

use crate::engine::noise::stream;
use crate::engine::{Ensemble, NoisePolicy};
use crate::error::{Error, Result};
use std::collections::BinaryHeap;

/// Relative jitter applied once when duplicate points make a radius vanish.
pub const JITTER: f64 = 1e-12;
const JITTER_SEED: u64 = 0x6b6e_6e5f_6a69_7474;
const LEAF: usize = 16;

/// A static kd-tree over row-major points.
pub struct KdTree<'a> {
    pts: &'a [f64],
    dim: usize,
    idx: Vec<usize>,
    nodes: Vec<Node>,
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(PartialEq)]
struct Cand(f64, usize);

impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cand {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

impl<'a> KdTree<'a> {
    pub fn new(pts: &'a [f64], dim: usize) -> Self {
        let n = pts.len() / dim;
        let mut t = KdTree {
            pts,
            dim,
            idx: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            t.build(0, n, 0);
        }
        t
    }

    fn coord(&self, i: usize, k: usize) -> f64 {
        self.pts[i * self.dim + k]
    }

    fn build(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the widest axis
        let axis = (0..self.dim)
            .max_by(|&a, &b| {
                let spread = |k: usize| {
                    let (lo, hi) = self.idx[start..end]
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                            let c = self.coord(i, k);
                            (lo.min(c), hi.max(c))
                        });
                    hi - lo
                };
                spread(a).total_cmp(&spread(b))
            })
            .unwrap_or(depth % self.dim);
        let mid = (start + end) / 2;
        let (pts, dim) = (self.pts, self.dim);
        self.idx[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a * dim + axis].total_cmp(&pts[b * dim + axis])
        });
        let value = self.coord(self.idx[mid], axis);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid, depth + 1);
        let right = self.build(mid, end, depth + 1);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Squared distance from `q` to its k-th nearest point, skipping index
    /// `skip` if given.
    pub fn kth_dist2(&self, q: &[f64], k: usize, skip: Option<usize>) -> f64 {
        let heap = self.heap(q, k, skip);
        if heap.len() < k {
            return f64::INFINITY;
        }
        heap.peek().map_or(f64::INFINITY, |c| c.0)
    }

    /// Indices of the `k` nearest points, closest first.
    pub fn nearest(&self, q: &[f64], k: usize) -> Vec<usize> {
        self.heap(q, k, None).into_sorted_vec().into_iter().map(|c| c.1).collect()
    }

    fn heap(&self, q: &[f64], k: usize, skip: Option<usize>) -> BinaryHeap<Cand> {
        let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
        if !self.nodes.is_empty() && k > 0 {
            self.search(0, q, k, skip, &mut heap);
        }
        heap
    }

    fn search(&self, node: usize, q: &[f64], k: usize, skip: Option<usize>, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.idx[start..end] {
                    if Some(i) == skip {
                        continue;
                    }
                    let d2: f64 = (0..self.dim).map(|c| (self.coord(i, c) - q[c]).powi(2)).sum();
                    if heap.len() < k {
                        heap.push(Cand(d2, i));
                    } else if d2 < heap.peek().expect("non-empty").0 {
                        heap.pop();
                        heap.push(Cand(d2, i));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, skip, heap);
                if heap.len() < k || diff * diff <= heap.peek().expect("non-empty").0 {
                    self.search(far, q, k, skip, heap);
                }
            }
        }
    }
}

fn estimate(a: &[f64], b: &[f64], d: usize, k: usize) -> Option<f64> {
    let (n, m) = (a.len() / d, b.len() / d);
    let ta = KdTree::new(a, d);
    let tb = KdTree::new(b, d);
    let mut s = 0.0;
    for i in 0..n {
        let q = &a[i * d..(i + 1) * d];
        let rho2 = ta.kth_dist2(q, k, Some(i));
        let nu2 = tb.kth_dist2(q, k, None);
        if !(rho2 > 0.0 && nu2 > 0.0) {
            return None;
        }
        s += 0.5 * (nu2 / rho2).ln();
    }
    Some(d as f64 * s / n as f64 + (m as f64 / (n as f64 - 1.0)).ln())
}

fn jitter(e: &Ensemble, which: u32) -> Vec<f64> {
    let noise = NoisePolicy::new(JITTER_SEED);
    let mut u = vec![0.0; e.dim];
    let mut out = e.positions.clone();
    for (i, row) in out.chunks_exact_mut(e.dim).enumerate() {
        noise.uniforms(stream::JITTER, i as u32, u64::from(which), &mut u);
        for (x, w) in row.iter_mut().zip(&u) {
            *x += JITTER * (1.0 + x.abs()) * (2.0 * w - 1.0);
        }
    }
    out
}

pub fn relative_entropy_knn(a: &Ensemble, b: &Ensemble, k: usize) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Estimator(format!("dimension mismatch: {} vs {}", a.dim, b.dim)));
    }
    if k == 0 {
        return Err(Error::Estimator("k must be at least 1".into()));
    }
    if a.len() < k + 1 || b.len() < k + 1 {
        return Err(Error::Estimator(format!(
            "k = {k} needs at least {} samples on each side, got {} and {}",
            k + 1,
            a.len(),
            b.len()
        )));
    }
    if let Some(h) = estimate(&a.positions, &b.positions, a.dim, k) {
        return Ok(h);
    }
    estimate(&jitter(a, 0), &jitter(b, 1), a.dim, k)
        .ok_or_else(|| Error::Estimator("duplicate points leave a zero neighbour radius even after jitter".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kd_tree_agrees_with_brute_force() {
        let noise = NoisePolicy::new(3);
        let d = 3;
        let n = 500;
        let mut pts = vec![0.0; n * d];
        for (i, row) in pts.chunks_exact_mut(d).enumerate() {
            noise.normals(0, i as u32, 0, row);
        }
        let t = KdTree::new(&pts, d);
        for i in (0..n).step_by(37) {
            let q = &pts[i * d..(i + 1) * d];
            let mut all: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (0..d).map(|c| (pts[j * d + c] - q[c]).powi(2)).sum())
                .collect();
            all.sort_by(f64::total_cmp);
            for k in [1, 5, 20] {
                assert_eq!(t.kth_dist2(q, k, Some(i)), all[k - 1]);
            }
        }
    }

    #[test]
    fn rejects_small_samples_and_recovers_from_duplicates() {
        let a = Ensemble::new(vec![0.0; 3], 1, 0.0).unwrap();
        assert!(relative_entropy_knn(&a, &a, 5).is_err());
        let mut p: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        p.push(0.0);
        let a = Ensemble::new(p, 1, 0.0).unwrap();
        let b = Ensemble::new((0..50).map(|i| i as f64 * 0.1 + 0.05).collect(), 1, 0.0).unwrap();
        assert!(relative_entropy_knn(&a, &b, 1).unwrap().is_finite());
    }
}
