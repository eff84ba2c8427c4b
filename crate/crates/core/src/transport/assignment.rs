//! Dense linear assignment by shortest augmenting paths (Jonker–Volgenant
//! style, with column reduction as a warm start). Costs are pulled from a
//! closure so large instances never materialise the `N × N` matrix.

use crate::error::{Error, Result};

const FREE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `row_to_col[i]` is the column matched to row `i`.
    pub row_to_col: Vec<usize>,
    /// Number of Dijkstra relaxation sweeps performed.
    pub sweeps: u64,
    /// Rows matched directly by the warm start.
    pub warm_rows: usize,
}

/// Minimises `Σ_i cost(i, π(i))` over permutations `π` of `0..n`.
pub fn solve(n: usize, cost: impl Fn(usize, usize) -> f64) -> Result<Assignment> {
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
            sweeps: 0,
            warm_rows: 0,
        });
    }
    let mut u = vec![0.0; n];
    let mut v = vec![f64::INFINITY; n];
    let mut col4row = vec![FREE; n];
    let mut row4col = vec![FREE; n];

    // column reduction: v_j = min_i c(i, j), then greedily take tight edges
    let mut argmin = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::Cost(format!("non-finite cost between rows {i} and column {j}")));
            }
            if c < v[j] {
                v[j] = c;
                argmin[j] = i;
            }
        }
    }
    let mut warm_rows = 0;
    for j in (0..n).rev() {
        let i = argmin[j];
        if col4row[i] == FREE {
            col4row[i] = j;
            row4col[j] = i;
            warm_rows += 1;
        }
    }

    let mut path = vec![FREE; n];
    let mut spc = vec![f64::INFINITY; n];
    let mut in_sr = vec![false; n];
    let mut sr = Vec::new();
    let mut sc = Vec::new();
    let mut remaining = Vec::with_capacity(n);
    let mut sweeps = 0u64;

    for cur in 0..n {
        if col4row[cur] != FREE {
            continue;
        }
        remaining.clear();
        remaining.extend((0..n).rev());
        spc.iter_mut().for_each(|s| *s = f64::INFINITY);
        for &i in &sr {
            in_sr[i] = false;
        }
        sr.clear();
        sc.clear();

        let mut min_val = 0.0;
        let mut i = cur;
        let sink = loop {
            in_sr[i] = true;
            sr.push(i);
            sweeps += 1;
            let mut index = FREE;
            let mut lowest = f64::INFINITY;
            let ui = u[i];
            for (it, &j) in remaining.iter().enumerate() {
                let r = min_val + cost(i, j) - ui - v[j];
                if r < spc[j] {
                    path[j] = i;
                    spc[j] = r;
                }
                if spc[j] < lowest || (spc[j] == lowest && row4col[j] == FREE) {
                    lowest = spc[j];
                    index = it;
                }
            }
            if index == FREE || !lowest.is_finite() {
                return Err(Error::Cost("assignment problem is infeasible".into()));
            }
            min_val = lowest;
            let j = remaining.swap_remove(index);
            sc.push(j);
            if row4col[j] == FREE {
                break j;
            }
            i = row4col[j];
        };

        u[cur] += min_val;
        for &i in &sr {
            if i != cur {
                u[i] += min_val - spc[col4row[i]];
            }
        }
        for &j in &sc {
            v[j] -= min_val - spc[j];
        }

        let mut j = sink;
        loop {
            let i = path[j];
            row4col[j] = i;
            std::mem::swap(&mut col4row[i], &mut j);
            if i == cur {
                break;
            }
        }
    }
    Ok(Assignment {
        row_to_col: col4row,
        sweeps,
        warm_rows,
    })
}

/// Sparse shortest-augmenting-path solve on candidate edges, certified
/// against the full cost by checking every reduced cost. Violating edges are
/// added to the candidate set and the solve resumes from the current duals,
/// so the result is optimal for the dense problem.
///
/// `candidates[i]` lists columns considered for row `i`; together they must
/// admit a perfect matching.
pub fn solve_certified(
    n: usize,
    cost: impl Fn(usize, usize) -> f64,
    candidates: Vec<Vec<usize>>,
) -> Result<Assignment> {
    const ADD_PER_ROW: usize = 8;
    if candidates.len() != n {
        return Err(Error::Cost("one candidate list per row is required".into()));
    }
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut scale = 0.0f64;
    for (i, cand) in candidates.into_iter().enumerate() {
        let mut r: Vec<(usize, f64)> = Vec::with_capacity(cand.len());
        for j in cand {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::Cost(format!("non-finite cost between row {i} and column {j}")));
            }
            scale = scale.max(c.abs());
            r.push((j, c));
        }
        r.sort_by_key(|e| e.0);
        r.dedup_by_key(|e| e.0);
        rows.push(r);
    }
    let tol = 1e-13 * (1.0 + scale);

    let mut v = vec![f64::INFINITY; n];
    for r in &rows {
        for &(j, c) in r {
            v[j] = v[j].min(c);
        }
    }
    if v.iter().any(|x| x.is_infinite()) {
        return Err(Error::Cost("candidate edges leave a column uncovered".into()));
    }
    let mut u = vec![0.0; n];
    let mut col4row = vec![FREE; n];
    let mut row4col = vec![FREE; n];
    let mut sweeps = 0u64;
    let mut sp = SparseState::new(n);
    let mut warm_rows = 0;
    let mut first = true;

    loop {
        // restore dual feasibility on all candidate edges, freeing rows whose
        // matched edge is no longer tight
        for i in 0..n {
            let (jmin, m) = rows[i]
                .iter()
                .map(|&(j, c)| (j, c - v[j]))
                .fold((FREE, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            u[i] = m;
            let j = col4row[i];
            if j != FREE {
                let c = rows[i].iter().find(|e| e.0 == j).map(|e| e.1).expect("matched edge is a candidate");
                if c - u[i] - v[j] > tol {
                    col4row[i] = FREE;
                    row4col[j] = FREE;
                }
            } else if first && row4col[jmin] == FREE {
                col4row[i] = jmin;
                row4col[jmin] = i;
                warm_rows += 1;
            }
        }
        first = false;
        for cur in 0..n {
            if col4row[cur] == FREE {
                sweeps += sp.augment(cur, &rows, &mut u, &mut v, &mut col4row, &mut row4col)?;
            }
        }
        // certify on the dense problem
        let mut added = false;
        for i in 0..n {
            let mut bad: Vec<(f64, usize)> = Vec::new();
            for j in 0..n {
                let c = cost(i, j);
                if !c.is_finite() {
                    return Err(Error::Cost(format!("non-finite cost between row {i} and column {j}")));
                }
                let r = c - u[i] - v[j];
                if r < -tol {
                    bad.push((r, j));
                }
            }
            if !bad.is_empty() {
                bad.sort_by(|a, b| a.0.total_cmp(&b.0));
                for &(_, j) in bad.iter().take(ADD_PER_ROW) {
                    if let Err(pos) = rows[i].binary_search_by_key(&j, |e| e.0) {
                        rows[i].insert(pos, (j, cost(i, j)));
                        added = true;
                    }
                }
            }
        }
        if !added {
            return Ok(Assignment {
                row_to_col: col4row,
                sweeps,
                warm_rows,
            });
        }
    }
}

struct SparseState {
    dist: Vec<f64>,
    pred: Vec<usize>,
    done: Vec<bool>,
    touched: Vec<usize>,
    finalized: Vec<usize>,
    heap: std::collections::BinaryHeap<std::cmp::Reverse<(Key, usize)>>,
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

impl SparseState {
    fn new(n: usize) -> Self {
        SparseState {
            dist: vec![f64::INFINITY; n],
            pred: vec![FREE; n],
            done: vec![false; n],
            touched: Vec::new(),
            finalized: Vec::new(),
            heap: Default::default(),
        }
    }

    fn augment(
        &mut self,
        cur: usize,
        rows: &[Vec<(usize, f64)>],
        u: &mut [f64],
        v: &mut [f64],
        col4row: &mut [usize],
        row4col: &mut [usize],
    ) -> Result<u64> {
        use std::cmp::Reverse;
        for &j in &self.touched {
            self.dist[j] = f64::INFINITY;
            self.done[j] = false;
        }
        self.touched.clear();
        self.finalized.clear();
        self.heap.clear();
        let mut sweeps = 0;
        let mut i = cur;
        let mut base = 0.0;
        let sink = loop {
            sweeps += 1;
            for &(j, c) in &rows[i] {
                if self.done[j] {
                    continue;
                }
                let d = base + (c - u[i] - v[j]).max(0.0);
                if d < self.dist[j] {
                    if self.dist[j].is_infinite() {
                        self.touched.push(j);
                    }
                    self.dist[j] = d;
                    self.pred[j] = i;
                    self.heap.push(Reverse((Key(d), j)));
                }
            }
            let j = loop {
                let Some(Reverse((Key(d), j))) = self.heap.pop() else {
                    return Err(Error::Cost("candidate edges admit no perfect matching".into()));
                };
                if !self.done[j] && d == self.dist[j] {
                    break j;
                }
            };
            self.done[j] = true;
            self.finalized.push(j);
            base = self.dist[j];
            if row4col[j] == FREE {
                break j;
            }
            i = row4col[j];
        };
        let delta = self.dist[sink];
        u[cur] += delta;
        for &j in &self.finalized {
            if j != sink {
                u[row4col[j]] += delta - self.dist[j];
            }
            v[j] -= delta - self.dist[j];
        }
        let mut j = sink;
        loop {
            let i = self.pred[j];
            row4col[j] = i;
            std::mem::swap(&mut col4row[i], &mut j);
            if i == cur {
                break;
            }
        }
        Ok(sweeps)
    }
}
